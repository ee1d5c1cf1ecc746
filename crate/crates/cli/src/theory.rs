use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use sysaware_core::gauss_theory::{
    expected_min_distortion, theoretical_rd_curve, write_curve_csv, SpectralModel, TheoryPoint,
};
use sysaware_core::linops::{Complex64, SpectralOperator};
use sysaware_core::system_sim::{gaussian_kernel, read_signal};

use crate::config::{Config, ConfigError, DistortionGrid, ResponseSpec, SpectrumSpec};
use crate::manifest::Manifest;
use crate::{stage, CliError};

fn key_error(key: &str, message: String) -> CliError {
    CliError::Config(ConfigError {
        source_name: "config".into(),
        line: None,
        key: Some(key.to_string()),
        message,
    })
}

fn read_values(path: &Path) -> Result<Vec<f64>, CliError> {
    let f = File::open(path).map_err(stage("open theory input"))?;
    read_signal(BufReader::new(f)).map_err(stage("read theory input"))
}

fn exact_len(key: &str, v: Vec<f64>, n: usize) -> Result<Vec<f64>, CliError> {
    if v.len() == n {
        Ok(v)
    } else {
        Err(key_error(key, format!("{} values given, theory.n = {n}", v.len())))
    }
}

/// Circular frequency index `min(k, n − k)`.
fn freq(k: usize, n: usize) -> usize {
    k.min(n - k)
}

pub fn response(key: &str, spec: &ResponseSpec, n: usize) -> Result<Vec<Complex64>, CliError> {
    let from_kernel = |kernel: Vec<f64>| -> Result<Vec<Complex64>, CliError> {
        let op = SpectralOperator::from_kernel(n, &kernel).map_err(|e| key_error(key, e.to_string()))?;
        Ok(op.response().to_vec())
    };
    let real = |v: Vec<f64>| v.into_iter().map(|r| Complex64::new(r, 0.0)).collect();
    match spec {
        ResponseSpec::Identity => Ok(real(vec![1.0; n])),
        ResponseSpec::Gaussian { std, support } => {
            from_kernel(gaussian_kernel(*std, *support).map_err(|e| key_error(key, e.to_string()))?)
        }
        ResponseSpec::Boxcar { width } => {
            if *width == 0 {
                return Err(key_error(key, "boxcar width must be positive".into()));
            }
            from_kernel(vec![1.0 / *width as f64; *width])
        }
        ResponseSpec::Lowpass { cutoff } => Ok(real(
            (0..n).map(|k| if freq(k, n) <= *cutoff { 1.0 } else { 0.0 }).collect(),
        )),
        ResponseSpec::Values(v) => Ok(real(exact_len(key, v.clone(), n)?)),
        ResponseSpec::File(p) => Ok(real(exact_len(key, read_values(p)?, n)?)),
    }
}

pub fn spectrum(spec: &SpectrumSpec, n: usize) -> Result<Vec<f64>, CliError> {
    let key = "theory.spectrum";
    match spec {
        SpectrumSpec::Constant(level) => Ok(vec![*level; n]),
        SpectrumSpec::PowerLaw { level, exponent } => Ok((0..n)
            .map(|k| level / (1.0 + freq(k, n) as f64).powf(*exponent))
            .collect()),
        SpectrumSpec::Values(v) => exact_len(key, v.clone(), n),
        SpectrumSpec::File(p) => exact_len(key, read_values(p)?, n),
    }
}

pub fn build_model(cfg: &Config) -> Result<SpectralModel, CliError> {
    let t = &cfg.theory;
    let lambda = spectrum(&t.spectrum, t.n)?;
    let a = response("theory.a", &t.a, t.n)?;
    let b = response("theory.b", &t.b, t.n)?;
    SpectralModel::new(lambda, a, b).map_err(|e| key_error("theory", e.to_string()))
}

#[derive(Debug, Clone)]
pub struct TheoryResult {
    pub expected_min_distortion: f64,
    pub points: Vec<TheoryPoint>,
    pub empty_support: bool,
}

pub fn compute(cfg: &Config) -> Result<TheoryResult, CliError> {
    let model = build_model(cfg)?;
    let grid = match &cfg.theory.grid {
        DistortionGrid::Explicit(v) => v.clone(),
        DistortionGrid::Uniform(count) => {
            let sat = model.saturation_distortion();
            (1..=*count).map(|i| sat * i as f64 / *count as f64).collect()
        }
    };
    let points = theoretical_rd_curve(&model, &grid).map_err(|e| key_error("theory.d_grid", e.to_string()))?;
    Ok(TheoryResult {
        expected_min_distortion: expected_min_distortion(&model),
        points,
        empty_support: model.support().iter().all(|s| !s),
    })
}

/// Writes `theory_curve.csv` (with an `E{D0}` comment header) and a manifest.
pub fn run_theory(cfg: &Config, out: &Path) -> Result<TheoryResult, CliError> {
    let result = compute(cfg)?;
    if result.empty_support {
        eprintln!("warning: A and B share no passband; every rate is zero");
    }
    let mut text = format!(
        "# expected_min_distortion = {}\n# rate_bits_per_sample is in bits; D is the requested coded distortion\n",
        result.expected_min_distortion
    )
    .into_bytes();
    write_curve_csv(&result.points, &mut text).map_err(stage("write theory curve"))?;
    let mut manifest = Manifest::new("theory", None, cfg.echo());
    manifest.write(out, "theory_curve.csv", &text)?;
    manifest.finish(out)?;
    println!("expected_min_distortion = {}", result.expected_min_distortion);
    Ok(result)
}
