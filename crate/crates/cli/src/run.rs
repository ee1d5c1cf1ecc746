use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use sysaware_core::admm::{write_trace_csv, AdmmConfig};
use sysaware_core::linops::LinearMap;
use sysaware_core::system_sim::{
    make_chirp, read_signal, sweep, write_rd_csv, write_signal, Method, RdPoint, SweepResult, SystemModel,
};
use sysaware_core::tree_codec::TreeCodec;

use crate::config::{Config, SignalKind, SystemKind};
use crate::manifest::{FailureRecord, Manifest};
use crate::{stage, CliError};

pub fn load_signal(cfg: &Config) -> Result<Vec<f64>, CliError> {
    match cfg.signal {
        SignalKind::Chirp => make_chirp(cfg.n).map_err(stage("generate signal")),
        SignalKind::File => {
            let path = cfg.signal_path.as_deref().expect("validated config");
            let f = File::open(path).map_err(stage("open signal file"))?;
            read_signal(BufReader::new(f)).map_err(stage("read signal file"))
        }
    }
}

pub fn build_system(cfg: &Config, n: usize) -> Result<SystemModel, CliError> {
    match cfg.system {
        SystemKind::BlurSubsample => SystemModel::blur_subsample(
            n,
            cfg.kernel_std,
            cfg.kernel_support,
            cfg.subsample_factor,
            cfg.noise_std,
            cfg.seed,
        ),
        SystemKind::Identity => SystemModel::new(
            LinearMap::identity(n),
            LinearMap::identity(n),
            cfg.noise_std,
            cfg.seed,
        ),
    }
    .map_err(stage("build system"))
}

pub fn admm_config(cfg: &Config) -> AdmmConfig {
    AdmmConfig {
        beta_tilde: cfg.beta_tilde,
        max_iters: cfg.max_iters,
        tol: cfg.tol,
        ..Default::default()
    }
}

#[derive(Debug)]
pub struct RunResult {
    pub regular: SweepResult,
    pub proposed: SweepResult,
}

/// Both sweeps, without touching the file system.
pub fn run_sweeps(cfg: &Config) -> Result<(RunResult, Vec<f64>, SystemModel), CliError> {
    let x = load_signal(cfg)?;
    let sys = build_system(cfg, x.len())?;
    let codec = TreeCodec::new(cfg.depth, cfg.q_bits);
    let admm = admm_config(cfg);
    let regular = sweep(&x, &sys, &codec, &cfg.params, Method::Regular, &admm).map_err(stage("regular sweep"))?;
    let proposed =
        sweep(&x, &sys, &codec, &cfg.params, Method::Proposed, &admm).map_err(stage("proposed sweep"))?;
    Ok((RunResult { regular, proposed }, x, sys))
}

fn param_index(cfg: &Config, param: f64) -> usize {
    cfg.params
        .iter()
        .position(|p| p.to_bits() == param.to_bits())
        .expect("point parameter comes from the config")
}

fn signal_text(v: &[f64]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_signal(v, &mut buf).map_err(stage("format signal"))?;
    Ok(buf)
}

/// Runs both sweeps and writes every artifact under `out`.
pub fn run_experiment(cfg: &Config, out: &Path) -> Result<RunResult, CliError> {
    let (result, x, sys) = run_sweeps(cfg)?;
    if result.regular.points.is_empty() && result.proposed.points.is_empty() {
        let first = result
            .regular
            .failures
            .into_iter()
            .chain(result.proposed.failures)
            .next()
            .expect("non-empty parameter list");
        return Err(CliError::Runtime {
            stage: "sweep",
            source: Box::new(first.error),
        });
    }

    let mut manifest = Manifest::new("run", Some(cfg.seed), cfg.echo());
    manifest.write(out, "source.txt", &signal_text(&x)?)?;
    let w = sys.acquire(&x).map_err(stage("acquire"))?;
    manifest.write(out, "acquired.txt", &signal_text(&w)?)?;

    let mut csv = Vec::new();
    let all: Vec<&RdPoint> = result.regular.points.iter().chain(&result.proposed.points).collect();
    write_rd_csv(all.iter().copied(), cfg.seed, &mut csv).map_err(stage("write rd curve"))?;
    manifest.write(out, "rd_curve.csv", &csv)?;

    for p in all {
        let name = format!("{}_{:03}", p.method.as_str(), param_index(cfg, p.param));
        manifest.write(out, &format!("bitstreams/{name}.sac"), &p.blob)?;
        manifest.write(out, &format!("reconstructions/{name}.txt"), &signal_text(&p.rendered)?)?;
        if p.method == Method::Proposed {
            let mut trace = Vec::new();
            write_trace_csv(&p.trace, &mut trace).map_err(stage("write trace"))?;
            manifest.write(out, &format!("traces/{name}.csv"), &trace)?;
        }
    }
    for (method, sweep) in [(Method::Regular, &result.regular), (Method::Proposed, &result.proposed)] {
        for f in &sweep.failures {
            eprintln!("warning: {} point nu={} failed: {}", method.as_str(), f.param, f.error);
            manifest.failures.push(FailureRecord {
                method: method.as_str().to_string(),
                param: f.param.to_string(),
                error: f.error.to_string(),
            });
        }
    }
    manifest.finish(out)?;
    Ok(result)
}
