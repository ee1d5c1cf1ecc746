//! Flat `key = value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment. Every key is optional; the
//! defaults reproduce the 1024-sample chirp experiment.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    pub source_name: String,
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source_name)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        if let Some(key) = &self.key {
            write!(f, ": {key}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_entries(text: &str, source_name: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |key: Option<String>, message: String| ConfigError {
            source_name: source_name.to_string(),
            line: Some(i + 1),
            key,
            message,
        };
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(None, format!("expected `key = value`, got {line:?}")));
        };
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(err(None, "empty key".into()));
        }
        if !seen.insert(key.clone()) {
            return Err(err(Some(key), "duplicate key".into()));
        }
        out.push(Entry {
            line: i + 1,
            key,
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    Chirp,
    /// One value per line, read from `signal.path`.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    /// Gaussian blur, decimation, replication.
    BlurSubsample,
    Identity,
}

/// Per-bin real response of a square circulant operator.
#[derive(Debug, Clone, PartialEq)]
pub enum ResponseSpec {
    Identity,
    Gaussian { std: f64, support: usize },
    Boxcar { width: usize },
    /// Keeps bins with circular frequency index `≤ cutoff`.
    Lowpass { cutoff: usize },
    Values(Vec<f64>),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumSpec {
    Constant(f64),
    /// `level / (1 + |k|)^exponent` with `|k|` the circular frequency index.
    PowerLaw { level: f64, exponent: f64 },
    Values(Vec<f64>),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DistortionGrid {
    /// `count` equally spaced values up to the saturation distortion, zero excluded.
    Uniform(usize),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheorySettings {
    pub n: usize,
    pub spectrum: SpectrumSpec,
    pub a: ResponseSpec,
    pub b: ResponseSpec,
    pub grid: DistortionGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub signal: SignalKind,
    pub signal_path: Option<PathBuf>,
    /// Source length; ignored for file signals.
    pub n: usize,
    pub system: SystemKind,
    pub kernel_std: f64,
    pub kernel_support: usize,
    pub subsample_factor: usize,
    pub noise_std: f64,
    pub seed: u64,
    /// `None` uses the full depth `log2(M)`.
    pub depth: Option<u8>,
    pub q_bits: u8,
    pub beta_tilde: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub params: Vec<f64>,
    pub output_dir: Option<PathBuf>,
    pub theory: TheorySettings,
}

/// `ν = 10^(-6 + k/8)`, `k = 0..=40`.
pub fn default_params() -> Vec<f64> {
    (0..=40).map(|k| 10f64.powf(-6.0 + k as f64 / 8.0)).collect()
}

impl Default for Config {
    fn default() -> Self {
        Self {
            signal: SignalKind::Chirp,
            signal_path: None,
            n: 1024,
            system: SystemKind::BlurSubsample,
            kernel_std: 15.0,
            kernel_support: 15,
            subsample_factor: 4,
            noise_std: 0.001,
            seed: 0,
            depth: None,
            q_bits: 8,
            beta_tilde: 0.25,
            max_iters: 40,
            tol: 1e-4,
            params: default_params(),
            output_dir: None,
            theory: TheorySettings {
                n: 256,
                spectrum: SpectrumSpec::Constant(1.0),
                a: ResponseSpec::Identity,
                b: ResponseSpec::Identity,
                grid: DistortionGrid::Uniform(40),
            },
        }
    }
}

fn parse_num<T: FromStr>(text: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    text.trim().parse::<T>().map_err(|e| format!("cannot parse {text:?}: {e}"))
}

fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    if text.trim().is_empty() {
        return Err("empty list".into());
    }
    text.split(',').map(parse_num).collect()
}

/// A comma-separated list or `logspace:LO:HI:COUNT`.
fn parse_params(text: &str) -> Result<Vec<f64>, String> {
    let params = if let Some(rest) = text.strip_prefix("logspace:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [lo, hi, count] = parts[..] else {
            return Err("expected logspace:LO:HI:COUNT".into());
        };
        let (lo, hi, count): (f64, f64, usize) = (parse_num(lo)?, parse_num(hi)?, parse_num(count)?);
        if !(lo > 0.0 && hi >= lo) || count == 0 {
            return Err("logspace needs 0 < LO <= HI and COUNT >= 1".into());
        }
        if count == 1 {
            vec![lo]
        } else {
            let (a, b) = (lo.log10(), hi.log10());
            (0..count)
                .map(|k| 10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64))
                .collect()
        }
    } else {
        parse_list(text)?
    };
    if params.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err("multipliers must be finite and non-negative".into());
    }
    let mut bits: Vec<u64> = params.iter().map(|p| p.to_bits()).collect();
    bits.sort_unstable();
    bits.dedup();
    if bits.len() != params.len() {
        return Err("multipliers must be distinct".into());
    }
    Ok(params)
}

fn split_spec(text: &str) -> (&str, Vec<&str>) {
    let mut parts = text.split(':');
    let head = parts.next().unwrap_or("").trim();
    (head, parts.map(str::trim).collect())
}

fn parse_response(text: &str) -> Result<ResponseSpec, String> {
    let (head, args) = split_spec(text);
    let spec = match (head, args.as_slice()) {
        ("identity", []) => ResponseSpec::Identity,
        ("gaussian", [std, support]) => ResponseSpec::Gaussian {
            std: parse_num(std)?,
            support: parse_num(support)?,
        },
        ("boxcar", [width]) => ResponseSpec::Boxcar { width: parse_num(width)? },
        ("lowpass", [cutoff]) => ResponseSpec::Lowpass { cutoff: parse_num(cutoff)? },
        ("values", [list]) => ResponseSpec::Values(parse_list(list)?),
        ("file", [path]) => ResponseSpec::File(PathBuf::from(path)),
        _ => {
            return Err(format!(
                "unknown response {text:?}; expected identity, gaussian:STD:SUPPORT, boxcar:WIDTH, lowpass:CUTOFF, values:LIST or file:PATH"
            ))
        }
    };
    Ok(spec)
}

fn parse_spectrum(text: &str) -> Result<SpectrumSpec, String> {
    let (head, args) = split_spec(text);
    let spec = match (head, args.as_slice()) {
        ("constant", [level]) => SpectrumSpec::Constant(parse_num(level)?),
        ("power_law", [level, exponent]) => SpectrumSpec::PowerLaw {
            level: parse_num(level)?,
            exponent: parse_num(exponent)?,
        },
        ("values", [list]) => SpectrumSpec::Values(parse_list(list)?),
        ("file", [path]) => SpectrumSpec::File(PathBuf::from(path)),
        _ => {
            return Err(format!(
                "unknown spectrum {text:?}; expected constant:LEVEL, power_law:LEVEL:EXPONENT, values:LIST or file:PATH"
            ))
        }
    };
    Ok(spec)
}

fn positive<T: PartialOrd + Default + fmt::Display>(v: T) -> Result<T, String> {
    if v > T::default() {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source_name: name.clone(),
            line: None,
            key: None,
            message: format!("cannot read: {e}"),
        })?;
        Self::parse(&text, &name)
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        for entry in parse_entries(text, source_name)? {
            cfg.apply(&entry).map_err(|message| ConfigError {
                source_name: source_name.to_string(),
                line: Some(entry.line),
                key: Some(entry.key.clone()),
                message,
            })?;
        }
        cfg.validate().map_err(|(key, message)| ConfigError {
            source_name: source_name.to_string(),
            line: None,
            key: Some(key.to_string()),
            message,
        })?;
        Ok(cfg)
    }

    fn apply(&mut self, e: &Entry) -> Result<(), String> {
        let v = e.value.as_str();
        match e.key.as_str() {
            "signal.kind" => {
                self.signal = match v {
                    "chirp" => SignalKind::Chirp,
                    "file" => SignalKind::File,
                    _ => return Err(format!("expected chirp or file, got {v:?}")),
                }
            }
            "signal.path" => self.signal_path = Some(PathBuf::from(v)),
            "signal.n" => self.n = parse_num(v)?,
            "system.kind" => {
                self.system = match v {
                    "blur_subsample" => SystemKind::BlurSubsample,
                    "identity" => SystemKind::Identity,
                    _ => return Err(format!("expected blur_subsample or identity, got {v:?}")),
                }
            }
            "system.kernel_std" => self.kernel_std = positive(parse_num(v)?)?,
            "system.kernel_support" => self.kernel_support = positive(parse_num(v)?)?,
            "system.subsample_factor" => self.subsample_factor = positive(parse_num(v)?)?,
            "system.noise_std" => {
                let s: f64 = parse_num(v)?;
                if !(s >= 0.0 && s.is_finite()) {
                    return Err(format!("must be non-negative, got {s}"));
                }
                self.noise_std = s;
            }
            "system.seed" => self.seed = parse_num(v)?,
            "codec.depth" => {
                self.depth = if v == "full" { None } else { Some(positive(parse_num(v)?)?) }
            }
            "codec.q_bits" => {
                let q: u8 = parse_num(v)?;
                if !(1..=32).contains(&q) {
                    return Err(format!("must be in 1..=32, got {q}"));
                }
                self.q_bits = q;
            }
            "admm.beta_tilde" => self.beta_tilde = positive(parse_num(v)?)?,
            "admm.max_iters" => self.max_iters = positive(parse_num(v)?)?,
            "admm.tol" => {
                let t: f64 = parse_num(v)?;
                if t.is_nan() || t < 0.0 {
                    return Err(format!("must be non-negative, got {t}"));
                }
                self.tol = t;
            }
            "sweep.params" => self.params = parse_params(v)?,
            "output_dir" => self.output_dir = Some(PathBuf::from(v)),
            "theory.n" => self.theory.n = positive(parse_num(v)?)?,
            "theory.spectrum" => self.theory.spectrum = parse_spectrum(v)?,
            "theory.a" => self.theory.a = parse_response(v)?,
            "theory.b" => self.theory.b = parse_response(v)?,
            "theory.d_points" => self.theory.grid = DistortionGrid::Uniform(positive(parse_num(v)?)?),
            "theory.d_grid" => self.theory.grid = DistortionGrid::Explicit(parse_list(v)?),
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.signal == SignalKind::File && self.signal_path.is_none() {
            return Err(("signal.path", "signal.kind = file needs signal.path".into()));
        }
        if self.signal == SignalKind::Chirp && self.n < 2 {
            return Err(("signal.n", format!("chirp needs at least 2 samples, got {}", self.n)));
        }
        if self.signal == SignalKind::Chirp && self.system == SystemKind::BlurSubsample && !self.n.is_multiple_of(self.subsample_factor) {
            return Err((
                "system.subsample_factor",
                format!("{} does not divide signal.n = {}", self.subsample_factor, self.n),
            ));
        }
        Ok(())
    }

    /// Effective settings, for the manifest.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        match self.signal {
            SignalKind::Chirp => put("signal.kind", "chirp".into()),
            SignalKind::File => put("signal.kind", "file".into()),
        }
        if let Some(p) = &self.signal_path {
            put("signal.path", p.display().to_string());
        }
        put("signal.n", self.n.to_string());
        put(
            "system.kind",
            match self.system {
                SystemKind::BlurSubsample => "blur_subsample",
                SystemKind::Identity => "identity",
            }
            .into(),
        );
        put("system.kernel_std", self.kernel_std.to_string());
        put("system.kernel_support", self.kernel_support.to_string());
        put("system.subsample_factor", self.subsample_factor.to_string());
        put("system.noise_std", self.noise_std.to_string());
        put("system.seed", self.seed.to_string());
        put("codec.depth", self.depth.map_or("full".into(), |d| d.to_string()));
        put("codec.q_bits", self.q_bits.to_string());
        put("admm.beta_tilde", self.beta_tilde.to_string());
        put("admm.max_iters", self.max_iters.to_string());
        put("admm.tol", self.tol.to_string());
        put("sweep.params", list(&self.params));
        put("theory.n", self.theory.n.to_string());
        put("theory.spectrum", format!("{:?}", self.theory.spectrum));
        put("theory.a", format!("{:?}", self.theory.a));
        put("theory.b", format!("{:?}", self.theory.b));
        put(
            "theory.grid",
            match &self.theory.grid {
                DistortionGrid::Uniform(n) => format!("uniform:{n}"),
                DistortionGrid::Explicit(v) => list(v),
            },
        );
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = Config::parse("# nothing\n\n", "t").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.params.len(), 41);
        assert!((cfg.params[0] - 1e-6).abs() < 1e-20);
        assert!((cfg.params[40] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn values_and_comments() {
        let cfg = Config::parse(
            "system.seed = 9  # trailing\nadmm.beta_tilde=1.5\ncodec.depth = 6\nsweep.params = 1e-3, 2e-3\n",
            "t",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.beta_tilde, 1.5);
        assert_eq!(cfg.depth, Some(6));
        assert_eq!(cfg.params, vec![1e-3, 2e-3]);
    }

    #[test]
    fn logspace_params() {
        let cfg = Config::parse("sweep.params = logspace:1e-4:1e-2:3", "t").unwrap();
        assert_eq!(cfg.params.len(), 3);
        assert!((cfg.params[1] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_line_and_key() {
        let err = Config::parse("system.seed = 1\n\nadmm.tol = abc\n", "exp.cfg").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert_eq!(err.key.as_deref(), Some("admm.tol"));
        assert!(err.to_string().starts_with("exp.cfg:3: admm.tol: "));

        let err = Config::parse("bogus = 1", "t").unwrap_err();
        assert!(err.message.contains("unknown key"));
        let err = Config::parse("admm.tol = 1\nadmm.tol = 2", "t").unwrap_err();
        assert_eq!((err.line, err.message.as_str()), (Some(2), "duplicate key"));
        let err = Config::parse("just words", "t").unwrap_err();
        assert_eq!(err.line, Some(1));
        assert!(Config::parse("sweep.params = 1e-3, 1e-3", "t").is_err());
        assert!(Config::parse("admm.beta_tilde = 0", "t").is_err());
        assert!(Config::parse("signal.kind = file", "t").is_err());
        assert!(Config::parse("system.subsample_factor = 3", "t").is_err());
    }

    #[test]
    fn theory_specs() {
        let cfg = Config::parse(
            "theory.spectrum = power_law:2:1.5\ntheory.a = gaussian:2:5\ntheory.b = values:1,1,0,1\ntheory.d_grid = 0.1,0.2",
            "t",
        )
        .unwrap();
        assert_eq!(cfg.theory.spectrum, SpectrumSpec::PowerLaw { level: 2.0, exponent: 1.5 });
        assert_eq!(cfg.theory.a, ResponseSpec::Gaussian { std: 2.0, support: 5 });
        assert_eq!(cfg.theory.b, ResponseSpec::Values(vec![1.0, 1.0, 0.0, 1.0]));
        assert_eq!(cfg.theory.grid, DistortionGrid::Explicit(vec![0.1, 0.2]));
        assert!(Config::parse("theory.a = triangle:3", "t").is_err());
    }
}
