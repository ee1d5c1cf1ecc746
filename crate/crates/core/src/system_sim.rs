//! Source signals, the acquisition/rendering system, quality metrics and
//! rate-distortion sweeps comparing plain and system-aware compression.

use std::error::Error as StdError;
use std::f64::consts::PI;
use std::io::{self, BufRead};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::admm::{self, AdmmConfig, AdmmError, Codec};
use crate::linops::{self, Boundary, LinOpError, LinearMap};

/// PSNR reported when the two signals are identical.
pub const PSNR_CAP_DB: f64 = 200.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("signal length {0} is too short")]
    TooShort(usize),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error(transparent)]
    Dimensions(#[from] LinOpError),
    #[error("peak must be positive, got {0}")]
    BadPeak(f64),
    #[error(transparent)]
    Admm(#[from] AdmmError),
    #[error("codec: {0}")]
    Codec(#[source] Box<dyn StdError + Send + Sync>),
    #[error("sweep needs at least one parameter")]
    EmptySweep,
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: cannot parse {text:?} as a number")]
    Parse { line: usize, text: String },
}

/// Amplitude-modulated linear chirp in `[0, 1]`:
/// `0.5 + 0.5·t·sin(2π(2t + 30t²))`, `t = i/n`.
pub fn make_chirp(n: usize) -> Result<Vec<f64>, SimError> {
    if n < 2 {
        return Err(SimError::TooShort(n));
    }
    Ok((0..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            0.5 + 0.5 * t * (2.0 * PI * (2.0 * t + 30.0 * t * t)).sin()
        })
        .collect())
}

/// Gaussian taps at offsets `j - support/2`, normalized to unit sum.
pub fn gaussian_kernel(std: f64, support: usize) -> Result<Vec<f64>, SimError> {
    if !(std > 0.0 && std.is_finite()) || support == 0 {
        return Err(SimError::InvalidSystem(format!(
            "gaussian kernel with std {std} and support {support}"
        )));
    }
    let center = (support / 2) as f64;
    let taps: Vec<f64> = (0..support)
        .map(|j| {
            let off = j as f64 - center;
            (-0.5 * off * off / (std * std)).exp()
        })
        .collect();
    let total: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / total).collect())
}

/// Zero-mean white Gaussian noise from `ChaCha20Rng::seed_from_u64(seed)`.
pub fn gaussian_noise(len: usize, std: f64, seed: u64) -> Vec<f64> {
    if std == 0.0 {
        return vec![0.0; len];
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            std * z
        })
        .collect()
}

/// Acquisition `w = Ax + n` and rendering `y = Bv`.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub a: LinearMap,
    pub b: LinearMap,
    pub noise_std: f64,
    pub seed: u64,
}

impl SystemModel {
    pub fn new(a: LinearMap, b: LinearMap, noise_std: f64, seed: u64) -> Result<Self, SimError> {
        if a.in_dim() != b.out_dim() || a.out_dim() != b.in_dim() {
            return Err(SimError::InvalidSystem(format!(
                "A is {}x{} but B is {}x{}",
                a.out_dim(),
                a.in_dim(),
                b.out_dim(),
                b.in_dim()
            )));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(SimError::InvalidSystem(format!("noise std {noise_std}")));
        }
        Ok(Self { a, b, noise_std, seed })
    }

    /// Circular Gaussian blur then decimation by `factor`; rendering replicates
    /// each sample `factor` times.
    pub fn blur_subsample(
        n: usize,
        kernel_std: f64,
        kernel_support: usize,
        factor: usize,
        noise_std: f64,
        seed: u64,
    ) -> Result<Self, SimError> {
        if factor == 0 || !n.is_multiple_of(factor) {
            return Err(SimError::InvalidSystem(format!(
                "subsampling factor {factor} does not divide {n}"
            )));
        }
        let kernel = gaussian_kernel(kernel_std, kernel_support)?;
        let a = LinearMap::compose(
            n,
            vec![
                LinearMap::convolution(n, kernel, Boundary::Circular)?,
                LinearMap::subsample(n, factor, 0)?,
            ],
        )?;
        let b = LinearMap::replicate(n / factor, factor)?;
        Self::new(a, b, noise_std, seed)
    }

    /// The chirp experiment: blur with std 15 over 15 taps, decimate by 4,
    /// noise std 0.001.
    pub fn reference(n: usize, seed: u64) -> Result<Self, SimError> {
        Self::blur_subsample(n, 15.0, 15, 4, 0.001, seed)
    }

    /// `A = B = I` with no noise.
    pub fn identity(n: usize) -> Self {
        Self {
            a: LinearMap::identity(n),
            b: LinearMap::identity(n),
            noise_std: 0.0,
            seed: 0,
        }
    }

    /// Source length.
    pub fn n(&self) -> usize {
        self.a.in_dim()
    }

    /// Compressed-domain length.
    pub fn m(&self) -> usize {
        self.a.out_dim()
    }

    pub fn noise(&self) -> Vec<f64> {
        gaussian_noise(self.m(), self.noise_std, self.seed)
    }

    pub fn acquire(&self, x: &[f64]) -> Result<Vec<f64>, SimError> {
        let ax = self.a.apply(x)?;
        Ok(linops::add(&ax, &self.noise()))
    }

    pub fn render(&self, v: &[f64]) -> Result<Vec<f64>, SimError> {
        Ok(self.b.apply(v)?)
    }
}

/// `(1/M)‖w − Ax‖²` for the acquired `w`, i.e. the energy of the noise draw.
pub fn ideal_distortion_check(x: &[f64], sys: &SystemModel) -> Result<f64, SimError> {
    let w = sys.acquire(x)?;
    let r = linops::sub(&w, &sys.a.apply(x)?);
    Ok(linops::dot(&r, &r) / w.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Psnr {
    pub db: f64,
    /// Signals were identical and `db` is the cap.
    pub saturated: bool,
}

pub fn mse(x: &[f64], y: &[f64]) -> Result<f64, SimError> {
    linops::check_len("psnr operands", x.len(), y.len())?;
    let r = linops::sub(x, y);
    Ok(linops::dot(&r, &r) / x.len() as f64)
}

pub fn psnr(x: &[f64], y: &[f64], peak: f64) -> Result<Psnr, SimError> {
    if peak.is_nan() || peak <= 0.0 {
        return Err(SimError::BadPeak(peak));
    }
    let mse = mse(x, y)?;
    if mse == 0.0 {
        return Ok(Psnr {
            db: PSNR_CAP_DB,
            saturated: true,
        });
    }
    let db = 10.0 * (peak * peak / mse).log10();
    Ok(Psnr {
        db: db.min(PSNR_CAP_DB),
        saturated: db >= PSNR_CAP_DB,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// The codec applied directly to `w`.
    Regular,
    /// The codec wrapped in the ADMM loop.
    Proposed,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Regular => "regular",
            Method::Proposed => "proposed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RdPoint {
    pub method: Method,
    pub param: f64,
    pub rate_bits: u64,
    /// Reported rate over the compressed-domain length `M`.
    pub rate_bpp: f64,
    pub psnr: Psnr,
    pub iterations: usize,
    pub blob: Vec<u8>,
    pub rendered: Vec<f64>,
    pub trace: Vec<admm::IterationSummary>,
}

#[derive(Debug)]
pub struct PointFailure {
    pub param: f64,
    pub error: SimError,
}

#[derive(Debug, Default)]
pub struct SweepResult {
    /// Successful points, ordered by rate.
    pub points: Vec<RdPoint>,
    pub failures: Vec<PointFailure>,
}

fn codec_err<E: StdError + Send + Sync + 'static>(e: E) -> SimError {
    SimError::Codec(Box::new(e))
}

fn sweep_point<C: Codec>(
    x: &[f64],
    w: &[f64],
    sys: &SystemModel,
    codec: &C,
    param: f64,
    method: Method,
    cfg: &AdmmConfig,
) -> Result<RdPoint, SimError> {
    let (blob, v, iterations, trace) = match method {
        Method::Regular => {
            let blob = codec.compress(w, param).map_err(codec_err)?;
            let v = codec.decompress(&blob).map_err(codec_err)?;
            (blob, v, 1, Vec::new())
        }
        Method::Proposed => {
            let out = admm::run(w, &sys.a, &sys.b, codec, &cfg.with_theta(param))?;
            let iterations = out.iterations();
            (out.blob, out.v_hat, iterations, out.trace)
        }
    };
    let rate_bits = codec.rate_bits(&blob).map_err(codec_err)?;
    let rendered = sys.render(&v)?;
    let psnr = psnr(x, &rendered, 1.0)?;
    Ok(RdPoint {
        method,
        param,
        rate_bits,
        rate_bpp: rate_bits as f64 / sys.m() as f64,
        psnr,
        iterations,
        blob,
        rendered,
        trace,
    })
}

/// Compresses the acquisition of `x` once per parameter, in parallel.
pub fn sweep<C: Codec>(
    x: &[f64],
    sys: &SystemModel,
    codec: &C,
    params: &[f64],
    method: Method,
    cfg: &AdmmConfig,
) -> Result<SweepResult, SimError> {
    if params.is_empty() {
        return Err(SimError::EmptySweep);
    }
    let w = sys.acquire(x)?;
    let results: Vec<(f64, Result<RdPoint, SimError>)> = params
        .par_iter()
        .map(|&p| (p, sweep_point(x, &w, sys, codec, p, method, cfg)))
        .collect();
    let mut out = SweepResult::default();
    for (param, r) in results {
        match r {
            Ok(p) => out.points.push(p),
            Err(error) => out.failures.push(PointFailure { param, error }),
        }
    }
    out.points
        .sort_by(|a, b| a.rate_bpp.total_cmp(&b.rate_bpp).then(a.param.total_cmp(&b.param)));
    Ok(out)
}

/// Writes `method,param,rate_bpp,psnr_db,iterations,seed` rows.
pub fn write_rd_csv<'a, W, I>(points: I, seed: u64, out: W) -> csv::Result<()>
where
    W: io::Write,
    I: IntoIterator<Item = &'a RdPoint>,
{
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["method", "param", "rate_bpp", "psnr_db", "iterations", "seed"])?;
    for p in points {
        wtr.write_record([
            p.method.as_str().to_string(),
            p.param.to_string(),
            p.rate_bpp.to_string(),
            p.psnr.db.to_string(),
            p.iterations.to_string(),
            seed.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// One value per line; blank lines and `#` comments are skipped.
pub fn read_signal<R: BufRead>(reader: R) -> Result<Vec<f64>, SimError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let v = text.parse::<f64>().map_err(|_| SimError::Parse {
            line: i + 1,
            text: text.to_string(),
        })?;
        out.push(v);
    }
    Ok(out)
}

/// Shortest round-tripping decimal form, one value per line.
pub fn write_signal<W: io::Write>(signal: &[f64], mut out: W) -> io::Result<()> {
    for v in signal {
        writeln!(out, "{v}")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chirp_endpoints() {
        let x = make_chirp(1024).unwrap();
        assert_eq!(x[0], 0.5);
        assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(matches!(make_chirp(1), Err(SimError::TooShort(1))));
    }

    #[test]
    fn kernel_is_normalized_and_flat() {
        let k = gaussian_kernel(15.0, 15).unwrap();
        assert_eq!(k.len(), 15);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(k[0], k[14]);
        assert!(k[7] > k[0] && k[0] / k[7] > 0.8);
    }

    #[test]
    fn reference_dimensions() {
        let sys = SystemModel::reference(1024, 1).unwrap();
        assert_eq!((sys.n(), sys.m()), (1024, 256));
        let x = make_chirp(1024).unwrap();
        let w = sys.acquire(&x).unwrap();
        assert_eq!(w.len(), 256);
        assert_eq!(sys.render(&w).unwrap().len(), 1024);
        assert_eq!(w, sys.acquire(&x).unwrap());
    }

    #[test]
    fn render_replicates() {
        let sys = SystemModel::new(
            LinearMap::subsample(4, 2, 0).unwrap(),
            LinearMap::replicate(2, 2).unwrap(),
            0.0,
            0,
        )
        .unwrap();
        assert_eq!(sys.render(&[1.0, 2.0]).unwrap(), vec![1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn noiseless_identity_acquisition() {
        let sys = SystemModel::identity(3);
        assert_eq!(sys.acquire(&[0.1, 0.2, 0.3]).unwrap(), vec![0.1, 0.2, 0.3]);
        assert_eq!(ideal_distortion_check(&[0.1, 0.2, 0.3], &sys).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_system_rejected() {
        let err = SystemModel::new(LinearMap::identity(4), LinearMap::identity(3), 0.0, 0);
        assert!(matches!(err, Err(SimError::InvalidSystem(_))));
        assert!(SystemModel::blur_subsample(10, 1.0, 3, 4, 0.0, 0).is_err());
    }

    #[test]
    fn psnr_values() {
        let x = [0.0, 0.5];
        let same = psnr(&x, &x, 1.0).unwrap();
        assert_eq!(same, Psnr { db: PSNR_CAP_DB, saturated: true });
        let p = psnr(&[0.0; 4], &[0.1; 4], 1.0).unwrap();
        assert!((p.db - 20.0).abs() < 1e-12);
        assert!(!p.saturated);
        assert!(psnr(&[0.0], &[0.0, 0.0], 1.0).is_err());
        assert!(matches!(psnr(&x, &x, 0.0), Err(SimError::BadPeak(_))));
    }

    #[test]
    fn signal_text_round_trip() {
        let x = make_chirp(64).unwrap();
        let mut buf = Vec::new();
        write_signal(&x, &mut buf).unwrap();
        assert_eq!(read_signal(&buf[..]).unwrap(), x);
        let err = read_signal("# c\n1.0\n\nabc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, SimError::Parse { line: 4, .. }));
    }
}
