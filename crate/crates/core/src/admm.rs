//! System-aware compression loop.
//!
//! Wraps an arbitrary codec in an ADMM iteration that alternates between
//! compressing `z̃ = ẑ − u` and a regularized deconvolution
//! `ẑ = (BᵀAᵀAB + β̃I)⁻¹(BᵀAᵀw + β̃(v̂ + u))`, followed by the scaled dual update
//! `u ← u + v̂ − ẑ`. The output is the blob produced by the last iteration.

use std::error::Error as StdError;
use std::io;

use thiserror::Error;

use crate::linops::{self, norm, sub, CgSettings, LinOpError, LinearMap};

/// A standard compressor/decompressor pair driven by a single quality knob `θ`.
///
/// Implementations are shared across concurrent runs.
pub trait Codec: Sync {
    type Error: StdError + Send + Sync + 'static;

    fn compress(&self, signal: &[f64], theta: f64) -> Result<Vec<u8>, Self::Error>;
    fn decompress(&self, blob: &[u8]) -> Result<Vec<f64>, Self::Error>;
    /// Rate charged for `blob`; deterministic per blob.
    fn rate_bits(&self, blob: &[u8]) -> Result<u64, Self::Error>;
}

#[derive(Debug, Error)]
pub enum AdmmError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("inconsistent system dimensions: {0}")]
    Dimensions(#[source] LinOpError),
    #[error("z-update failed at iteration {iteration}: {source}")]
    Solver {
        iteration: usize,
        #[source]
        source: LinOpError,
    },
    #[error("codec failed at iteration {iteration}: {source}")]
    Codec {
        iteration: usize,
        #[source]
        source: Box<dyn StdError + Send + Sync>,
    },
    #[error("codec returned {actual} samples at iteration {iteration}, expected {expected}")]
    DecodedLength {
        iteration: usize,
        expected: usize,
        actual: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    /// Codec quality parameter (the tree codec's ν).
    pub theta: f64,
    /// Weight of the proximity term in the z-update.
    pub beta_tilde: f64,
    pub max_iters: usize,
    /// Relative primal-residual threshold.
    pub tol: f64,
    pub solver: CgSettings,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            theta: 0.0,
            beta_tilde: 0.25,
            max_iters: 40,
            tol: 1e-4,
            solver: CgSettings::default(),
        }
    }
}

impl AdmmConfig {
    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn validate(&self) -> Result<(), AdmmError> {
        if !(self.beta_tilde > 0.0 && self.beta_tilde.is_finite()) {
            return Err(AdmmError::InvalidConfig(format!(
                "beta_tilde must be positive, got {}",
                self.beta_tilde
            )));
        }
        if self.max_iters == 0 {
            return Err(AdmmError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(AdmmError::InvalidConfig(format!(
                "tol must be non-negative, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Iterates of one pass, handed to observers after the dual update.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub t: usize,
    pub z_tilde: Vec<f64>,
    pub blob: Vec<u8>,
    pub v_hat: Vec<f64>,
    pub v_tilde: Vec<f64>,
    pub z_hat: Vec<f64>,
    /// Dual variable used during iteration `t`.
    pub u: Vec<f64>,
    /// Dual variable after the update, `u + v̂ − ẑ`.
    pub u_next: Vec<f64>,
    /// `‖v̂ − ẑ‖`.
    pub residual: f64,
    pub rate_bits: u64,
    /// `(1/M)‖w − ABv̂‖²`.
    pub d_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationSummary {
    pub t: usize,
    pub rate_bits: u64,
    pub d_c: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    IterationCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop(StopReason),
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    /// Compressed data from the final iteration.
    pub blob: Vec<u8>,
    /// Decompressed signal of `blob`.
    pub v_hat: Vec<f64>,
    pub trace: Vec<IterationSummary>,
    pub stop: StopReason,
    /// Iteration with the lowest `d_c`; diagnostic only, never the output.
    pub best_iteration: usize,
}

impl AdmmOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

const RESIDUAL_FLOOR: f64 = 1e-30;

pub fn stopping_check(state: &AdmmState, cfg: &AdmmConfig) -> Control {
    let scale = norm(&state.v_hat).max(norm(&state.z_hat)).max(RESIDUAL_FLOOR);
    if state.residual <= cfg.tol * scale {
        Control::Stop(StopReason::Converged)
    } else if state.t >= cfg.max_iters {
        Control::Stop(StopReason::IterationCap)
    } else {
        Control::Continue
    }
}

/// `(1/M)‖w − ABv‖²` with `M = len(w)`.
pub fn system_distortion_dc(w: &[f64], a: &LinearMap, b: &LinearMap, v: &[f64]) -> Result<f64, LinOpError> {
    let abv = a.apply(&b.apply(v)?)?;
    linops::check_len("system output vs w", w.len(), abv.len())?;
    let r = sub(w, &abv);
    Ok(linops::dot(&r, &r) / w.len() as f64)
}

fn check_dims(w: &[f64], a: &LinearMap, b: &LinearMap) -> Result<(), AdmmError> {
    let check = |what, expected, actual| {
        linops::check_len(what, expected, actual).map_err(AdmmError::Dimensions)
    };
    check("w vs A output", a.out_dim(), w.len())?;
    check("B input vs w", w.len(), b.in_dim())?;
    check("A input vs B output", a.in_dim(), b.out_dim())
}

pub fn run<C: Codec>(
    w: &[f64],
    a: &LinearMap,
    b: &LinearMap,
    codec: &C,
    cfg: &AdmmConfig,
) -> Result<AdmmOutcome, AdmmError> {
    run_observed(w, a, b, codec, cfg, |_| {})
}

/// [`run`], calling `observer` with the full state after every iteration.
pub fn run_observed<C, F>(
    w: &[f64],
    a: &LinearMap,
    b: &LinearMap,
    codec: &C,
    cfg: &AdmmConfig,
    mut observer: F,
) -> Result<AdmmOutcome, AdmmError>
where
    C: Codec,
    F: FnMut(&AdmmState),
{
    cfg.validate()?;
    check_dims(w, a, b)?;
    let m = w.len();

    let mut z_hat = w.to_vec();
    let mut u = vec![0.0; m];
    let mut trace = Vec::new();
    let mut t = 0;
    loop {
        t += 1;
        let codec_err = |e: C::Error| AdmmError::Codec {
            iteration: t,
            source: Box::new(e),
        };
        let z_tilde = sub(&z_hat, &u);
        let blob = codec.compress(&z_tilde, cfg.theta).map_err(codec_err)?;
        let v_hat = codec.decompress(&blob).map_err(codec_err)?;
        if v_hat.len() != m {
            return Err(AdmmError::DecodedLength {
                iteration: t,
                expected: m,
                actual: v_hat.len(),
            });
        }
        let rate_bits = codec.rate_bits(&blob).map_err(codec_err)?;
        let v_tilde = linops::add(&v_hat, &u);
        z_hat = linops::solve_regularized(a, b, w, &v_tilde, cfg.beta_tilde, &cfg.solver)
            .map_err(|source| AdmmError::Solver { iteration: t, source })?;
        let step = sub(&v_hat, &z_hat);
        let u_next = linops::add(&u, &step);
        let d_c = system_distortion_dc(w, a, b, &v_hat).map_err(AdmmError::Dimensions)?;

        let state = AdmmState {
            t,
            z_tilde,
            blob,
            v_hat,
            v_tilde,
            z_hat: z_hat.clone(),
            u,
            u_next,
            residual: norm(&step),
            rate_bits,
            d_c,
        };
        trace.push(IterationSummary {
            t,
            rate_bits,
            d_c,
            residual: state.residual,
        });
        observer(&state);

        if let Control::Stop(stop) = stopping_check(&state, cfg) {
            let best_iteration = trace
                .iter()
                .min_by(|x, y| x.d_c.total_cmp(&y.d_c))
                .map_or(t, |s| s.t);
            return Ok(AdmmOutcome {
                blob: state.blob,
                v_hat: state.v_hat,
                trace,
                stop,
                best_iteration,
            });
        }
        u = state.u_next;
    }
}

/// Writes `t,rate_bits,d_c,residual` rows.
pub fn write_trace_csv<W: io::Write>(trace: &[IterationSummary], out: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["t", "rate_bits", "d_c", "residual"])?;
    for s in trace {
        wtr.write_record([
            s.t.to_string(),
            s.rate_bits.to_string(),
            s.d_c.to_string(),
            s.residual.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
