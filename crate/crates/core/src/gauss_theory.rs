//! Rate-distortion theory for cyclo-stationary Gaussian sources observed and
//! rendered through circulant operators.
//!
//! With `h_k = a_k b_k`, the pseudoinverse-filtered input `w̃ = B⁺A⁺w` has
//! independent DFT coefficients of variance `λ_k(w̃) = λ_k(w) / |h_k|²` on the
//! joint support `K_AB = {k : a_k ≠ 0, b_k ≠ 0}`. Distortion is allocated by a
//! reverse water-filling weighted by `|h_k|²`: `D_k = min(θ/|h_k|², λ_k(w̃))`,
//! `R_k = ½ ln(|h_k|² λ_k(w̃) / θ)` on the bins still above the water level.
//!
//! Rates are carried in nats and converted to bits only when reported.

use std::f64::consts::LN_2;
use std::io;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::linops::nonzero_mask;

/// `θ` is never taken below this when evaluating rates at zero distortion.
pub const THETA_FLOOR: f64 = 1e-15;
const BISECTION_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("{what} has length {actual}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("empty spectral model")]
    Empty,
    #[error("source variance at bin {0} is negative or not finite")]
    BadVariance(usize),
    #[error("frequency response {0} is not finite")]
    BadResponse(&'static str),
    #[error("distortion must be non-negative and finite, got {0}")]
    BadDistortion(f64),
    #[error("distortion grid must be sorted ascending")]
    UnsortedGrid,
}

#[derive(Debug, Clone)]
pub struct SpectralModel {
    lambda_x: Vec<f64>,
    a_f: Vec<Complex64>,
    b_f: Vec<Complex64>,
    a_nonzero: Vec<bool>,
    support: Vec<bool>,
    /// `|a_k b_k|²` on the support, 0 elsewhere.
    gain: Vec<f64>,
    /// `λ_k(w̃)` on the support, 0 elsewhere.
    lambda_w_tilde: Vec<f64>,
}

impl SpectralModel {
    pub fn new(lambda_x: Vec<f64>, a_f: Vec<Complex64>, b_f: Vec<Complex64>) -> Result<Self, TheoryError> {
        let n = lambda_x.len();
        if n == 0 {
            return Err(TheoryError::Empty);
        }
        for (what, len) in [("a response", a_f.len()), ("b response", b_f.len())] {
            if len != n {
                return Err(TheoryError::LengthMismatch {
                    what,
                    expected: n,
                    actual: len,
                });
            }
        }
        if let Some(k) = lambda_x.iter().position(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(TheoryError::BadVariance(k));
        }
        let finite = |r: &[Complex64]| r.iter().all(|c| c.re.is_finite() && c.im.is_finite());
        if !finite(&a_f) {
            return Err(TheoryError::BadResponse("a"));
        }
        if !finite(&b_f) {
            return Err(TheoryError::BadResponse("b"));
        }

        let a_nonzero = nonzero_mask(&a_f);
        let b_nonzero = nonzero_mask(&b_f);
        let support: Vec<bool> = a_nonzero.iter().zip(&b_nonzero).map(|(a, b)| *a && *b).collect();
        let mut gain = vec![0.0; n];
        let mut lambda_w_tilde = vec![0.0; n];
        for k in (0..n).filter(|&k| support[k]) {
            gain[k] = (a_f[k] * b_f[k]).norm_sqr();
            lambda_w_tilde[k] = a_f[k].norm_sqr() * lambda_x[k] / gain[k];
        }
        Ok(Self {
            lambda_x,
            a_f,
            b_f,
            a_nonzero,
            support,
            gain,
            lambda_w_tilde,
        })
    }

    /// Identity operators on a given source spectrum.
    pub fn unfiltered(lambda_x: Vec<f64>) -> Result<Self, TheoryError> {
        let ones = vec![Complex64::new(1.0, 0.0); lambda_x.len()];
        Self::new(lambda_x, ones.clone(), ones)
    }

    pub fn len(&self) -> usize {
        self.lambda_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda_x.is_empty()
    }

    pub fn lambda_x(&self) -> &[f64] {
        &self.lambda_x
    }

    pub fn a_response(&self) -> &[Complex64] {
        &self.a_f
    }

    pub fn b_response(&self) -> &[Complex64] {
        &self.b_f
    }

    /// `K_AB` as a mask.
    pub fn support(&self) -> &[bool] {
        &self.support
    }

    pub fn gain(&self) -> &[f64] {
        &self.gain
    }

    pub fn lambda_w_tilde(&self) -> &[f64] {
        &self.lambda_w_tilde
    }

    /// `|h_k|² λ_k(w̃) = |a_k|² λ_k(x)` on the support: the water level at
    /// which bin `k` saturates.
    pub fn saturation_level(&self, k: usize) -> f64 {
        self.gain[k] * self.lambda_w_tilde[k]
    }

    /// Largest meaningful `D`: every coded bin saturated, `Σ_K |a_k|² λ_k(x) / N`.
    pub fn saturation_distortion(&self) -> f64 {
        (0..self.len()).map(|k| self.saturation_level(k)).fold(0.0, |acc, v| acc + v) / self.len() as f64
    }
}

/// Irreducible distortion `E{D0} = (1/N) Σ_{a_k ≠ 0, b_k = 0} |a_k|² λ_k(x)`:
/// energy that passes A but lies in the null space of B.
pub fn expected_min_distortion(m: &SpectralModel) -> f64 {
    // folded from +0.0: an empty f64 `sum` is -0.0 and would print as "-0"
    let total: f64 = (0..m.len())
        .filter(|&k| m.a_nonzero[k] && !m.support[k])
        .map(|k| m.a_f[k].norm_sqr() * m.lambda_x[k])
        .fold(0.0, |acc, v| acc + v);
    total / m.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAllocation {
    pub d_k: Vec<f64>,
    /// Per-bin rates in nats.
    pub r_k: Vec<f64>,
    pub theta: f64,
    /// `Σ |a_k b_k|² D_k`.
    pub total_distortion: f64,
    /// `Σ R_k` in nats.
    pub total_rate: f64,
    /// The requested `N·D` exceeded the saturation bound and was clamped.
    pub saturated: bool,
    /// `false` when `θ` had to be floored (zero distortion), so the rates
    /// stand in for unbounded ones.
    pub exact: bool,
}

impl SpectralAllocation {
    pub fn rate_bits_per_sample(&self) -> f64 {
        self.total_rate / LN_2 / self.d_k.len() as f64
    }
}

/// Weighted reverse water-filling meeting `Σ_K |a_k b_k|² D_k = N·D`.
pub fn water_fill(m: &SpectralModel, d: f64) -> Result<SpectralAllocation, TheoryError> {
    if !(d >= 0.0 && d.is_finite()) {
        return Err(TheoryError::BadDistortion(d));
    }
    let n = m.len();
    // Bins with zero variance on the support carry nothing and are skipped.
    let coded: Vec<usize> = (0..n)
        .filter(|&k| m.support[k] && m.lambda_w_tilde[k] > 0.0)
        .collect();
    let levels: Vec<f64> = coded.iter().map(|&k| m.saturation_level(k)).collect();
    let total_cap: f64 = levels.iter().fold(0.0, |acc, v| acc + v);
    let max_level = levels.iter().copied().fold(0.0, f64::max);
    let target = n as f64 * d;

    let weighted = |theta: f64| -> f64 { levels.iter().map(|&c| theta.min(c)).sum() };
    let (theta, saturated) = if target >= total_cap {
        (max_level, target > total_cap)
    } else if target == 0.0 {
        (0.0, false)
    } else {
        let (mut lo, mut hi) = (0.0f64, max_level);
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if weighted(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // pick whichever bracket end lands closer to the target
        let theta = if (weighted(lo) - target).abs() <= (weighted(hi) - target).abs() {
            lo
        } else {
            hi
        };
        (theta, false)
    };

    let exact = theta > 0.0 || coded.is_empty();
    let rate_theta = theta.max(THETA_FLOOR);
    let mut d_k = vec![0.0; n];
    let mut r_k = vec![0.0; n];
    for (&k, &level) in coded.iter().zip(&levels) {
        if theta < level {
            d_k[k] = theta / m.gain[k];
            r_k[k] = 0.5 * (level / rate_theta).ln();
        } else {
            d_k[k] = m.lambda_w_tilde[k];
        }
    }
    let total_distortion = (0..n).map(|k| m.gain[k] * d_k[k]).fold(0.0, |acc, v| acc + v);
    let total_rate = r_k.iter().fold(0.0, |acc, v| acc + v);
    Ok(SpectralAllocation {
        d_k,
        r_k,
        theta,
        total_distortion,
        total_rate,
        saturated,
        exact,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryPoint {
    /// Requested distortion `D`.
    pub d: f64,
    /// `E{D0}` plus the distortion actually allocated.
    pub total_distortion: f64,
    pub rate_bits_per_sample: f64,
    pub theta: f64,
    pub saturated: bool,
    pub exact: bool,
}

pub fn theoretical_rd_curve(m: &SpectralModel, d_grid: &[f64]) -> Result<Vec<TheoryPoint>, TheoryError> {
    if let Some(bad) = d_grid.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(TheoryError::BadDistortion(*bad));
    }
    if d_grid.windows(2).any(|p| p[1] < p[0]) {
        return Err(TheoryError::UnsortedGrid);
    }
    let floor = expected_min_distortion(m);
    let n = m.len() as f64;
    d_grid
        .par_iter()
        .map(|&d| {
            let alloc = water_fill(m, d)?;
            Ok(TheoryPoint {
                d,
                total_distortion: floor + alloc.total_distortion / n,
                rate_bits_per_sample: alloc.rate_bits_per_sample(),
                theta: alloc.theta,
                saturated: alloc.saturated,
                exact: alloc.exact,
            })
        })
        .collect()
}

/// Writes `D,total_distortion,rate_bits_per_sample,theta` rows.
pub fn write_curve_csv<W: io::Write>(points: &[TheoryPoint], out: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["D", "total_distortion", "rate_bits_per_sample", "theta"])?;
    for p in points {
        wtr.write_record([
            p.d.to_string(),
            p.total_distortion.to_string(),
            p.rate_bits_per_sample.to_string(),
            p.theta.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
