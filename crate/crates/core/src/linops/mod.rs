//! Matrix-free linear operators.
//!
//! A [`LinearMap`] carries its input and output dimensions together with one of a
//! handful of structured kinds (convolution, subsampling, replication, circulant
//! spectral filters, compositions). Every kind implements both `apply` and
//! `adjoint` without materializing a matrix.

mod solve;
mod spectral;

pub use solve::{conjugate_gradient, normal_equation_residual, solve_regularized, CgSettings};
pub use rustfft::num_complex::Complex64;
pub use spectral::{nonzero_mask, Dft, SpectralOperator, ZERO_REL_TOL};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinOpError {
    #[error("{what}: expected length {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("regularization weight must be positive and finite, got {0}")]
    InvalidWeight(f64),
    #[error("conjugate gradients stopped after {iterations} iterations with relative residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, LinOpError>;

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(LinOpError::DimensionMismatch {
            what,
            expected,
            actual,
        })
    }
}

/// How a convolution treats samples beyond the signal ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Periodic extension; the operator is circulant.
    #[default]
    Circular,
    /// Samples outside `[0, n)` are zero.
    Zero,
}

#[derive(Debug, Clone)]
pub enum MapKind {
    Identity,
    Scale(f64),
    /// Kernel tap `j` sits at offset `j - kernel.len() / 2`.
    Convolution {
        kernel: Vec<f64>,
        boundary: Boundary,
    },
    /// Keeps indices `phase, phase + factor, ...`.
    Subsample {
        factor: usize,
        phase: usize,
    },
    /// Repeats every sample `factor` times contiguously.
    Replicate {
        factor: usize,
    },
    CirculantSpectral(SpectralOperator),
    /// Stages listed in application order: the first stage sees the input.
    Compose(Vec<LinearMap>),
}

#[derive(Debug, Clone)]
pub struct LinearMap {
    in_dim: usize,
    out_dim: usize,
    kind: MapKind,
}

impl LinearMap {
    pub fn identity(n: usize) -> Self {
        Self {
            in_dim: n,
            out_dim: n,
            kind: MapKind::Identity,
        }
    }

    pub fn scale(n: usize, factor: f64) -> Self {
        Self {
            in_dim: n,
            out_dim: n,
            kind: MapKind::Scale(factor),
        }
    }

    pub fn convolution(n: usize, kernel: Vec<f64>, boundary: Boundary) -> Result<Self> {
        if n == 0 {
            return Err(LinOpError::InvalidOperator("convolution over an empty signal".into()));
        }
        if kernel.is_empty() {
            return Err(LinOpError::InvalidOperator("empty convolution kernel".into()));
        }
        Ok(Self {
            in_dim: n,
            out_dim: n,
            kind: MapKind::Convolution { kernel, boundary },
        })
    }

    pub fn subsample(n: usize, factor: usize, phase: usize) -> Result<Self> {
        if factor == 0 || phase >= factor || phase >= n {
            return Err(LinOpError::InvalidOperator(format!(
                "subsample(factor={factor}, phase={phase}) on length {n}"
            )));
        }
        Ok(Self {
            in_dim: n,
            out_dim: (n - phase).div_ceil(factor),
            kind: MapKind::Subsample { factor, phase },
        })
    }

    pub fn replicate(m: usize, factor: usize) -> Result<Self> {
        if factor == 0 || m == 0 {
            return Err(LinOpError::InvalidOperator(format!(
                "replicate(factor={factor}) on length {m}"
            )));
        }
        Ok(Self {
            in_dim: m,
            out_dim: m * factor,
            kind: MapKind::Replicate { factor },
        })
    }

    pub fn circulant(op: SpectralOperator) -> Self {
        let n = op.len();
        Self {
            in_dim: n,
            out_dim: n,
            kind: MapKind::CirculantSpectral(op),
        }
    }

    /// Chains `stages` in application order. An empty chain is the identity on
    /// `in_dim`.
    pub fn compose(in_dim: usize, stages: Vec<LinearMap>) -> Result<Self> {
        let mut dim = in_dim;
        for stage in &stages {
            check_len("composition stage input", stage.in_dim, dim)?;
            dim = stage.out_dim;
        }
        Ok(Self {
            in_dim,
            out_dim: dim,
            kind: MapKind::Compose(stages),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    /// The spectral form of this map when it is a circulant filter.
    pub fn as_spectral(&self) -> Option<&SpectralOperator> {
        match &self.kind {
            MapKind::CirculantSpectral(op) => Some(op),
            _ => None,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("apply input", self.in_dim, x.len())?;
        Ok(self.apply_unchecked(x))
    }

    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("adjoint input", self.out_dim, y.len())?;
        Ok(self.adjoint_unchecked(y))
    }

    pub(crate) fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            MapKind::Identity => x.to_vec(),
            MapKind::Scale(s) => x.iter().map(|v| s * v).collect(),
            MapKind::Convolution { kernel, boundary } => convolve(x, kernel, *boundary, false),
            MapKind::Subsample { factor, phase } => {
                x.iter().skip(*phase).step_by(*factor).copied().collect()
            }
            MapKind::Replicate { factor } => x
                .iter()
                .flat_map(|&v| std::iter::repeat_n(v, *factor))
                .collect(),
            MapKind::CirculantSpectral(op) => op.apply_unchecked(x),
            MapKind::Compose(stages) => {
                let mut cur = x.to_vec();
                for stage in stages {
                    cur = stage.apply_unchecked(&cur);
                }
                cur
            }
        }
    }

    pub(crate) fn adjoint_unchecked(&self, y: &[f64]) -> Vec<f64> {
        match &self.kind {
            MapKind::Identity => y.to_vec(),
            MapKind::Scale(s) => y.iter().map(|v| s * v).collect(),
            MapKind::Convolution { kernel, boundary } => convolve(y, kernel, *boundary, true),
            MapKind::Subsample { factor, phase } => {
                let mut x = vec![0.0; self.in_dim];
                for (k, &v) in y.iter().enumerate() {
                    x[phase + k * factor] = v;
                }
                x
            }
            MapKind::Replicate { factor } => {
                y.chunks_exact(*factor).map(|c| c.iter().sum()).collect()
            }
            MapKind::CirculantSpectral(op) => op.adjoint_unchecked(y),
            MapKind::Compose(stages) => {
                let mut cur = y.to_vec();
                for stage in stages.iter().rev() {
                    cur = stage.adjoint_unchecked(&cur);
                }
                cur
            }
        }
    }
}

/// `y[i] = sum_j k[j] x[i + c - j]` with `c = k.len() / 2`, or its transpose
/// (correlation) when `transpose` is set.
fn convolve(x: &[f64], kernel: &[f64], boundary: Boundary, transpose: bool) -> Vec<f64> {
    let n = x.len() as isize;
    let center = (kernel.len() / 2) as isize;
    (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .filter_map(|(j, &k)| {
                    let offset = j as isize - center;
                    let src = if transpose { i + offset } else { i - offset };
                    let idx = match boundary {
                        Boundary::Circular => src.rem_euclid(n),
                        Boundary::Zero if (0..n).contains(&src) => src,
                        Boundary::Zero => return None,
                    };
                    Some(k * x[idx as usize])
                })
                .sum()
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}
