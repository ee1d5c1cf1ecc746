use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{check_len, LinOpError, Result};

/// Responses with `|c_k| <= ZERO_REL_TOL * max |c|` are treated as exact zeros.
pub const ZERO_REL_TOL: f64 = 1e-12;

/// Bins whose magnitude exceeds `ZERO_REL_TOL` times the peak magnitude.
pub fn nonzero_mask(response: &[Complex64]) -> Vec<bool> {
    let peak = response.iter().map(|c| c.norm()).fold(0.0, f64::max);
    response
        .iter()
        .map(|c| peak > 0.0 && c.norm() > ZERO_REL_TOL * peak)
        .collect()
}

/// Unnormalized forward DFT, `1/N`-scaled inverse.
#[derive(Clone)]
pub struct Dft {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Dft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft").field("len", &self.len).finish()
    }
}

impl Dft {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.inverse.process(&mut spectrum);
        let scale = 1.0 / self.len as f64;
        spectrum.iter().map(|c| c.re * scale).collect()
    }
}

/// A circulant operator held by its DFT-domain response.
#[derive(Debug, Clone)]
pub struct SpectralOperator {
    response: Vec<Complex64>,
    support: Vec<bool>,
    dft: Dft,
}

impl SpectralOperator {
    pub fn from_response(response: Vec<Complex64>) -> Result<Self> {
        if response.is_empty() {
            return Err(LinOpError::InvalidOperator("empty frequency response".into()));
        }
        if response.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(LinOpError::InvalidOperator("non-finite frequency response".into()));
        }
        let support = nonzero_mask(&response);
        let dft = Dft::new(response.len());
        Ok(Self {
            response,
            support,
            dft,
        })
    }

    /// Real-valued response (e.g. a symmetric filter or an ideal mask).
    pub fn from_real_response(response: &[f64]) -> Result<Self> {
        Self::from_response(response.iter().map(|&r| Complex64::new(r, 0.0)).collect())
    }

    /// Circular convolution with `kernel` (tap `j` at offset `j - len/2`) on
    /// length `n`. The response is symmetrized to exact conjugate symmetry.
    pub fn from_kernel(n: usize, kernel: &[f64]) -> Result<Self> {
        if n == 0 || kernel.is_empty() {
            return Err(LinOpError::InvalidOperator("empty kernel or length".into()));
        }
        let center = (kernel.len() / 2) as isize;
        let mut impulse = vec![0.0; n];
        for (j, &k) in kernel.iter().enumerate() {
            impulse[(j as isize - center).rem_euclid(n as isize) as usize] += k;
        }
        let raw = Dft::new(n).forward(&impulse);
        let response = (0..n)
            .map(|k| (raw[k] + raw[(n - k) % n].conj()) * 0.5)
            .collect();
        Self::from_response(response)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_real_response(&vec![1.0; n])
    }

    /// The response of `self ∘ other` (circulants commute).
    pub fn compose(&self, other: &SpectralOperator) -> Result<Self> {
        check_len("composed response", self.len(), other.len())?;
        Self::from_response(
            self.response
                .iter()
                .zip(&other.response)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn response(&self) -> &[Complex64] {
        &self.response
    }

    /// `true` at bins where the response is nonzero.
    pub fn support(&self) -> &[bool] {
        &self.support
    }

    pub fn dft(&self) -> &Dft {
        &self.dft
    }

    pub fn pseudoinverse_response(&self) -> Vec<Complex64> {
        self.response
            .iter()
            .zip(&self.support)
            .map(|(c, &s)| if s { c.inv() } else { Complex64::new(0.0, 0.0) })
            .collect()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("spectral apply input", self.len(), x.len())?;
        Ok(self.apply_unchecked(x))
    }

    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("spectral adjoint input", self.len(), y.len())?;
        Ok(self.adjoint_unchecked(y))
    }

    pub fn pseudoinverse_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("pseudoinverse input", self.len(), x.len())?;
        Ok(self.filter(x, &self.pseudoinverse_response()))
    }

    /// Orthogonal projection onto the range: zeroes the bins outside the support.
    pub fn project_range(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("projection input", self.len(), x.len())?;
        let mut spec = self.dft.forward(x);
        for (c, &s) in spec.iter_mut().zip(&self.support) {
            if !s {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        Ok(self.dft.inverse_real(spec))
    }

    pub(crate) fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.filter(x, &self.response)
    }

    pub(crate) fn adjoint_unchecked(&self, y: &[f64]) -> Vec<f64> {
        let conj: Vec<Complex64> = self.response.iter().map(|c| c.conj()).collect();
        self.filter(y, &conj)
    }

    fn filter(&self, x: &[f64], gains: &[Complex64]) -> Vec<f64> {
        let mut spec = self.dft.forward(x);
        for (c, g) in spec.iter_mut().zip(gains) {
            *c *= g;
        }
        self.dft.inverse_real(spec)
    }
}
