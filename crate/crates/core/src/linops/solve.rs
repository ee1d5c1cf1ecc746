use rustfft::num_complex::Complex64;

use super::{add, check_len, dot, norm, LinOpError, LinearMap, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    /// Stop once `‖r‖ ≤ rel_tol · ‖rhs‖`.
    pub rel_tol: f64,
    /// Iteration cap; `None` means ten times the system dimension.
    pub max_iters: Option<usize>,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iters: None,
        }
    }
}

/// Conjugate gradients for a symmetric positive-definite `op`, started at `x0`.
pub fn conjugate_gradient<F>(op: F, rhs: &[f64], x0: Vec<f64>, settings: &CgSettings) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    check_len("cg initial guess", rhs.len(), x0.len())?;
    let rhs_norm = norm(rhs);
    if rhs_norm == 0.0 {
        return Ok(vec![0.0; rhs.len()]);
    }
    let cap = settings.max_iters.unwrap_or(10 * rhs.len()).max(1);
    let target = settings.rel_tol * rhs_norm;

    let mut x = x0;
    let ax = op(&x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= target {
        return Ok(x);
    }
    for _ in 0..cap {
        let ap = op(&p);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 || !curvature.is_finite() {
            break;
        }
        let alpha = rr / curvature;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        if rr_next.sqrt() <= target {
            return Ok(x);
        }
        let beta = rr_next / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_next;
    }
    // recompute the true residual before giving up; the recursive one drifts
    let ax = op(&x);
    let true_res = norm(&rhs.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>());
    if true_res <= target {
        return Ok(x);
    }
    Err(LinOpError::NotConverged {
        iterations: cap,
        residual: true_res / rhs_norm,
    })
}

fn check_system(a: &LinearMap, b: &LinearMap, w: &[f64], v_tilde: &[f64], beta: f64) -> Result<()> {
    check_len("data vector w (A output)", a.out_dim(), w.len())?;
    check_len("proximal vector (B input)", b.in_dim(), v_tilde.len())?;
    check_len("A input vs B output", a.in_dim(), b.out_dim())?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(LinOpError::InvalidWeight(beta));
    }
    Ok(())
}

/// `(BᵀAᵀAB + βI) z` and `BᵀAᵀw + βṽ`.
fn normal_parts<'a>(a: &'a LinearMap, b: &'a LinearMap, beta: f64) -> impl Fn(&[f64]) -> Vec<f64> + 'a {
    move |z: &[f64]| {
        let abz = a.apply_unchecked(&b.apply_unchecked(z));
        let back = b.adjoint_unchecked(&a.adjoint_unchecked(&abz));
        back.iter().zip(z).map(|(g, zi)| g + beta * zi).collect()
    }
}

fn normal_rhs(a: &LinearMap, b: &LinearMap, w: &[f64], v_tilde: &[f64], beta: f64) -> Vec<f64> {
    let back = b.adjoint_unchecked(&a.adjoint_unchecked(w));
    add(&back, &v_tilde.iter().map(|v| beta * v).collect::<Vec<_>>())
}

/// Minimizer of `‖w − ABz‖² + β̃‖z − ṽ‖²`, i.e.
/// `ẑ = (BᵀAᵀAB + β̃I)⁻¹ (BᵀAᵀw + β̃ṽ)`.
///
/// Two circulant operators are handled per DFT bin:
/// `ẑ_k = (conj(h_k) w_k + β̃ ṽ_k) / (|h_k|² + β̃)` with `h = a ⊙ b`.
/// Anything else goes through matrix-free conjugate gradients warm-started at `ṽ`.
pub fn solve_regularized(
    a: &LinearMap,
    b: &LinearMap,
    w: &[f64],
    v_tilde: &[f64],
    beta: f64,
    settings: &CgSettings,
) -> Result<Vec<f64>> {
    check_system(a, b, w, v_tilde, beta)?;
    if let (Some(sa), Some(sb)) = (a.as_spectral(), b.as_spectral()) {
        let dft = sa.dft();
        let wf = dft.forward(w);
        let vf = dft.forward(v_tilde);
        let zf: Vec<Complex64> = sa
            .response()
            .iter()
            .zip(sb.response())
            .zip(wf.iter().zip(&vf))
            .map(|((ak, bk), (wk, vk))| {
                let h = ak * bk;
                (h.conj() * wk + vk * beta) / (h.norm_sqr() + beta)
            })
            .collect();
        return Ok(dft.inverse_real(zf));
    }
    let rhs = normal_rhs(a, b, w, v_tilde, beta);
    conjugate_gradient(normal_parts(a, b, beta), &rhs, v_tilde.to_vec(), settings)
}

/// Relative residual `‖(BᵀAᵀAB + β̃I)z − (BᵀAᵀw + β̃ṽ)‖ / ‖rhs‖` of a candidate `z`.
pub fn normal_equation_residual(
    a: &LinearMap,
    b: &LinearMap,
    w: &[f64],
    v_tilde: &[f64],
    beta: f64,
    z: &[f64],
) -> Result<f64> {
    check_system(a, b, w, v_tilde, beta)?;
    check_len("candidate z", b.in_dim(), z.len())?;
    let rhs = normal_rhs(a, b, w, v_tilde, beta);
    let lhs = normal_parts(a, b, beta)(z);
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(l, r)| l - r).collect();
    let scale = norm(&rhs);
    Ok(if scale == 0.0 { norm(&diff) } else { norm(&diff) / scale })
}

#[cfg(test)]
mod tests {
    use super::super::{Boundary, SpectralOperator};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_system_averages() {
        let id = LinearMap::identity(3);
        let w = [1.0, 2.0, 3.0];
        let v = [3.0, 0.0, -1.0];
        let z = solve_regularized(&id, &id, &w, &v, 1.0, &CgSettings::default()).unwrap();
        assert_eq!(z, vec![2.0, 1.0, 1.0]);
    }

    #[test]
    fn huge_weight_returns_proximal_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = LinearMap::compose(
            16,
            vec![
                LinearMap::convolution(16, vec![0.2, 0.6, 0.2], Boundary::Circular).unwrap(),
                LinearMap::subsample(16, 2, 0).unwrap(),
            ],
        )
        .unwrap();
        let b = LinearMap::replicate(8, 2).unwrap();
        let w: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..1.0)).collect();
        let v: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..1.0)).collect();
        let z = solve_regularized(&a, &b, &w, &v, 1e8, &CgSettings::default()).unwrap();
        let err: f64 = z.iter().zip(&v).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-6 * norm(&v));
    }

    #[test]
    fn cg_solution_satisfies_normal_equations() {
        let a = LinearMap::compose(
            32,
            vec![
                LinearMap::convolution(32, vec![0.1, 0.2, 0.4, 0.2, 0.1], Boundary::Zero).unwrap(),
                LinearMap::subsample(32, 4, 1).unwrap(),
            ],
        )
        .unwrap();
        let b = LinearMap::replicate(8, 4).unwrap();
        let w: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).cos()).collect();
        let v = vec![0.5; 8];
        let z = solve_regularized(&a, &b, &w, &v, 0.25, &CgSettings::default()).unwrap();
        assert!(normal_equation_residual(&a, &b, &w, &v, 0.25, &z).unwrap() <= 1e-10);
    }

    #[test]
    fn spectral_and_cg_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 8;
        let ka: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let kb: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sa = LinearMap::circulant(SpectralOperator::from_kernel(n, &ka).unwrap());
        let sb = LinearMap::circulant(SpectralOperator::from_kernel(n, &kb).unwrap());
        let ca = LinearMap::convolution(n, ka, Boundary::Circular).unwrap();
        let cb = LinearMap::convolution(n, kb, Boundary::Circular).unwrap();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z1 = solve_regularized(&sa, &sb, &w, &v, 0.5, &CgSettings::default()).unwrap();
        let z2 = solve_regularized(&ca, &cb, &w, &v, 0.5, &CgSettings::default()).unwrap();
        let diff: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) <= 1e-9 * norm(&z1));
    }

    #[test]
    fn rejects_bad_inputs() {
        let id = LinearMap::identity(2);
        assert_eq!(
            solve_regularized(&id, &id, &[1.0, 2.0], &[0.0, 0.0], 0.0, &CgSettings::default()),
            Err(LinOpError::InvalidWeight(0.0))
        );
        assert!(matches!(
            solve_regularized(&id, &id, &[1.0], &[0.0, 0.0], 1.0, &CgSettings::default()),
            Err(LinOpError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let a = LinearMap::convolution(64, vec![1.0, -2.0, 1.0], Boundary::Zero).unwrap();
        let id = LinearMap::identity(64);
        let w: Vec<f64> = (0..64).map(|i| ((i * i) % 7) as f64).collect();
        let settings = CgSettings {
            rel_tol: 1e-14,
            max_iters: Some(2),
        };
        match solve_regularized(&a, &id, &w, &vec![0.0; 64], 1e-3, &settings) {
            Err(LinOpError::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-14);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
