use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sysaware_core::admm::{self, AdmmConfig, Codec, StopReason};
use sysaware_core::linops::{add, norm, normal_equation_residual, sub, Boundary, LinearMap};
use sysaware_core::system_sim::{make_chirp, SystemModel};
use sysaware_core::tree_codec::TreeCodec;

fn small_system(rng: &mut impl Rng) -> (LinearMap, LinearMap, Vec<f64>) {
    let n = 64;
    let kernel: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..1.0)).collect();
    let a = LinearMap::compose(
        n,
        vec![
            LinearMap::convolution(n, kernel, Boundary::Circular).unwrap(),
            LinearMap::subsample(n, 2, 0).unwrap(),
        ],
    )
    .unwrap();
    let b = LinearMap::replicate(32, 2).unwrap();
    let w = (0..32).map(|_| rng.gen_range(0.0..1.0)).collect();
    (a, b, w)
}

#[test]
fn identity_system_single_pass_is_plain_compression() {
    let w = make_chirp(256).unwrap();
    let id = LinearMap::identity(256);
    let codec = TreeCodec::default();
    for nu in [0.0, 1e-4, 3e-3] {
        let cfg = AdmmConfig {
            theta: nu,
            max_iters: 1,
            ..Default::default()
        };
        let out = admm::run(&w, &id, &id, &codec, &cfg).unwrap();
        assert_eq!(out.blob, codec.compress(&w, nu).unwrap());
        assert_eq!(out.iterations(), 1);
    }
}

#[test]
fn dual_update_and_z_step_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (a, b, w) = small_system(&mut rng);
    let codec = TreeCodec::default();
    let cfg = AdmmConfig {
        theta: 1e-3,
        max_iters: 12,
        tol: 0.0,
        ..Default::default()
    };
    let mut prev_u_next: Option<Vec<f64>> = None;
    let mut count = 0;
    admm::run_observed(&w, &a, &b, &codec, &cfg, |s| {
        count += 1;
        assert_eq!(s.u_next, add(&s.u, &sub(&s.v_hat, &s.z_hat)), "t = {}", s.t);
        if let Some(p) = &prev_u_next {
            assert_eq!(p, &s.u);
        }
        prev_u_next = Some(s.u_next.clone());
        let r = normal_equation_residual(&a, &b, &w, &s.v_tilde, cfg.beta_tilde, &s.z_hat).unwrap();
        assert!(r <= 1e-9, "normal residual {r} at t = {}", s.t);
        assert!(s.residual.is_finite() && s.residual >= 0.0);
    })
    .unwrap();
    assert_eq!(count, 12);
}

#[test]
fn stiff_proximity_freezes_iterates() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (a, b, w) = small_system(&mut rng);
    let codec = TreeCodec::default();
    let cfg = AdmmConfig {
        theta: 5e-4,
        beta_tilde: 1e8,
        max_iters: 3,
        tol: 0.0,
        ..Default::default()
    };
    let mut residuals = Vec::new();
    admm::run_observed(&w, &a, &b, &codec, &cfg, |s| residuals.push(s.residual)).unwrap();
    assert!(residuals[1] <= 1e-6 * norm(&w), "{residuals:?}");
}

#[test]
fn chirp_trace_stays_bounded() {
    let x = make_chirp(1024).unwrap();
    let sys = SystemModel::reference(1024, 3).unwrap();
    let w = sys.acquire(&x).unwrap();
    let bound = 1e3 * norm(&w);
    let codec = TreeCodec::default();
    let cfg = AdmmConfig::default().with_theta(5e-4);
    let mut seen = 0;
    let out = admm::run_observed(&w, &sys.a, &sys.b, &codec, &cfg, |s| {
        seen += 1;
        for v in [&s.z_tilde, &s.v_hat, &s.v_tilde, &s.z_hat, &s.u, &s.u_next] {
            assert!(norm(v) <= bound);
        }
        assert!(s.residual.is_finite());
    })
    .unwrap();
    assert!(seen <= 40);
    assert_eq!(out.iterations(), seen);
    if out.stop == StopReason::IterationCap {
        assert_eq!(seen, 40);
    }
    assert!(out.trace.iter().any(|s| s.t == out.best_iteration));
}

#[test]
fn mismatched_dimensions_are_rejected() {
    let a = LinearMap::subsample(8, 2, 0).unwrap();
    let b = LinearMap::replicate(4, 2).unwrap();
    let codec = TreeCodec::default();
    let err = admm::run(&[0.0; 8], &a, &b, &codec, &AdmmConfig::default()).unwrap_err();
    assert!(matches!(err, admm::AdmmError::Dimensions(_)));
}
