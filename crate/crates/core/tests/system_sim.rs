use std::f64::consts::PI;

use sysaware_core::admm::AdmmConfig;
use sysaware_core::linops::LinearMap;
use sysaware_core::system_sim::{
    gaussian_noise, ideal_distortion_check, make_chirp, psnr, sweep, write_rd_csv, Method, SystemModel,
};
use sysaware_core::tree_codec::TreeCodec;

#[test]
fn chirp_spot_values() {
    let x = make_chirp(1024).unwrap();
    for i in [256usize, 512, 768] {
        let t = i as f64 / 1024.0;
        let phase = 2.0 * t + 0.5 * 60.0 * t * t;
        let expected = 0.5 + 0.5 * t * (2.0 * PI * phase).sin();
        assert!((x[i] - expected).abs() < 1e-15, "i = {i}");
    }
}

#[test]
fn noise_energy_concentrates() {
    let m = 4096;
    let sys = SystemModel::new(LinearMap::identity(m), LinearMap::identity(m), 1e-3, 0).unwrap();
    let x = vec![0.5; m];
    for seed in 0..10 {
        let sys = SystemModel { seed, ..sys.clone() };
        let d = ideal_distortion_check(&x, &sys).unwrap();
        assert!((d / 1e-6 - 1.0).abs() < 0.1, "seed {seed}: {d}");
        let n = gaussian_noise(m, 1e-3, seed);
        let energy = n.iter().map(|v| v * v).sum::<f64>() / m as f64;
        // w − Ax cancels the signal, so only rounding at the scale of x remains
        assert!((d - energy).abs() <= 1e-10 * energy);
    }
}

#[test]
fn psnr_matches_two_pass_mse() {
    let x = make_chirp(1024).unwrap();
    let sys = SystemModel::reference(1024, 5).unwrap();
    let codec = TreeCodec::default();
    let pts = sweep(&x, &sys, &codec, &[1e-3], Method::Regular, &AdmmConfig::default()).unwrap();
    let y = &pts.points[0].rendered;
    let mut acc = 0.0;
    for i in 0..x.len() {
        acc += (x[i] - y[i]).powi(2);
    }
    let mse = acc / x.len() as f64;
    let expected = 10.0 * (1.0 / mse).log10();
    assert!((psnr(&x, y, 1.0).unwrap().db - expected).abs() < 1e-10);
    assert!((pts.points[0].psnr.db - expected).abs() < 1e-10);
}

#[test]
fn identity_system_methods_coincide() {
    let x = make_chirp(256).unwrap();
    let sys = SystemModel::identity(256);
    let codec = TreeCodec::default();
    let cfg = AdmmConfig {
        max_iters: 1,
        ..Default::default()
    };
    let params = [1e-4, 1e-3, 1e-2];
    let reg = sweep(&x, &sys, &codec, &params, Method::Regular, &cfg).unwrap();
    let pro = sweep(&x, &sys, &codec, &params, Method::Proposed, &cfg).unwrap();
    for (r, p) in reg.points.iter().zip(&pro.points) {
        assert_eq!(r.param, p.param);
        assert_eq!(r.blob, p.blob);
        assert_eq!(r.psnr, p.psnr);
        assert_eq!(r.iterations, p.iterations);
    }
}

#[test]
fn regular_rate_falls_with_multiplier() {
    let x = make_chirp(1024).unwrap();
    let sys = SystemModel::reference(1024, 1).unwrap();
    let codec = TreeCodec::default();
    let params = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1];
    let out = sweep(&x, &sys, &codec, &params, Method::Regular, &AdmmConfig::default()).unwrap();
    assert_eq!(out.points.len(), 5);
    let mut by_param = out.points.clone();
    by_param.sort_by(|a, b| a.param.total_cmp(&b.param));
    assert!(by_param.windows(2).all(|p| p[1].rate_bpp <= p[0].rate_bpp));
    assert!(out.points.windows(2).all(|p| p[0].rate_bpp <= p[1].rate_bpp));
}

#[test]
fn failed_points_are_recorded() {
    let x = make_chirp(256).unwrap();
    let sys = SystemModel::identity(256);
    let codec = TreeCodec::default();
    let out = sweep(&x, &sys, &codec, &[1e-3, -1.0], Method::Regular, &AdmmConfig::default()).unwrap();
    assert_eq!(out.points.len(), 1);
    assert_eq!(out.failures.len(), 1);
    assert_eq!(out.failures[0].param, -1.0);
    assert!(sweep(&x, &sys, &codec, &[], Method::Regular, &AdmmConfig::default()).is_err());
}

#[test]
fn csv_is_deterministic() {
    let x = make_chirp(512).unwrap();
    let render = || {
        let sys = SystemModel::blur_subsample(512, 15.0, 15, 4, 1e-3, 42).unwrap();
        let out = sweep(&x, &sys, &TreeCodec::default(), &[1e-4, 1e-3], Method::Proposed, &AdmmConfig::default())
            .unwrap();
        let mut buf = Vec::new();
        write_rd_csv(&out.points, 42, &mut buf).unwrap();
        buf
    };
    let first = render();
    assert_eq!(first, render());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("method,param,rate_bpp,psnr_db,iterations,seed\nproposed,"));
}

#[test]
fn dimension_chain_for_power_of_two_lengths() {
    for log2 in 3..11 {
        let n = 1usize << log2;
        for factor in [1usize, 2, 4, 8] {
            let sys = SystemModel::blur_subsample(n, 2.0, 5, factor, 0.0, 0).unwrap();
            let w = sys.acquire(&make_chirp(n).unwrap()).unwrap();
            assert_eq!(w.len(), n / factor);
            assert_eq!(sys.render(&w).unwrap().len(), n);
        }
    }
}
