mod common;

use common::axis_camera;
use depthsplat_core::colmap::TestView;
use depthsplat_core::io::ColorImage;
use depthsplat_core::metrics::{evaluate, psnr, ssim, EvalReport, ViewMetrics, PSNR_CAP};
use depthsplat_core::scene::GaussianCloud;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn psnr_examples() {
    let t = vec![0.3; 48];
    assert_eq!(psnr(&t, &t).unwrap(), PSNR_CAP);
    let shifted: Vec<f64> = t.iter().map(|v| v + 0.1).collect();
    assert!((psnr(&shifted, &t).unwrap() - 20.0).abs() <= 1e-9);
}

#[test]
fn psnr_matches_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a: Vec<f64> = (0..999).map(|_| rng.random_range(0.0..1.0)).collect();
    let b: Vec<f64> = (0..999).map(|_| rng.random_range(0.0..1.0)).collect();
    let mse: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / 999.0;
    assert!((psnr(&a, &b).unwrap() + 10.0 * mse.log10()).abs() <= 1e-9);
    assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
}

#[test]
fn ssim_identity_and_negative() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (w, h) = (16, 16);
    let a: Vec<f64> = (0..3 * w * h).map(|_| rng.random_range(0.0..1.0)).collect();
    assert!((ssim(&a, &a, w, h).unwrap() - 1.0).abs() <= 1e-12);
    let neg: Vec<f64> = a.iter().map(|v| 1.0 - v).collect();
    assert!(ssim(&neg, &a, w, h).unwrap() < 0.0);
}

#[test]
fn mismatched_sizes_are_rejected() {
    assert!(psnr(&[0.0; 3], &[0.0; 6]).is_err());
    assert!(ssim(&[0.0; 300], &[0.0; 300], 10, 10).is_err());
}

#[test]
fn empty_cloud_on_black_targets_hits_the_cap() {
    let cam = axis_camera(16, 16, 14.0);
    let view = TestView {
        name: "black".into(),
        camera: cam,
        image: ColorImage::new(16, 16),
        extrapolated: false,
    };
    let report = evaluate(&GaussianCloud::new(1.0), &[view], [0.0; 3]).unwrap();
    assert_eq!(report.views[0].psnr, PSNR_CAP);
    assert!((report.views[0].ssim - 1.0).abs() <= 1e-12);
}

#[test]
fn report_means_are_row_averages() {
    let rows = vec![
        ViewMetrics { name: "a".into(), psnr: 20.0, ssim: 0.5, extrapolated: true },
        ViewMetrics { name: "b".into(), psnr: 30.0, ssim: 0.9, extrapolated: false },
        ViewMetrics { name: "c".into(), psnr: 25.0, ssim: 0.7, extrapolated: true },
    ];
    let r = EvalReport::from_views(rows);
    assert!((r.mean_psnr - 25.0).abs() <= 1e-12);
    assert!((r.mean_ssim - 0.7).abs() <= 1e-12);
    assert!((r.extrapolated_psnr.unwrap() - 22.5).abs() <= 1e-12);
    assert!((r.extrapolated_ssim.unwrap() - 0.6).abs() <= 1e-12);
    let csv = r.csv();
    assert_eq!(csv.lines().next().unwrap(), "view,psnr,ssim,extrapolated,lpips");
    assert_eq!(csv.lines().count(), 1 + 3 + 2);
}
