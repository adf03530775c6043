mod common;

use common::{axis_camera, isotropic, max_abs_diff, random_cloud};
use depthsplat_core::render::{
    bin_and_sort, oracle_render, pixel_box, project, rasterize_backward, rasterize_forward, render, PixelAdjoints,
    ProjectedSplat, TILE_SIZE,
};
use depthsplat_core::scene::{GaussianCloud, Gaussian3D};
use depthsplat_core::Real;
use proptest::prelude::*;

fn pixel(w: usize, x: usize, y: usize) -> usize {
    y * w + x
}

fn check_single_splat<T: Real>() {
    let cam = axis_camera(33, 33, 40.0);
    let cloud = GaussianCloud::from_gaussians([isotropic([0.0, 0.0, 2.0], 0.05, 0.5, [1.0, 0.0, 0.0])], 1.0);
    for out in [render::<T>(&cloud, &cam, [0.0; 3]), oracle_render::<T>(&cloud, &cam, [0.0; 3])] {
        let p = pixel(33, 16, 16);
        let c = &out.color_f64()[3 * p..3 * p + 3];
        assert!(max_abs_diff(c, &[0.5, 0.0, 0.0]) <= 1e-6, "{c:?}");
        assert!((out.depth_f64()[p] - 1.0).abs() <= 1e-6);
        assert!((out.alpha_f64()[p] - 0.5).abs() <= 1e-6);
    }
}

#[test]
fn single_splat_center_matches_one_term_blend() {
    check_single_splat::<f32>();
    check_single_splat::<f64>();
}

#[test]
fn two_stacked_splats_blend_depth() {
    let cam = axis_camera(33, 33, 40.0);
    let cloud = GaussianCloud::from_gaussians(
        [
            isotropic([0.0, 0.0, 3.0], 0.1, 0.5, [0.0, 1.0, 0.0]),
            isotropic([0.0, 0.0, 1.0], 0.05, 0.5, [1.0, 0.0, 0.0]),
        ],
        1.0,
    );
    let out = render::<f64>(&cloud, &cam, [0.0; 3]);
    let p = pixel(33, 16, 16);
    assert!((out.depth[p] - 1.25).abs() <= 1e-12, "{}", out.depth[p]);
    assert!((out.alpha[p] - 0.75).abs() <= 1e-12);
    assert!(max_abs_diff(&out.color[3 * p..3 * p + 3], &[0.5, 0.25, 0.0]) <= 1e-12);
}

#[test]
fn empty_scene_is_background() {
    let cam = axis_camera(20, 12, 15.0);
    let bg = [0.2, 0.4, 0.6];
    let out = render::<f64>(&GaussianCloud::new(1.0), &cam, bg);
    for p in 0..cam.pixel_count() {
        assert_eq!(&out.color[3 * p..3 * p + 3], &bg);
        assert_eq!(out.depth[p], 0.0);
        assert_eq!(out.alpha[p], 0.0);
    }
}

fn manual_splat(center: [f64; 2], radius: f64) -> ProjectedSplat<f64> {
    ProjectedSplat {
        center,
        conic: [1.0, 0.0, 1.0],
        view_depth: 2.0,
        radius,
        opacity: 0.5,
        color: [1.0, 0.0, 0.0],
        source_index: 0,
    }
}

#[test]
fn backward_single_splat_one_term_chain_rule() {
    let (w, h) = (16, 16);
    let splats = vec![manual_splat([7.0, 7.0], 3.0)];
    let bins = bin_and_sort(&splats, w, h, TILE_SIZE);
    let out = rasterize_forward(splats, bins, [0.0; 3]);
    let p = pixel(w, 7, 7);

    let mut adj = PixelAdjoints::<f64>::zeros(w * h);
    adj.color[3 * p] = 1.0;
    let g = rasterize_backward(&out, &adj).unwrap();
    assert!((g[0].color[0] - 0.5).abs() <= 1e-12);
    assert_eq!(g[0].view_depth, 0.0);

    let mut adj = PixelAdjoints::<f64>::zeros(w * h);
    adj.depth[p] = 1.0;
    let g = rasterize_backward(&out, &adj).unwrap();
    assert!((g[0].view_depth - 0.5).abs() <= 1e-12);
    assert_eq!(g[0].color, [0.0; 3]);
}

#[test]
fn zero_adjoints_give_zero_gradients() {
    let cloud = random_cloud(3, 20, (2.0, 5.0));
    let cam = axis_camera(24, 24, 20.0);
    let out = render::<f64>(&cloud, &cam, [0.1; 3]);
    let grads = rasterize_backward(&out, &PixelAdjoints::zeros(cam.pixel_count())).unwrap();
    for g in grads {
        assert_eq!(g, Default::default());
    }
}

#[test]
fn on_axis_projection_closed_form() {
    let (f, sigma, z) = (50.0, 0.04, 2.5);
    let cam = axis_camera(64, 48, f);
    let cloud = GaussianCloud::from_gaussians([isotropic([0.0, 0.0, z], sigma, 0.7, [0.3; 3])], 1.0);
    let proj = project(&cloud, &cam);
    assert_eq!(proj.splats.len(), 1);
    let s = &proj.splats[0];
    assert!(max_abs_diff(&s.center, &[cam.cx, cam.cy]) <= 1e-12);
    let var = (f * sigma / z).powi(2) + 0.3;
    assert!(max_abs_diff(&s.conic, &[1.0 / var, 0.0, 1.0 / var]) <= 1e-12, "{:?}", s.conic);
    assert!((s.radius - 3.0 * var.sqrt()).abs() <= 1e-9);
    assert!((s.view_depth - z).abs() <= 1e-12);
}

#[test]
fn doubling_world_scale_doubles_screen_sigma() {
    let cam = axis_camera(64, 64, 60.0);
    let screen_std = |scale: f64| {
        let g = Gaussian3D {
            log_scale: [(0.05 * scale).ln(), (0.02 * scale).ln(), (0.03 * scale).ln()],
            rotation: [0.9, 0.1, -0.3, 0.2],
            ..isotropic([0.0, 0.0, 3.0], 1.0, 0.5, [0.5; 3])
        };
        let s = &project(&GaussianCloud::from_gaussians([g], 1.0), &cam).splats[0];
        // undo the dilation from the inverse covariance
        let det = s.conic[0] * s.conic[2] - s.conic[1] * s.conic[1];
        let (a, c) = (s.conic[2] / det - 0.3, s.conic[0] / det - 0.3);
        [a.sqrt(), c.sqrt()]
    };
    let (one, two) = (screen_std(1.0), screen_std(2.0));
    for k in 0..2 {
        assert!((two[k] - 2.0 * one[k]).abs() <= 1e-9 * one[k].max(1.0), "{one:?} {two:?}");
    }
}

#[test]
fn splats_behind_camera_are_culled() {
    let cam = axis_camera(32, 32, 30.0);
    let cloud = GaussianCloud::from_gaussians(
        [
            isotropic([0.0, 0.0, -2.0], 0.1, 0.9, [1.0; 3]),
            isotropic([0.0, 0.0, 0.005], 0.1, 0.9, [1.0; 3]),
            isotropic([0.0, 0.0, 2.0], 0.1, 0.9, [1.0; 3]),
        ],
        1.0,
    );
    let proj = project(&cloud, &cam);
    let kept: Vec<usize> = proj.splats.iter().map(|s| s.source_index).collect();
    assert_eq!(kept, vec![2]);
}

#[test]
fn small_splat_lands_in_one_tile() {
    let splats = vec![manual_splat([20.3, 37.6], 1.0)];
    let bins = bin_and_sort(&splats, 64, 64, 16);
    let hit: Vec<usize> = (0..bins.tile_count()).filter(|&t| !bins.lists[t].is_empty()).collect();
    assert_eq!(hit, vec![2 * 4 + 1]);
}

#[test]
fn corner_splat_lands_in_four_tiles() {
    let splats = vec![manual_splat([15.5, 15.5], 2.0)];
    let bins = bin_and_sort(&splats, 64, 64, 16);
    let hit: Vec<usize> = (0..bins.tile_count()).filter(|&t| !bins.lists[t].is_empty()).collect();
    assert_eq!(hit, vec![0, 1, 4, 5]);
}

#[test]
fn tile_lists_match_brute_force_overlap() {
    let cam = axis_camera(80, 56, 60.0);
    let cloud = random_cloud(11, 300, (1.0, 6.0));
    let splats = project(&cloud, &cam).splats;
    let bins = bin_and_sort(&splats, cam.width, cam.height, TILE_SIZE);
    for t in 0..bins.tile_count() {
        let (x0, x1, y0, y1) = bins.tile_bounds(t);
        let mut expected: Vec<u32> = (0..splats.len() as u32)
            .filter(|&i| {
                pixel_box(&splats[i as usize], cam.width, cam.height)
                    .is_some_and(|b| (b.x0 as usize) < x1 && (b.x1 as usize) >= x0 && (b.y0 as usize) < y1 && (b.y1 as usize) >= y0)
            })
            .collect();
        let mut got = bins.lists[t].clone();
        for pair in got.windows(2) {
            let (a, b) = (&splats[pair[0] as usize], &splats[pair[1] as usize]);
            assert!(a.view_depth <= b.view_depth, "tile {t} not sorted");
        }
        got.sort_unstable();
        expected.sort_unstable();
        assert_eq!(got, expected, "tile {t}");
    }
}

#[test]
fn tile_renderer_matches_oracle_on_random_scenes() {
    let cam = axis_camera(64, 64, 55.0);
    for seed in 0..5 {
        let cloud = random_cloud(100 + seed, 100, (1.0, 6.0));
        let bg = [0.1, 0.3, 0.7];
        let (a, b) = (render::<f32>(&cloud, &cam, bg), oracle_render::<f32>(&cloud, &cam, bg));
        assert!(max_abs_diff(&a.color_f64(), &b.color_f64()) <= 1e-6);
        assert!(max_abs_diff(&a.depth_f64(), &b.depth_f64()) <= 1e-6);
        assert!(max_abs_diff(&a.alpha_f64(), &b.alpha_f64()) <= 1e-6);
        let (a, b) = (render::<f64>(&cloud, &cam, bg), oracle_render::<f64>(&cloud, &cam, bg));
        assert!(max_abs_diff(&a.color, &b.color) <= 1e-12);
        assert!(max_abs_diff(&a.depth, &b.depth) <= 1e-12);
        assert!(max_abs_diff(&a.alpha, &b.alpha) <= 1e-12);
    }
}

#[test]
fn equal_depth_ties_render_identically() {
    let cam = axis_camera(48, 48, 40.0);
    let mut cloud = random_cloud(5, 60, (2.0, 2.0 + 1e-9));
    for p in cloud.positions.iter_mut() {
        p[2] = 2.0;
    }
    let (a, b) = (render::<f64>(&cloud, &cam, [0.0; 3]), oracle_render::<f64>(&cloud, &cam, [0.0; 3]));
    assert_eq!(a.color, b.color);
    assert_eq!(a.depth, b.depth);
    assert_eq!(a.alpha, b.alpha);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn render_invariants(seed in 0u64..10_000, n in 0usize..60) {
        let cam = axis_camera(40, 32, 35.0);
        let cloud = random_cloud(seed, n, (0.5, 8.0));
        let out = render::<f64>(&cloud, &cam, [0.0; 3]);
        for p in 0..cam.pixel_count() {
            let a = out.alpha[p];
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((a - (1.0 - out.final_transmittance[p])).abs() <= 1e-15);
            prop_assert!(out.depth[p] >= 0.0);
            if a == 0.0 {
                prop_assert_eq!(out.depth[p], 0.0);
            }
        }
    }
}
