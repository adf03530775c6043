mod common;

use common::random_cloud;
use depthsplat_core::density::Remap;
use depthsplat_core::scene::{CloudGrads, PARAMS_PER_GAUSSIAN};
use depthsplat_core::train::adam::{adam_scalar, rate_row};
use depthsplat_core::train::{AdamConfig, LearningRates, OptimizerState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Textbook Adam on a vector, written out independently.
struct ReferenceAdam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl ReferenceAdam {
    fn step(&mut self, x: &mut [f64], g: &[f64], lr: &[f64]) {
        self.t += 1;
        for i in 0..x.len() {
            self.m[i] = 0.9 * self.m[i] + 0.1 * g[i];
            self.v[i] = 0.999 * self.v[i] + 0.001 * g[i] * g[i];
            let mh = self.m[i] / (1.0 - 0.9f64.powi(self.t));
            let vh = self.v[i] / (1.0 - 0.999f64.powi(self.t));
            x[i] -= lr[i] * mh / (vh.sqrt() + 1e-15);
        }
    }
}

#[test]
fn first_step_moves_by_learning_rate() {
    let cfg = AdamConfig::default();
    let (mut m, mut v) = (0.0, 0.0);
    let p = adam_scalar(1.0, 1.0, &mut m, &mut v, 0.1, &cfg, 1.0 - cfg.beta1, 1.0 - cfg.beta2);
    assert!((p - 0.9).abs() <= 1e-12);
}

#[test]
fn zero_gradient_leaves_parameter_and_decays_moments() {
    let cfg = AdamConfig::default();
    let (mut m, mut v) = (0.5, 0.25);
    let p = adam_scalar(2.0, 0.0, &mut m, &mut v, 0.1, &cfg, 0.5, 0.5);
    assert!((m - 0.45).abs() <= 1e-15 && (v - 0.24975).abs() <= 1e-15);
    assert!(p < 2.0);
    let mut st = OptimizerState::new(3);
    let mut cloud = random_cloud(0, 3, (2.0, 4.0));
    let before = cloud.clone();
    st.update(&mut cloud, &CloudGrads::zeros(3), &[0.1; PARAMS_PER_GAUSSIAN], &cfg);
    assert_eq!(cloud, before);
}

#[test]
fn matches_reference_over_100_random_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 4;
    let mut cloud = random_cloud(5, n, (2.0, 4.0));
    let mut st = OptimizerState::new(n);
    let rates = rate_row(&LearningRates::default(), 3e-4, 1);
    let mut flat: Vec<f64> = (0..n)
        .flat_map(|i| {
            let g = cloud.get(i);
            let mut row = Vec::new();
            row.extend(g.position);
            row.extend(g.log_scale);
            row.extend(g.rotation);
            row.push(g.opacity_logit);
            row.extend(g.sh_coeffs);
            row
        })
        .collect();
    let lr: Vec<f64> = (0..n).flat_map(|_| rates).collect();
    let mut reference = ReferenceAdam { m: vec![0.0; flat.len()], v: vec![0.0; flat.len()], t: 0 };
    for _ in 0..100 {
        let mut grads = CloudGrads::zeros(n);
        let mut gflat = Vec::new();
        for i in 0..n {
            for k in 0..3 {
                grads.positions[i][k] = rng.random_range(-1.0..1.0);
                grads.log_scales[i][k] = rng.random_range(-1.0..1.0);
            }
            for k in 0..4 {
                grads.rotations[i][k] = rng.random_range(-1.0..1.0);
            }
            grads.opacity_logits[i] = rng.random_range(-1.0..1.0);
            for k in 0..12 {
                grads.sh_coeffs[i][k] = rng.random_range(-1.0..1.0);
            }
            gflat.extend(grads.flat(i));
        }
        st.update(&mut cloud, &grads, &rates, &AdamConfig::default());
        reference.step(&mut flat, &gflat, &lr);
    }
    for i in 0..n {
        let g = cloud.get(i);
        for k in 0..PARAMS_PER_GAUSSIAN {
            let ours = g.param(depthsplat_core::scene::ParamKind::from_flat(k));
            assert!((ours - flat[i * PARAMS_PER_GAUSSIAN + k]).abs() <= 1e-10, "gaussian {i} slot {k}");
        }
    }
}

#[test]
fn rate_row_groups() {
    let lr = LearningRates::default();
    let row = rate_row(&lr, 0.123, 1);
    assert_eq!(row[..3], [0.123; 3]);
    assert_eq!(row[3..6], [lr.log_scale; 3]);
    assert_eq!(row[6..10], [lr.rotation; 4]);
    assert_eq!(row[10], lr.opacity);
    for c in 0..3 {
        assert_eq!(row[11 + 4 * c], lr.sh_dc);
        assert_eq!(row[12 + 4 * c..15 + 4 * c], [lr.sh_rest; 3]);
    }
    let dc_only = rate_row(&lr, 0.123, 0);
    assert_eq!(dc_only[12..15], [0.0; 3]);
}

#[test]
fn position_rate_endpoints() {
    let lr = LearningRates::default();
    assert!((lr.position(0, 10_000, 2.0) - 1.6e-4 * 2.0).abs() <= 1e-18);
    assert!((lr.position(10_000, 10_000, 2.0) - 1.6e-6 * 2.0).abs() <= 1e-18);
    let mid = lr.position(5_000, 10_000, 1.0);
    assert!((mid - (1.6e-4f64 * 1.6e-6).sqrt()).abs() <= 1e-15);
}

#[test]
fn remap_zeroes_new_moments() {
    let mut st = OptimizerState::new(2);
    st.m[0] = [1.0; PARAMS_PER_GAUSSIAN];
    st.m[1] = [2.0; PARAMS_PER_GAUSSIAN];
    st.v = st.m.clone();
    st.remap(&Remap { remap: vec![Some(1), None, Some(0)] });
    assert_eq!(st.len(), 3);
    assert_eq!(st.m[0], [2.0; PARAMS_PER_GAUSSIAN]);
    assert_eq!(st.m[1], [0.0; PARAMS_PER_GAUSSIAN]);
    assert_eq!(st.v[2], [1.0; PARAMS_PER_GAUSSIAN]);
}
