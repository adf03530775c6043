//! Parameter activations and covariance construction.
//!
//! Quaternions are stored `(w, x, y, z)` and normalized on use. Covariance is
//! `Σ = R S Sᵀ Rᵀ` with `S = diag(exp(log_scale))`.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Below this norm a raw quaternion is considered degenerate.
pub const QUAT_NORM_FLOOR: f64 = 1e-12;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Normalizes a raw quaternion, flooring the norm at [`QUAT_NORM_FLOOR`].
/// Returns the unit quaternion and the norm that was divided out.
#[inline]
pub fn normalize_quaternion(q: [f64; 4]) -> ([f64; 4], f64) {
    let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
        .sqrt()
        .max(QUAT_NORM_FLOOR);
    ([q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm], norm)
}

/// Rotation matrix of a unit quaternion `(w, x, y, z)`.
pub fn rotation_matrix(q: [f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Gradient of `L(R(q))` with respect to the unit quaternion `q`, given `dL/dR`.
pub fn rotation_matrix_backward(q: [f64; 4], dl_dr: &Matrix3<f64>) -> [f64; 4] {
    let [w, x, y, z] = q;
    let g = |m: Matrix3<f64>| dl_dr.component_mul(&m).sum();
    let dw = Matrix3::new(0.0, -2.0 * z, 2.0 * y, 2.0 * z, 0.0, -2.0 * x, -2.0 * y, 2.0 * x, 0.0);
    let dx = Matrix3::new(
        0.0,
        2.0 * y,
        2.0 * z,
        2.0 * y,
        -4.0 * x,
        -2.0 * w,
        2.0 * z,
        2.0 * w,
        -4.0 * x,
    );
    let dy = Matrix3::new(
        -4.0 * y,
        2.0 * x,
        2.0 * w,
        2.0 * x,
        0.0,
        2.0 * z,
        -2.0 * w,
        2.0 * z,
        -4.0 * y,
    );
    let dz = Matrix3::new(
        -4.0 * z,
        -2.0 * w,
        2.0 * x,
        2.0 * w,
        -4.0 * z,
        2.0 * y,
        2.0 * x,
        2.0 * y,
        0.0,
    );
    [g(dw), g(dx), g(dy), g(dz)]
}

/// Chains a gradient on the normalized quaternion back to the raw one.
pub fn normalize_quaternion_backward(q_unit: [f64; 4], norm: f64, dl_dunit: [f64; 4]) -> [f64; 4] {
    let dot: f64 = (0..4).map(|k| q_unit[k] * dl_dunit[k]).sum();
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[k] = (dl_dunit[k] - q_unit[k] * dot) / norm;
    }
    out
}

/// Intermediate pieces of the covariance factorization, reused by the backward pass.
#[derive(Debug, Clone, Copy)]
pub struct CovarianceParts {
    pub rotation: Matrix3<f64>,
    pub unit_quaternion: [f64; 4],
    pub quaternion_norm: f64,
    pub scale: Vector3<f64>,
    pub covariance: Matrix3<f64>,
}

/// Covariance factorization without input validation (training hot path).
pub fn covariance_parts(log_scale: [f64; 3], rotation: [f64; 4]) -> CovarianceParts {
    let (unit, norm) = normalize_quaternion(rotation);
    let r = rotation_matrix(unit);
    let scale = Vector3::new(log_scale[0].exp(), log_scale[1].exp(), log_scale[2].exp());
    let m = r * Matrix3::from_diagonal(&scale);
    CovarianceParts {
        rotation: r,
        unit_quaternion: unit,
        quaternion_norm: norm,
        scale,
        covariance: m * m.transpose(),
    }
}

/// `Σ = R S Sᵀ Rᵀ` from a log-scale vector and a raw quaternion.
pub fn covariance_from_params(log_scale: [f64; 3], rotation: [f64; 4]) -> Result<Matrix3<f64>> {
    if log_scale.iter().chain(rotation.iter()).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateParameter(format!(
            "non-finite covariance parameters: log_scale={log_scale:?} rotation={rotation:?}"
        )));
    }
    let norm = rotation.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < QUAT_NORM_FLOOR {
        return Err(Error::DegenerateParameter(format!(
            "quaternion norm {norm:e} below {QUAT_NORM_FLOOR:e}"
        )));
    }
    let parts = covariance_parts(log_scale, rotation);
    if parts.scale.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(Error::DegenerateParameter(format!(
            "activated scale {:?} is not finite and positive",
            parts.scale
        )));
    }
    Ok(parts.covariance)
}

/// Gradients of `L(Σ)` with respect to `log_scale` and the raw quaternion.
///
/// `dl_dcov` holds `∂L/∂Σ_ij` for every entry and is assumed symmetric.
pub fn covariance_backward(parts: &CovarianceParts, dl_dcov: &Matrix3<f64>) -> ([f64; 3], [f64; 4]) {
    let m = parts.rotation * Matrix3::from_diagonal(&parts.scale);
    let dl_dm = (dl_dcov + dl_dcov.transpose()) * m;
    let mut dl_dlog_scale = [0.0; 3];
    let mut dl_drot = Matrix3::zeros();
    for k in 0..3 {
        let mut ds = 0.0;
        for i in 0..3 {
            ds += dl_dm[(i, k)] * parts.rotation[(i, k)];
            dl_drot[(i, k)] = dl_dm[(i, k)] * parts.scale[k];
        }
        dl_dlog_scale[k] = ds * parts.scale[k];
    }
    let dl_dunit = rotation_matrix_backward(parts.unit_quaternion, &dl_drot);
    let dl_dq = normalize_quaternion_backward(parts.unit_quaternion, parts.quaternion_norm, dl_dunit);
    (dl_dlog_scale, dl_dq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn identity_params_give_identity_covariance() {
        let cov = covariance_from_params([0.0; 3], [1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(cov, Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn axis_aligned_scaling_squares() {
        let cov = covariance_from_params([2f64.ln(), 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(cov, Matrix3::from_diagonal(&Vector3::new(4.0, 1.0, 1.0)), epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_finite_and_zero_quaternion() {
        assert!(matches!(
            covariance_from_params([f64::NAN, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]),
            Err(Error::DegenerateParameter(_))
        ));
        assert!(matches!(
            covariance_from_params([0.0; 3], [0.0; 4]),
            Err(Error::DegenerateParameter(_))
        ));
        assert!(matches!(
            covariance_from_params([0.0; 3], [1.0, f64::INFINITY, 0.0, 0.0]),
            Err(Error::DegenerateParameter(_))
        ));
    }

    #[test]
    fn sigmoid_matches_formula_and_limits() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(40.0) <= 1.0 && sigmoid(40.0) > 0.999_999);
        assert!(sigmoid(-800.0) >= 0.0);
        for &x in &[-7.3, -0.2, 0.0, 1.5, 9.0] {
            assert_abs_diff_eq!(sigmoid(x), 1.0 / (1.0 + (-x).exp()), epsilon = 1e-12);
            assert_abs_diff_eq!(sigmoid(logit(sigmoid(x))), sigmoid(x), epsilon = 1e-12);
        }
        let mut prev = sigmoid(-10.0);
        for i in -99..100 {
            let s = sigmoid(i as f64 / 10.0);
            assert!(s >= prev);
            prev = s;
        }
    }

    fn fd_check_covariance(log_scale: [f64; 3], q: [f64; 4], weights: Matrix3<f64>) {
        // L = Σ_ij W_ij Σ_ij with symmetric W
        let w = (weights + weights.transpose()) * 0.5;
        let loss = |ls: [f64; 3], q: [f64; 4]| covariance_parts(ls, q).covariance.component_mul(&w).sum();
        let parts = covariance_parts(log_scale, q);
        let (gs, gq) = covariance_backward(&parts, &w);
        let h = 1e-6;
        for k in 0..3 {
            let (mut p, mut m) = (log_scale, log_scale);
            p[k] += h;
            m[k] -= h;
            let fd = (loss(p, q) - loss(m, q)) / (2.0 * h);
            assert!((fd - gs[k]).abs() <= 1e-5 * fd.abs().max(gs[k].abs()).max(1e-3), "scale {k}: {fd} vs {}", gs[k]);
        }
        for k in 0..4 {
            let (mut p, mut m) = (q, q);
            p[k] += h;
            m[k] -= h;
            let fd = (loss(log_scale, p) - loss(log_scale, m)) / (2.0 * h);
            assert!((fd - gq[k]).abs() <= 1e-5 * fd.abs().max(gq[k].abs()).max(1e-3), "quat {k}: {fd} vs {}", gq[k]);
        }
    }

    proptest! {
        #[test]
        fn covariance_symmetric_psd(
            ls in prop::array::uniform3(-3.0f64..2.0),
            q in prop::array::uniform4(-1.0f64..1.0),
        ) {
            prop_assume!(q.iter().map(|v| v * v).sum::<f64>() > 1e-4);
            let cov = covariance_from_params(ls, q).unwrap();
            let scale = cov.abs().max().max(1.0);
            prop_assert!((cov - cov.transpose()).abs().max() <= 1e-12 * scale);
            let eig = cov.symmetric_eigenvalues();
            prop_assert!(eig.min() >= -1e-12 * scale);
        }

        #[test]
        fn isotropic_covariance_is_rotation_invariant(
            a in -2.0f64..1.0,
            q in prop::array::uniform4(-1.0f64..1.0),
        ) {
            prop_assume!(q.iter().map(|v| v * v).sum::<f64>() > 1e-4);
            let cov = covariance_from_params([a; 3], q).unwrap();
            let expected = Matrix3::identity() * (2.0 * a).exp();
            prop_assert!((cov - expected).abs().max() <= 1e-10);
        }

        #[test]
        fn covariance_gradients_match_finite_differences(
            ls in prop::array::uniform3(-1.0f64..0.5),
            q in prop::array::uniform4(-1.0f64..1.0),
            w in prop::array::uniform9(-1.0f64..1.0),
        ) {
            prop_assume!(q.iter().map(|v| v * v).sum::<f64>() > 0.05);
            fd_check_covariance(ls, q, Matrix3::from_row_slice(&w));
        }
    }
}
