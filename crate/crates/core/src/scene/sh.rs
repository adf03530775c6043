//! Degree-1 real spherical harmonics color.
//!
//! Coefficients are stored channel-major: `sh[ch * 4 + k]` with `k = 0` the DC
//! term and `k = 1..=3` the linear terms in the `(y, z, x)` basis order.

/// `Y₀₀`
pub const SH_C0: f64 = 0.282_094_791_773_878_14;
/// Magnitude of the degree-1 basis constants.
pub const SH_C1: f64 = 0.488_602_511_902_919_9;

/// Coefficients per color channel.
pub const SH_COEFFS_PER_CHANNEL: usize = 4;
/// Coefficients per Gaussian (3 channels).
pub const SH_COEFFS: usize = 3 * SH_COEFFS_PER_CHANNEL;

/// Basis values `[Y₀₀, Y₁₋₁, Y₁₀, Y₁₁]` for a unit direction.
#[inline]
pub fn sh_basis(dir: [f64; 3]) -> [f64; 4] {
    [SH_C0, -SH_C1 * dir[1], SH_C1 * dir[2], -SH_C1 * dir[0]]
}

/// Color before any clamping: `0.5 + Σ_k Y_k(d) · sh[ch][k]`.
#[inline]
pub fn sh_to_color_unclamped(sh: &[f64; SH_COEFFS], dir: [f64; 3]) -> [f64; 3] {
    let basis = sh_basis(dir);
    let mut out = [0.5; 3];
    for (ch, c) in out.iter_mut().enumerate() {
        for (k, b) in basis.iter().enumerate() {
            *c += b * sh[ch * SH_COEFFS_PER_CHANNEL + k];
        }
    }
    out
}

/// Training color: clamped below at zero only.
#[inline]
pub fn sh_to_color(sh: &[f64; SH_COEFFS], dir: [f64; 3]) -> [f64; 3] {
    sh_to_color_unclamped(sh, dir).map(|c| c.max(0.0))
}

/// Display color clamped to `[0, 1]`.
#[inline]
pub fn sh_to_display_color(sh: &[f64; SH_COEFFS], dir: [f64; 3]) -> [f64; 3] {
    sh_to_color_unclamped(sh, dir).map(|c| c.clamp(0.0, 1.0))
}

/// Gradients produced by [`sh_backward`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShGrad {
    pub coeffs: [f64; SH_COEFFS],
    pub view_dir: [f64; 3],
}

/// Adjoint of [`sh_to_color`]. Channels clamped at zero pass no gradient.
pub fn sh_backward(sh: &[f64; SH_COEFFS], dir: [f64; 3], dl_dcolor: [f64; 3]) -> ShGrad {
    let raw = sh_to_color_unclamped(sh, dir);
    let basis = sh_basis(dir);
    let mut coeffs = [0.0; SH_COEFFS];
    let mut view_dir = [0.0; 3];
    for ch in 0..3 {
        if raw[ch] < 0.0 {
            continue;
        }
        let g = dl_dcolor[ch];
        let base = ch * SH_COEFFS_PER_CHANNEL;
        for k in 0..SH_COEFFS_PER_CHANNEL {
            coeffs[base + k] = g * basis[k];
        }
        view_dir[1] -= g * SH_C1 * sh[base + 1];
        view_dir[2] += g * SH_C1 * sh[base + 2];
        view_dir[0] -= g * SH_C1 * sh[base + 3];
    }
    ShGrad { coeffs, view_dir }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit(v: [f64; 3]) -> [f64; 3] {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / n, v[1] / n, v[2] / n]
    }

    #[test]
    fn dc_only_is_view_independent() {
        let mut sh = [0.0; SH_COEFFS];
        sh[0] = 0.7;
        sh[4] = -0.3;
        sh[8] = 1.9;
        let a = sh_to_color(&sh, unit([0.3, -0.2, 0.9]));
        let b = sh_to_color(&sh, unit([-1.0, 0.5, 0.1]));
        assert_eq!(a, b);
        assert_abs_diff_eq!(a[0], 0.5 + SH_C0 * 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(a[1], 0.5 - SH_C0 * 0.3, epsilon = 1e-15);
    }

    #[test]
    fn inverse_dc_gives_requested_color() {
        let k0 = (0.8 - 0.5) / SH_C0;
        let sh = [k0, 0.0, 0.0, 0.0, k0, 0.0, 0.0, 0.0, k0, 0.0, 0.0, 0.0];
        for d in [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], unit([1.0, 1.0, 1.0])] {
            for c in sh_to_color(&sh, d) {
                assert_abs_diff_eq!(c, 0.8, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn lower_clamp_in_training_upper_clamp_for_display() {
        let mut sh = [0.0; SH_COEFFS];
        sh[0] = -10.0;
        sh[4] = 10.0;
        let c = sh_to_color(&sh, [0.0, 0.0, 1.0]);
        assert_eq!(c[0], 0.0);
        assert!(c[1] > 1.0);
        let d = sh_to_display_color(&sh, [0.0, 0.0, 1.0]);
        assert_eq!(d[1], 1.0);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero() {
        let sh = [0.3; SH_COEFFS];
        let g = sh_backward(&sh, [0.0, 0.0, 1.0], [0.0; 3]);
        assert!(g.coeffs.iter().all(|v| *v == 0.0));
        assert!(g.view_dir.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn dc_derivative_is_basis_constant() {
        let sh = [0.1; SH_COEFFS];
        let g = sh_backward(&sh, unit([0.2, 0.4, 0.9]), [1.0, 0.0, 0.0]);
        assert_eq!(g.coeffs[0], SH_C0);
        assert_eq!(g.coeffs[4], 0.0);
    }

    #[test]
    fn clamped_channel_has_zero_gradient() {
        let mut sh = [0.0; SH_COEFFS];
        sh[0] = -5.0;
        let g = sh_backward(&sh, [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]);
        assert!(g.coeffs[..4].iter().all(|v| *v == 0.0));
        assert_eq!(g.coeffs[4], SH_C0);
    }

    proptest! {
        #[test]
        fn antipodal_directions_flip_linear_part(
            sh in prop::array::uniform12(-1.0f64..1.0),
            v in prop::array::uniform3(-1.0f64..1.0),
        ) {
            prop_assume!(v.iter().map(|x| x * x).sum::<f64>() > 1e-3);
            let d = unit(v);
            let neg = [-d[0], -d[1], -d[2]];
            let a = sh_to_color_unclamped(&sh, d);
            let b = sh_to_color_unclamped(&sh, neg);
            for ch in 0..3 {
                let dc = 0.5 + 0.282_094_8 * sh[ch * 4];
                // direct evaluation of the linear basis, independent of sh_basis
                let lin = -0.488_602_5 * d[1] * sh[ch * 4 + 1]
                    + 0.488_602_5 * d[2] * sh[ch * 4 + 2]
                    - 0.488_602_5 * d[0] * sh[ch * 4 + 3];
                prop_assert!((a[ch] - (dc + lin)).abs() < 1e-6);
                prop_assert!(((a[ch] - dc) + (b[ch] - dc)).abs() < 1e-6);
                let lin_a = a[ch] - 0.5 - SH_C0 * sh[ch * 4];
                let lin_b = b[ch] - 0.5 - SH_C0 * sh[ch * 4];
                prop_assert!((lin_a + lin_b).abs() <= 1e-15);
            }
        }

        #[test]
        fn affine_in_coefficients(
            a in prop::array::uniform12(-1.0f64..1.0),
            b in prop::array::uniform12(-1.0f64..1.0),
            v in prop::array::uniform3(-1.0f64..1.0),
        ) {
            prop_assume!(v.iter().map(|x| x * x).sum::<f64>() > 1e-3);
            let d = unit(v);
            let mut sum = [0.0; SH_COEFFS];
            for k in 0..SH_COEFFS {
                sum[k] = a[k] + b[k];
            }
            let ca = sh_to_color_unclamped(&a, d);
            let cb = sh_to_color_unclamped(&b, d);
            let cs = sh_to_color_unclamped(&sum, d);
            for ch in 0..3 {
                prop_assert!((cs[ch] - (ca[ch] + cb[ch] - 0.5)).abs() <= 1e-12);
            }
        }

        #[test]
        fn backward_matches_finite_differences(
            sh in prop::array::uniform12(-1.0f64..1.0),
            v in prop::array::uniform3(-1.0f64..1.0),
            up in prop::array::uniform3(-1.0f64..1.0),
        ) {
            prop_assume!(v.iter().map(|x| x * x).sum::<f64>() > 1e-2);
            let d = unit(v);
            let raw = sh_to_color_unclamped(&sh, d);
            // keep away from the clamp kink
            prop_assume!(raw.iter().all(|c| c.abs() > 1e-3));
            let loss = |s: &[f64; SH_COEFFS], d: [f64; 3]| {
                let c = sh_to_color(s, d);
                c[0] * up[0] + c[1] * up[1] + c[2] * up[2]
            };
            let g = sh_backward(&sh, d, up);
            let h = 1e-6;
            for k in 0..SH_COEFFS {
                let (mut p, mut m) = (sh, sh);
                p[k] += h;
                m[k] -= h;
                let fd = (loss(&p, d) - loss(&m, d)) / (2.0 * h);
                prop_assert!((fd - g.coeffs[k]).abs() <= 1e-6 * fd.abs().max(g.coeffs[k].abs()).max(1e-2));
            }
            for k in 0..3 {
                let (mut p, mut m) = (d, d);
                p[k] += h;
                m[k] -= h;
                let fd = (loss(&sh, p) - loss(&sh, m)) / (2.0 * h);
                prop_assert!((fd - g.view_dir[k]).abs() <= 1e-6 * fd.abs().max(g.view_dir[k].abs()).max(1e-2));
            }
        }
    }
}
