//! The unnormalized radial bump `exp(1 / (|z|^2 - 1))` on the open unit ball
//! and its partial derivatives.

/// Step for the nested central differences used above order 2.
const FD_STEP: f64 = 1e-3;

fn radius_sq(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum()
}

/// Bump value; literal `0.0` outside the open unit ball.
pub(crate) fn value(z: &[f64]) -> f64 {
    let r2 = radius_sq(z);
    if r2 >= 1.0 {
        return 0.0;
    }
    (1.0 / (r2 - 1.0)).exp()
}

/// Partial derivative `d^alpha` of the bump at `z`.
///
/// Orders up to 2 are closed form. With `s = |z|^2 - 1` and `g(s) = exp(1/s)`:
/// `g' = -g/s^2`, `g'' = g (1 + 2s) / s^4`, so
/// `d_i = 2 z_i g'` and `d_i d_j = 4 z_i z_j g'' + 2 delta_ij g'`.
pub(crate) fn derivative(alpha: &[u32], z: &[f64]) -> f64 {
    let order: u32 = alpha.iter().sum();
    let r2 = radius_sq(z);
    if r2 >= 1.0 {
        return 0.0;
    }
    match order {
        0 => value(z),
        1 => {
            let i = alpha.iter().position(|&a| a == 1).unwrap();
            let s = r2 - 1.0;
            let g = (1.0 / s).exp();
            -2.0 * z[i] * g / (s * s)
        }
        2 => {
            let s = r2 - 1.0;
            let g = (1.0 / s).exp();
            let g1 = -g / (s * s);
            let g2 = g * (1.0 + 2.0 * s) / (s * s * s * s);
            let mut axes = alpha.iter().enumerate().flat_map(|(i, &a)| std::iter::repeat_n(i, a as usize));
            let i = axes.next().unwrap();
            let j = axes.next().unwrap();
            let delta = if i == j { 2.0 * g1 } else { 0.0 };
            4.0 * z[i] * z[j] * g2 + delta
        }
        _ => {
            let i = alpha.iter().position(|&a| a > 0).unwrap();
            let mut lower = alpha.to_vec();
            lower[i] -= 1;
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[i] += FD_STEP;
            zm[i] -= FD_STEP;
            (derivative(&lower, &zp) - derivative(&lower, &zm)) / (2.0 * FD_STEP)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central(alpha: &[u32], z: &[f64], axis: usize, h: f64) -> f64 {
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[axis] += h;
        zm[axis] -= h;
        (derivative(alpha, &zp) - derivative(alpha, &zm)) / (2.0 * h)
    }

    #[test]
    fn closed_forms_match_finite_differences() {
        let points: [&[f64]; 3] = [&[0.3], &[-0.2, 0.45], &[0.1, -0.3, 0.25]];
        for z in points {
            let n = z.len();
            for i in 0..n {
                let mut e_i = vec![0u32; n];
                e_i[i] = 1;
                let fd = central(&vec![0; n], z, i, 1e-6);
                assert!((derivative(&e_i, z) - fd).abs() < 1e-7, "first {z:?} {i}");
                for j in 0..n {
                    let mut a = e_i.clone();
                    a[j] += 1;
                    let fd2 = central(&e_i, z, j, 1e-6);
                    assert!((derivative(&a, z) - fd2).abs() < 1e-6, "second {z:?} {i}{j}");
                }
            }
        }
    }

    #[test]
    fn exact_zero_outside_and_on_sphere() {
        assert_eq!(value(&[1.0]), 0.0);
        assert_eq!(value(&[0.6, 0.8]), 0.0);
        assert_eq!(derivative(&[1, 1], &[0.8, 0.7]), 0.0);
        assert_eq!(value(&[0.0]), (-1.0f64).exp());
    }

    #[test]
    fn third_order_via_nested_differences() {
        let z = [0.2];
        let d3 = derivative(&[3], &z);
        let fd = central(&[2], &z, 0, 1e-5);
        assert!((d3 - fd).abs() < 1e-3 * fd.abs().max(1.0));
    }
}
