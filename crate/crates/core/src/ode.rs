//! Classical fourth-order Runge–Kutta on small fixed-size states.

/// One RK4 step of `y' = rhs(s, y)` from `s` with step `h`.
pub fn rk4_step<const N: usize, E>(
    rhs: &mut impl FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
    s: f64,
    y: &[f64; N],
    h: f64,
) -> Result<[f64; N], E> {
    let axpy = |y: &[f64; N], k: &[f64; N], c: f64| {
        let mut out = *y;
        for i in 0..N {
            out[i] += c * k[i];
        }
        out
    };
    let k1 = rhs(s, y)?;
    let k2 = rhs(s + 0.5 * h, &axpy(y, &k1, 0.5 * h))?;
    let k3 = rhs(s + 0.5 * h, &axpy(y, &k2, 0.5 * h))?;
    let k4 = rhs(s + h, &axpy(y, &k3, h))?;
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// Integrate over `steps` equal steps, returning all states including the
/// initial one.
pub fn rk4_path<const N: usize, E>(
    rhs: &mut impl FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
    s0: f64,
    y0: [f64; N],
    h: f64,
    steps: usize,
) -> Result<Vec<[f64; N]>, E> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y0);
    let mut y = y0;
    for k in 0..steps {
        y = rk4_step(rhs, s0 + k as f64 * h, &y, h)?;
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_fourth_order() {
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let mut rhs = |_s: f64, y: &[f64; 1]| Ok::<_, ()>([y[0]]);
            let path = rk4_path(&mut rhs, 0.0, [1.0], h, n).unwrap();
            (path[n][0] - std::f64::consts::E).abs()
        };
        let ratio = err(10) / err(20);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }

    #[test]
    fn polynomial_rhs_exact() {
        let mut rhs = |s: f64, _y: &[f64; 1]| Ok::<_, ()>([3.0 * s * s]);
        let path = rk4_path(&mut rhs, 0.0, [0.0], 0.25, 8).unwrap();
        assert!((path[8][0] - 8.0).abs() < 1e-13);
    }
}
