//! Grid differencing and bicubic Hermite interpolation on a rectangle.
//!
//! Grid arrays are stored with `t` as the outer index: node `(i, j)` lives at
//! `j * nx + i`.

/// Second-order differences along one axis: central inside, one-sided at the
/// two ends. `axis` is 0 for `x` (inner index) and 1 for `t`.
pub fn diff_axis(values: &[f64], nx: usize, nt: usize, h: f64, axis: usize) -> Vec<f64> {
    assert!(nx >= 3 && nt >= 3);
    let mut out = vec![0.0; nx * nt];
    let (n, stride, lines, line_stride) = if axis == 0 { (nx, 1, nt, nx) } else { (nt, nx, nx, 1) };
    for l in 0..lines {
        let base = l * line_stride;
        let at = |k: usize| values[base + k * stride];
        for k in 0..n {
            let d = if k == 0 {
                -3.0 * at(0) + 4.0 * at(1) - at(2)
            } else if k == n - 1 {
                3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)
            } else {
                at(k + 1) - at(k - 1)
            };
            out[base + k * stride] = d / (2.0 * h);
        }
    }
    out
}

/// Interpolated value with its two partials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: f64,
    pub dx: f64,
    pub dt: f64,
}

/// Piecewise bicubic Hermite interpolant; nodal slopes come from
/// [`diff_axis`], so quadratics in each variable are reproduced exactly.
#[derive(Debug, Clone)]
pub struct Bicubic {
    x0: f64,
    t0: f64,
    hx: f64,
    ht: f64,
    nx: usize,
    nt: usize,
    f: Vec<f64>,
    fx: Vec<f64>,
    ft: Vec<f64>,
    fxt: Vec<f64>,
}

fn hermite(p: f64) -> ([f64; 4], [f64; 4]) {
    let p2 = p * p;
    let p3 = p2 * p;
    (
        [
            2.0 * p3 - 3.0 * p2 + 1.0,
            p3 - 2.0 * p2 + p,
            -2.0 * p3 + 3.0 * p2,
            p3 - p2,
        ],
        [
            6.0 * p2 - 6.0 * p,
            3.0 * p2 - 4.0 * p + 1.0,
            -6.0 * p2 + 6.0 * p,
            3.0 * p2 - 2.0 * p,
        ],
    )
}

impl Bicubic {
    #[allow(clippy::too_many_arguments)]
    pub fn new(x0: f64, t0: f64, hx: f64, ht: f64, nx: usize, nt: usize, f: Vec<f64>) -> Self {
        assert_eq!(f.len(), nx * nt);
        let fx = diff_axis(&f, nx, nt, hx, 0);
        let ft = diff_axis(&f, nx, nt, ht, 1);
        let fxt = diff_axis(&ft, nx, nt, hx, 0);
        Bicubic {
            x0,
            t0,
            hx,
            ht,
            nx,
            nt,
            f,
            fx,
            ft,
            fxt,
        }
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x0, self.x0 + self.hx * (self.nx - 1) as f64)
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.t0, self.t0 + self.ht * (self.nt - 1) as f64)
    }

    fn locate(v: f64, v0: f64, h: f64, n: usize) -> Option<(usize, f64)> {
        let s = (v - v0) / h;
        let last = (n - 1) as f64;
        if !s.is_finite() || s < -1e-9 || s > last + 1e-9 {
            return None;
        }
        let s = s.clamp(0.0, last);
        let c = (s.floor() as usize).min(n - 2);
        Some((c, s - c as f64))
    }

    /// `None` outside the grid rectangle.
    pub fn sample(&self, x: f64, t: f64) -> Option<Sample> {
        let (i, p) = Self::locate(x, self.x0, self.hx, self.nx)?;
        let (j, q) = Self::locate(t, self.t0, self.ht, self.nt)?;
        let (hp, dhp) = hermite(p);
        let (hq, dhq) = hermite(q);
        let mut s = Sample {
            value: 0.0,
            dx: 0.0,
            dt: 0.0,
        };
        for (a, di) in [(0usize, 0usize), (2, 1)] {
            for (b, dj) in [(0usize, 0usize), (2, 1)] {
                let k = (j + dj) * self.nx + i + di;
                let terms = [
                    (self.f[k], a, b),
                    (self.fx[k] * self.hx, a + 1, b),
                    (self.ft[k] * self.ht, a, b + 1),
                    (self.fxt[k] * self.hx * self.ht, a + 1, b + 1),
                ];
                for (c, ka, kb) in terms {
                    s.value += c * hp[ka] * hq[kb];
                    s.dx += c * dhp[ka] * hq[kb];
                    s.dt += c * hp[ka] * dhq[kb];
                }
            }
        }
        s.dx /= self.hx;
        s.dt /= self.ht;
        Some(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(f: impl Fn(f64, f64) -> f64, nx: usize, nt: usize) -> Bicubic {
        let hx = 1.0 / (nx - 1) as f64;
        let ht = 2.0 / (nt - 1) as f64;
        let vals = (0..nt)
            .flat_map(|j| (0..nx).map(move |i| (i, j)))
            .map(|(i, j)| f(i as f64 * hx, -1.0 + j as f64 * ht))
            .collect();
        Bicubic::new(0.0, -1.0, hx, ht, nx, nt, vals)
    }

    #[test]
    fn diff_exact_on_quadratics() {
        let nx = 5;
        let nt = 4;
        let vals: Vec<f64> = (0..nt)
            .flat_map(|j| (0..nx).map(move |i| (i as f64 * 0.5, j as f64 * 0.25)))
            .map(|(x, t)| x * x + 3.0 * x * t - t * t)
            .collect();
        let dx = diff_axis(&vals, nx, nt, 0.5, 0);
        let dt = diff_axis(&vals, nx, nt, 0.25, 1);
        for j in 0..nt {
            for i in 0..nx {
                let (x, t) = (i as f64 * 0.5, j as f64 * 0.25);
                assert!((dx[j * nx + i] - (2.0 * x + 3.0 * t)).abs() < 1e-12);
                assert!((dt[j * nx + i] - (3.0 * x - 2.0 * t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reproduces_biquadratic() {
        let f = |x: f64, t: f64| 1.0 + x - 2.0 * t + x * x * t + 0.5 * t * t;
        let b = grid(f, 6, 7);
        for &(x, t) in &[(0.13, -0.77), (0.5, 0.0), (0.99, 0.93), (0.0, -1.0), (1.0, 1.0)] {
            let s = b.sample(x, t).unwrap();
            assert!((s.value - f(x, t)).abs() < 1e-12);
            assert!((s.dx - (1.0 + 2.0 * x * t)).abs() < 1e-11);
            assert!((s.dt - (-2.0 + x * x + t)).abs() < 1e-11);
        }
        assert!(b.sample(1.1, 0.0).is_none());
        assert!(b.sample(0.5, -1.01).is_none());
    }

    #[test]
    fn smooth_function_converges() {
        let f = |x: f64, t: f64| (2.0 * x + t).sin();
        let err = |n: usize| {
            let b = grid(f, n, n);
            (0..50)
                .map(|k| {
                    let x = 0.013 + 0.019 * k as f64;
                    let t = -0.97 + 0.038 * k as f64;
                    (b.sample(x, t).unwrap().value - f(x, t)).abs()
                })
                .fold(0.0, f64::max)
        };
        let r = err(17) / err(33);
        assert!(r > 6.0, "ratio {r}");
    }
}
