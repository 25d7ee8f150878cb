//! Characteristic curves of intrinsic graphs.
//!
//! In the `(x, t)` plane a characteristic curve is `s ↦ (s, t(s))` with
//! `t' = 2u(s, t)`; its lift `Γ(s) = f_u(s, t(s))` is horizontal. Off-grid
//! values of `u` and of the nodal fields come from bicubic interpolation.

use std::io::Write;

use serde::Serialize;

use crate::expr::ScalarField;
use crate::geometry::{contact_form, ContactMetric, PointFrame};
use crate::graph::{fmt_f64, horizontal_normal, k1_m_k_fields, IntrinsicGraph, SignConvention};
use crate::interp::Bicubic;
use crate::ode::rk4_step;
use crate::{Error, Result, Vec3};

/// Samples dropped at each end of a curve before taking sup-norms.
pub const END_EXCLUSION: usize = 2;

#[derive(Debug, Clone, Serialize)]
pub struct CharacteristicCurve {
    pub start: (f64, f64),
    pub step: f64,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    /// `∂t_ε/∂ε` at `ε = 0`.
    pub q: Vec<f64>,
    /// `u` at the samples, from the interpolant.
    pub u: Vec<f64>,
    pub m: Vec<f64>,
    pub k: Vec<f64>,
    /// Index of the start sample.
    pub origin: usize,
    /// The requested range left the domain and was cut short.
    pub clipped: bool,
}

impl CharacteristicCurve {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Lifted points `(s, u, t − su)`.
    pub fn lift(&self) -> Vec<Vec3> {
        (0..self.len())
            .map(|i| Vec3::new(self.s[i], self.u[i], self.t[i] - self.s[i] * self.u[i]))
            .collect()
    }

    /// Largest `|ω₀(Γ')|` with `Γ'` from fourth-order centered differences.
    pub fn horizontality_defect(&self) -> f64 {
        let p = self.lift();
        let h = self.step;
        (2..p.len().saturating_sub(2))
            .map(|i| {
                let d = (p[i - 2] - p[i - 1] * 8.0 + p[i + 1] * 8.0 - p[i + 2]) / (12.0 * h);
                contact_form(&p[i], &d).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Columns `s,t,q,M,K,residual`; residual is `NaN` where undefined.
    pub fn write_csv<W: Write>(&self, w: W, residual: &[f64]) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["s", "t", "q", "M", "K", "residual"])?;
        for i in 0..self.len() {
            let get = |v: &[f64]| fmt_f64(v.get(i).copied().unwrap_or(f64::NAN));
            wr.write_record([
                get(&self.s),
                get(&self.t),
                get(&self.q),
                get(&self.m),
                get(&self.k),
                get(residual),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn interpolant(graph: &IntrinsicGraph, values: Vec<f64>) -> Bicubic {
    let d = graph.domain;
    Bicubic::new(d.x0, d.t0, d.hx(), d.ht(), d.nx, d.nt, values)
}

/// Integrate `(t, q)` from `(s0, t0, 1)` over `steps` steps of signed size
/// `h`; stops early when leaving the grid.
fn integrate(u: &Bicubic, s0: f64, t0: f64, h: f64, steps: usize) -> (Vec<[f64; 2]>, bool) {
    let mut rhs = |s: f64, y: &[f64; 2]| -> std::result::Result<[f64; 2], ()> {
        let smp = u.sample(s, y[0]).ok_or(())?;
        Ok([2.0 * smp.value, 2.0 * smp.dt * y[1]])
    };
    let mut out = vec![[t0, 1.0]];
    for k in 0..steps {
        let s = s0 + k as f64 * h;
        match rk4_step(&mut rhs, s, out.last().unwrap(), h) {
            Ok(y) if u.sample(s + h, y[0]).is_some() => out.push(y),
            _ => return (out, true),
        }
    }
    (out, false)
}

fn steps_for(r: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && r >= 0.0) {
        return Err(Error::invalid(format!("bad trace range r = {r}, h = {h}")));
    }
    Ok((r / h).round() as usize)
}

/// Trace the characteristic through `(a, b)` over `s ∈ [a − r, a + r]` with
/// RK4 step `h`. The foliation Jacobian is integrated alongside.
pub fn trace(graph: &IntrinsicGraph, start: (f64, f64), r: f64, h: f64) -> Result<CharacteristicCurve> {
    let (a, b) = start;
    let d = graph.domain;
    if !(a > d.x0 && a < d.x1 && b > d.t0 && b < d.t1) {
        return Err(Error::invalid(format!(
            "start ({a}, {b}) is not interior to the domain"
        )));
    }
    let n = steps_for(r, h)?;
    let u = interpolant(graph, graph.u.clone());
    let (fwd, c1) = integrate(&u, a, b, h, n);
    let (bwd, c2) = integrate(&u, a, b, -h, n);
    let origin = bwd.len() - 1;
    let mut s = Vec::new();
    let mut tq = Vec::new();
    for (k, y) in bwd.iter().enumerate().rev() {
        s.push(a - k as f64 * h);
        tq.push(*y);
    }
    for (k, y) in fwd.iter().enumerate().skip(1) {
        s.push(a + k as f64 * h);
        tq.push(*y);
    }
    let t: Vec<f64> = tq.iter().map(|y| y[0]).collect();
    let uvals = s
        .iter()
        .zip(&t)
        .map(|(&si, &ti)| u.sample(si, ti).map(|v| v.value))
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| Error::numerical("interpolation failed on a traced sample"))?;
    Ok(CharacteristicCurve {
        start,
        step: h,
        q: tq.iter().map(|y| y[1]).collect(),
        s,
        t,
        u: uvals,
        m: Vec::new(),
        k: Vec::new(),
        origin,
        clipped: c1 || c2,
    })
}

/// Re-integrate `q' = 2u_t q`, `q(a) = 1` along an existing curve, with the
/// integrator and step used by [`trace`].
pub fn foliation_jacobian(graph: &IntrinsicGraph, curve: &CharacteristicCurve) -> Vec<f64> {
    let u = interpolant(graph, graph.u.clone());
    let (a, b) = curve.start;
    let (fwd, _) = integrate(&u, a, b, curve.step, curve.len() - 1 - curve.origin);
    let (bwd, _) = integrate(&u, a, b, -curve.step, curve.origin);
    bwd.iter().rev().chain(fwd.iter().skip(1)).map(|y| y[1]).collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct UniquenessReport {
    pub return_error: f64,
    pub passed: bool,
}

/// Tolerance of the forward/backward return test.
pub const UNIQUENESS_TOL: f64 = 1e-8;

/// Trace forward over `[a, a + r]`, then back to `a`, and compare with `b`.
pub fn uniqueness_check(graph: &IntrinsicGraph, start: (f64, f64), r: f64, h: f64) -> Result<UniquenessReport> {
    let n = steps_for(r, h)?;
    let u = interpolant(graph, graph.u.clone());
    let (fwd, clipped) = integrate(&u, start.0, start.1, h, n);
    if clipped {
        return Err(Error::numerical("forward trace left the domain"));
    }
    let end = fwd[n][0];
    let (back, clipped) = integrate(&u, start.0 + n as f64 * h, end, -h, n);
    if clipped {
        return Err(Error::numerical("backward trace left the domain"));
    }
    let return_error = (back[n][0] - start.1).abs();
    Ok(UniquenessReport {
        return_error,
        passed: return_error <= UNIQUENESS_TOL,
    })
}

/// Fill `M` and `K` along the curve from the nodal fields.
pub fn attach_fields(
    curve: &mut CharacteristicCurve,
    graph: &IntrinsicGraph,
    metric: &ContactMetric,
    f: &ScalarField,
    sign: SignConvention,
) -> Result<()> {
    let h = k1_m_k_fields(graph, metric, f, sign)?;
    let mi = interpolant(graph, h.m);
    let ki = interpolant(graph, h.k);
    let at = |b: &Bicubic, i: usize| {
        b.sample(curve.s[i], curve.t[i])
            .map(|v| v.value)
            .ok_or_else(|| Error::numerical("curve sample outside the grid"))
    };
    curve.m = (0..curve.len()).map(|i| at(&mi, i)).collect::<Result<_>>()?;
    curve.k = (0..curve.len()).map(|i| at(&ki, i)).collect::<Result<_>>()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveDiagnostic {
    pub start: (f64, f64),
    /// `sup |ΔM/Δξ − K|` over the retained samples.
    pub sup: f64,
    /// Per-sample residual, `NaN` at excluded ends.
    pub residual: Vec<f64>,
}

/// Centered differences of `M` along `ξ = s` compared with `K`.
pub fn regularity_diagnostic(
    graph: &IntrinsicGraph,
    metric: &ContactMetric,
    f: &ScalarField,
    sign: SignConvention,
    curve: &mut CharacteristicCurve,
) -> Result<CurveDiagnostic> {
    if curve.m.len() != curve.len() {
        attach_fields(curve, graph, metric, f, sign)?;
    }
    let n = curve.len();
    if n < 2 * END_EXCLUSION + 1 {
        return Err(Error::numerical("curve too short for the diagnostic"));
    }
    let mut residual = vec![f64::NAN; n];
    let mut sup = 0.0f64;
    for i in END_EXCLUSION..n - END_EXCLUSION {
        let dm = (curve.m[i + 1] - curve.m[i - 1]) / (curve.s[i + 1] - curve.s[i - 1]);
        let r = dm - curve.k[i];
        residual[i] = r;
        sup = sup.max(r.abs());
    }
    Ok(CurveDiagnostic {
        start: curve.start,
        sup,
        residual,
    })
}

/// Per-level diagnostic values and observed orders.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub levels: Vec<RegularityLevel>,
    /// `log2` ratios between consecutive levels.
    pub orders: Vec<f64>,
    /// Least-squares slope of `log sup` against `log h`.
    pub order: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityLevel {
    pub nx: usize,
    pub nt: usize,
    pub h: f64,
    pub sup: f64,
    pub curves: Vec<f64>,
}

impl RegularityReport {
    pub fn new(levels: Vec<RegularityLevel>) -> Result<Self> {
        if levels.len() < 3 {
            return Err(Error::invalid("an order estimate needs at least 3 levels"));
        }
        let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
        let sups: Vec<f64> = levels.iter().map(|l| l.sup).collect();
        let (orders, order) = estimate_order(&hs, &sups);
        Ok(RegularityReport { levels, orders, order })
    }

    pub fn monotone_decreasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].sup < w[0].sup)
    }
}

/// Consecutive and least-squares convergence orders of `err(h)`.
pub fn estimate_order(hs: &[f64], errs: &[f64]) -> (Vec<f64>, f64) {
    let pairs: Vec<f64> = hs
        .windows(2)
        .zip(errs.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect();
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (pairs, sxy / sxx)
}

/// Frame data of the surface along a curve.
#[derive(Debug, Clone)]
pub struct CurveFrames {
    pub points: Vec<Vec3>,
    pub frames: Vec<PointFrame>,
    /// Unit characteristic field, coordinates.
    pub z: Vec<Vec3>,
    /// Horizontal unit normal pointing into the subgraph, coordinates.
    pub nu: Vec<Vec3>,
    /// `Γ'` from centered differences (zero at the ends).
    pub tangent: Vec<Vec3>,
}

/// Interpolate the nodal frame fields `Z` and `ν_h` along the curve.
pub fn curve_frames(
    graph: &IntrinsicGraph,
    metric: &ContactMetric,
    curve: &CharacteristicCurve,
) -> Result<CurveFrames> {
    let d = graph.domain;
    let n = d.len();
    let mut comps: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(n));
    for k in 0..n {
        let g = metric.horizontal(&graph.embed_index(k))?;
        let w = graph.w(k);
        let a = (g[(1, 1)] * w * w + 2.0 * g[(0, 1)] * w + g[(0, 0)]).sqrt();
        let nt = horizontal_normal(graph, metric, k)?;
        comps[0].push(1.0 / a);
        comps[1].push(w / a);
        comps[2].push(nt[0] / a);
        comps[3].push(nt[1] / a);
    }
    let interps: Vec<Bicubic> = comps.into_iter().map(|c| interpolant(graph, c)).collect();
    let points = curve.lift();
    let mut frames = Vec::with_capacity(curve.len());
    let mut z = Vec::with_capacity(curve.len());
    let mut nu = Vec::with_capacity(curve.len());
    for i in 0..curve.len() {
        let c: Vec<f64> = interps
            .iter()
            .map(|b| b.sample(curve.s[i], curve.t[i]).map(|v| v.value))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::numerical("curve sample outside the grid"))?;
        let pf = metric.point_frame(&points[i])?;
        z.push(pf.frame[0] * c[0] + pf.frame[1] * c[1]);
        nu.push(pf.frame[0] * c[2] + pf.frame[1] * c[3]);
        frames.push(pf);
    }
    let mut tangent = vec![Vec3::zeros(); curve.len()];
    for i in 1..curve.len().saturating_sub(1) {
        tangent[i] = (points[i + 1] - points[i - 1]) / (curve.s[i + 1] - curve.s[i - 1]);
    }
    Ok(CurveFrames {
        points,
        frames,
        z,
        nu,
        tangent,
    })
}

impl CurveFrames {
    /// `∇_Z V` at interior sample `i` for a field sampled along the curve.
    pub fn nabla_z(&self, v: &[Vec3], i: usize, ds: f64) -> Vec3 {
        let pf = &self.frames[i];
        let dv = (v[i + 1] - v[i - 1]) / ds;
        let tan = self.tangent[i];
        pf.sr_covariant(&tan, &v[i], &dv) / pf.norm(&tan)
    }
}

/// `H = −⟨∇_Z ν_h, Z⟩` along the curve; `NaN` at the two ends.
pub fn mean_curvature_along(
    graph: &IntrinsicGraph,
    metric: &ContactMetric,
    curve: &CharacteristicCurve,
) -> Result<Vec<f64>> {
    let cf = curve_frames(graph, metric, curve)?;
    let n = curve.len();
    let mut h = vec![f64::NAN; n];
    for i in 1..n.saturating_sub(1) {
        let ds = curve.s[i + 1] - curve.s[i - 1];
        let dn = cf.nabla_z(&cf.nu, i, ds);
        h[i] = -cf.frames[i].inner(&dn, &cf.z[i]);
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GeodesicReport {
    /// `sup |∇_Z Z − H ν_h|`.
    pub first_order: f64,
    /// `sup |∇_Z(∇_Z Z) − (Z(H) ν_h − H² Z)|`.
    pub second_order: f64,
}

/// Residuals of `∇_Z Z = H ν_h` and of its derivative along `Z`, with
/// `H` given per sample.
pub fn geodesic_check(
    graph: &IntrinsicGraph,
    metric: &ContactMetric,
    curve: &CharacteristicCurve,
    h: &[f64],
) -> Result<GeodesicReport> {
    let n = curve.len();
    if h.len() != n {
        return Err(Error::invalid("H samples do not match the curve"));
    }
    if n < 2 * END_EXCLUSION + 3 {
        return Err(Error::numerical("curve too short for the geodesic check"));
    }
    let cf = curve_frames(graph, metric, curve)?;
    let mut nzz = vec![Vec3::zeros(); n];
    let mut first = 0.0f64;
    for i in 1..n - 1 {
        let ds = curve.s[i + 1] - curve.s[i - 1];
        nzz[i] = cf.nabla_z(&cf.z, i, ds);
        if i >= END_EXCLUSION && i < n - END_EXCLUSION {
            first = first.max(cf.frames[i].norm(&(nzz[i] - cf.nu[i] * h[i])));
        }
    }
    let mut second = 0.0f64;
    for i in END_EXCLUSION.max(2)..n - END_EXCLUSION.max(2) {
        let ds = curve.s[i + 1] - curve.s[i - 1];
        let lhs = cf.nabla_z(&nzz, i, ds);
        let pf = &cf.frames[i];
        let zh = (h[i + 1] - h[i - 1]) / ds / pf.norm(&cf.tangent[i]);
        let rhs = cf.nu[i] * zh - cf.z[i] * (h[i] * h[i]);
        second = second.max(pf.norm(&(lhs - rhs)));
    }
    Ok(GeodesicReport {
        first_order: first,
        second_order: second,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphDomain;

    fn g(n: usize, f: impl Fn(f64, f64) -> f64) -> IntrinsicGraph {
        IntrinsicGraph::from_fn(GraphDomain::new(-1.0, 1.0, -1.0, 1.0, n, n).unwrap(), f).unwrap()
    }

    #[test]
    fn constant_u_gives_straight_curve() {
        let c = trace(&g(9, |_, _| 0.0), (0.1, 0.2), 0.5, 0.01).unwrap();
        assert!(c.t.iter().all(|&t| t == 0.2));
        assert!(c.q.iter().all(|&q| q == 1.0));
        assert_eq!(c.s[c.origin], 0.1);
        assert_eq!(c.len(), 101);
        assert!(!c.clipped);
    }

    #[test]
    fn u_equals_x_closed_form() {
        let (a, b) = (0.2, -0.3);
        let c = trace(&g(11, |x, _| x), (a, b), 0.6, 1e-3).unwrap();
        let err =
            c.s.iter()
                .zip(&c.t)
                .map(|(s, t)| (t - (b + s * s - a * a)).abs())
                .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        assert!(c.horizontality_defect() < 1e-10);
    }

    #[test]
    fn u_equals_t_closed_form() {
        let (a, b) = (0.0, 0.1);
        let c = trace(&g(11, |_, t| t), (a, b), 0.5, 1e-3).unwrap();
        for i in 0..c.len() {
            let e = (2.0 * (c.s[i] - a)).exp();
            assert!((c.t[i] - b * e).abs() < 1e-10);
            assert!((c.q[i] - e).abs() < 1e-10 * e);
        }
    }

    #[test]
    fn clipping_is_reported() {
        let c = trace(&g(11, |_, t| t), (0.0, 0.5), 0.9, 1e-2).unwrap();
        assert!(c.clipped);
        assert!(c.t.iter().all(|t| t.abs() <= 1.0));
        assert!(trace(&g(11, |_, t| t), (1.0, 0.5), 0.1, 1e-2).is_err());
    }

    #[test]
    fn foliation_jacobian_matches_trace() {
        let gr = g(21, |x, t| 0.3 * (x + 2.0 * t).sin());
        let c = trace(&gr, (0.1, 0.0), 0.5, 1e-2).unwrap();
        let q = foliation_jacobian(&gr, &c);
        for (a, b) in q.iter().zip(&c.q) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(q.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn uniqueness_examples() {
        assert!(
            uniqueness_check(&g(9, |_, _| 0.3), (0.0, 0.0), 0.4, 1e-2)
                .unwrap()
                .return_error
                < 1e-15
        );
        assert!(uniqueness_check(&g(9, |x, _| x), (0.0, 0.0), 0.5, 1e-2).unwrap().passed);
        let h = 0.01;
        let r = uniqueness_check(&g(33, |x, t| 0.4 * (2.0 * x - t).cos()), (-0.2, 0.1), 0.6, h).unwrap();
        assert!(r.return_error <= 10.0 * h.powi(4), "{}", r.return_error);
    }

    #[test]
    fn diagnostic_vanishes_for_constant_u() {
        let gr = g(9, |_, _| 0.25);
        let m = ContactMetric::heisenberg();
        let f = ScalarField::constant(0.0);
        let mut c = trace(&gr, (0.0, 0.0), 0.5, 0.01).unwrap();
        let d = regularity_diagnostic(&gr, &m, &f, SignConvention::Minus, &mut c).unwrap();
        assert_eq!(d.sup, 0.0);
        assert!(d.residual[0].is_nan() && d.residual[1].is_nan());
        let h = vec![0.0; c.len()];
        let gc = geodesic_check(&gr, &m, &c, &h).unwrap();
        assert!(gc.first_order < 1e-12 && gc.second_order < 1e-10, "{gc:?}");
        let hm = mean_curvature_along(&gr, &m, &c).unwrap();
        assert!(hm[1..hm.len() - 1].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn order_estimate() {
        let hs = [0.1, 0.05, 0.025];
        let errs = [1e-2, 2.5e-3, 6.25e-4];
        let (o, fit) = estimate_order(&hs, &errs);
        assert!(o.iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert!((fit - 2.0).abs() < 1e-12);
    }

    #[test]
    fn csv_columns() {
        let gr = g(9, |_, _| 0.0);
        let mut c = trace(&gr, (0.0, 0.0), 0.05, 0.01).unwrap();
        let d = regularity_diagnostic(
            &gr,
            &ContactMetric::heisenberg(),
            &ScalarField::constant(0.0),
            SignConvention::Minus,
            &mut c,
        )
        .unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf, &d.residual).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("s,t,q,M,K,residual"));
        assert_eq!(lines.count(), c.len());
    }
}
