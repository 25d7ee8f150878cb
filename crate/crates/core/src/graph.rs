//! Intrinsic graphs `(x, t) ↦ (x, u, t − xu)` over a rectangle of the vertical
//! plane `y = 0`: area, volume, the prescribed mean curvature functional and
//! its first variation.
//!
//! Node `(i, j)` (`x` index `i`, `t` index `j`) is stored at `j * nx + i`.
//! Derivatives are second-order differences and integrals use the composite
//! trapezoid rule, so [`first_variation`] is the exact derivative of
//! [`pmc_value`] on the grid.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::expr::ScalarField;
use crate::geometry::ContactMetric;
use crate::interp::diff_axis;
use crate::quadrature::{adaptive_simpson, trapezoid_weights};
use crate::{Error, Result, Vec3};

/// Tolerance of the inner subgraph integral.
pub const VOLUME_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphDomain {
    pub x0: f64,
    pub x1: f64,
    pub t0: f64,
    pub t1: f64,
    pub nx: usize,
    pub nt: usize,
}

impl GraphDomain {
    pub fn new(x0: f64, x1: f64, t0: f64, t1: f64, nx: usize, nt: usize) -> Result<Self> {
        if nx < 3 || nt < 3 {
            return Err(Error::invalid(format!(
                "grid {nx}x{nt}: need at least 3 nodes per side"
            )));
        }
        if !(x1 > x0 && t1 > t0) || ![x0, x1, t0, t1].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!("empty rectangle [{x0}, {x1}]x[{t0}, {t1}]")));
        }
        Ok(GraphDomain { x0, x1, t0, t1, nx, nt })
    }

    pub fn unit_square(nx: usize, nt: usize) -> Result<Self> {
        GraphDomain::new(0.0, 1.0, 0.0, 1.0, nx, nt)
    }

    pub fn hx(&self) -> f64 {
        (self.x1 - self.x0) / (self.nx - 1) as f64
    }

    pub fn ht(&self) -> f64 {
        (self.t1 - self.t0) / (self.nt - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx - 1 {
            self.x1
        } else {
            self.x0 + i as f64 * self.hx()
        }
    }

    pub fn t(&self, j: usize) -> f64 {
        if j == self.nt - 1 {
            self.t1
        } else {
            self.t0 + j as f64 * self.ht()
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.nt
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn node(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx - 1 || j == self.nt - 1
    }

    /// `(x, t)` of every node in storage order.
    pub fn coords(&self) -> Vec<(f64, f64)> {
        (0..self.len())
            .map(|k| {
                let (i, j) = self.node(k);
                (self.x(i), self.t(j))
            })
            .collect()
    }

    /// Trapezoid weights per node.
    pub fn weights(&self) -> Vec<f64> {
        let wx = trapezoid_weights(self.nx, self.hx());
        let wt = trapezoid_weights(self.nt, self.ht());
        (0..self.len())
            .map(|k| {
                let (i, j) = self.node(k);
                wx[i] * wt[j]
            })
            .collect()
    }

    pub fn with_grid(&self, nx: usize, nt: usize) -> Result<Self> {
        GraphDomain::new(self.x0, self.x1, self.t0, self.t1, nx, nt)
    }

    pub fn contains(&self, x: f64, t: f64) -> bool {
        x >= self.x0 && x <= self.x1 && t >= self.t0 && t <= self.t1
    }

    /// Sample `field(x, 0, t)` at every node.
    pub fn sample(&self, field: &ScalarField) -> Result<Vec<f64>> {
        self.coords()
            .into_iter()
            .map(|(x, t)| Ok(field.value(&Vec3::new(x, 0.0, t))?))
            .collect()
    }
}

/// Sign in front of the weighted volume in the functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignConvention {
    /// `area − ∫ f`.
    #[default]
    Minus,
    /// `area + ∫ f`.
    Plus,
}

impl SignConvention {
    pub fn factor(self) -> f64 {
        match self {
            SignConvention::Minus => -1.0,
            SignConvention::Plus => 1.0,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "-" | "minus" => Some(SignConvention::Minus),
            "+" | "plus" => Some(SignConvention::Plus),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IntrinsicGraph {
    pub domain: GraphDomain,
    pub u: Vec<f64>,
    pub ux: Vec<f64>,
    pub ut: Vec<f64>,
}

impl IntrinsicGraph {
    pub fn new(domain: GraphDomain, u: Vec<f64>) -> Result<Self> {
        if u.len() != domain.len() {
            return Err(Error::invalid(format!(
                "{} samples for a {}x{} grid",
                u.len(),
                domain.nx,
                domain.nt
            )));
        }
        if let Some(k) = u.iter().position(|v| !v.is_finite()) {
            let (i, j) = domain.node(k);
            return Err(Error::invalid(format!("u is not finite at node ({i}, {j})")));
        }
        let ux = diff_axis(&u, domain.nx, domain.nt, domain.hx(), 0);
        let ut = diff_axis(&u, domain.nx, domain.nt, domain.ht(), 1);
        Ok(IntrinsicGraph { domain, u, ux, ut })
    }

    pub fn from_fn(domain: GraphDomain, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let u = domain.coords().into_iter().map(|(x, t)| f(x, t)).collect();
        IntrinsicGraph::new(domain, u)
    }

    /// `u(x, t)` given as an expression in `x` and `t`.
    pub fn from_field(domain: GraphDomain, field: &ScalarField) -> Result<Self> {
        let u = domain.sample(field)?;
        IntrinsicGraph::new(domain, u)
    }

    pub fn with_values(&self, u: Vec<f64>) -> Result<Self> {
        IntrinsicGraph::new(self.domain, u)
    }

    /// `f_u(x, t) = (x, u, t − xu)` at node `k`.
    pub fn embed_index(&self, k: usize) -> Vec3 {
        let (i, j) = self.domain.node(k);
        let x = self.domain.x(i);
        let u = self.u[k];
        Vec3::new(x, u, self.domain.t(j) - x * u)
    }

    pub fn w(&self, k: usize) -> f64 {
        self.ux[k] + 2.0 * self.u[k] * self.ut[k]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "t", "u"])?;
        for (k, (x, t)) in self.domain.coords().into_iter().enumerate() {
            wr.write_record([fmt_f64(x), fmt_f64(t), fmt_f64(self.u[k])])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Read `x,t,u` rows ordered with `x` varying fastest.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::invalid(format!("missing column '{name}'")))
        };
        let (cx, ct, cu) = (col("x")?, col("t")?, col("u")?);
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let get = |c: usize| -> Result<f64> {
                let s = rec.get(c).unwrap_or("").trim();
                s.parse().map_err(|_| Error::invalid(format!("bad number '{s}'")))
            };
            rows.push((get(cx)?, get(ct)?, get(cu)?));
        }
        if rows.is_empty() {
            return Err(Error::invalid("empty grid file"));
        }
        let t_first = rows[0].1;
        let nx = rows.iter().take_while(|r| r.1 == t_first).count();
        if nx == 0 || rows.len() % nx != 0 {
            return Err(Error::invalid("rows do not form a rectangular grid"));
        }
        let nt = rows.len() / nx;
        let domain = GraphDomain::new(rows[0].0, rows[nx - 1].0, t_first, rows[rows.len() - 1].1, nx, nt)?;
        for (k, &(x, t, _)) in rows.iter().enumerate() {
            let (i, j) = domain.node(k);
            let tol = 1e-9 * (1.0 + x.abs().max(t.abs()));
            if (x - domain.x(i)).abs() > tol || (t - domain.t(j)).abs() > tol {
                return Err(Error::invalid(format!("row {k} is off the uniform grid")));
            }
        }
        IntrinsicGraph::new(domain, rows.into_iter().map(|r| r.2).collect())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        IntrinsicGraph::read_csv(std::fs::File::open(path)?)
    }
}

/// Seventeen significant digits; used for every CSV the crate writes.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `f_u` at node `(i, j)`.
pub fn embed(graph: &IntrinsicGraph, i: usize, j: usize) -> Vec3 {
    graph.embed_index(graph.domain.index(i, j))
}

/// `w = u_x + 2u u_t` at every node.
pub fn w_field(graph: &IntrinsicGraph) -> Vec<f64> {
    (0..graph.domain.len()).map(|k| graph.w(k)).collect()
}

/// Per-node horizontal data; metric values are taken at the embedded points.
#[derive(Debug, Clone, Default)]
pub struct HorizontalData {
    pub w: Vec<f64>,
    pub a: Vec<f64>,
    pub m: Vec<f64>,
    pub k1: Vec<f64>,
    pub k: Vec<f64>,
    pub g: Vec<Matrix2<f64>>,
    /// `f · det G` at the embedded points.
    pub f_det: Vec<f64>,
}

struct NodeData {
    w: f64,
    a: f64,
    m: f64,
    k1: f64,
    g: Matrix2<f64>,
    f_det: f64,
}

fn node_data(graph: &IntrinsicGraph, metric: &ContactMetric, f: &ScalarField, k: usize) -> Result<NodeData> {
    let p = graph.embed_index(k);
    let s = metric.sample(&p)?;
    let w = graph.w(k);
    let g = s.g;
    let a2 = g[(1, 1)] * w * w + 2.0 * g[(0, 1)] * w + g[(0, 0)];
    let a = a2.sqrt();
    let yg = s.y_derivative(p[0]);
    let k1 = 0.5 * (yg[(1, 1)] * w * w + 2.0 * yg[(0, 1)] * w + yg[(0, 0)]) / a;
    let m = (g[(1, 1)] * w + g[(0, 1)]) / a;
    let f_det = f.value(&p)? * g.determinant();
    Ok(NodeData { w, a, m, k1, g, f_det })
}

/// `w`, `a`, `M`, `K₁` and `K = K₁ ∓ f det G` at every node.
pub fn k1_m_k_fields(
    graph: &IntrinsicGraph,
    metric: &ContactMetric,
    f: &ScalarField,
    sign: SignConvention,
) -> Result<HorizontalData> {
    let nodes: Vec<NodeData> = (0..graph.domain.len())
        .into_par_iter()
        .map(|k| node_data(graph, metric, f, k))
        .collect::<Result<_>>()?;
    let mut h = HorizontalData::default();
    for n in nodes {
        h.w.push(n.w);
        h.a.push(n.a);
        h.m.push(n.m);
        h.k1.push(n.k1);
        h.k.push(n.k1 + sign.factor() * n.f_det);
        h.g.push(n.g);
        h.f_det.push(n.f_det);
    }
    Ok(h)
}

fn weighted_sum(weights: &[f64], vals: &[f64]) -> f64 {
    weights.iter().zip(vals).map(|(w, v)| w * v).sum()
}

/// Area integrand `a` at every node.
pub fn area_density(graph: &IntrinsicGraph, metric: &ContactMetric) -> Result<Vec<f64>> {
    (0..graph.domain.len())
        .into_par_iter()
        .map(|k| {
            let g = metric.horizontal(&graph.embed_index(k))?;
            let w = graph.w(k);
            Ok((g[(1, 1)] * w * w + 2.0 * g[(0, 1)] * w + g[(0, 0)]).sqrt())
        })
        .collect()
}

pub fn area(graph: &IntrinsicGraph, metric: &ContactMetric) -> Result<f64> {
    let a = area_density(graph, metric)?;
    Ok(weighted_sum(&graph.domain.weights(), &a))
}

/// `∫₀^{u} h(x, s, t − xs) ds` at every node.
fn subgraph_columns(graph: &IntrinsicGraph, h: &(dyn Fn(&Vec3) -> Result<f64> + Sync)) -> Result<Vec<f64>> {
    let d = graph.domain;
    (0..d.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = d.node(k);
            let (x, t) = (d.x(i), d.t(j));
            let mut g = |s: f64| h(&Vec3::new(x, s, t - x * s));
            adaptive_simpson(&mut g, 0.0, graph.u[k], VOLUME_TOL)
        })
        .collect()
}

/// Signed volume of the subgraph between `y = 0` and the graph.
pub fn volume(graph: &IntrinsicGraph, metric: &ContactMetric) -> Result<f64> {
    let cols = subgraph_columns(graph, &|p| Ok(metric.horizontal(p)?.determinant()))?;
    Ok(weighted_sum(&graph.domain.weights(), &cols))
}

/// `∫_{subgraph} f` with respect to the Riemannian volume.
pub fn weighted_volume(graph: &IntrinsicGraph, metric: &ContactMetric, f: &ScalarField) -> Result<f64> {
    let cols = subgraph_columns(graph, &|p| Ok(f.value(p)? * metric.horizontal(p)?.determinant()))?;
    Ok(weighted_sum(&graph.domain.weights(), &cols))
}

/// `area ∓ ∫_{subgraph} f`.
pub fn pmc_value(graph: &IntrinsicGraph, metric: &ContactMetric, f: &ScalarField, sign: SignConvention) -> Result<f64> {
    let a = area(graph, metric)?;
    if f.as_const() == Some(0.0) {
        return Ok(a);
    }
    Ok(a + sign.factor() * weighted_volume(graph, metric, f)?)
}

/// Largest boundary value a test function may carry.
pub const TEST_FUNCTION_BOUNDARY_TOL: f64 = 1e-14;

/// `∫ K v + M (v_x + 2u v_t + 2v u_t)` for nodal samples `v` vanishing on the
/// boundary.
pub fn first_variation(
    graph: &IntrinsicGraph,
    metric: &ContactMetric,
    f: &ScalarField,
    sign: SignConvention,
    v: &[f64],
) -> Result<f64> {
    let d = graph.domain;
    if v.len() != d.len() {
        return Err(Error::invalid("test function does not match the grid"));
    }
    for k in 0..d.len() {
        let (i, j) = d.node(k);
        if d.is_boundary(i, j) && v[k].abs() > TEST_FUNCTION_BOUNDARY_TOL {
            return Err(Error::invalid(format!(
                "test function is {} on the boundary node ({i}, {j})",
                v[k]
            )));
        }
    }
    let h = k1_m_k_fields(graph, metric, f, sign)?;
    let vx = diff_axis(v, d.nx, d.nt, d.hx(), 0);
    let vt = diff_axis(v, d.nx, d.nt, d.ht(), 1);
    let dens: Vec<f64> = (0..d.len())
        .map(|k| h.k[k] * v[k] + h.m[k] * (vx[k] + 2.0 * graph.u[k] * vt[k] + 2.0 * v[k] * graph.ut[k]))
        .collect();
    Ok(weighted_sum(&d.weights(), &dens))
}

/// Frame components `(α, β, γ)` of `Ñ = E₁ × E₂`; it points into the subgraph.
pub fn horizontal_normal(graph: &IntrinsicGraph, metric: &ContactMetric, k: usize) -> Result<Vec3> {
    let g = metric.horizontal(&graph.embed_index(k))?;
    let sq = g.determinant().sqrt();
    let ab = g.try_inverse().unwrap() * Vector2::new(graph.w(k), -1.0) * sq;
    Ok(Vec3::new(ab[0], ab[1], sq * graph.ut[k]))
}

/// `(⟨Z, X⟩, ⟨Z, Y⟩)` for the unit characteristic field `Z ∝ X + wY`.
pub fn characteristic_frame(graph: &IntrinsicGraph, metric: &ContactMetric, k: usize) -> Result<(f64, f64)> {
    let g = metric.horizontal(&graph.embed_index(k))?;
    let w = graph.w(k);
    let a = (g[(1, 1)] * w * w + 2.0 * g[(0, 1)] * w + g[(0, 0)]).sqrt();
    Ok(((g[(0, 0)] + w * g[(0, 1)]) / a, (g[(1, 1)] * w + g[(0, 1)]) / a))
}

/// `⟨Z, X⟩` recovered from `⟨Z, Y⟩ = M` and `|Z| = 1`, taking the root with
/// positive square-root term.
pub fn zx_from_m(g: &Matrix2<f64>, m: f64) -> f64 {
    let det = g.determinant();
    (g[(0, 1)] * m + (det * (g[(1, 1)] - m * m)).max(0.0).sqrt()) / g[(1, 1)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn heis() -> ContactMetric {
        ContactMetric::heisenberg()
    }

    fn zero() -> ScalarField {
        ScalarField::constant(0.0)
    }

    fn g(n: usize, f: impl Fn(f64, f64) -> f64) -> IntrinsicGraph {
        IntrinsicGraph::from_fn(GraphDomain::unit_square(n, n).unwrap(), f).unwrap()
    }

    #[test]
    fn domain_checks() {
        assert!(GraphDomain::unit_square(2, 5).is_err());
        assert!(GraphDomain::new(1.0, 0.0, 0.0, 1.0, 4, 4).is_err());
        let d = GraphDomain::new(-1.0, 1.0, 0.0, 2.0, 5, 3).unwrap();
        assert_eq!(d.hx(), 0.5);
        assert_eq!(d.ht(), 1.0);
        assert_eq!(d.index(2, 1), 7);
        assert_eq!(d.node(7), (2, 1));
        assert!((d.weights().iter().sum::<f64>() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn embed_examples() {
        let gr = g(5, |_, _| 0.0);
        assert_eq!(embed(&gr, 2, 3), Vec3::new(0.5, 0.0, 0.75));
        let gr = g(5, |_, _| 0.7);
        assert_abs_diff_eq!(
            (embed(&gr, 4, 2) - Vec3::new(1.0, 0.7, 0.5 - 0.7)).norm(),
            0.0,
            epsilon = 1e-15
        );
        let d = GraphDomain::new(0.0, 2.0, 0.0, 2.0, 3, 3).unwrap();
        let gr = IntrinsicGraph::from_fn(d, |x, _| x).unwrap();
        assert_eq!(embed(&gr, 1, 2), Vec3::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn w_examples() {
        assert!(w_field(&g(6, |_, _| 3.0)).iter().all(|&w| w == 0.0));
        assert!(w_field(&g(6, |x, _| x)).iter().all(|&w| (w - 1.0).abs() < 1e-13));
        let gr = g(6, |_, t| t);
        let d = gr.domain;
        for (k, w) in w_field(&gr).into_iter().enumerate() {
            assert!((w - 2.0 * d.t(d.node(k).1)).abs() < 1e-13);
        }
    }

    #[test]
    fn area_examples() {
        assert_abs_diff_eq!(area(&g(9, |_, _| 0.0), &heis()).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(area(&g(9, |x, _| x), &heis()).unwrap(), 2f64.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn volume_examples() {
        assert_abs_diff_eq!(volume(&g(7, |_, _| 0.4), &heis()).unwrap(), 0.4, epsilon = 1e-14);
        assert_eq!(volume(&g(7, |_, _| 0.0), &heis()).unwrap(), 0.0);
        let m = ContactMetric::parse("1 + x^2", "0", "1").unwrap();
        let oracle = |n: usize| volume(&g(n, |_, _| 1.0), &m).unwrap();
        // trapezoid in x on 1 + x² has error h²/6
        let n = 201;
        let h = 1.0 / (n - 1) as f64;
        assert_abs_diff_eq!(oracle(n), 4.0 / 3.0 + h * h / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn pmc_examples() {
        let gr = g(9, |x, t| 0.1 * x * t);
        assert_eq!(
            pmc_value(&gr, &heis(), &zero(), SignConvention::Minus).unwrap(),
            area(&gr, &heis()).unwrap()
        );
        let one = ScalarField::constant(1.0);
        assert_abs_diff_eq!(
            pmc_value(&g(9, |_, _| 1.0), &heis(), &one, SignConvention::Minus).unwrap(),
            0.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            pmc_value(&g(9, |_, _| 1.0), &heis(), &one, SignConvention::Plus).unwrap(),
            2.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn field_examples() {
        let h = k1_m_k_fields(&g(5, |_, _| 0.0), &heis(), &zero(), SignConvention::Minus).unwrap();
        assert!(h.k1.iter().chain(&h.m).chain(&h.k).all(|&v| v == 0.0));
        let h = k1_m_k_fields(&g(5, |x, _| x), &heis(), &zero(), SignConvention::Minus).unwrap();
        assert!(h.m.iter().all(|&m| (m - 0.5f64.sqrt()).abs() < 1e-13));
        let h = k1_m_k_fields(
            &g(5, |x, t| x * t),
            &heis(),
            &ScalarField::constant(1.0),
            SignConvention::Minus,
        )
        .unwrap();
        assert!(h.k.iter().all(|&k| k == -1.0));
    }

    #[test]
    fn positivity_and_schwarz() {
        let m = ContactMetric::parse("1 + 0.3*sin(x*y)", "0.4*cos(t)", "1.5 + 0.2*x").unwrap();
        let gr = g(11, |x, t| (3.0 * x - t).sin() + x * t);
        let h = k1_m_k_fields(&gr, &m, &zero(), SignConvention::Minus).unwrap();
        for k in 0..gr.domain.len() {
            let gk = h.g[k];
            assert!(h.a[k] * h.a[k] >= gk.determinant() / gk[(1, 1)] * (1.0 - 1e-12));
            assert!(h.m[k] * h.m[k] < gk[(1, 1)]);
        }
    }

    #[test]
    fn first_variation_rejects_boundary_values() {
        let gr = g(5, |_, _| 0.0);
        let v = vec![1.0; 25];
        assert!(matches!(
            first_variation(&gr, &heis(), &zero(), SignConvention::Minus, &v),
            Err(Error::Invalid(_))
        ));
        let v = vec![0.0; 25];
        assert_eq!(
            first_variation(&gr, &heis(), &zero(), SignConvention::Minus, &v).unwrap(),
            0.0
        );
    }

    #[test]
    fn first_variation_is_derivative_of_pmc() {
        let m = ContactMetric::parse("1 + 0.1*sin(x + y)", "0.1*sin(t - y)", "1 + 0.1*cos(x*t)").unwrap();
        let f = ScalarField::parse("1 + 0.5*sin(x*t + y)").unwrap();
        let gr = g(17, |x, t| 0.3 * (2.0 * x + t).sin());
        let v: Vec<f64> = gr
            .domain
            .coords()
            .into_iter()
            .map(|(x, t)| (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * t).sin() * (1.0 + x))
            .collect();
        let s = 1e-4;
        let shifted = |c: f64| {
            let u = gr.u.iter().zip(&v).map(|(a, b)| a + c * b).collect();
            pmc_value(&gr.with_values(u).unwrap(), &m, &f, SignConvention::Minus).unwrap()
        };
        let fd = (shifted(s) - shifted(-s)) / (2.0 * s);
        let an = first_variation(&gr, &m, &f, SignConvention::Minus, &v).unwrap();
        assert!((fd - an).abs() <= 1e-6 * an.abs(), "{fd} vs {an}");
    }

    #[test]
    fn normal_examples() {
        let gr = g(5, |_, _| 0.0);
        assert_eq!(horizontal_normal(&gr, &heis(), 7).unwrap(), Vec3::new(0.0, -1.0, 0.0));
        assert_eq!(characteristic_frame(&gr, &heis(), 7).unwrap(), (1.0, 0.0));
        let m = ContactMetric::parse("1.3 + 0.2*sin(x)", "0.25*t", "0.9 + y^2").unwrap();
        let gr = g(7, |x, t| x * x - 0.5 * t + 0.2);
        let h = k1_m_k_fields(&gr, &m, &zero(), SignConvention::Minus).unwrap();
        for k in 0..gr.domain.len() {
            let gk = h.g[k];
            let n = horizontal_normal(&gr, &m, k).unwrap();
            let ab = Vector2::new(n[0], n[1]);
            // ⟨Y, Ñ⟩
            assert_abs_diff_eq!((gk * ab)[1], -gk.determinant().sqrt(), epsilon = 1e-12);
            assert_abs_diff_eq!((ab.transpose() * gk * ab)[(0, 0)], h.a[k] * h.a[k], epsilon = 1e-11);
            let (zx, zy) = characteristic_frame(&gr, &m, k).unwrap();
            assert_abs_diff_eq!(zx, zx_from_m(&gk, zy), epsilon = 1e-10);
            // |Z|² from its own frame components
            let zc = Vector2::new(1.0, h.w[k]) / h.a[k];
            assert_abs_diff_eq!((zc.transpose() * gk * zc)[(0, 0)], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!((gk * zc)[0], zx, epsilon = 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let d = GraphDomain::new(-0.5, 1.5, 0.25, 1.0, 4, 3).unwrap();
        let gr = IntrinsicGraph::from_fn(d, |x, t| (x * t).exp() / 3.0).unwrap();
        let mut buf = Vec::new();
        gr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,t,u\n"));
        let back = IntrinsicGraph::read_csv(&buf[..]).unwrap();
        assert_eq!(back.domain, d);
        assert_eq!(back.u, gr.u);
        assert!(IntrinsicGraph::read_csv("x,t,u\n0,0,1\n1,0,1\n0,1,1\n".as_bytes()).is_err());
    }
}
