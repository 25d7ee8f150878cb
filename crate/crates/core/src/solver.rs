//! Critical points of the discretized prescribed mean curvature functional
//! on intrinsic graphs with Dirichlet data.
//!
//! The discrete functional uses piecewise bilinear `u` on the grid cells and
//! 2×2 Gauss quadrature per cell:
//!
//! `F_h(u) = Σ_cells Σ_gp wt · (a(w) ∓ ∫₀^{u} f det G)`,
//!
//! and the residual at an interior node is `∂F_h/∂u_i / (hx ht)`, i.e. the
//! weak form tested against the nodal hat function.

use rayon::prelude::*;
use serde::Serialize;

use crate::banded::BandMatrix;
use crate::curves::{regularity_diagnostic, trace, CurveDiagnostic, RegularityLevel, RegularityReport};
use crate::expr::ScalarField;
use crate::geometry::ContactMetric;
use crate::graph::{GraphDomain, IntrinsicGraph, SignConvention, VOLUME_TOL};
use crate::quadrature::{adaptive_simpson, GAUSS2};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone)]
pub struct DiscretizedProblem {
    pub domain: GraphDomain,
    pub metric: ContactMetric,
    pub f: ScalarField,
    /// Dirichlet data, also the initial guess inside.
    pub boundary: ScalarField,
    pub sign: SignConvention,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Armijo backtracking on the residual sup-norm.
    pub damping: bool,
    /// Step of the finite-difference Jacobian.
    pub fd_eps: f64,
    /// Volume tolerance for constrained solves.
    pub vol_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_iter: 100,
            damping: true,
            fd_eps: 1e-7,
            vol_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub u: Vec<f64>,
    pub nx: usize,
    pub nt: usize,
    /// Sup-norm of the interior residual at the returned iterate.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub fallback_steps: usize,
    pub history: Vec<f64>,
    pub h0: Option<f64>,
    pub volume: Option<f64>,
    pub target_volume: Option<f64>,
}

impl SolveResult {
    pub fn graph(&self, domain: GraphDomain) -> Result<IntrinsicGraph> {
        IntrinsicGraph::new(domain, self.u.clone())
    }
}

struct GaussPoint {
    cell: (usize, usize),
    /// Local coordinates in the cell.
    p: f64,
    q: f64,
}

/// Bilinear values at a Gauss point: `(x, t, u, u_x, u_t)`.
fn bilinear(d: &GraphDomain, u: &[f64], gp: &GaussPoint) -> (f64, f64, f64, f64, f64) {
    let (i, j) = gp.cell;
    let (p, q) = (gp.p, gp.q);
    let (hx, ht) = (d.hx(), d.ht());
    let u00 = u[d.index(i, j)];
    let u10 = u[d.index(i + 1, j)];
    let u01 = u[d.index(i, j + 1)];
    let u11 = u[d.index(i + 1, j + 1)];
    let val = u00 * (1.0 - p) * (1.0 - q) + u10 * p * (1.0 - q) + u01 * (1.0 - p) * q + u11 * p * q;
    let ux = ((u10 - u00) * (1.0 - q) + (u11 - u01) * q) / hx;
    let ut = ((u01 - u00) * (1.0 - p) + (u11 - u10) * p) / ht;
    (d.x0 + (i as f64 + p) * hx, d.t0 + (j as f64 + q) * ht, val, ux, ut)
}

fn gauss_points(d: &GraphDomain) -> Vec<GaussPoint> {
    let mut out = Vec::with_capacity(4 * (d.nx - 1) * (d.nt - 1));
    for j in 0..d.nt - 1 {
        for i in 0..d.nx - 1 {
            for &q in &GAUSS2 {
                for &p in &GAUSS2 {
                    out.push(GaussPoint { cell: (i, j), p, q });
                }
            }
        }
    }
    out
}

/// Hat functions of the four cell corners: `(di, dj, φ, φ_x, φ_t)`.
fn corner_hats(p: f64, q: f64, hx: f64, ht: f64) -> [(usize, usize, f64, f64, f64); 4] {
    [
        (0, 0, (1.0 - p) * (1.0 - q), -(1.0 - q) / hx, -(1.0 - p) / ht),
        (1, 0, p * (1.0 - q), (1.0 - q) / hx, -p / ht),
        (0, 1, (1.0 - p) * q, -q / hx, (1.0 - p) / ht),
        (1, 1, p * q, q / hx, p / ht),
    ]
}

impl DiscretizedProblem {
    pub fn new(domain: GraphDomain, metric: ContactMetric, f: ScalarField, boundary: ScalarField) -> Self {
        DiscretizedProblem {
            domain,
            metric,
            f,
            boundary,
            sign: SignConvention::Minus,
        }
    }

    pub fn with_grid(&self, nx: usize, nt: usize) -> Result<Self> {
        let mut p = self.clone();
        p.domain = self.domain.with_grid(nx, nt)?;
        Ok(p)
    }

    pub fn with_f(&self, f: ScalarField) -> Self {
        let mut p = self.clone();
        p.f = f;
        p
    }

    /// Boundary field sampled at every node.
    pub fn initial_guess(&self) -> Result<Vec<f64>> {
        let u = self.domain.sample(&self.boundary)?;
        if let Some(v) = u.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("boundary data is not finite ({v})")));
        }
        Ok(u)
    }

    fn interior(&self) -> Vec<usize> {
        let d = self.domain;
        (0..d.len())
            .filter(|&k| {
                let (i, j) = d.node(k);
                !d.is_boundary(i, j)
            })
            .collect()
    }

    /// Per-Gauss-point contributions `(nodes, values)` of `F_h'`, with the
    /// prescribed function shifted by `shift`.
    fn gradient_terms(&self, u: &[f64], shift: f64) -> Result<Vec<[f64; 4]>> {
        let d = self.domain;
        let (hx, ht) = (d.hx(), d.ht());
        let wt = 0.25 * hx * ht;
        let factor = self.sign.factor();
        gauss_points(&d)
            .par_iter()
            .map(|gp| {
                let (x, t, val, ux, ut) = bilinear(&d, u, gp);
                let p = Vec3::new(x, val, t - x * val);
                let s = self.metric.sample(&p)?;
                let g = s.g;
                let w = ux + 2.0 * val * ut;
                let a = (g[(1, 1)] * w * w + 2.0 * g[(0, 1)] * w + g[(0, 0)]).sqrt();
                let yg = s.y_derivative(x);
                let k1 = 0.5 * (yg[(1, 1)] * w * w + 2.0 * yg[(0, 1)] * w + yg[(0, 0)]) / a;
                let m = (g[(1, 1)] * w + g[(0, 1)]) / a;
                let fv = if let Some(c) = self.f.as_const() {
                    c
                } else {
                    self.f.value(&p)?
                };
                let k = k1 + factor * (fv + shift) * g.determinant();
                let mut out = [0.0; 4];
                for (n, &(_, _, phi, px, pt)) in corner_hats(gp.p, gp.q, hx, ht).iter().enumerate() {
                    out[n] = wt * (k * phi + m * (px + 2.0 * val * pt + 2.0 * phi * ut));
                }
                Ok(out)
            })
            .collect()
    }

    fn scatter(&self, terms: &[[f64; 4]]) -> Vec<f64> {
        let d = self.domain;
        let mut r = vec![0.0; d.len()];
        let scale = 1.0 / (d.hx() * d.ht());
        for (gp, vals) in gauss_points(&d).iter().zip(terms) {
            let (i, j) = gp.cell;
            for (n, &(di, dj, ..)) in corner_hats(gp.p, gp.q, 1.0, 1.0).iter().enumerate() {
                r[d.index(i + di, j + dj)] += vals[n] * scale;
            }
        }
        for k in 0..d.len() {
            let (i, j) = d.node(k);
            if d.is_boundary(i, j) {
                r[k] = 0.0;
            }
        }
        r
    }

    /// Residual at every node (zero on the boundary).
    pub fn residual_with_shift(&self, u: &[f64], shift: f64) -> Result<Vec<f64>> {
        Ok(self.scatter(&self.gradient_terms(u, shift)?))
    }

    /// `(1/(hx ht)) ∂V_h/∂u_i` with `V_h` the discrete volume.
    pub fn volume_gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        let d = self.domain;
        let (hx, ht) = (d.hx(), d.ht());
        let wt = 0.25 * hx * ht;
        let terms: Vec<[f64; 4]> = gauss_points(&d)
            .par_iter()
            .map(|gp| {
                let (x, t, val, _, _) = bilinear(&d, u, gp);
                let det = self.metric.horizontal(&Vec3::new(x, val, t - x * val))?.determinant();
                let mut out = [0.0; 4];
                for (n, &(_, _, phi, ..)) in corner_hats(gp.p, gp.q, hx, ht).iter().enumerate() {
                    out[n] = wt * det * phi;
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        Ok(self.scatter(&terms))
    }

    fn columns(&self, u: &[f64], h: &(dyn Fn(&Vec3) -> Result<f64> + Sync)) -> Result<f64> {
        let d = self.domain;
        let wt = 0.25 * d.hx() * d.ht();
        let vals: Vec<f64> = gauss_points(&d)
            .par_iter()
            .map(|gp| {
                let (x, t, val, _, _) = bilinear(&d, u, gp);
                let mut g = |s: f64| h(&Vec3::new(x, s, t - x * s));
                adaptive_simpson(&mut g, 0.0, val, VOLUME_TOL)
            })
            .collect::<Result<_>>()?;
        Ok(vals.iter().sum::<f64>() * wt)
    }

    /// Discrete volume of the subgraph.
    pub fn discrete_volume(&self, u: &[f64]) -> Result<f64> {
        self.columns(u, &|p| Ok(self.metric.horizontal(p)?.determinant()))
    }

    pub fn discrete_area(&self, u: &[f64]) -> Result<f64> {
        let d = self.domain;
        let wt = 0.25 * d.hx() * d.ht();
        let vals: Vec<f64> = gauss_points(&d)
            .par_iter()
            .map(|gp| {
                let (x, t, val, ux, ut) = bilinear(&d, u, gp);
                let g = self.metric.horizontal(&Vec3::new(x, val, t - x * val))?;
                let w = ux + 2.0 * val * ut;
                Ok((g[(1, 1)] * w * w + 2.0 * g[(0, 1)] * w + g[(0, 0)]).sqrt())
            })
            .collect::<Result<_>>()?;
        Ok(vals.iter().sum::<f64>() * wt)
    }

    /// `F_h(u)`.
    pub fn discrete_functional(&self, u: &[f64]) -> Result<f64> {
        let area = self.discrete_area(u)?;
        if self.f.as_const() == Some(0.0) {
            return Ok(area);
        }
        let vol = self.columns(u, &|p| Ok(self.f.value(p)? * self.metric.horizontal(p)?.determinant()))?;
        Ok(area + self.sign.factor() * vol)
    }

    /// Finite-difference Jacobian of the interior residual, banded with
    /// half-width `nx − 1` in the interior numbering.
    fn jacobian(&self, u: &[f64], shift: f64, eps: f64) -> Result<BandMatrix> {
        let d = self.domain;
        let mx = d.nx - 2;
        let n = mx * (d.nt - 2);
        let bw = mx + 1;
        let mut jac = BandMatrix::zeros(n, bw, bw);
        let interior_index = |i: usize, j: usize| (j - 1) * mx + (i - 1);
        for ci in 0..3 {
            for cj in 0..3 {
                let cols: Vec<(usize, usize)> = (1..d.nt - 1)
                    .flat_map(|j| (1..d.nx - 1).map(move |i| (i, j)))
                    .filter(|&(i, j)| i % 3 == ci && j % 3 == cj)
                    .collect();
                if cols.is_empty() {
                    continue;
                }
                let mut up = u.to_vec();
                let mut dn = u.to_vec();
                for &(i, j) in &cols {
                    up[d.index(i, j)] += eps;
                    dn[d.index(i, j)] -= eps;
                }
                let rp = self.residual_with_shift(&up, shift)?;
                let rm = self.residual_with_shift(&dn, shift)?;
                for &(i, j) in &cols {
                    let col = interior_index(i, j);
                    for jj in j - 1..=j + 1 {
                        for ii in i - 1..=i + 1 {
                            if d.is_boundary(ii, jj) {
                                continue;
                            }
                            let k = d.index(ii, jj);
                            jac.set(interior_index(ii, jj), col, (rp[k] - rm[k]) / (2.0 * eps));
                        }
                    }
                }
            }
        }
        Ok(jac)
    }
}

fn sup_on(r: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&k| r[k].abs()).fold(0.0, f64::max)
}

/// Residual of the unconstrained problem at every node.
pub fn assemble_residual(problem: &DiscretizedProblem, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != problem.domain.len() {
        return Err(Error::invalid("u does not match the grid"));
    }
    problem.residual_with_shift(u, 0.0)
}

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 20;

/// Damped Newton on the residual with a banded finite-difference Jacobian;
/// falls back to gradient steps when Newton cannot reduce the residual.
pub fn solve(problem: &DiscretizedProblem, config: &SolverConfig) -> Result<SolveResult> {
    let u0 = problem.initial_guess()?;
    solve_from(problem, config, u0)
}

pub fn solve_from(problem: &DiscretizedProblem, config: &SolverConfig, mut u: Vec<f64>) -> Result<SolveResult> {
    let d = problem.domain;
    let interior = problem.interior();
    let mut r = problem.residual_with_shift(&u, 0.0)?;
    let mut rn = sup_on(&r, &interior);
    let mut history = vec![rn];
    let mut iterations = 0;
    let mut fallback_steps = 0;
    while rn > config.tol && iterations < config.max_iter {
        iterations += 1;
        let mut accepted = false;
        if let Some(lu) = problem.jacobian(&u, 0.0, config.fd_eps)?.lu() {
            let rhs: Vec<f64> = interior.iter().map(|&k| -r[k]).collect();
            let step = lu.solve(&rhs);
            let mut lam = 1.0;
            for _ in 0..=MAX_HALVINGS {
                let mut trial = u.clone();
                for (m, &k) in interior.iter().enumerate() {
                    trial[k] += lam * step[m];
                }
                if let Ok(rt) = problem.residual_with_shift(&trial, 0.0) {
                    let tn = sup_on(&rt, &interior);
                    let ok = if config.damping {
                        tn <= (1.0 - ARMIJO_C * lam) * rn
                    } else {
                        tn.is_finite()
                    };
                    if ok {
                        u = trial;
                        r = rt;
                        rn = tn;
                        accepted = true;
                        break;
                    }
                }
                if !config.damping {
                    break;
                }
                lam *= 0.5;
            }
        }
        if !accepted {
            // gradient step on F_h, shrinking until the residual drops
            let mut alpha = d.hx().min(d.ht()).powi(2);
            for _ in 0..=MAX_HALVINGS {
                let mut trial = u.clone();
                for &k in &interior {
                    trial[k] -= alpha * r[k];
                }
                if let Ok(rt) = problem.residual_with_shift(&trial, 0.0) {
                    let tn = sup_on(&rt, &interior);
                    if tn < rn {
                        u = trial;
                        r = rt;
                        rn = tn;
                        accepted = true;
                        fallback_steps += 1;
                        break;
                    }
                }
                alpha *= 0.5;
            }
        }
        history.push(rn);
        if !accepted {
            break;
        }
    }
    Ok(SolveResult {
        u,
        nx: d.nx,
        nt: d.nt,
        residual: rn,
        iterations,
        converged: rn <= config.tol,
        fallback_steps,
        history,
        h0: None,
        volume: None,
        target_volume: None,
    })
}

/// `⟨R_area, p⟩ / ⟨∇V, p⟩` over interior nodes: the multiplier seen by the
/// test vector `p`. `R_area` is the residual with `f ≡ 0`.
pub fn multiplier_estimate(problem: &DiscretizedProblem, u: &[f64], p: &[f64]) -> Result<f64> {
    let area_problem = problem.with_f(ScalarField::constant(0.0));
    let ra = area_problem.residual_with_shift(u, 0.0)?;
    let g = problem.volume_gradient(u)?;
    let num: f64 = ra.iter().zip(p).map(|(a, b)| a * b).sum();
    let den: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
    if den.abs() <= 1e-10 {
        return Err(Error::numerical("test vector does not change the volume"));
    }
    Ok(num / den)
}

/// Newton on `(u, λ)` for a critical point of the functional with `f + λ`
/// under `V_h(u) = target`. The multiplier is reported as `h0`, so with the
/// default sign and `f ≡ 0` it is the constant mean curvature.
pub fn volume_constrained_solve(
    problem: &DiscretizedProblem,
    target_volume: f64,
    config: &SolverConfig,
) -> Result<SolveResult> {
    let d = problem.domain;
    let interior = problem.interior();
    let cell = d.hx() * d.ht();
    let factor = problem.sign.factor();
    let mut u = problem.initial_guess()?;
    let mut lam = 0.0;
    let merit = |u: &[f64], lam: f64| -> Result<(Vec<f64>, f64)> {
        Ok((problem.residual_with_shift(u, lam)?, problem.discrete_volume(u)?))
    };
    let (mut r, mut vol) = merit(&u, lam)?;
    let norm = |r: &[f64], v: f64| sup_on(r, &interior).max((v - target_volume).abs() / cell);
    let mut rn = norm(&r, vol);
    let mut history = vec![rn];
    let mut iterations = 0;
    let done = |r: &[f64], v: f64| sup_on(r, &interior) <= config.tol && (v - target_volume).abs() <= config.vol_tol;
    while !done(&r, vol) && iterations < config.max_iter {
        iterations += 1;
        let lu = problem
            .jacobian(&u, lam, config.fd_eps)?
            .lu()
            .ok_or_else(|| Error::numerical("singular Jacobian in constrained solve"))?;
        let g = problem.volume_gradient(&u)?;
        let gi: Vec<f64> = interior.iter().map(|&k| g[k]).collect();
        let y1 = lu.solve(&interior.iter().map(|&k| -r[k]).collect::<Vec<_>>());
        let y2 = lu.solve(&gi.iter().map(|v| factor * v).collect::<Vec<_>>());
        let gy1: f64 = gi.iter().zip(&y1).map(|(a, b)| a * b).sum();
        let gy2: f64 = gi.iter().zip(&y2).map(|(a, b)| a * b).sum();
        if gy2.abs() < 1e-300 {
            return Err(Error::numerical("volume constraint is degenerate"));
        }
        let dlam = (gy1 - (target_volume - vol) / cell) / gy2;
        let step: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a - dlam * b).collect();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let mut trial = u.clone();
            for (m, &k) in interior.iter().enumerate() {
                trial[k] += t * step[m];
            }
            let tl = lam + t * dlam;
            if let Ok((rt, vt)) = merit(&trial, tl) {
                let tn = norm(&rt, vt);
                if !config.damping || tn <= (1.0 - ARMIJO_C * t) * rn {
                    u = trial;
                    lam = tl;
                    r = rt;
                    vol = vt;
                    rn = tn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        history.push(rn);
        if !accepted {
            break;
        }
    }
    let converged = done(&r, vol);
    Ok(SolveResult {
        u,
        nx: d.nx,
        nt: d.nt,
        residual: sup_on(&r, &interior),
        iterations,
        converged,
        fallback_steps: 0,
        history,
        h0: Some(lam),
        volume: Some(vol),
        target_volume: Some(target_volume),
    })
}

/// Curves used by the refinement study.
#[derive(Debug, Clone, Serialize)]
pub struct CurveSet {
    pub starts: Vec<(f64, f64)>,
    pub halfwidth: f64,
    /// Trace step as a fraction of `hx`.
    pub step_ratio: f64,
}

impl CurveSet {
    pub fn step(&self, d: &GraphDomain) -> f64 {
        d.hx() * self.step_ratio
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RefineStudy {
    pub report: RegularityReport,
    pub solves: Vec<SolveResult>,
    #[serde(skip)]
    pub curves: Vec<Vec<CurveDiagnostic>>,
}

/// Diagnostics of a given graph along the requested curves.
pub fn diagnose(
    graph: &IntrinsicGraph,
    metric: &ContactMetric,
    f: &ScalarField,
    sign: SignConvention,
    curves: &CurveSet,
) -> Result<Vec<CurveDiagnostic>> {
    curves
        .starts
        .iter()
        .map(|&st| {
            let mut c = trace(graph, st, curves.halfwidth, curves.step(&graph.domain))?;
            if c.clipped {
                return Err(Error::numerical(format!("curve from {st:?} left the domain")));
            }
            regularity_diagnostic(graph, metric, f, sign, &mut c)
        })
        .collect()
}

fn level(d: &GraphDomain, diags: &[CurveDiagnostic]) -> RegularityLevel {
    let curves: Vec<f64> = diags.iter().map(|c| c.sup).collect();
    RegularityLevel {
        nx: d.nx,
        nt: d.nt,
        h: d.hx().max(d.ht()),
        sup: curves.iter().copied().fold(0.0, f64::max),
        curves,
    }
}

/// Solve on each grid, then run the curve diagnostic on every solution.
pub fn refine_study(
    problem: &DiscretizedProblem,
    grids: &[(usize, usize)],
    curves: &CurveSet,
    config: &SolverConfig,
) -> Result<RefineStudy> {
    let mut levels = Vec::new();
    let mut solves = Vec::new();
    let mut all = Vec::new();
    for &(nx, nt) in grids {
        let p = problem.with_grid(nx, nt)?;
        let res = solve(&p, config)?;
        if !res.converged {
            return Err(Error::numerical(format!(
                "solver did not converge on {nx}x{nt} (residual {:e})",
                res.residual
            )));
        }
        let graph = res.graph(p.domain)?;
        let diags = diagnose(&graph, &p.metric, &p.f, p.sign, curves)?;
        levels.push(level(&p.domain, &diags));
        solves.push(res);
        all.push(diags);
    }
    Ok(RefineStudy {
        report: RegularityReport::new(levels)?,
        solves,
        curves: all,
    })
}

/// The same diagnostics on a fixed, unsolved `u` sampled on each grid.
pub fn frozen_study(
    problem: &DiscretizedProblem,
    u: &ScalarField,
    grids: &[(usize, usize)],
    curves: &CurveSet,
) -> Result<RegularityReport> {
    let mut levels = Vec::new();
    for &(nx, nt) in grids {
        let d = problem.domain.with_grid(nx, nt)?;
        let graph = IntrinsicGraph::from_field(d, u)?;
        let diags = diagnose(&graph, &problem.metric, &problem.f, problem.sign, curves)?;
        levels.push(level(&d, &diags));
    }
    RegularityReport::new(levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heis_problem(n: usize, f: f64, boundary: &str) -> DiscretizedProblem {
        DiscretizedProblem::new(
            GraphDomain::unit_square(n, n).unwrap(),
            ContactMetric::heisenberg(),
            ScalarField::constant(f),
            ScalarField::parse(boundary).unwrap(),
        )
    }

    #[test]
    fn constant_is_critical() {
        let p = heis_problem(9, 0.0, "0.3");
        let r = assemble_residual(&p, &p.initial_guess().unwrap()).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-14));
        let s = solve(&p, &SolverConfig::default()).unwrap();
        assert!(s.converged && s.iterations <= 2);
    }

    #[test]
    fn planes_are_discrete_critical_points() {
        let p = heis_problem(11, 0.0, "0.7*x - 0.2");
        let r = assemble_residual(&p, &p.initial_guess().unwrap()).unwrap();
        assert!(r.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-12);
    }

    #[test]
    fn residual_is_gradient_of_functional() {
        let m = ContactMetric::parse("1 + 0.1*sin(x + y)", "0.1*sin(t - y)", "1 + 0.1*cos(x*t)").unwrap();
        let p = DiscretizedProblem::new(
            GraphDomain::unit_square(7, 6).unwrap(),
            m,
            ScalarField::parse("0.5 + sin(x*t + y)").unwrap(),
            ScalarField::parse("0.2*sin(3*x - t) + x*t").unwrap(),
        );
        let u = p.initial_guess().unwrap();
        let r = assemble_residual(&p, &u).unwrap();
        let d = p.domain;
        let cell = d.hx() * d.ht();
        for k in [d.index(1, 1), d.index(3, 2), d.index(5, 4)] {
            let e = 1e-5;
            let mut up = u.clone();
            let mut dn = u.clone();
            up[k] += e;
            dn[k] -= e;
            let fd = (p.discrete_functional(&up).unwrap() - p.discrete_functional(&dn).unwrap()) / (2.0 * e) / cell;
            assert!((fd - r[k]).abs() <= 1e-6 * r[k].abs().max(1e-3), "{fd} vs {}", r[k]);
        }
    }

    #[test]
    fn plane_boundary_converges_to_plane() {
        let p = heis_problem(9, 0.0, "0.5*x + 0.1");
        let mut bad = p.initial_guess().unwrap();
        let d = p.domain;
        for k in 0..d.len() {
            let (i, j) = d.node(k);
            if !d.is_boundary(i, j) {
                bad[k] += 0.05 * ((i * j) as f64).sin();
            }
        }
        let s = solve_from(&p, &SolverConfig::default(), bad).unwrap();
        assert!(s.converged, "{:?}", s.history);
        let exact = p.initial_guess().unwrap();
        let err = s.u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
        assert!(s.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn cmc_small_grid_converges() {
        let p = heis_problem(9, 1.0, "0");
        let s = solve(&p, &SolverConfig::default()).unwrap();
        assert!(s.converged, "{:?}", s.history);
        assert!(s.residual <= 1e-10);
    }

    #[test]
    fn constrained_plane_has_zero_multiplier() {
        let p = heis_problem(9, 0.0, "0.2*x + 0.1");
        let target = p.discrete_volume(&p.initial_guess().unwrap()).unwrap();
        let s = volume_constrained_solve(&p, target, &SolverConfig::default()).unwrap();
        assert!(s.converged);
        assert!(s.h0.unwrap().abs() < 1e-8);
    }

    #[test]
    fn deterministic() {
        let p = heis_problem(9, 1.0, "0.1*x");
        let a = solve(&p, &SolverConfig::default()).unwrap();
        let b = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(a.u, b.u);
        assert_eq!(a.history, b.history);
    }
}
