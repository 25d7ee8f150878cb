use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use subriem_core::curves::{
    foliation_jacobian, geodesic_check, mean_curvature_along, regularity_diagnostic, trace, uniqueness_check,
    END_EXCLUSION,
};
use subriem_core::expr::ScalarField;
use subriem_core::geometry::{ContactMetric, PointFrame};
use subriem_core::graph::{
    area, first_variation, fmt_f64, pmc_value, volume, weighted_volume, GraphDomain, IntrinsicGraph,
};
use subriem_core::solver::{
    frozen_study, refine_study, solve, volume_constrained_solve, CurveSet, DiscretizedProblem, SolveResult,
};
use subriem_core::variation::{
    check_against_flow, h0_estimate, mean_curvature, sr_area, surface_frame, AmbientField, ParamGrid, ParamSurface,
    SupportBox,
};
use subriem_core::Vec3;

use crate::scenario::Scenario;
use crate::CliError;

/// What a command reports back.
pub struct Outcome {
    pub passed: bool,
    pub line: String,
    pub summary: Value,
}

fn csv_file(path: &Path, header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt_f64).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn json_file(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Config(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

fn load_graph(sc: &Scenario) -> Result<IntrinsicGraph, CliError> {
    if let Some(p) = sc.path("graph_csv") {
        return Ok(IntrinsicGraph::load_csv(&p)?);
    }
    let domain = sc.domain()?;
    let u = sc.field("u", "0")?;
    Ok(IntrinsicGraph::from_field(domain, &u)?)
}

fn problem(sc: &Scenario) -> Result<DiscretizedProblem, CliError> {
    let mut p = DiscretizedProblem::new(sc.domain()?, sc.metric()?, sc.field("f", "0")?, sc.field("u", "0")?);
    p.sign = sc.sign()?;
    Ok(p)
}

pub fn area_cmd(sc: &Scenario, _out: &Path, _seed: u64) -> Result<Outcome, CliError> {
    let g = load_graph(sc)?;
    let a = area(&g, &sc.metric()?)?;
    Ok(Outcome {
        passed: true,
        line: format!("{a:?}"),
        summary: json!({ "area": a, "nx": g.domain.nx, "nt": g.domain.nt }),
    })
}

pub fn volume_cmd(sc: &Scenario, _out: &Path, _seed: u64) -> Result<Outcome, CliError> {
    let g = load_graph(sc)?;
    let m = sc.metric()?;
    let f = sc.field("f", "0")?;
    let v = volume(&g, &m)?;
    let fv = weighted_volume(&g, &m, &f)?;
    let pmc = pmc_value(&g, &m, &f, sc.sign()?)?;
    Ok(Outcome {
        passed: true,
        line: format!("{v:?}"),
        summary: json!({ "volume": v, "f_volume": fv, "functional": pmc, "sign": sc.sign()? }),
    })
}

pub fn variation_check(sc: &Scenario, out: &Path, seed: u64) -> Result<Outcome, CliError> {
    let g = load_graph(sc)?;
    let m = sc.metric()?;
    let f = sc.field("f", "0")?;
    let sign = sc.sign()?;
    let cases: usize = sc.number("cases", 20)?;
    let s: f64 = sc.number("s_step", 1e-4)?;
    let tol = 1e-6;
    let d = g.domain;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for case in 0..cases {
        let (k1, k2, ph) = (
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(0.0..2.0 * PI),
        );
        let v: Vec<f64> = d
            .coords()
            .into_iter()
            .map(|(x, t)| {
                let (a, b) = ((x - d.x0) / (d.x1 - d.x0), (t - d.t0) / (d.t1 - d.t0));
                let bump = (PI * a).sin() * (PI * b).sin();
                if bump.abs() < 1e-14 {
                    0.0
                } else {
                    bump * (1.0 + 0.5 * (k1 * x + k2 * t + ph).sin())
                }
            })
            .collect();
        let shifted = |c: f64| -> Result<f64, CliError> {
            let w = g.u.iter().zip(&v).map(|(a, b)| a + c * b).collect();
            Ok(pmc_value(&g.with_values(w)?, &m, &f, sign)?)
        };
        let fd = (shifted(s)? - shifted(-s)?) / (2.0 * s);
        let an = first_variation(&g, &m, &f, sign, &v)?;
        let rel = (fd - an).abs() / an.abs().max(1e-300);
        worst = worst.max(rel);
        rows.push(vec![case as f64, an, fd, rel]);
    }
    csv_file(&out.join("cases.csv"), "case,analytic,fd,rel_err", rows)?;
    let passed = worst <= tol;
    Ok(Outcome {
        passed,
        line: format!("worst relative error {worst:e} over {cases} cases (tol {tol:e})"),
        summary: json!({ "cases": cases, "s_step": s, "worst_rel_err": worst, "tolerance": tol }),
    })
}

pub fn trace_cmd(sc: &Scenario, out: &Path, _seed: u64) -> Result<Outcome, CliError> {
    let g = load_graph(sc)?;
    let d = g.domain;
    let start = (
        sc.number("start_x", 0.5 * (d.x0 + d.x1))?,
        sc.number("start_t", 0.5 * (d.t0 + d.t1))?,
    );
    let r = sc.number("halfwidth", 0.25 * (d.x1 - d.x0))?;
    let h = sc.number("step", 1e-3)?;
    let mut c = trace(&g, start, r, h)?;
    let diag = regularity_diagnostic(&g, &sc.metric()?, &sc.field("f", "0")?, sc.sign()?, &mut c)?;
    c.write_csv(BufWriter::new(File::create(out.join("curve.csv"))?), &diag.residual)?;
    let q = foliation_jacobian(&g, &c);
    let uniq = if c.clipped {
        None
    } else {
        uniqueness_check(&g, start, r, h).ok()
    };
    Ok(Outcome {
        passed: true,
        line: format!(
            "{} samples from ({}, {}), clipped = {}",
            c.len(),
            start.0,
            start.1,
            c.clipped
        ),
        summary: json!({
            "start": [start.0, start.1],
            "halfwidth": r,
            "step": h,
            "samples": c.len(),
            "clipped": c.clipped,
            "horizontality_defect": c.horizontality_defect(),
            "q_min": q.iter().copied().fold(f64::INFINITY, f64::min),
            "diagnostic_sup": diag.sup,
            "uniqueness": uniq,
        }),
    })
}

fn solve_outputs(out: &Path, p: &DiscretizedProblem, res: &SolveResult) -> Result<(), CliError> {
    res.graph(p.domain)?.save_csv(&out.join("u.csv"))?;
    json_file(&out.join("solve.json"), res)
}

fn solve_summary(res: &SolveResult, config: &subriem_core::solver::SolverConfig) -> Value {
    json!({
        "converged": res.converged,
        "residual": res.residual,
        "iterations": res.iterations,
        "fallback_steps": res.fallback_steps,
        "h0": res.h0,
        "volume": res.volume,
        "target_volume": res.target_volume,
        "config": config,
    })
}

pub fn solve_cmd(sc: &Scenario, out: &Path, _seed: u64) -> Result<Outcome, CliError> {
    let p = problem(sc)?;
    let config = sc.solver_config()?;
    let res = solve(&p, &config)?;
    solve_outputs(out, &p, &res)?;
    Ok(Outcome {
        passed: res.converged,
        line: format!(
            "converged = {} after {} iterations, residual {:e}",
            res.converged, res.iterations, res.residual
        ),
        summary: solve_summary(&res, &config),
    })
}

pub fn solve_constrained(sc: &Scenario, out: &Path, _seed: u64) -> Result<Outcome, CliError> {
    let p = problem(sc)?;
    let config = sc.solver_config()?;
    let target: f64 = match sc.get("target_volume") {
        Some(_) => sc.number("target_volume", 0.0)?,
        None => return Err(CliError::Config("solve-constrained needs 'target_volume'".into())),
    };
    let res = volume_constrained_solve(&p, target, &config)?;
    solve_outputs(out, &p, &res)?;
    Ok(Outcome {
        passed: res.converged,
        line: format!(
            "converged = {}, h0 = {:?}, residual {:e}",
            res.converged,
            res.h0.unwrap_or(f64::NAN),
            res.residual
        ),
        summary: solve_summary(&res, &config),
    })
}

fn curve_set(sc: &Scenario, d: &GraphDomain) -> Result<CurveSet, CliError> {
    let cx = sc.number("curve_x", 0.5 * (d.x0 + d.x1))?;
    let (tm, tw) = (0.5 * (d.t0 + d.t1), d.t1 - d.t0);
    let default_t: Vec<f64> = [-0.15, -0.075, 0.0, 0.075, 0.15].iter().map(|o| tm + o * tw).collect();
    let ts = sc.list("curve_t", &default_t)?;
    Ok(CurveSet {
        starts: ts.into_iter().map(|t| (cx, t)).collect(),
        halfwidth: sc.number("halfwidth", 0.4 * (d.x1 - d.x0))?,
        step_ratio: sc.number("step_ratio", 0.5)?,
    })
}

/// Largest `|H − f|` and geodesic residuals along the curves of one level.
fn curvature_along(
    graph: &IntrinsicGraph,
    metric: &ContactMetric,
    f: &ScalarField,
    curves: &CurveSet,
) -> Result<(f64, f64, f64), CliError> {
    let (mut h_err, mut g1, mut g2) = (0.0f64, 0.0f64, 0.0f64);
    for &st in &curves.starts {
        let c = trace(graph, st, curves.halfwidth, curves.step(&graph.domain))?;
        let h = mean_curvature_along(graph, metric, &c)?;
        let fv = c
            .lift()
            .iter()
            .map(|p| f.value(p))
            .collect::<Result<Vec<_>, _>>()
            .map_err(subriem_core::Error::from)?;
        let n = h.len();
        for i in END_EXCLUSION..n - END_EXCLUSION {
            h_err = h_err.max((h[i] - fv[i]).abs());
        }
        let geo = geodesic_check(graph, metric, &c, &fv)?;
        g1 = g1.max(geo.first_order);
        g2 = g2.max(geo.second_order);
    }
    Ok((h_err, g1, g2))
}

pub fn regularity(sc: &Scenario, out: &Path, _seed: u64) -> Result<Outcome, CliError> {
    let p = problem(sc)?;
    let config = sc.solver_config()?;
    let sizes = sc.list("levels", &[33.0, 65.0, 129.0])?;
    let grids: Vec<(usize, usize)> = sizes
        .iter()
        .map(|&n| {
            if n < 3.0 || n.fract() != 0.0 {
                Err(CliError::Config(format!("'levels': bad grid size {n}")))
            } else {
                Ok((n as usize, n as usize))
            }
        })
        .collect::<Result<_, _>>()?;
    let curves = curve_set(sc, &p.domain)?;
    let study = refine_study(&p, &grids, &curves, &config)?;
    let mut rows = Vec::new();
    let mut curvature = Vec::new();
    for (k, ((lvl, res), diags)) in study
        .report
        .levels
        .iter()
        .zip(&study.solves)
        .zip(&study.curves)
        .enumerate()
    {
        let pk = p.with_grid(lvl.nx, lvl.nt)?;
        let g = res.graph(pk.domain)?;
        for (j, dg) in diags.iter().enumerate() {
            let mut c = trace(&g, dg.start, curves.halfwidth, curves.step(&pk.domain))?;
            let dd = regularity_diagnostic(&g, &pk.metric, &pk.f, pk.sign, &mut c)?;
            c.write_csv(
                BufWriter::new(File::create(out.join(format!("curve_{}_{j}.csv", lvl.nx)))?),
                &dd.residual,
            )?;
        }
        let (h, g1, g2) = curvature_along(&g, &pk.metric, &pk.f, &curves)?;
        curvature.push(json!({ "nx": lvl.nx, "sup_h_minus_f": h, "geodesic": g1, "geodesic_second_order": g2 }));
        let order = if k == 0 { f64::NAN } else { study.report.orders[k - 1] };
        rows.push(vec![
            lvl.nx as f64,
            lvl.nt as f64,
            lvl.h,
            lvl.sup,
            order,
            res.residual,
            h,
            g1,
        ]);
    }
    csv_file(
        &out.join("levels.csv"),
        "nx,nt,h,sup,order,solver_residual,sup_h_minus_f,geodesic",
        rows,
    )?;
    json_file(&out.join("regularity.json"), &study)?;
    let frozen = match sc.get("frozen_u") {
        Some(_) => {
            let rep = frozen_study(&p, &sc.field("frozen_u", "0")?, &grids, &curves)?;
            let sups: Vec<f64> = rep.levels.iter().map(|l| l.sup).collect();
            Some(json!({ "sup": sups, "orders": rep.orders }))
        }
        None => None,
    };
    let order = study.report.order;
    let passed = study.report.monotone_decreasing() && order >= 0.9;
    Ok(Outcome {
        passed,
        line: format!(
            "sup |M' - K| per level {:?}, observed order {order:.3}",
            study.report.levels.iter().map(|l| l.sup).collect::<Vec<_>>()
        ),
        summary: json!({
            "levels": study.report.levels,
            "orders": study.report.orders,
            "order": order,
            "order_bar": 0.9,
            "monotone": study.report.monotone_decreasing(),
            "curves": curves,
            "curvature": curvature,
            "frozen": frozen,
            "solver": config,
        }),
    })
}

/// Horizontal field `aX + bY` with coefficients from `rng`: value and Jacobian.
fn random_horizontal(rng: &mut ChaCha8Rng, p: &Vec3) -> (Vec3, Matrix3<f64>) {
    let c: [f64; 8] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    let (x, y, t) = (p[0], p[1], p[2]);
    // a = c0 + c1 x + c2 y t + c3 t², b = c4 + c5 y + c6 x t + c7 x²
    let a = c[0] + c[1] * x + c[2] * y * t + c[3] * t * t;
    let b = c[4] + c[5] * y + c[6] * x * t + c[7] * x * x;
    let ga = Vec3::new(c[1], c[2] * t, c[2] * y + 2.0 * c[3] * t);
    let gb = Vec3::new(c[6] * t + 2.0 * c[7] * x, c[5], c[6] * x);
    let v = Vec3::new(a, b, a * y - b * x);
    let mut d = Matrix3::zeros();
    for i in 0..3 {
        d[(0, i)] = ga[i];
        d[(1, i)] = gb[i];
        d[(2, i)] = ga[i] * y - gb[i] * x;
    }
    d[(2, 1)] += a;
    d[(2, 0)] -= b;
    (v, d)
}

#[derive(Default, serde::Serialize)]
struct Identities {
    frame: f64,
    symmetry: f64,
    bracket: f64,
    j_t: f64,
    tau_t: f64,
    min_orientation: f64,
    d_t_t: f64,
    parallel_t: f64,
    compatibility: f64,
}

fn point_identities(pf: &PointFrame, rng: &mut ChaCha8Rng, id: &mut Identities) {
    let t = pf.frame[2];
    let [x, y, _] = pf.frame;
    id.frame = id
        .frame
        .max((pf.inner(&t, &t) - 1.0).abs())
        .max(pf.inner(&t, &x).abs())
        .max(pf.inner(&t, &y).abs());
    let g = pf.horizontal;
    id.symmetry = id
        .symmetry
        .max(((g * pf.j) + (g * pf.j).transpose()).norm())
        .max(((g * pf.tau) - (g * pf.tau).transpose()).norm());
    let (v, dv) = random_horizontal(rng, &pf.point);
    let (w, dw) = random_horizontal(rng, &pf.point);
    let br = dw * v - dv * w;
    let jv = pf.j_op(&v);
    id.bracket = id.bracket.max((2.0 * pf.inner(&jv, &w) + pf.inner(&br, &t)).abs());
    if pf.inner(&v, &v) > 1e-12 {
        id.min_orientation = id.min_orientation.min(2.0 * pf.inner(&jv, &jv) / pf.inner(&v, &v));
    }
    let dtt = pf.d_t(&t);
    for e in pf.frame {
        let a = pf.inner(&dtt, &e);
        let b = pf.inner(&pf.d_t(&e), &t);
        id.j_t = id.j_t.max((0.5 * (a - b)).abs());
        id.tau_t = id.tau_t.max((0.5 * (a + b)).abs());
    }
    id.d_t_t = id.d_t_t.max(pf.norm(&dtt));
    let dir = Vec3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    );
    id.parallel_t = id.parallel_t.max(pf.norm(&pf.sr_covariant(&dir, &t, &Vec3::zeros())));
}

pub fn geometry_check(sc: &Scenario, _out: &Path, seed: u64) -> Result<Outcome, CliError> {
    let m = sc.metric()?;
    let d = sc.domain()?;
    let n: usize = sc.number("points", 100)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut id = Identities {
        min_orientation: f64::INFINITY,
        ..Default::default()
    };
    let random_point = |rng: &mut ChaCha8Rng| {
        Vec3::new(
            rng.gen_range(d.x0..d.x1),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(d.t0..d.t1),
        )
    };
    for _ in 0..n {
        let p = random_point(&mut rng);
        let pf = m.point_frame(&p)?;
        point_identities(&pf, &mut rng, &mut id);
        // metric compatibility along a short random segment through p
        let dir = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let (v0, v1) = (random_point(&mut rng), random_point(&mut rng));
        let (w0, w1) = (random_point(&mut rng), random_point(&mut rng));
        let pairing = |s: f64| -> Result<f64, CliError> {
            let q = m.point_frame(&(p + dir * s))?;
            Ok(q.inner(&(v0 + v1 * s), &(w0 + w1 * s)))
        };
        let h = 1e-5;
        let fd = (pairing(h)? - pairing(-h)?) / (2.0 * h);
        let an = pf.inner(&pf.sr_covariant(&dir, &v0, &v1), &w0) + pf.inner(&v0, &pf.sr_covariant(&dir, &w0, &w1));
        id.compatibility = id.compatibility.max((fd - an).abs());
    }
    let passed = id.frame <= 1e-12
        && id.symmetry <= 1e-10
        && id.bracket <= 1e-8
        && id.j_t <= 1e-8
        && id.tau_t <= 1e-8
        && id.min_orientation > 0.0
        && id.d_t_t <= 1e-8
        && id.parallel_t <= 1e-6
        && id.compatibility <= 1e-6;
    let tolerances = json!({
        "frame": 1e-12, "symmetry": 1e-10, "bracket": 1e-8, "j_t": 1e-8, "tau_t": 1e-8,
        "min_orientation": "> 0", "d_t_t": 1e-8, "parallel_t": 1e-6, "compatibility": 1e-6,
    });
    Ok(Outcome {
        passed,
        line: format!(
            "{n} points: bracket {:e}, compatibility {:e}, |D_T T| {:e}",
            id.bracket, id.compatibility, id.d_t_t
        ),
        summary: json!({ "points": n, "residuals": id, "tolerances": tolerances }),
    })
}

fn load_surface(sc: &Scenario) -> Result<ParamSurface, CliError> {
    let orientation = sc.orientation()?;
    if let Some(p) = sc.path("surface_csv") {
        return Ok(ParamSurface::load_csv(&p, orientation)?);
    }
    if sc.get("surface_x").is_some() || sc.get("surface_y").is_some() || sc.get("surface_t").is_some() {
        let (a1, b1) = sc.pair("s1_range", (0.0, 1.0))?;
        let (a2, b2) = sc.pair("s2_range", (0.0, 1.0))?;
        let n1: usize = sc.number("n1", 33)?;
        let n2: usize = sc.number("n2", n1)?;
        let grid = ParamGrid::new(a1, b1, a2, b2, n1, n2).map_err(|e| CliError::Config(e.to_string()))?;
        let f = [
            sc.field("surface_x", "x")?,
            sc.field("surface_y", "0")?,
            sc.field("surface_t", "t")?,
        ];
        return Ok(ParamSurface::from_exprs(grid, &f, orientation)?);
    }
    let s = ParamSurface::from_graph(&load_graph(sc)?)?;
    Ok(if orientation == s.orientation { s } else { s.flipped() })
}

fn random_fields(rng: &mut ChaCha8Rng, surface: &ParamSurface, count: usize) -> Result<Vec<AmbientField>, CliError> {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in &surface.points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let mut fields = Vec::with_capacity(count);
    for _ in 0..count {
        let mut comp = || {
            format!(
                "{:.6} + {:.6}*sin({:.6}*x + {:.6}*y + {:.6}*t) + {:.6}*x*t",
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-1.0..1.0)
            )
        };
        let (a, b, c) = (comp(), comp(), comp());
        let mut support: SupportBox = [None; 3];
        for (k, s) in support.iter_mut().enumerate() {
            let (l, h) = (lo[k], hi[k]);
            let (mid, w) = if h - l < 1e-9 {
                (l, 2.0)
            } else {
                (
                    l + (h - l) * rng.gen_range(0.35..0.65),
                    (h - l) * rng.gen_range(0.4..0.8),
                )
            };
            *s = Some((mid - 0.5 * w, mid + 0.5 * w));
        }
        fields.push(AmbientField::parse(&a, &b, &c, support)?);
    }
    Ok(fields)
}

pub fn surface_variation(sc: &Scenario, out: &Path, seed: u64) -> Result<Outcome, CliError> {
    let surface = load_surface(sc)?;
    let m = sc.metric()?;
    let s_step: f64 = sc.number("s_step", 1e-4)?;
    let fields = if sc.get("field_u1").is_some() || sc.get("field_u2").is_some() || sc.get("field_u3").is_some() {
        let support = [
            sc.get("support_x")
                .map(|_| sc.pair("support_x", (0.0, 0.0)))
                .transpose()?,
            sc.get("support_y")
                .map(|_| sc.pair("support_y", (0.0, 0.0)))
                .transpose()?,
            sc.get("support_t")
                .map(|_| sc.pair("support_t", (0.0, 0.0)))
                .transpose()?,
        ];
        vec![AmbientField::new(
            [
                sc.field("field_u1", "0")?,
                sc.field("field_u2", "0")?,
                sc.field("field_u3", "0")?,
            ],
            support,
        )]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_fields(&mut rng, &surface, sc.number("fields", 5)?)?
    };
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut passed = true;
    for (k, field) in fields.iter().enumerate() {
        let c = check_against_flow(&surface, &m, field, s_step, 1e-6, 1e-4)?;
        let h0 = h0_estimate(&surface, &m, field).ok();
        passed &= c.passed;
        rows.push(vec![
            k as f64,
            c.formula,
            c.oracle,
            c.abs_err,
            c.tolerance,
            h0.map_or(f64::NAN, |h| h.h0),
        ]);
        checks.push(json!({ "check": c, "h0": h0 }));
    }
    csv_file(&out.join("checks.csv"), "field,formula,flow,abs_err,tolerance,h0", rows)?;
    let h = mean_curvature(&surface, &m)?;
    csv_file(
        &out.join("mean_curvature.csv"),
        "s1,s2,x,y,t,H",
        (0..surface.grid.len()).map(|k| {
            let (a, b) = surface.grid.sigma(k);
            let p = surface.points[k];
            vec![a, b, p[0], p[1], p[2], h[k]]
        }),
    )?;
    let singular = surface_frame(&surface, &m)?.singular_count();
    let sra = sr_area(&surface, &m)?;
    Ok(Outcome {
        passed,
        line: format!("{} fields, all within tolerance = {passed}, area {sra:?}", fields.len()),
        summary: json!({
            "area": sra,
            "singular_samples": singular,
            "orientation": surface.orientation,
            "s_step": s_step,
            "tolerance": { "abs": 1e-6, "rel": 1e-4 },
            "fields": checks,
        }),
    })
}
