//! Parameterized surfaces, their sub-Riemannian frames, area, first variation
//! under ambient flows, mean curvature and the volume multiplier.

use std::io::Read;
use std::path::Path;

use nalgebra::{Matrix2, Matrix3, Vector2};
use rayon::prelude::*;
use serde::Serialize;

use crate::expr::{ScalarField, Var};
use crate::geometry::{ContactMetric, FieldSample, PointFrame};
use crate::graph::IntrinsicGraph;
use crate::interp::diff_axis;
use crate::ode::rk4_step;
use crate::quadrature::trapezoid_weights;
use crate::{Error, Result, Vec3};

/// Samples with `|N_h|` below this are on the singular set.
pub const EPS_SING: f64 = 1e-8;
/// Smallest admissible Gram determinant of the tangents.
pub const MIN_GRAM: f64 = 1e-12;

/// Which side the normal `F₁ × F₂` points to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// `F₁ × F₂` is the inner normal.
    Inner,
    /// `F₁ × F₂` is the outer normal.
    Outer,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Inner => 1.0,
            Orientation::Outer => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::Inner => Orientation::Outer,
            Orientation::Outer => Orientation::Inner,
        }
    }
}

/// Uniform parameter grid `[a1, b1] × [a2, b2]`, `σ₁` fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamGrid {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    pub n1: usize,
    pub n2: usize,
}

impl ParamGrid {
    pub fn new(a1: f64, b1: f64, a2: f64, b2: f64, n1: usize, n2: usize) -> Result<Self> {
        if n1 < 3 || n2 < 3 || !(b1 > a1 && b2 > a2) {
            return Err(Error::invalid(
                "parameter grid needs a nonempty rectangle and 3 nodes per side",
            ));
        }
        Ok(ParamGrid { a1, b1, a2, b2, n1, n2 })
    }

    pub fn h1(&self) -> f64 {
        (self.b1 - self.a1) / (self.n1 - 1) as f64
    }

    pub fn h2(&self) -> f64 {
        (self.b2 - self.a2) / (self.n2 - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sigma(&self, k: usize) -> (f64, f64) {
        let (i, j) = (k % self.n1, k / self.n1);
        (self.a1 + i as f64 * self.h1(), self.a2 + j as f64 * self.h2())
    }

    pub fn weights(&self) -> Vec<f64> {
        let w1 = trapezoid_weights(self.n1, self.h1());
        let w2 = trapezoid_weights(self.n2, self.h2());
        (0..self.len()).map(|k| w1[k % self.n1] * w2[k / self.n1]).collect()
    }
}

/// Sampled immersion with first derivatives.
#[derive(Debug, Clone)]
pub struct ParamSurface {
    pub grid: ParamGrid,
    pub points: Vec<Vec3>,
    pub d1: Vec<Vec3>,
    pub d2: Vec<Vec3>,
    pub orientation: Orientation,
}

impl ParamSurface {
    pub fn new(
        grid: ParamGrid,
        points: Vec<Vec3>,
        d1: Vec<Vec3>,
        d2: Vec<Vec3>,
        orientation: Orientation,
    ) -> Result<Self> {
        let n = grid.len();
        if points.len() != n || d1.len() != n || d2.len() != n {
            return Err(Error::invalid("surface samples do not match the parameter grid"));
        }
        for k in 0..n {
            let (a, b) = (d1[k], d2[k]);
            let gram = a.norm_squared() * b.norm_squared() - a.dot(&b).powi(2);
            if gram.is_nan() || gram <= MIN_GRAM || !points[k].iter().all(|v| v.is_finite()) {
                let (s1, s2) = grid.sigma(k);
                return Err(Error::numerical(format!("not an immersion at σ = ({s1}, {s2})")));
            }
        }
        Ok(ParamSurface {
            grid,
            points,
            d1,
            d2,
            orientation,
        })
    }

    /// Tangents by second-order differences of the samples.
    pub fn from_samples(grid: ParamGrid, points: Vec<Vec3>, orientation: Orientation) -> Result<Self> {
        if points.len() != grid.len() {
            return Err(Error::invalid("surface samples do not match the parameter grid"));
        }
        let mut d1 = vec![Vec3::zeros(); grid.len()];
        let mut d2 = vec![Vec3::zeros(); grid.len()];
        for c in 0..3 {
            let comp: Vec<f64> = points.iter().map(|p| p[c]).collect();
            let a = diff_axis(&comp, grid.n1, grid.n2, grid.h1(), 0);
            let b = diff_axis(&comp, grid.n1, grid.n2, grid.h2(), 1);
            for k in 0..grid.len() {
                d1[k][c] = a[k];
                d2[k][c] = b[k];
            }
        }
        ParamSurface::new(grid, points, d1, d2, orientation)
    }

    /// `F = (fx, fy, ft)` written with `x` for `σ₁` and `t` for `σ₂`;
    /// tangents are the symbolic partials.
    pub fn from_exprs(grid: ParamGrid, f: &[ScalarField; 3], orientation: Orientation) -> Result<Self> {
        let mut points = Vec::with_capacity(grid.len());
        let mut d1 = Vec::with_capacity(grid.len());
        let mut d2 = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let (s1, s2) = grid.sigma(k);
            let q = Vec3::new(s1, 0.0, s2);
            let mut p = Vec3::zeros();
            let mut a = Vec3::zeros();
            let mut b = Vec3::zeros();
            for c in 0..3 {
                p[c] = f[c].value(&q)?;
                a[c] = f[c].partial(Var::X).eval(&q)?;
                b[c] = f[c].partial(Var::T).eval(&q)?;
            }
            points.push(p);
            d1.push(a);
            d2.push(b);
        }
        ParamSurface::new(grid, points, d1, d2, orientation)
    }

    /// The graph `f_u` with tangents `∂x f_u`, `∂t f_u` built from the grid
    /// derivatives of `u`; `F₁ × F₂` points into the subgraph.
    pub fn from_graph(graph: &IntrinsicGraph) -> Result<Self> {
        let d = graph.domain;
        let grid = ParamGrid::new(d.x0, d.x1, d.t0, d.t1, d.nx, d.nt)?;
        let mut points = Vec::with_capacity(d.len());
        let mut d1 = Vec::with_capacity(d.len());
        let mut d2 = Vec::with_capacity(d.len());
        for k in 0..d.len() {
            let p = graph.embed_index(k);
            let (x, u, ux, ut) = (p[0], graph.u[k], graph.ux[k], graph.ut[k]);
            points.push(p);
            d1.push(Vec3::new(1.0, ux, -u - x * ux));
            d2.push(Vec3::new(0.0, ut, 1.0 - x * ut));
        }
        ParamSurface::new(grid, points, d1, d2, Orientation::Inner)
    }

    /// Read `σ1,σ2,x,y,t` rows with `σ1` varying fastest.
    pub fn read_csv<R: Read>(r: R, orientation: Orientation) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let names = ["σ1", "σ2", "x", "y", "t"];
        let alt = ["s1", "s2", "x", "y", "t"];
        let cols: Vec<usize> = names
            .iter()
            .zip(alt)
            .map(|(n, a)| {
                headers
                    .iter()
                    .position(|h| h.trim() == *n || h.trim() == a)
                    .ok_or_else(|| Error::invalid(format!("missing column '{a}'")))
            })
            .collect::<Result<_>>()?;
        let mut rows: Vec<[f64; 5]> = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let mut row = [0.0; 5];
            for (c, &col) in cols.iter().enumerate() {
                let s = rec.get(col).unwrap_or("").trim();
                row[c] = s.parse().map_err(|_| Error::invalid(format!("bad number '{s}'")))?;
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::invalid("empty surface file"));
        }
        let n1 = rows.iter().take_while(|r| r[1] == rows[0][1]).count();
        if !rows.len().is_multiple_of(n1) {
            return Err(Error::invalid("rows do not form a rectangular parameter grid"));
        }
        let n2 = rows.len() / n1;
        let grid = ParamGrid::new(rows[0][0], rows[n1 - 1][0], rows[0][1], rows[rows.len() - 1][1], n1, n2)?;
        for (k, r) in rows.iter().enumerate() {
            let (s1, s2) = grid.sigma(k);
            if (r[0] - s1).abs() > 1e-9 * (1.0 + s1.abs()) || (r[1] - s2).abs() > 1e-9 * (1.0 + s2.abs()) {
                return Err(Error::invalid(format!("row {k} is off the uniform parameter grid")));
            }
        }
        let points = rows.iter().map(|r| Vec3::new(r[2], r[3], r[4])).collect();
        ParamSurface::from_samples(grid, points, orientation)
    }

    pub fn load_csv(path: &Path, orientation: Orientation) -> Result<Self> {
        ParamSurface::read_csv(std::fs::File::open(path)?, orientation)
    }

    pub fn flipped(&self) -> Self {
        let mut s = self.clone();
        s.orientation = self.orientation.flipped();
        s
    }
}

/// Frame at one sample. `z` and `s` are zero on singular samples.
#[derive(Debug, Clone)]
pub struct SampleFrame {
    pub point: Vec3,
    /// Unit normal on the inner side.
    pub n: Vec3,
    pub n_h: Vec3,
    pub n_h_norm: f64,
    pub nu_h: Vec3,
    pub z: Vec3,
    pub s: Vec3,
    /// Riemannian area element `|F₁ × F₂|`.
    pub jac: f64,
    pub singular: bool,
}

#[derive(Debug, Clone)]
pub struct SurfaceFrame {
    pub samples: Vec<SampleFrame>,
    pub frames: Vec<PointFrame>,
}

impl SurfaceFrame {
    pub fn singular_count(&self) -> usize {
        self.samples.iter().filter(|s| s.singular).count()
    }
}

fn sample_frame(pf: &PointFrame, d1: &Vec3, d2: &Vec3, sign: f64) -> SampleFrame {
    let cross = pf.cross(d1, d2);
    let jac = pf.norm(&cross);
    let n = cross * (sign / jac);
    let n_h = pf.horizontal_part(&pf.to_frame(&n));
    let n_h_norm = pf.norm(&n_h);
    let singular = n_h_norm < EPS_SING;
    let (nu_h, z, s) = if singular {
        (Vec3::zeros(), Vec3::zeros(), Vec3::zeros())
    } else {
        let nu = n_h / n_h_norm;
        let jn = pf.j_op(&pf.to_frame(&nu));
        let z = jn / pf.norm(&jn);
        let s = nu * pf.vertical(&n) - pf.frame[2] * n_h_norm;
        (nu, z, s)
    };
    SampleFrame {
        point: pf.point,
        n,
        n_h,
        n_h_norm,
        nu_h,
        z,
        s,
        jac,
        singular,
    }
}

/// `N`, `N_h`, `ν_h`, `Z = J(ν_h)/|J(ν_h)|` and `S = ⟨N,T⟩ν_h − |N_h|T`.
pub fn surface_frame(surface: &ParamSurface, metric: &ContactMetric) -> Result<SurfaceFrame> {
    let sign = surface.orientation.sign();
    let pairs: Vec<(PointFrame, SampleFrame)> = (0..surface.grid.len())
        .into_par_iter()
        .map(|k| {
            let pf = metric.point_frame(&surface.points[k])?;
            let sf = sample_frame(&pf, &surface.d1[k], &surface.d2[k], sign);
            Ok((pf, sf))
        })
        .collect::<Result<_>>()?;
    let (frames, samples) = pairs.into_iter().unzip();
    Ok(SurfaceFrame { samples, frames })
}

/// `∫ |N_h| dΣ`.
pub fn sr_area(surface: &ParamSurface, metric: &ContactMetric) -> Result<f64> {
    let dens: Vec<f64> = (0..surface.grid.len())
        .into_par_iter()
        .map(|k| {
            let pf = metric.point_frame(&surface.points[k])?;
            Ok(horizontal_density(&pf, &surface.d1[k], &surface.d2[k]))
        })
        .collect::<Result<_>>()?;
    Ok(surface.grid.weights().iter().zip(&dens).map(|(w, d)| w * d).sum())
}

/// `|(a × b)_h|`, the area density `|N_h| Jac`.
fn horizontal_density(pf: &PointFrame, a: &Vec3, b: &Vec3) -> f64 {
    let c = pf.cross(a, b);
    pf.norm(&pf.horizontal_part(&pf.to_frame(&c)))
}

/// Box on which a field is supported; `None` leaves an axis unbounded.
pub type SupportBox = [Option<(f64, f64)>; 3];

/// `χ · (u₁ X + u₂ Y + u₃ T)` with `χ` a product of smooth bumps.
#[derive(Debug, Clone)]
pub struct AmbientField {
    pub components: [ScalarField; 3],
    pub support: SupportBox,
}

/// `exp(1 − 1/(1 − r²))` on `|r| < 1` for `r` mapping `(lo, hi)` to `(−1, 1)`,
/// with its derivative.
fn bump(v: f64, lo: f64, hi: f64) -> (f64, f64) {
    let r = (2.0 * v - lo - hi) / (hi - lo);
    if r.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let d = 1.0 - r * r;
    let b = (1.0 - 1.0 / d).exp();
    (b, b * (-2.0 * r / (d * d)) * 2.0 / (hi - lo))
}

impl AmbientField {
    pub fn new(components: [ScalarField; 3], support: SupportBox) -> Self {
        AmbientField { components, support }
    }

    pub fn zero() -> Self {
        let z = || ScalarField::constant(0.0);
        AmbientField::new([z(), z(), z()], [None; 3])
    }

    pub fn parse(u1: &str, u2: &str, u3: &str, support: SupportBox) -> Result<Self> {
        Ok(AmbientField::new(
            [
                ScalarField::parse(u1)?,
                ScalarField::parse(u2)?,
                ScalarField::parse(u3)?,
            ],
            support,
        ))
    }

    fn cutoff(&self, p: &Vec3) -> (f64, Vec3) {
        let mut vals = [1.0; 3];
        let mut ders = [0.0; 3];
        for c in 0..3 {
            if let Some((lo, hi)) = self.support[c] {
                let (b, db) = bump(p[c], lo, hi);
                vals[c] = b;
                ders[c] = db;
            }
        }
        let chi = vals[0] * vals[1] * vals[2];
        let grad = Vec3::new(
            ders[0] * vals[1] * vals[2],
            vals[0] * ders[1] * vals[2],
            vals[0] * vals[1] * ders[2],
        );
        (chi, grad)
    }

    /// Coordinate value and Jacobian at `p`.
    pub fn sample(&self, p: &Vec3) -> Result<FieldSample> {
        let (chi, dchi) = self.cutoff(p);
        if chi == 0.0 && dchi == Vec3::zeros() {
            return Ok(FieldSample::constant(Vec3::zeros()));
        }
        let mut v = [0.0; 3];
        let mut g = [Vec3::zeros(); 3];
        for c in 0..3 {
            let (a, b) = self.components[c].value_and_gradient(p)?;
            v[c] = a;
            g[c] = b;
        }
        let (x, y) = (p[0], p[1]);
        let w = Vec3::new(v[0], v[1], v[0] * y - v[1] * x + v[2]);
        let mut dw = Matrix3::zeros();
        for i in 0..3 {
            dw[(0, i)] = g[0][i];
            dw[(1, i)] = g[1][i];
            dw[(2, i)] = g[0][i] * y - g[1][i] * x + g[2][i];
        }
        dw[(2, 1)] += v[0];
        dw[(2, 0)] -= v[1];
        Ok(FieldSample {
            value: w * chi,
            jacobian: w * dchi.transpose() + dw * chi,
        })
    }

    pub fn is_outside_support(&self, p: &Vec3) -> bool {
        (0..3).any(|c| match self.support[c] {
            Some((lo, hi)) => p[c] <= lo || p[c] >= hi,
            None => false,
        })
    }
}

/// Integrand of the first variation at one sample, per unit `dΣ`.
fn variation_density(pf: &PointFrame, sf: &SampleFrame, u: &FieldSample) -> f64 {
    let uv = u.value;
    let ut = pf.vertical(&uv);
    // S(⟨U,T⟩) with ⟨U,T⟩ = U^t + x U^y − y U^x
    let du_s = u.directional(&sf.s);
    let s_ut = pf.vertical(&du_s) + sf.s[0] * uv[1] - sf.s[1] * uv[0];
    let ju = pf.j_op(&pf.to_frame(&uv));
    let nabla_z_u = pf.sr_covariant(&sf.z, &uv, &u.directional(&sf.z));
    let zf = pf.to_frame(&sf.z);
    let tau_zz = pf.inner(&pf.tau_op(&zf), &sf.z);
    -s_ut - 2.0 * pf.inner(&ju, &sf.s) + sf.n_h_norm * pf.inner(&nabla_z_u, &sf.z) + sf.n_h_norm * ut * tau_zz
}

/// Quadrature of `−S(⟨U,T⟩) − 2⟨J(U),S⟩ + |N_h|⟨∇_Z U,Z⟩ + |N_h|⟨U,T⟩⟨τ(Z),Z⟩`.
pub fn first_variation_general(surface: &ParamSurface, metric: &ContactMetric, field: &AmbientField) -> Result<f64> {
    let frame = surface_frame(surface, metric)?;
    let vals: Vec<f64> = (0..surface.grid.len())
        .into_par_iter()
        .map(|k| {
            let sf = &frame.samples[k];
            let u = field.sample(&sf.point)?;
            if u.value == Vec3::zeros() && u.jacobian == Matrix3::zeros() {
                return Ok(0.0);
            }
            if sf.singular {
                return Err(Error::numerical(format!(
                    "singular sample at {:?} inside the support of the field",
                    surface.grid.sigma(k)
                )));
            }
            Ok(variation_density(&frame.frames[k], sf, &u) * sf.jac)
        })
        .collect::<Result<_>>()?;
    Ok(surface.grid.weights().iter().zip(&vals).map(|(w, v)| w * v).sum())
}

const FLOW_SUBSTEPS: usize = 2;

/// Advect a point and two tangent vectors by the flow of `field` for time `s`.
fn flow(field: &AmbientField, p: &Vec3, a: &Vec3, b: &Vec3, s: f64) -> Result<(Vec3, Vec3, Vec3)> {
    let mut rhs = |_t: f64, y: &[f64; 9]| -> Result<[f64; 9]> {
        let p = Vec3::new(y[0], y[1], y[2]);
        let va = Vec3::new(y[3], y[4], y[5]);
        let vb = Vec3::new(y[6], y[7], y[8]);
        let smp = field.sample(&p)?;
        let da = smp.jacobian * va;
        let db = smp.jacobian * vb;
        Ok([
            smp.value[0],
            smp.value[1],
            smp.value[2],
            da[0],
            da[1],
            da[2],
            db[0],
            db[1],
            db[2],
        ])
    };
    let mut y = [p[0], p[1], p[2], a[0], a[1], a[2], b[0], b[1], b[2]];
    let h = s / FLOW_SUBSTEPS as f64;
    for k in 0..FLOW_SUBSTEPS {
        y = rk4_step(&mut rhs, k as f64 * h, &y, h)?;
    }
    Ok((
        Vec3::new(y[0], y[1], y[2]),
        Vec3::new(y[3], y[4], y[5]),
        Vec3::new(y[6], y[7], y[8]),
    ))
}

/// Area of the surface moved by the flow for time `s`.
pub fn flowed_area(surface: &ParamSurface, metric: &ContactMetric, field: &AmbientField, s: f64) -> Result<f64> {
    let dens: Vec<f64> = (0..surface.grid.len())
        .into_par_iter()
        .map(|k| {
            let (p, a, b) = flow(field, &surface.points[k], &surface.d1[k], &surface.d2[k], s)?;
            let gram = a.norm_squared() * b.norm_squared() - a.dot(&b).powi(2);
            if gram.is_nan() || gram <= MIN_GRAM {
                return Err(Error::numerical("immersion lost under the flow"));
            }
            let pf = metric.point_frame(&p)?;
            Ok(horizontal_density(&pf, &a, &b))
        })
        .collect::<Result<_>>()?;
    Ok(surface.grid.weights().iter().zip(&dens).map(|(w, d)| w * d).sum())
}

/// `(A(φ_s) − A(φ_{−s})) / 2s` with RK4-advected points and tangents.
pub fn flow_area_derivative(
    surface: &ParamSurface,
    metric: &ContactMetric,
    field: &AmbientField,
    s_step: f64,
) -> Result<f64> {
    let plus = flowed_area(surface, metric, field, s_step)?;
    let minus = flowed_area(surface, metric, field, -s_step)?;
    Ok((plus - minus) / (2.0 * s_step))
}

/// Rate of change of the enclosed Riemannian volume, `−∫ g(U, N_in) dΣ`.
pub fn volume_derivative(surface: &ParamSurface, metric: &ContactMetric, field: &AmbientField) -> Result<f64> {
    let sign = surface.orientation.sign();
    let vals: Vec<f64> = (0..surface.grid.len())
        .into_par_iter()
        .map(|k| {
            let u = field.sample(&surface.points[k])?.value;
            if u == Vec3::zeros() {
                return Ok(0.0);
            }
            let pf = metric.point_frame(&surface.points[k])?;
            Ok(-sign * pf.volume_form(&u, &surface.d1[k], &surface.d2[k]))
        })
        .collect::<Result<_>>()?;
    Ok(surface.grid.weights().iter().zip(&vals).map(|(w, v)| w * v).sum())
}

/// `H = −⟨∇_Z ν_h, Z⟩` per sample (`NaN` on singular samples). The
/// derivative along `Z` combines parameter-grid differences of `ν_h`.
pub fn mean_curvature(surface: &ParamSurface, metric: &ContactMetric) -> Result<Vec<f64>> {
    let frame = surface_frame(surface, metric)?;
    let g = surface.grid;
    let mut dnu1 = vec![Vec3::zeros(); g.len()];
    let mut dnu2 = vec![Vec3::zeros(); g.len()];
    for c in 0..3 {
        let comp: Vec<f64> = frame.samples.iter().map(|s| s.nu_h[c]).collect();
        let a = diff_axis(&comp, g.n1, g.n2, g.h1(), 0);
        let b = diff_axis(&comp, g.n1, g.n2, g.h2(), 1);
        for k in 0..g.len() {
            dnu1[k][c] = a[k];
            dnu2[k][c] = b[k];
        }
    }
    Ok((0..g.len())
        .map(|k| {
            let sf = &frame.samples[k];
            if sf.singular {
                return f64::NAN;
            }
            let pf = &frame.frames[k];
            let (f1, f2) = (surface.d1[k], surface.d2[k]);
            // parameter components of Z
            let gram = Matrix2::new(f1.dot(&f1), f1.dot(&f2), f1.dot(&f2), f2.dot(&f2));
            let c = gram.try_inverse().unwrap() * Vector2::new(f1.dot(&sf.z), f2.dot(&sf.z));
            let dnu = dnu1[k] * c[0] + dnu2[k] * c[1];
            let nabla = pf.sr_covariant(&sf.z, &sf.nu_h, &dnu);
            -pf.inner(&nabla, &sf.z)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct H0Estimate {
    pub area_derivative: f64,
    pub volume_derivative: f64,
    pub h0: f64,
}

/// `H₀ = A'(0) / V'(0)` for the flow of `field`.
pub fn h0_estimate(surface: &ParamSurface, metric: &ContactMetric, field: &AmbientField) -> Result<H0Estimate> {
    let dv = volume_derivative(surface, metric, field)?;
    if dv.abs() <= 1e-10 {
        return Err(Error::numerical("test field does not change the volume"));
    }
    let da = first_variation_general(surface, metric, field)?;
    Ok(H0Estimate {
        area_derivative: da,
        volume_derivative: dv,
        h0: da / dv,
    })
}

/// One comparison of the first variation with its flow oracle.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VariationCheck {
    pub formula: f64,
    pub oracle: f64,
    pub abs_err: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compare against the flow oracle with tolerance `max(abs, rel·|value|)`.
pub fn check_against_flow(
    surface: &ParamSurface,
    metric: &ContactMetric,
    field: &AmbientField,
    s_step: f64,
    abs: f64,
    rel: f64,
) -> Result<VariationCheck> {
    let formula = first_variation_general(surface, metric, field)?;
    let oracle = flow_area_derivative(surface, metric, field, s_step)?;
    let abs_err = (formula - oracle).abs();
    let tolerance = abs.max(rel * oracle.abs());
    Ok(VariationCheck {
        formula,
        oracle,
        abs_err,
        tolerance,
        passed: abs_err <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{area, characteristic_frame, GraphDomain};
    use approx::assert_abs_diff_eq;

    fn plane(n: usize) -> ParamSurface {
        let f = [
            ScalarField::parse("x").unwrap(),
            ScalarField::constant(0.0),
            ScalarField::parse("t").unwrap(),
        ];
        ParamSurface::from_exprs(
            ParamGrid::new(0.0, 1.0, 0.0, 1.0, n, n).unwrap(),
            &f,
            Orientation::Inner,
        )
        .unwrap()
    }

    #[test]
    fn vertical_plane_frame() {
        let m = ContactMetric::heisenberg();
        let s = plane(5);
        let fr = surface_frame(&s, &m).unwrap();
        for (sf, pf) in fr.samples.iter().zip(&fr.frames) {
            let [x, y, t] = pf.frame;
            // ∂x × ∂t = −Y at points of y = 0
            assert!((sf.n + y).norm() < 1e-12);
            assert_abs_diff_eq!(sf.n_h_norm, 1.0, epsilon = 1e-12);
            assert!((sf.z - x).norm() < 1e-12);
            assert!(pf.volume_form(&sf.nu_h, &sf.z, &t) > 0.0);
            assert_abs_diff_eq!(pf.inner(&sf.s, &sf.n), 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(sr_area(&s, &m).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn horizontal_plane_is_singular_at_origin() {
        let f = [
            ScalarField::parse("x").unwrap(),
            ScalarField::parse("t").unwrap(),
            ScalarField::constant(0.0),
        ];
        let s = ParamSurface::from_exprs(
            ParamGrid::new(-1.0, 1.0, -1.0, 1.0, 5, 5).unwrap(),
            &f,
            Orientation::Inner,
        )
        .unwrap();
        let fr = surface_frame(&s, &ContactMetric::heisenberg()).unwrap();
        assert!(fr.samples[12].singular);
        assert_eq!(fr.singular_count(), 1);
    }

    #[test]
    fn degenerate_immersion_rejected() {
        let f = [
            ScalarField::parse("x").unwrap(),
            ScalarField::parse("x").unwrap(),
            ScalarField::constant(0.0),
        ];
        assert!(ParamSurface::from_exprs(
            ParamGrid::new(0.0, 1.0, 0.0, 1.0, 4, 4).unwrap(),
            &f,
            Orientation::Inner
        )
        .is_err());
    }

    #[test]
    fn graph_area_and_frame_agree() {
        let m = ContactMetric::parse("1 + 0.1*sin(x + y)", "0.1*sin(t - y)", "1 + 0.1*cos(x*t)").unwrap();
        let gr = IntrinsicGraph::from_fn(GraphDomain::unit_square(13, 11).unwrap(), |x, t| {
            0.3 * (x + 2.0 * t).sin()
        })
        .unwrap();
        let s = ParamSurface::from_graph(&gr).unwrap();
        assert_abs_diff_eq!(sr_area(&s, &m).unwrap(), area(&gr, &m).unwrap(), epsilon = 1e-12);
        let fr = surface_frame(&s, &m).unwrap();
        for k in 0..gr.domain.len() {
            let (zx, zy) = characteristic_frame(&gr, &m, k).unwrap();
            let pf = &fr.frames[k];
            assert_abs_diff_eq!(pf.inner(&fr.samples[k].z, &pf.frame[0]), zx, epsilon = 1e-10);
            assert_abs_diff_eq!(pf.inner(&fr.samples[k].z, &pf.frame[1]), zy, epsilon = 1e-10);
        }
    }

    #[test]
    fn area_is_parameterization_invariant() {
        let m = ContactMetric::heisenberg();
        let g1 = ParamGrid::new(0.0, 1.0, 0.0, 1.0, 9, 9).unwrap();
        let g2 = ParamGrid::new(0.0, 2.0, 0.0, 3.0, 9, 9).unwrap();
        let f1 = ["x", "0.2*x*t", "t"].map(|e| ScalarField::parse(e).unwrap());
        let f2 = ["x/2", "0.2*(x/2)*(t/3)", "t/3"].map(|e| ScalarField::parse(e).unwrap());
        let a1 = sr_area(&ParamSurface::from_exprs(g1, &f1, Orientation::Inner).unwrap(), &m).unwrap();
        let a2 = sr_area(&ParamSurface::from_exprs(g2, &f2, Orientation::Inner).unwrap(), &m).unwrap();
        assert_abs_diff_eq!(a1, a2, epsilon = 1e-10);
    }

    #[test]
    fn bump_support_and_derivative() {
        let f = AmbientField::parse("1 + x", "y*t", "2", [Some((0.2, 0.8)), Some((-0.5, 0.5)), None]).unwrap();
        assert_eq!(f.sample(&Vec3::new(0.9, 0.0, 0.0)).unwrap().value, Vec3::zeros());
        assert!(f.is_outside_support(&Vec3::new(0.1, 0.0, 0.0)));
        let p = Vec3::new(0.4, 0.1, 0.3);
        let s = f.sample(&p).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut a = p;
            let mut b = p;
            a[i] += h;
            b[i] -= h;
            let d = (f.sample(&a).unwrap().value - f.sample(&b).unwrap().value) / (2.0 * h);
            assert!((d - s.jacobian.column(i)).norm() < 1e-7);
        }
    }

    #[test]
    fn plane_is_critical_for_y_fields() {
        let m = ContactMetric::heisenberg();
        let s = plane(41);
        let u = AmbientField::parse(
            "0",
            "1 + x*t",
            "0",
            [Some((0.2, 0.8)), Some((-1.0, 1.0)), Some((0.1, 0.9))],
        )
        .unwrap();
        let v = first_variation_general(&s, &m, &u).unwrap();
        assert!(v.abs() < 1e-12, "{v}");
        let o = flow_area_derivative(&s, &m, &u, 1e-4).unwrap();
        assert!(o.abs() < 1e-8, "{o}");
    }

    #[test]
    fn formula_matches_flow_oracle() {
        let m = ContactMetric::parse("1 + 0.1*sin(x + y)", "0.1*sin(t - y)", "1 + 0.1*cos(x*t)").unwrap();
        let f = ["x", "0.3*sin(x + 2*t)", "t - x*0.3*sin(x + 2*t)"].map(|e| ScalarField::parse(e).unwrap());
        let s = ParamSurface::from_exprs(
            ParamGrid::new(0.0, 1.0, 0.0, 1.0, 21, 21).unwrap(),
            &f,
            Orientation::Inner,
        )
        .unwrap();
        let u = AmbientField::parse(
            "x - t",
            "1 + y",
            "0.5*x*t",
            [Some((0.1, 0.9)), Some((-1.0, 1.0)), Some((-0.5, 1.2))],
        )
        .unwrap();
        let c = check_against_flow(&s, &m, &u, 1e-4, 1e-6, 1e-4).unwrap();
        assert!(c.passed, "{c:?}");
        assert_eq!(first_variation_general(&s, &m, &AmbientField::zero()).unwrap(), 0.0);
    }

    #[test]
    fn mean_curvature_of_plane_and_orientation() {
        let m = ContactMetric::heisenberg();
        let s = plane(9);
        assert!(mean_curvature(&s, &m).unwrap().iter().all(|h| h.abs() < 1e-12));
        let f = [
            "x",
            "sqrt(1 - (x - 0.5)^2) - sqrt(0.75)",
            "t - x*(sqrt(1 - (x - 0.5)^2) - sqrt(0.75))",
        ]
        .map(|e| ScalarField::parse(e).unwrap());
        let grid = ParamGrid::new(0.0, 1.0, 0.2, 0.8, 41, 41).unwrap();
        let s = ParamSurface::from_exprs(grid, &f, Orientation::Inner).unwrap();
        let h = mean_curvature(&s, &m).unwrap();
        let hf = mean_curvature(&s.flipped(), &m).unwrap();
        for k in 0..grid.len() {
            assert!((h[k] - 1.0).abs() < 1e-2, "{}", h[k]);
            assert_abs_diff_eq!(h[k], -hf[k], epsilon = 1e-12);
        }
    }
}
