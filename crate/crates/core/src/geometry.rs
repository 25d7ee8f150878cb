//! Contact sub-Riemannian kernel in the Darboux chart `ω₀ = dt + x dy − y dx`.
//!
//! The horizontal frame is `X = ∂x + y∂t`, `Y = ∂y − x∂t` and the Reeb field
//! is `T = ∂t`. A manifold is described by the horizontal metric
//! `G = [[g11, g12], [g12, g22]]` in the frame `{X, Y}`; it is extended to a
//! Riemannian metric by declaring `T` unit and orthogonal to `span{X, Y}`.
//! All vectors handled here are coordinate components in `(∂x, ∂y, ∂t)`.

use nalgebra::{Matrix2, Matrix3, Vector2};
use thiserror::Error;

use crate::expr::{self, EvalError, Expr, ParseError, ScalarField, Var};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("horizontal metric is not positive definite at ({x}, {y}, {t}): g11 = {g11}, det = {det}")]
    Degenerate { x: f64, y: f64, t: f64, g11: f64, det: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Christoffel symbols `Γ[k][i][j] = Γᵏᵢⱼ` in coordinates.
pub type Christoffels = [[[f64; 3]; 3]; 3];

/// Horizontal metric in the frame `{X, Y}` plus the coordinate expressions of
/// its Riemannian extension.
#[derive(Debug, Clone)]
pub struct ContactMetric {
    pub g11: ScalarField,
    pub g12: ScalarField,
    pub g22: ScalarField,
    // coordinate components g(∂i, ∂j) for (i, j) in COORD_PAIRS
    coord: [ScalarField; 6],
}

const COORD_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

fn pair_slot(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    COORD_PAIRS.iter().position(|&p| p == (a, b)).unwrap()
}

/// Metric values and first coordinate partials at a point.
#[derive(Debug, Clone, Copy)]
pub struct MetricSample {
    pub g: Matrix2<f64>,
    /// `dg[k]` is `∂G/∂(x, y, t)[k]`.
    pub dg: [Matrix2<f64>; 3],
}

impl MetricSample {
    pub fn det(&self) -> f64 {
        self.g.determinant()
    }

    /// `Y(G) = ∂y G − x ∂t G`.
    pub fn y_derivative(&self, x: f64) -> Matrix2<f64> {
        self.dg[1] - self.dg[2] * x
    }
}

impl ContactMetric {
    pub fn new(g11: ScalarField, g12: ScalarField, g22: ScalarField) -> Self {
        let x = || expr::var(Var::X);
        let y = || expr::var(Var::Y);
        // ∂x = X − yT, ∂y = Y + xT, ∂t = T
        let gxx = expr::add(g11.expr().clone(), expr::pow(y(), 2.0));
        let gxy = expr::sub(g12.expr().clone(), expr::mul(x(), y()));
        let gxt = expr::neg(y());
        let gyy = expr::add(g22.expr().clone(), expr::pow(x(), 2.0));
        let gyt = x();
        let gtt = expr::constant(1.0);
        let coord = [gxx, gxy, gxt, gyy, gyt, gtt].map(ScalarField::new);
        ContactMetric { g11, g12, g22, coord }
    }

    /// The first Heisenberg group: `G` is the identity.
    pub fn heisenberg() -> Self {
        ContactMetric::new(
            ScalarField::constant(1.0),
            ScalarField::constant(0.0),
            ScalarField::constant(1.0),
        )
    }

    pub fn parse(g11: &str, g12: &str, g22: &str) -> Result<Self, ParseError> {
        Ok(ContactMetric::new(
            ScalarField::parse(g11)?,
            ScalarField::parse(g12)?,
            ScalarField::parse(g22)?,
        ))
    }

    pub fn is_constant(&self) -> bool {
        self.g11.as_const().is_some() && self.g12.as_const().is_some() && self.g22.as_const().is_some()
    }

    fn check(p: &Vec3, g: &Matrix2<f64>) -> Result<(), GeometryError> {
        let det = g.determinant();
        if g[(0, 0)] > 0.0 && det > 0.0 {
            Ok(())
        } else {
            Err(GeometryError::Degenerate {
                x: p[0],
                y: p[1],
                t: p[2],
                g11: g[(0, 0)],
                det,
            })
        }
    }

    /// Horizontal metric `G(p)`, checked positive definite.
    pub fn horizontal(&self, p: &Vec3) -> Result<Matrix2<f64>, GeometryError> {
        let g11 = self.g11.value(p)?;
        let g12 = self.g12.value(p)?;
        let g22 = self.g22.value(p)?;
        let g = Matrix2::new(g11, g12, g12, g22);
        Self::check(p, &g)?;
        Ok(g)
    }

    /// `G(p)` and its coordinate partials.
    pub fn sample(&self, p: &Vec3) -> Result<MetricSample, GeometryError> {
        let (g11, d11) = self.g11.value_and_gradient(p)?;
        let (g12, d12) = self.g12.value_and_gradient(p)?;
        let (g22, d22) = self.g22.value_and_gradient(p)?;
        let g = Matrix2::new(g11, g12, g12, g22);
        Self::check(p, &g)?;
        let dg = [0, 1, 2].map(|k| Matrix2::new(d11[k], d12[k], d12[k], d22[k]));
        Ok(MetricSample { g, dg })
    }

    /// Coordinate components of the extended Riemannian metric.
    pub fn ambient_metric(&self, p: &Vec3) -> Result<Matrix3<f64>, GeometryError> {
        self.horizontal(p)?;
        let mut m = Matrix3::zeros();
        for (slot, &(i, j)) in COORD_PAIRS.iter().enumerate() {
            let v = self.coord[slot].value(p)?;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        Ok(m)
    }

    /// Coordinate expression of `g(∂i, ∂j)`.
    pub fn coordinate_component(&self, i: usize, j: usize) -> &Expr {
        self.coord[pair_slot(i, j)].expr()
    }

    /// Levi-Civita symbols of the extended metric, from the symbolic
    /// partials of its coordinate components.
    pub fn christoffels(&self, p: &Vec3) -> Result<Christoffels, GeometryError> {
        let g = self.ambient_metric(p)?;
        let inv = g.try_inverse().ok_or_else(|| GeometryError::Degenerate {
            x: p[0],
            y: p[1],
            t: p[2],
            g11: g[(0, 0)],
            det: 0.0,
        })?;
        let mut dg = [[[0.0; 3]; 3]; 3]; // dg[l][i][j] = ∂l g_ij
        for (slot, &(i, j)) in COORD_PAIRS.iter().enumerate() {
            let grad = self.coord[slot].gradient(p)?;
            for l in 0..3 {
                dg[l][i][j] = grad[l];
                dg[l][j][i] = grad[l];
            }
        }
        Ok(christoffels_from(&inv, &dg))
    }

    /// Full pointwise geometric data at `p`.
    pub fn point_frame(&self, p: &Vec3) -> Result<PointFrame, GeometryError> {
        let horizontal = self.horizontal(p)?;
        let metric = self.ambient_metric(p)?;
        let gamma = self.christoffels(p)?;
        Ok(PointFrame::assemble(*p, horizontal, metric, gamma))
    }
}

/// `Γᵏᵢⱼ = ½ gᵏˡ (∂i g_lj + ∂j g_li − ∂l g_ij)` given `dg[l][i][j] = ∂l g_ij`.
pub fn christoffels_from(inv: &Matrix3<f64>, dg: &[[[f64; 3]; 3]; 3]) -> Christoffels {
    let mut gamma = [[[0.0; 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for l in 0..3 {
                    s += inv[(k, l)] * (dg[i][l][j] + dg[j][l][i] - dg[l][i][j]);
                }
                gamma[k][i][j] = 0.5 * s;
            }
        }
    }
    gamma
}

/// Reeb field; `∂t` in the Darboux chart.
pub fn reeb(_p: &Vec3) -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0)
}

/// `ω₀(v) = v_t + x v_y − y v_x`.
pub fn contact_form(p: &Vec3, v: &Vec3) -> f64 {
    v[2] + p[0] * v[1] - p[1] * v[0]
}

/// `dω₀(v, w) = 2 (v_x w_y − v_y w_x)`.
pub fn contact_differential(v: &Vec3, w: &Vec3) -> f64 {
    2.0 * (v[0] * w[1] - v[1] * w[0])
}

/// Coordinate components of `X`, `Y`, `T` at `p`.
pub fn frame_vectors(p: &Vec3) -> [Vec3; 3] {
    [
        Vec3::new(1.0, 0.0, p[1]),
        Vec3::new(0.0, 1.0, -p[0]),
        Vec3::new(0.0, 0.0, 1.0),
    ]
}

/// A vector field value together with its coordinate Jacobian
/// `jacobian[(k, i)] = ∂i Vᵏ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub value: Vec3,
    pub jacobian: Matrix3<f64>,
}

impl FieldSample {
    pub fn constant(value: Vec3) -> Self {
        FieldSample {
            value,
            jacobian: Matrix3::zeros(),
        }
    }

    /// Derivative of the components along `dir`.
    pub fn directional(&self, dir: &Vec3) -> Vec3 {
        self.jacobian * dir
    }
}

/// Pointwise data: frame, ambient metric, Christoffels, `J` and `τ`.
#[derive(Debug, Clone)]
pub struct PointFrame {
    pub point: Vec3,
    pub frame: [Vec3; 3],
    /// Horizontal metric `G` in `{X, Y}`.
    pub horizontal: Matrix2<f64>,
    pub metric: Matrix3<f64>,
    pub metric_inv: Matrix3<f64>,
    pub christoffel: Christoffels,
    /// `J` acting on frame components `(a, b)` of `aX + bY`.
    pub j: Matrix2<f64>,
    /// `τ` acting on frame components.
    pub tau: Matrix2<f64>,
    /// `η(∂x, ∂y, ∂t) = det(G)^{1/2}`.
    pub volume: f64,
}

impl PointFrame {
    fn assemble(p: Vec3, horizontal: Matrix2<f64>, metric: Matrix3<f64>, gamma: Christoffels) -> Self {
        let frame = frame_vectors(&p);
        let metric_inv = metric.try_inverse().expect("metric checked positive definite");
        let mut pf = PointFrame {
            point: p,
            frame,
            horizontal,
            metric,
            metric_inv,
            christoffel: gamma,
            j: Matrix2::zeros(),
            tau: Matrix2::zeros(),
            volume: horizontal.determinant().sqrt(),
        };
        // B[a][b] = g(D_{e_a} T, e_b)
        let mut b = Matrix2::zeros();
        for a in 0..2 {
            let dt = pf.d_t(&frame[a]);
            for c in 0..2 {
                b[(a, c)] = pf.inner(&dt, &frame[c]);
            }
        }
        let anti = (b - b.transpose()) * 0.5;
        let sym = (b + b.transpose()) * 0.5;
        let ginv = horizontal.try_inverse().expect("G checked positive definite");
        // ⟨J e_a, e_b⟩ = anti[a][b]  ⇒  J = G⁻¹ antiᵀ on frame components
        pf.j = ginv * anti.transpose();
        pf.tau = ginv * sym.transpose();
        pf
    }

    pub fn inner(&self, a: &Vec3, b: &Vec3) -> f64 {
        (a.transpose() * self.metric * b)[(0, 0)]
    }

    pub fn norm(&self, a: &Vec3) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    /// Frame components `(a, b, c)` with `v = aX + bY + cT`.
    pub fn to_frame(&self, v: &Vec3) -> Vec3 {
        Vec3::new(v[0], v[1], contact_form(&self.point, v))
    }

    pub fn from_frame(&self, c: &Vec3) -> Vec3 {
        self.frame[0] * c[0] + self.frame[1] * c[1] + self.frame[2] * c[2]
    }

    pub fn horizontal_part(&self, v: &Vec3) -> Vec3 {
        self.frame[0] * v[0] + self.frame[1] * v[1]
    }

    /// `⟨v, T⟩`.
    pub fn vertical(&self, v: &Vec3) -> f64 {
        contact_form(&self.point, v)
    }

    /// `Γ(a, b)ᵏ = Γᵏᵢⱼ aⁱ bʲ`.
    pub fn gamma(&self, a: &Vec3, b: &Vec3) -> Vec3 {
        let mut out = Vec3::zeros();
        for k in 0..3 {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += self.christoffel[k][i][j] * a[i] * b[j];
                }
            }
            out[k] = s;
        }
        out
    }

    /// `D_v T`.
    pub fn d_t(&self, v: &Vec3) -> Vec3 {
        self.gamma(v, &self.frame[2])
    }

    fn apply_horizontal(&self, m: &Matrix2<f64>, v: &Vec3) -> Vec3 {
        let c = m * Vector2::new(v[0], v[1]);
        self.frame[0] * c[0] + self.frame[1] * c[1]
    }

    /// `J(v)`; depends only on the horizontal part, so `J(T) = 0`.
    pub fn j_op(&self, v: &Vec3) -> Vec3 {
        self.apply_horizontal(&self.j, v)
    }

    pub fn tau_op(&self, v: &Vec3) -> Vec3 {
        self.apply_horizontal(&self.tau, v)
    }

    /// `tor(a, b) = ⟨a,T⟩τ(b) − ⟨b,T⟩τ(a) + 2⟨J(a),b⟩T`.
    pub fn torsion(&self, a: &Vec3, b: &Vec3) -> Vec3 {
        self.tau_op(b) * self.vertical(a) - self.tau_op(a) * self.vertical(b)
            + self.frame[2] * (2.0 * self.inner(&self.j_op(a), b))
    }

    /// Difference tensor `∇_a b − D_a b` of the metric connection with the
    /// torsion above.
    pub fn contorsion(&self, a: &Vec3, b: &Vec3) -> Vec3 {
        let mut lowered = Vec3::zeros();
        for l in 0..3 {
            let mut e = Vec3::zeros();
            e[l] = 1.0;
            lowered[l] = 0.5
                * (self.inner(&self.torsion(a, b), &e) - self.inner(&self.torsion(b, &e), a)
                    + self.inner(&self.torsion(&e, a), b));
        }
        self.metric_inv * lowered
    }

    /// `D_dir V` for a field with value `v` and component derivative `dv`
    /// along `dir`.
    pub fn levi_civita(&self, dir: &Vec3, v: &Vec3, dv: &Vec3) -> Vec3 {
        dv + self.gamma(dir, v)
    }

    /// `∇_dir V`, sub-Riemannian connection.
    pub fn sr_covariant(&self, dir: &Vec3, v: &Vec3, dv: &Vec3) -> Vec3 {
        self.levi_civita(dir, v, dv) + self.contorsion(dir, v)
    }

    /// `η(a, b, c)` for the volume form positive on `{X, Y, T}`.
    pub fn volume_form(&self, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
        self.volume * Matrix3::from_columns(&[*a, *b, *c]).determinant()
    }

    /// Cross product: `g(w, a × b) = η(w, a, b)`.
    pub fn cross(&self, a: &Vec3, b: &Vec3) -> Vec3 {
        self.metric_inv * (a.cross(b) * self.volume)
    }
}

pub fn ambient_metric(metric: &ContactMetric, p: &Vec3) -> Result<Matrix3<f64>, GeometryError> {
    metric.ambient_metric(p)
}

pub fn christoffels(metric: &ContactMetric, p: &Vec3) -> Result<Christoffels, GeometryError> {
    metric.christoffels(p)
}

pub fn j_operator(metric: &ContactMetric, p: &Vec3, v: &Vec3) -> Result<Vec3, GeometryError> {
    Ok(metric.point_frame(p)?.j_op(v))
}

pub fn tau_operator(metric: &ContactMetric, p: &Vec3, v: &Vec3) -> Result<Vec3, GeometryError> {
    Ok(metric.point_frame(p)?.tau_op(v))
}

/// `∇_X Y` for sampled fields `X`, `Y` at `p`.
pub fn sr_connection(
    metric: &ContactMetric,
    p: &Vec3,
    x: &FieldSample,
    y: &FieldSample,
) -> Result<Vec3, GeometryError> {
    let pf = metric.point_frame(p)?;
    Ok(pf.sr_covariant(&x.value, &y.value, &y.directional(&x.value)))
}
