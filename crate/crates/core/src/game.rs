//! The cost structure of the game.
//!
//! A type `x` choosing action `y` against the action distribution `ν` pays
//! `c(x, y) + V[ν](y)` with
//!
//! ```text
//! V[ν](y) = f(ν(y)) + ε ∫ φ(y, z) dν(z) + V₀(y)
//! ```
//!
//! Each of the three externality terms is optional. Integrals against grid
//! densities use the cell-midpoint rule everywhere, which makes the
//! discrete first variation of [`energy`] equal to the discrete `V`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{self, DiscreteMeasure, GridMeasure1D, Point};
use crate::quadrature::{GL8_NODES, GL8_WEIGHTS};
use crate::transport::transport_cost_monotone;

/// Transport cost `c(x, y)` from the built-in vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostModel {
    /// `|x − y|² / 2`
    Quadratic,
    /// `|x − y|^p / p`, `p ≥ 1`
    Power { p: f64 },
    /// `coef · x·y`; the scenario keyword `bilinear` means `coef = −1`.
    Bilinear { coef: f64 },
}

/// How many continuous derivatives the cost has across the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    Analytic,
    /// Finitely many derivatives; the integer is how many are continuous.
    Ck(u32),
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(v: &Point) -> f64 {
    v[0].hypot(v[1])
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl CostModel {
    pub fn c1(&self, x: f64, y: f64) -> f64 {
        match *self {
            CostModel::Quadratic => 0.5 * (x - y) * (x - y),
            CostModel::Power { p } => (x - y).abs().powf(p) / p,
            CostModel::Bilinear { coef } => coef * x * y,
        }
    }

    pub fn dcdx1(&self, x: f64, y: f64) -> f64 {
        match *self {
            CostModel::Quadratic => x - y,
            CostModel::Power { p } => {
                let u = x - y;
                if u == 0.0 {
                    0.0
                } else {
                    u.abs().powf(p - 1.0) * u.signum()
                }
            }
            CostModel::Bilinear { coef } => coef * y,
        }
    }

    pub fn dcdy1(&self, x: f64, y: f64) -> f64 {
        match *self {
            CostModel::Bilinear { coef } => coef * x,
            _ => -self.dcdx1(x, y),
        }
    }

    pub fn c(&self, x: &Point, y: &Point) -> f64 {
        match *self {
            CostModel::Quadratic => {
                let d = sub(x, y);
                0.5 * dot(&d, &d)
            }
            CostModel::Power { p } => norm(&sub(x, y)).powf(p) / p,
            CostModel::Bilinear { coef } => coef * dot(x, y),
        }
    }

    pub fn grad_x(&self, x: &Point, y: &Point) -> Point {
        match *self {
            CostModel::Quadratic => sub(x, y),
            CostModel::Power { p } => {
                let d = sub(x, y);
                let r = norm(&d);
                if r == 0.0 {
                    [0.0, 0.0]
                } else {
                    let s = r.powf(p - 2.0);
                    [s * d[0], s * d[1]]
                }
            }
            CostModel::Bilinear { coef } => [coef * y[0], coef * y[1]],
        }
    }

    pub fn grad_y(&self, x: &Point, y: &Point) -> Point {
        match *self {
            CostModel::Bilinear { coef } => [coef * x[0], coef * x[1]],
            _ => {
                let g = self.grad_x(x, y);
                [-g[0], -g[1]]
            }
        }
    }

    pub fn smoothness(&self) -> Smoothness {
        match *self {
            CostModel::Quadratic | CostModel::Bilinear { .. } => Smoothness::Analytic,
            CostModel::Power { p } if p.fract() == 0.0 && (p as i64) % 2 == 0 => Smoothness::Analytic,
            CostModel::Power { p } => Smoothness::Ck(p.ceil() as u32 - 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CostModel::Power { p } if !(p.is_finite() && p >= 1.0) => Err(Error::Domain {
                what: "cost exponent p",
                value: p,
                domain: "[1, ∞)",
            }),
            CostModel::Bilinear { coef } if !coef.is_finite() => Err(Error::Domain {
                what: "bilinear coefficient",
                value: coef,
                domain: "finite reals",
            }),
            _ => Ok(()),
        }
    }
}

/// Checks `∂²c/∂x∂y < 0` on all pairs of the `n + 1` node grid by a central
/// difference of `∂c/∂x` in `y` with step `1/n`. Under this sign the
/// monotone rearrangement is the unique optimal plan.
pub fn check_spence_mirrlees(cost: &CostModel, n_cells: usize) -> bool {
    let h = 1.0 / n_cells as f64;
    let xs = measures::nodes(n_cells);
    xs.iter().all(|&x| {
        xs.iter().all(|&y| {
            let fd = (cost.dcdx1(x, y + h) - cost.dcdx1(x, y - h)) / (2.0 * h);
            fd < -1e-12
        })
    })
}

/// Local congestion `f(t)` of the action density `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CongestionSpec {
    /// `f(t) = log t`; `f(0) = −∞`.
    Log,
    /// `f(t) = t^α`, `α ≥ 1`.
    Power { alpha: f64 },
}

impl CongestionSpec {
    pub fn f(&self, t: f64) -> f64 {
        match *self {
            CongestionSpec::Log => {
                if t > 0.0 {
                    t.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            CongestionSpec::Power { alpha } => t.max(0.0).powf(alpha),
        }
    }

    /// Antiderivative with `F(0) = 0`: `t log t − t` or `t^(α+1)/(α+1)`.
    pub fn primitive(&self, t: f64) -> f64 {
        match *self {
            CongestionSpec::Log => {
                if t > 0.0 {
                    t * t.ln() - t
                } else {
                    0.0
                }
            }
            CongestionSpec::Power { alpha } => t.max(0.0).powf(alpha + 1.0) / (alpha + 1.0),
        }
    }

    /// Generalized inverse `s ↦ f⁻¹(s)`, clamped at zero density.
    pub fn inverse(&self, s: f64) -> f64 {
        match *self {
            CongestionSpec::Log => s.exp(),
            CongestionSpec::Power { alpha } => s.max(0.0).powf(1.0 / alpha),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CongestionSpec::Power { alpha } if !(alpha.is_finite() && alpha >= 1.0) => {
                Err(Error::Domain {
                    what: "congestion exponent α",
                    value: alpha,
                    domain: "[1, ∞)",
                })
            }
            _ => Ok(()),
        }
    }
}

/// Pairwise kernel `φ(y, z)` from the built-in vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelExpr {
    Zero,
    /// `φ = a`
    Constant { a: f64 },
    /// `φ = a · y·z`
    Bilinear { a: f64 },
    /// `φ = a · |b·y − c·z − d|^q`
    AbsPower { a: f64, b: f64, c: f64, d: [f64; 2], q: f64 },
}

impl KernelExpr {
    pub fn eval(&self, y: &Point, z: &Point) -> f64 {
        match *self {
            KernelExpr::Zero => 0.0,
            KernelExpr::Constant { a } => a,
            KernelExpr::Bilinear { a } => a * dot(y, z),
            KernelExpr::AbsPower { a, b, c, d, q } => {
                let u = [b * y[0] - c * z[0] - d[0], b * y[1] - c * z[1] - d[1]];
                a * norm(&u).powf(q)
            }
        }
    }

    /// `∇_y φ(y, z)`.
    pub fn grad_y(&self, y: &Point, z: &Point) -> Point {
        match *self {
            KernelExpr::Zero | KernelExpr::Constant { .. } => [0.0, 0.0],
            KernelExpr::Bilinear { a } => [a * z[0], a * z[1]],
            KernelExpr::AbsPower { a, b, c, d, q } => {
                let u = [b * y[0] - c * z[0] - d[0], b * y[1] - c * z[1] - d[1]];
                let r = norm(&u);
                if r == 0.0 {
                    return [0.0, 0.0];
                }
                let s = a * q * b * r.powf(q - 2.0);
                [s * u[0], s * u[1]]
            }
        }
    }

    /// Operator norms of `D²_y φ(y, z)` and of the mixed block `D_z ∇_y φ`.
    /// The dimension matters: in 1D only the radial curvature exists.
    pub fn curvature_norms(&self, y: &Point, z: &Point, dim: usize) -> (f64, f64) {
        match *self {
            KernelExpr::Zero | KernelExpr::Constant { .. } => (0.0, 0.0),
            KernelExpr::Bilinear { a } => (0.0, a.abs()),
            KernelExpr::AbsPower { a, b, c, d, q } => {
                let u = [b * y[0] - c * z[0] - d[0], b * y[1] - c * z[1] - d[1]];
                let r = norm(&u);
                let shape = if dim == 1 {
                    (q - 1.0).abs()
                } else {
                    (q - 1.0).abs().max(1.0)
                };
                let radial = if r == 0.0 {
                    if q == 2.0 {
                        1.0
                    } else if q > 2.0 || (dim == 1 && q == 1.0) {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    r.powf(q - 2.0)
                };
                let base = (a * q).abs() * shape * radial;
                (base * b * b, base * (b * c).abs())
            }
        }
    }

    /// Structural symmetry `φ(y, z) = φ(z, y)`.
    pub fn is_symmetric(&self) -> bool {
        match *self {
            KernelExpr::Zero | KernelExpr::Constant { .. } | KernelExpr::Bilinear { .. } => true,
            KernelExpr::AbsPower { a, b, c, d, q } => {
                a == 0.0
                    || (b == c && d == [0.0, 0.0])
                    || (b == -c && d == [0.0, 0.0] && q.fract() == 0.0 && (q as i64) % 2 == 0)
                    || (b == 0.0 && c == 0.0)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = match *self {
            KernelExpr::Zero => true,
            KernelExpr::Constant { a } | KernelExpr::Bilinear { a } => a.is_finite(),
            KernelExpr::AbsPower { a, b, c, d, q } => {
                if !(q.is_finite() && q > 0.0) {
                    return Err(Error::Domain {
                        what: "kernel exponent q",
                        value: q,
                        domain: "(0, ∞)",
                    });
                }
                [a, b, c, d[0], d[1]].iter().all(|v| v.is_finite())
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::Precondition("kernel coefficients must be finite".into()))
        }
    }
}

/// `ε φ`, the non-local part of the externality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionKernel {
    pub expr: KernelExpr,
    pub eps: f64,
}

impl InteractionKernel {
    pub fn new(expr: KernelExpr, eps: f64) -> Result<Self> {
        expr.validate()?;
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::Domain {
                what: "interaction scale ε",
                value: eps,
                domain: "[0, ∞)",
            });
        }
        Ok(Self { expr, eps })
    }

    pub fn phi(&self, y: &Point, z: &Point) -> f64 {
        self.expr.eval(y, z)
    }

    pub fn grad_y_phi(&self, y: &Point, z: &Point) -> Point {
        self.expr.grad_y(y, z)
    }

    pub fn symmetric(&self) -> bool {
        self.expr.is_symmetric()
    }

    /// `ε ∫ φ(·, z) dν(z)` precomputed against atoms.
    pub fn field(&self, atoms: &[Point], weights: &[f64]) -> InteractionField {
        InteractionField::new(*self, atoms, weights)
    }

    pub fn field_of_grid(&self, nu: &GridMeasure1D) -> InteractionField {
        let h = nu.cell_width();
        let (atoms, weights): (Vec<Point>, Vec<f64>) = nu
            .midpoints()
            .into_iter()
            .zip(nu.density())
            .filter(|(_, d)| **d > 0.0)
            .map(|(y, d)| ([y, 0.0], d * h))
            .unzip();
        self.field(&atoms, &weights)
    }

    pub fn field_of_atoms(&self, nu: &DiscreteMeasure) -> InteractionField {
        self.field(nu.atoms(), nu.weights())
    }
}

/// Moments `E z`, `E zzᵀ`, `E |z|² z`, `E |z|⁴` of a weighted cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Moments {
    m1: Point,
    m2: [[f64; 2]; 2],
    m3: Point,
    m4: f64,
}

impl Moments {
    fn of(atoms: &[Point], weights: &[f64]) -> Self {
        let mut m = Moments {
            m1: [0.0; 2],
            m2: [[0.0; 2]; 2],
            m3: [0.0; 2],
            m4: 0.0,
        };
        for (z, w) in atoms.iter().zip(weights) {
            let r2 = dot(z, z);
            for i in 0..2 {
                m.m1[i] += w * z[i];
                m.m3[i] += w * r2 * z[i];
                for j in 0..2 {
                    m.m2[i][j] += w * z[i] * z[j];
                }
            }
            m.m4 += w * r2 * r2;
        }
        m
    }

    fn tr2(&self) -> f64 {
        self.m2[0][0] + self.m2[1][1]
    }

    fn quad(&self, v: &Point) -> f64 {
        v[0] * (self.m2[0][0] * v[0] + self.m2[0][1] * v[1])
            + v[1] * (self.m2[1][0] * v[0] + self.m2[1][1] * v[1])
    }

    fn apply(&self, v: &Point) -> Point {
        [
            self.m2[0][0] * v[0] + self.m2[0][1] * v[1],
            self.m2[1][0] * v[0] + self.m2[1][1] * v[1],
        ]
    }
}

#[derive(Debug, Clone)]
enum FieldRepr {
    /// Even-power kernels `a|b·y − c·z − d|^q`, `q ∈ {2, 4}`, expand into
    /// polynomials of the moments and cost O(1) per evaluation.
    Moments(Moments),
    Direct { atoms: Vec<Point>, weights: Vec<f64> },
}

/// `y ↦ ε ∫ φ(y, z) dν(z)` and its gradient for a fixed `ν`.
#[derive(Debug, Clone)]
pub struct InteractionField {
    kernel: InteractionKernel,
    mass: f64,
    repr: FieldRepr,
}

impl InteractionField {
    pub fn new(kernel: InteractionKernel, atoms: &[Point], weights: &[f64]) -> Self {
        let fast = matches!(kernel.expr, KernelExpr::AbsPower { q, .. } if q == 2.0 || q == 4.0)
            || matches!(kernel.expr, KernelExpr::Bilinear { .. });
        let repr = if fast {
            FieldRepr::Moments(Moments::of(atoms, weights))
        } else {
            FieldRepr::Direct {
                atoms: atoms.to_vec(),
                weights: weights.to_vec(),
            }
        };
        Self {
            kernel,
            mass: weights.iter().sum(),
            repr,
        }
    }

    /// Same field, always summed atom by atom.
    pub fn direct(kernel: InteractionKernel, atoms: &[Point], weights: &[f64]) -> Self {
        Self {
            kernel,
            mass: weights.iter().sum(),
            repr: FieldRepr::Direct {
                atoms: atoms.to_vec(),
                weights: weights.to_vec(),
            },
        }
    }

    pub fn value(&self, y: &Point) -> f64 {
        let eps = self.kernel.eps;
        if eps == 0.0 {
            return 0.0;
        }
        match (&self.repr, self.kernel.expr) {
            (_, KernelExpr::Zero) => 0.0,
            (_, KernelExpr::Constant { a }) => eps * a * self.mass,
            (FieldRepr::Moments(m), KernelExpr::Bilinear { a }) => eps * a * dot(y, &m.m1),
            (FieldRepr::Moments(m), KernelExpr::AbsPower { a, b, c, d, q }) => {
                let v = [b * y[0] - d[0], b * y[1] - d[1]];
                let vv = dot(&v, &v);
                let vm1 = dot(&v, &m.m1);
                let e = if q == 2.0 {
                    vv * self.mass - 2.0 * c * vm1 + c * c * m.tr2()
                } else {
                    vv * vv * self.mass + 4.0 * c * c * m.quad(&v) + c.powi(4) * m.m4
                        - 4.0 * c * vv * vm1
                        + 2.0 * c * c * vv * m.tr2()
                        - 4.0 * c.powi(3) * dot(&v, &m.m3)
                };
                eps * a * e
            }
            (FieldRepr::Direct { atoms, weights }, expr) => {
                eps * atoms
                    .iter()
                    .zip(weights)
                    .map(|(z, w)| w * expr.eval(y, z))
                    .sum::<f64>()
            }
        }
    }

    pub fn grad(&self, y: &Point) -> Point {
        let eps = self.kernel.eps;
        if eps == 0.0 {
            return [0.0, 0.0];
        }
        match (&self.repr, self.kernel.expr) {
            (_, KernelExpr::Zero) | (_, KernelExpr::Constant { .. }) => [0.0, 0.0],
            (FieldRepr::Moments(m), KernelExpr::Bilinear { a }) => {
                [eps * a * m.m1[0], eps * a * m.m1[1]]
            }
            (FieldRepr::Moments(m), KernelExpr::AbsPower { a, b, c, d, q }) => {
                let v = [b * y[0] - d[0], b * y[1] - d[1]];
                let eu = if q == 2.0 {
                    // E[u]
                    [v[0] * self.mass - c * m.m1[0], v[1] * self.mass - c * m.m1[1]]
                } else {
                    // E[|u|² u]
                    let vv = dot(&v, &v);
                    let vm1 = dot(&v, &m.m1);
                    let m2v = m.apply(&v);
                    let t = m.tr2();
                    let mut out = [0.0; 2];
                    for i in 0..2 {
                        out[i] = vv * v[i] * self.mass - c * vv * m.m1[i] - 2.0 * c * vm1 * v[i]
                            + 2.0 * c * c * m2v[i]
                            + c * c * t * v[i]
                            - c.powi(3) * m.m3[i];
                    }
                    out
                };
                let s = eps * a * q * b;
                [s * eu[0], s * eu[1]]
            }
            (FieldRepr::Direct { atoms, weights }, expr) => {
                let mut g = [0.0; 2];
                for (z, w) in atoms.iter().zip(weights) {
                    let gi = expr.grad_y(y, z);
                    g[0] += w * gi[0];
                    g[1] += w * gi[1];
                }
                [eps * g[0], eps * g[1]]
            }
        }
    }
}

/// Smooth convex base potential `V₀(y) = Σᵢ aᵢ (yᵢ − cᵢ)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBase {
    pub a: [f64; 2],
    pub center: [f64; 2],
}

impl QuadraticBase {
    pub fn value(&self, y: &Point, dim: usize) -> f64 {
        (0..dim).map(|i| self.a[i] * (y[i] - self.center[i]).powi(2)).sum()
    }

    pub fn grad(&self, y: &Point, dim: usize) -> Point {
        let mut g = [0.0; 2];
        for i in 0..dim {
            g[i] = 2.0 * self.a[i] * (y[i] - self.center[i]);
        }
        g
    }

    /// Hessian bounds `(λ₀, Λ₀)` with `λ₀ id ≤ D²V₀ ≤ Λ₀ id`.
    pub fn hessian_bounds(&self, dim: usize) -> (f64, f64) {
        let d = &self.a[..dim];
        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (2.0 * lo, 2.0 * hi)
    }
}

/// All externality terms of the game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExternalityModel {
    pub dim: usize,
    pub congestion: Option<CongestionSpec>,
    pub kernel: Option<InteractionKernel>,
    pub base: Option<QuadraticBase>,
}

impl ExternalityModel {
    pub fn one_dim(
        congestion: Option<CongestionSpec>,
        kernel: Option<InteractionKernel>,
        base: Option<QuadraticBase>,
    ) -> Self {
        Self {
            dim: 1,
            congestion,
            kernel,
            base,
        }
    }

    pub fn base_value(&self, y: &Point) -> f64 {
        self.base.map_or(0.0, |b| b.value(y, self.dim))
    }

    pub fn is_symmetric(&self) -> bool {
        self.kernel.is_none_or(|k| k.symmetric())
    }

    /// The interaction field of a grid density, or `None` without a kernel.
    pub fn grid_field(&self, nu: &GridMeasure1D) -> Option<InteractionField> {
        self.kernel.map(|k| k.field_of_grid(nu))
    }
}

/// `ε ∫ φ(y, z) dν(z)` for a grid density (midpoint rule).
pub fn eval_interaction(kernel: &InteractionKernel, nu: &GridMeasure1D, y: f64) -> f64 {
    kernel.field_of_grid(nu).value(&[y, 0.0])
}

/// `ε Σ wᵢ φ(y, zᵢ)` for atoms.
pub fn eval_interaction_atoms(kernel: &InteractionKernel, nu: &DiscreteMeasure, y: &Point) -> f64 {
    kernel.field_of_atoms(nu).value(y)
}

/// `V[ν](y) = f(ν(y)) + ε ∫φ(y, ·)dν + V₀(y)`, with `ν(y)` the density of
/// the cell containing `y`. Log congestion on an empty cell gives `−∞`.
pub fn eval_v(model: &ExternalityModel, nu: &GridMeasure1D, y: f64) -> f64 {
    let f = model.congestion.map_or(0.0, |c| c.f(nu.density_at(y)));
    let i = model.kernel.map_or(0.0, |k| eval_interaction(&k, nu, y));
    f + i + model.base_value(&[y, 0.0])
}

/// `V[ν]` at every cell midpoint, reusing one interaction field.
pub fn potential_on_grid(model: &ExternalityModel, nu: &GridMeasure1D) -> Vec<f64> {
    let field = model.grid_field(nu);
    nu.midpoints()
        .iter()
        .zip(nu.density())
        .map(|(y, d)| {
            let p = [*y, 0.0];
            model.congestion.map_or(0.0, |c| c.f(*d))
                + field.as_ref().map_or(0.0, |f| f.value(&p))
                + model.base_value(&p)
        })
        .collect()
}

/// `E[ν] = ∫F(ν) + ½ ε ∫∫ φ dν dν + ∫V₀ dν`. Only defined for symmetric
/// kernels, where it is a potential for `V`.
pub fn energy(model: &ExternalityModel, nu: &GridMeasure1D) -> Result<f64> {
    if !model.is_symmetric() {
        return Err(Error::Precondition(
            "energy needs a symmetric interaction kernel; a non-symmetric one has no potential".into(),
        ));
    }
    let h = nu.cell_width();
    let local: f64 = model.congestion.map_or(0.0, |c| {
        nu.density().iter().map(|d| c.primitive(*d)).sum::<f64>() * h
    });
    let field = model.grid_field(nu);
    let nonlocal_and_base = nu.integrate(|y| {
        let p = [y, 0.0];
        0.5 * field.as_ref().map_or(0.0, |f| f.value(&p)) + model.base_value(&p)
    });
    Ok(local + nonlocal_and_base)
}

/// `J_μ[ν] = W_c(μ, ν) + E[ν]`.
pub fn total_cost_j(
    model: &ExternalityModel,
    cost: &CostModel,
    mu: &GridMeasure1D,
    nu: &GridMeasure1D,
) -> Result<f64> {
    let e = energy(model, nu)?;
    Ok(transport_cost_monotone(mu, nu, cost) + e)
}

/// `1 − ε² ∫∫ φ²` over `[0, 1]²`. A positive margin certifies that
/// `ν ↦ ν + ε∫φν` is strictly monotone.
pub fn monotonicity_margin(kernel: &InteractionKernel) -> f64 {
    let cells = 32;
    let h = 1.0 / cells as f64;
    let pts: Vec<(f64, f64)> = (0..cells)
        .flat_map(|i| {
            GL8_NODES
                .iter()
                .zip(GL8_WEIGHTS.iter())
                .map(move |(t, w)| ((i as f64 + t) * h, w * h))
        })
        .collect();
    let mut s = 0.0;
    for (y, wy) in &pts {
        for (z, wz) in &pts {
            s += wy * wz * kernel.phi(&[*y, 0.0], &[*z, 0.0]).powi(2);
        }
    }
    1.0 - kernel.eps * kernel.eps * s
}
