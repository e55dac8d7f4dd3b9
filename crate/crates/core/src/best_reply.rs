//! Best-reply iteration for quadratic transport cost.
//!
//! With `c(x, y) = |x − y|²/2` and a smooth externality, a type `x` facing
//! the action distribution `ν` plays `y = (id + ∇V[ν])⁻¹(x)`. The operator
//! `Tν = (id + ∇V[ν])⁻¹#μ` is realized on particles: the atoms of `μ` are
//! moved one by one, so `Tν` carries exactly the weights of `μ`.
//!
//! [`contraction_certificate`] bounds the Lipschitz constant of `T` in
//! `W₁`; when the bound is below one the iteration converges geometrically
//! from any start.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{CostModel, ExternalityModel, InteractionField};
use crate::measures::{DiscreteMeasure, Point};
use crate::transport::{assignment, w1_on_line, wasserstein1_atoms};
use crate::verification::{exploitability, Distribution, EquilibriumResult, PlanMap};

const RESIDUAL_TOL: f64 = 1e-12;
const MAX_NEWTON: usize = 100;
const SLICES: usize = 64;
const SLICE_SEED: u64 = 0x5EED_0F51;

/// `∇V[ν]` for a fixed `ν`: base gradient plus the interaction field.
#[derive(Debug, Clone)]
pub struct GradientField {
    dim: usize,
    model: ExternalityModel,
    field: Option<InteractionField>,
}

impl GradientField {
    pub fn new(model: &ExternalityModel, nu: &DiscreteMeasure) -> Result<Self> {
        if model.congestion.is_some() {
            return Err(Error::Precondition(
                "best reply needs a smooth externality; use the 1D congestion solvers for congestion terms".into(),
            ));
        }
        if nu.dim() != model.dim {
            return Err(Error::Precondition(format!(
                "action distribution is {}D but the model is {}D",
                nu.dim(),
                model.dim
            )));
        }
        Ok(Self {
            dim: model.dim,
            model: *model,
            field: model.kernel.map(|k| k.field_of_atoms(nu)),
        })
    }

    pub fn grad(&self, y: &Point) -> Point {
        let mut g = self.model.base.map_or([0.0; 2], |b| b.grad(y, self.dim));
        if let Some(f) = &self.field {
            let gi = f.grad(y);
            g[0] += gi[0];
            g[1] += gi[1];
        }
        if self.dim == 1 {
            g[1] = 0.0;
        }
        g
    }

    pub fn value(&self, y: &Point) -> f64 {
        self.field.as_ref().map_or(0.0, |f| f.value(y)) + self.model.base_value(y)
    }

    fn residual(&self, y: &Point, x: &Point) -> Point {
        let g = self.grad(y);
        [y[0] + g[0] - x[0], y[1] + g[1] - x[1]]
    }

    /// Jacobian of `id + ∇V` by central differences of the gradient.
    fn jacobian(&self, y: &Point) -> [[f64; 2]; 2] {
        let d = 1e-6;
        let mut j = [[1.0, 0.0], [0.0, 1.0]];
        for c in 0..self.dim {
            let mut yp = *y;
            let mut ym = *y;
            yp[c] += d;
            ym[c] -= d;
            let (gp, gm) = (self.grad(&yp), self.grad(&ym));
            for r in 0..self.dim {
                j[r][c] += (gp[r] - gm[r]) / (2.0 * d);
            }
        }
        j
    }
}

/// `∇V[ν](y)`.
pub fn grad_v(model: &ExternalityModel, nu: &DiscreteMeasure, y: &Point) -> Result<Point> {
    Ok(GradientField::new(model, nu)?.grad(y))
}

/// Outcome of one inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub y: Point,
    pub residual: f64,
    /// `y` is not in the open unit box.
    pub boundary_hit: bool,
    pub newton_steps: usize,
}

fn norm(v: &Point) -> f64 {
    v[0].hypot(v[1])
}

/// Solves `y + ∇V[ν](y) = x` by damped Newton, falling back to bisection
/// (1D) or gradient descent on the strongly convex primitive (2D).
pub fn invert_id_plus_grad_v(field: &GradientField, x: &Point) -> Result<Inversion> {
    let dim = field.dim;
    let mut y = *x;
    let mut r = field.residual(&y, x);
    let mut steps = 0;
    // keep polishing below the acceptance level while Newton still helps
    while norm(&r) >= 1e-3 * RESIDUAL_TOL && steps < MAX_NEWTON {
        steps += 1;
        let j = field.jacobian(&y);
        let delta = if dim == 1 {
            [r[0] / j[0][0], 0.0]
        } else {
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            [
                (j[1][1] * r[0] - j[0][1] * r[1]) / det,
                (j[0][0] * r[1] - j[1][0] * r[0]) / det,
            ]
        };
        if !(delta[0].is_finite() && delta[1].is_finite()) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = [y[0] - t * delta[0], y[1] - t * delta[1]];
            let rc = field.residual(&cand, x);
            if norm(&rc) < norm(&r) {
                y = cand;
                r = rc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm(&r) >= RESIDUAL_TOL {
        let (yf, rf) = if dim == 1 { bisect(field, x) } else { descend(field, x, y) };
        if norm(&rf) < norm(&r) {
            y = yf;
            r = rf;
        }
    }
    if !(norm(&r) < RESIDUAL_TOL) {
        return Err(Error::Numeric(format!(
            "no best reply for type ({}, {}): residual {:e} at ({}, {}) after {steps} Newton steps",
            x[0],
            x[1],
            norm(&r),
            y[0],
            y[1]
        )));
    }
    let boundary_hit = y[..dim].iter().any(|v| *v <= 0.0 || *v >= 1.0);
    Ok(Inversion {
        y,
        residual: norm(&r),
        boundary_hit,
        newton_steps: steps,
    })
}

fn bisect(field: &GradientField, x: &Point) -> (Point, Point) {
    let f = |t: f64| field.residual(&[t, 0.0], x)[0];
    let (mut lo, mut hi) = (-1.0, 2.0);
    while f(lo) > 0.0 {
        lo = 2.0 * lo - 1.0;
        if lo < -1e6 {
            break;
        }
    }
    while f(hi) < 0.0 {
        hi = 2.0 * hi + 1.0;
        if hi > 1e6 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let y = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    ([y, 0.0], field.residual(&[y, 0.0], x))
}

fn descend(field: &GradientField, x: &Point, start: Point) -> (Point, Point) {
    let j = field.jacobian(&start);
    let big = j[0][0].abs() + j[0][1].abs() + j[1][0].abs() + j[1][1].abs();
    let step = 1.0 / big.max(1.0);
    let mut y = start;
    let mut r = field.residual(&y, x);
    for _ in 0..100_000 {
        if norm(&r) < RESIDUAL_TOL {
            break;
        }
        y = [y[0] - step * r[0], y[1] - step * r[1]];
        r = field.residual(&y, x);
    }
    (y, r)
}

/// Best reply of every type atom to `ν`, in atom order, plus the number of
/// replies that landed on the boundary of the unit box.
pub fn best_reply_actions(model: &ExternalityModel, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(Vec<Point>, usize)> {
    let field = GradientField::new(model, nu)?;
    let inv: Vec<Inversion> = mu
        .atoms()
        .par_iter()
        .map(|x| invert_id_plus_grad_v(&field, x))
        .collect::<Result<_>>()?;
    let hits = inv.iter().filter(|i| i.boundary_hit).count();
    Ok((inv.into_iter().map(|i| i.y).collect(), hits))
}

/// `Tν = (id + ∇V[ν])⁻¹#μ` as particles with the weights of `μ`.
pub fn best_reply_operator(model: &ExternalityModel, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    let (actions, _) = best_reply_actions(model, mu, nu)?;
    DiscreteMeasure::new(mu.dim(), actions, mu.weights().to_vec())
}

/// Sliced `W₁`: the mean of exact 1D distances between projections on 64
/// fixed directions. Exact `W₁` for 1D measures.
pub fn sliced_w1(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let proj = |m: &DiscreteMeasure, th: f64| -> Vec<(f64, f64)> {
        let (c, s) = (th.cos(), th.sin());
        m.atoms().iter().zip(m.weights()).map(|(p, w)| (c * p[0] + s * p[1], *w)).collect()
    };
    if a.dim() == 1 && b.dim() == 1 {
        return w1_on_line(&proj(a, 0.0), &proj(b, 0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SLICE_SEED);
    let dirs: Vec<f64> = (0..SLICES).map(|_| rng.gen::<f64>() * std::f64::consts::PI).collect();
    dirs.iter().map(|th| w1_on_line(&proj(a, *th), &proj(b, *th))).sum::<f64>() / SLICES as f64
}

/// Stopping metric of the iteration: exact `W₁` in 1D. In 2D, when both
/// clouds carry the same weights atom by atom, the cost of the coupling
/// that pairs atom `i` with atom `i`, which bounds `W₁` from above;
/// otherwise sliced `W₁`.
pub fn step_distance(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    if a.dim() == 1 {
        return wasserstein1_atoms(a, b);
    }
    if a.len() == b.len() && a.weights() == b.weights() {
        return Ok(a
            .atoms()
            .iter()
            .zip(b.atoms())
            .zip(a.weights())
            .map(|((p, q), w)| w * (p[0] - q[0]).hypot(p[1] - q[1]))
            .sum());
    }
    Ok(sliced_w1(a, b))
}

/// Iteration state.
#[derive(Debug, Clone, PartialEq)]
pub struct BestReplyState {
    pub nu: DiscreteMeasure,
    pub iteration: usize,
    pub w1_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestReplyOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BestReplyOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

/// Iterates `ν ↦ Tν` from `nu0` until successive iterates are closer than
/// `tol`. The returned plan maps each type atom to its best reply to the
/// last iterate, and the returned `ν` is the pushforward of that plan.
pub fn iterate_best_reply(
    model: &ExternalityModel,
    mu: &DiscreteMeasure,
    nu0: &DiscreteMeasure,
    opts: &BestReplyOptions,
) -> Result<EquilibriumResult> {
    if mu.dim() != model.dim {
        return Err(Error::Precondition("type distribution and model dimensions differ".into()));
    }
    let mut state = BestReplyState {
        nu: nu0.clone(),
        iteration: 0,
        w1_history: Vec::new(),
    };
    let mut actions = Vec::new();
    let mut hits = 0;
    let mut converged = false;
    while state.iteration < opts.max_iter {
        let (a, h) = best_reply_actions(model, mu, &state.nu)?;
        let next = DiscreteMeasure::new(mu.dim(), a.clone(), mu.weights().to_vec())?;
        let step = step_distance(&state.nu, &next)?;
        state.w1_history.push(step);
        state.iteration += 1;
        state.nu = next;
        actions = a;
        hits = h;
        if step < opts.tol {
            converged = true;
            break;
        }
    }
    let mut result = EquilibriumResult::new(
        "best_reply",
        Distribution::Particles(mu.clone()),
        Distribution::Particles(state.nu),
        PlanMap::Particles { actions },
    );
    result.converged = converged;
    result.iterations = state.iteration;
    result.trace = state.w1_history;
    result.params.insert("tol".into(), opts.tol);
    if hits > 0 {
        result.notes.push(format!("{hits} best replies landed on the boundary of the action box"));
    }
    result.exploitability = exploitability(&result, model, &CostModel::Quadratic)?;
    Ok(result)
}

/// Bounds behind the contraction estimate `W₁(Tν₁, Tν₂) ≤ ratio · W₁(ν₁, ν₂)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    /// Lower bound on `D²V[ν]`.
    pub lambda: f64,
    /// Upper bound on `det(id + D²V[ν])`.
    pub m: f64,
    /// Lipschitz constant of `ν ↦ ∇V[ν]` from `W₁` into `L¹`.
    pub c: f64,
    pub mu_sup: f64,
    pub ratio: f64,
    pub certified: bool,
    /// Per-axis `[lo, hi]` of the box that contains every best reply.
    pub action_box: [[f64; 2]; 2],
}

const BOX_SAMPLES: usize = 17;

fn box_points(b: &[[f64; 2]; 2], dim: usize, k: usize) -> Vec<Point> {
    let axis = |i: usize| -> Vec<f64> {
        (0..k)
            .map(|t| b[i][0] + (b[i][1] - b[i][0]) * t as f64 / (k - 1) as f64)
            .collect()
    };
    if dim == 1 {
        axis(0).into_iter().map(|v| [v, 0.0]).collect()
    } else {
        let (a0, a1) = (axis(0), axis(1));
        a0.iter().flat_map(|u| a1.iter().map(move |v| [*u, *v])).collect()
    }
}

/// The smallest box found by iterating "best replies of types in `[0, 1]^d`
/// against actions in the current box" from the unit box. Uses the
/// separable quadratic base: coordinate `i` of a best reply solves
/// `yᵢ (1 + 2aᵢ) = xᵢ + 2aᵢcᵢ − ε ∂ᵢ(∫φ dν)`.
pub fn invariant_action_box(model: &ExternalityModel) -> Result<[[f64; 2]; 2]> {
    let base = model
        .base
        .ok_or_else(|| Error::Precondition("the certificate needs a quadratic base potential".into()))?;
    let dim = model.dim;
    let mut b = [[0.0, 1.0], [0.0, 0.0]];
    if dim == 2 {
        b[1] = [0.0, 1.0];
    }
    for _ in 0..30 {
        let pts = box_points(&b, dim, BOX_SAMPLES);
        let mut g = [0.0f64; 2];
        if let Some(k) = model.kernel {
            for y in &pts {
                for z in &pts {
                    let d = k.grad_y_phi(y, z);
                    g[0] = g[0].max(k.eps * d[0].abs());
                    g[1] = g[1].max(k.eps * d[1].abs());
                }
            }
        }
        let mut nb = b;
        for i in 0..dim {
            let s = 1.0 + 2.0 * base.a[i];
            let shift = 2.0 * base.a[i] * base.center[i];
            nb[i] = [
                ((shift - g[i]) / s).clamp(0.0, 1.0),
                ((1.0 + shift + g[i]) / s).clamp(0.0, 1.0),
            ];
        }
        let moved = (0..dim).any(|i| (nb[i][0] - b[i][0]).abs() > 1e-12 || (nb[i][1] - b[i][1]).abs() > 1e-12);
        b = nb;
        if !moved {
            break;
        }
    }
    Ok(b)
}

/// Sampled contraction bounds on the invariant action box:
/// `λ = λ₀ − ε sup‖D²_yφ‖`, `M = (1 + Λ₀ + ε sup‖D²_yφ‖)^d`,
/// `C = ε ∫ sup_z ‖D_z∇_yφ(y, z)‖ dy`, `ratio = M C ‖μ‖∞ / (1 + λ)`.
pub fn contraction_certificate(model: &ExternalityModel, mu_sup: f64) -> Result<ContractionCertificate> {
    let base = model
        .base
        .ok_or_else(|| Error::Precondition("the certificate needs Hessian bounds of the base potential".into()))?;
    if !(mu_sup.is_finite() && mu_sup > 0.0) {
        return Err(Error::Domain {
            what: "type density bound",
            value: mu_sup,
            domain: "(0, ∞)",
        });
    }
    let dim = model.dim;
    let (l0, big_l0) = base.hessian_bounds(dim);
    let action_box = invariant_action_box(model)?;
    let (mut hess_sup, mut c) = (0.0, 0.0);
    if let Some(k) = model.kernel.filter(|k| k.eps > 0.0) {
        let pts = box_points(&action_box, dim, BOX_SAMPLES);
        let mut lip_sum = 0.0;
        for y in &pts {
            let mut lip: f64 = 0.0;
            for z in &pts {
                let (h, m) = k.expr.curvature_norms(y, z, dim);
                hess_sup = f64::max(hess_sup, h);
                lip = lip.max(m);
            }
            lip_sum += lip;
        }
        let vol: f64 = (0..dim).map(|i| action_box[i][1] - action_box[i][0]).product();
        hess_sup *= k.eps;
        c = k.eps * vol * lip_sum / pts.len() as f64;
    }
    let lambda = l0 - hess_sup;
    let m = (1.0 + big_l0 + hess_sup).powi(dim as i32);
    let ratio = m * c * mu_sup / (1.0 + lambda);
    Ok(ContractionCertificate {
        lambda,
        m,
        c,
        mu_sup,
        ratio,
        certified: lambda > -1.0 && ratio < 1.0,
        action_box,
    })
}

/// Number of atoms in each random action distribution drawn by
/// [`empirical_contraction`].
pub const PROBE_ATOMS: usize = 128;

/// `max W₁(Tν₁, Tν₂) / W₁(ν₁, ν₂)` over random pairs of equal-weight clouds
/// in the invariant action box. The numerator uses the coupling that moves
/// each type's two best replies onto each other, which bounds `W₁` from
/// above; the denominator is exact.
pub fn empirical_contraction(model: &ExternalityModel, mu: &DiscreteMeasure, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Precondition("at least one trial".into()));
    }
    let dim = model.dim;
    let b = invariant_action_box(model).unwrap_or([[0.0, 1.0], [0.0, if dim == 2 { 1.0 } else { 0.0 }]]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Result<DiscreteMeasure> {
        let atoms = (0..PROBE_ATOMS)
            .map(|_| {
                let mut p = [0.0; 2];
                for i in 0..dim {
                    p[i] = rng.gen_range(b[i][0]..=b[i][1]);
                }
                p
            })
            .collect();
        DiscreteMeasure::equal_weights(dim, atoms)
    };
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut attempts = 0;
    while done < trials {
        attempts += 1;
        if attempts > 100 * trials {
            return Err(Error::Numeric("could not draw distinct random pairs".into()));
        }
        let (n1, n2) = (draw(&mut rng)?, draw(&mut rng)?);
        let den = exact_w1(&n1, &n2)?;
        if den <= 0.0 {
            continue;
        }
        let (y1, _) = best_reply_actions(model, mu, &n1)?;
        let (y2, _) = best_reply_actions(model, mu, &n2)?;
        let num: f64 = y1
            .iter()
            .zip(&y2)
            .zip(mu.weights())
            .map(|((a, b), w)| w * (a[0] - b[0]).hypot(a[1] - b[1]))
            .sum();
        worst = worst.max(num / den);
        done += 1;
    }
    Ok(worst)
}

/// Exact `W₁` between equal-size, equal-weight clouds (assignment in 2D).
fn exact_w1(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    if a.dim() == 1 {
        return wasserstein1_atoms(a, b);
    }
    if a.len() != b.len() {
        return Err(Error::Precondition("assignment needs equal sizes".into()));
    }
    let cost: Vec<Vec<f64>> = a
        .atoms()
        .iter()
        .map(|p| b.atoms().iter().map(|q| (p[0] - q[0]).hypot(p[1] - q[1])).collect())
        .collect();
    Ok(assignment(&cost).1 / a.len() as f64)
}
