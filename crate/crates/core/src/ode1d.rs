//! Fixed-point schemes for one-dimensional equilibria with congestion.
//!
//! Under a cost with `∂²c/∂x∂y < 0` every equilibrium is a monotone map
//! `T`, and along it the envelope theorem gives the dual potential as a
//! running integral of `∂c/∂x`. Two schemes are built on this:
//!
//! - [`algo1_solve`] (logarithmic congestion) iterates on `T`: the density
//!   relation `μ = ν(T) T'` becomes a first-order equation for `T` whose
//!   right-hand side is renormalized so that `T(1) = 1`.
//! - [`algo2_solve`] (power congestion `t^α`) iterates on `ν`: the new
//!   density is `(λ − φ^c − I[ν])₊^{1/α}` with `λ` fixed by unit mass.
//!
//! Maps live on the `n + 1` nodes `i/n`, densities and potentials `φ^c`
//! on the `n` cell midpoints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{check_spence_mirrlees, CongestionSpec, CostModel, ExternalityModel};
use crate::measures::{self, GridMeasure1D, Point};
use crate::quadrature::{cumulative_trapezoid, trapezoid_weights};
use crate::transport::{c_transform, c_transform_rev, monotone_map, wasserstein1, PotentialPair, TransportMap1D};
use crate::verification::{self, Distribution, EquilibriumResult, PlanMap};

/// Iteration controls shared by both schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation `ω ∈ (0, 1]`: `next = (1 − ω) current + ω step`.
    pub damping: f64,
}

impl IterationOptions {
    pub fn algo1_default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 2000,
            damping: 1.0,
        }
    }

    pub fn algo2_default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 5000,
            damping: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Domain {
                what: "damping ω",
                value: self.damping,
                domain: "(0, 1]",
            });
        }
        if !(self.tol > 0.0) {
            return Err(Error::Domain {
                what: "tolerance",
                value: self.tol,
                domain: "(0, ∞)",
            });
        }
        Ok(())
    }
}

/// Iterate of the logarithmic scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct Algo1State {
    pub t: TransportMap1D,
    /// `log C_k` of the last step (0 before the first).
    pub log_c: f64,
    pub k: usize,
    pub step_history: Vec<f64>,
}

impl Algo1State {
    pub fn new(t: TransportMap1D) -> Self {
        Self {
            t,
            log_c: 0.0,
            k: 0,
            step_history: Vec::new(),
        }
    }
}

/// Node values of the type density: average of the two adjacent cells.
fn node_density(mu: &GridMeasure1D) -> Vec<f64> {
    let d = mu.density();
    let n = d.len();
    (0..=n)
        .map(|i| match i {
            0 => d[0],
            i if i == n => d[n - 1],
            i => 0.5 * (d[i - 1] + d[i]),
        })
        .collect()
}

/// Atoms `T(cell midpoint)` carrying the cell masses of `μ`: the
/// pushforward `T#μ` at midpoint resolution.
fn pushed_atoms(t: &TransportMap1D, mu: &GridMeasure1D) -> (Vec<Point>, Vec<f64>) {
    let v = t.values();
    let h = mu.cell_width();
    mu.density()
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 0.0)
        .map(|(i, d)| ([0.5 * (v[i] + v[i + 1]), 0.0], d * h))
        .unzip()
}

/// The exponent `−∫₀ˣ ∂ₓc(s, T(s))ds + c(x, T(x)) + I(T(x)) + V₀(T(x))` at
/// every node, with the interaction taken against `T#μ`.
fn algo1_exponent(t: &TransportMap1D, cost: &CostModel, model: &ExternalityModel, mu: &GridMeasure1D) -> Vec<f64> {
    let n = mu.n_cells();
    let h = mu.cell_width();
    let xs = measures::nodes(n);
    let tv = t.values();
    let dx: Vec<f64> = xs.iter().zip(tv).map(|(x, y)| cost.dcdx1(*x, *y)).collect();
    let a = cumulative_trapezoid(&dx, h);
    let field = model.kernel.map(|k| {
        let (atoms, w) = pushed_atoms(t, mu);
        k.field(&atoms, &w)
    });
    xs.iter()
        .zip(tv)
        .zip(&a)
        .map(|((x, y), ai)| {
            let p = [*y, 0.0];
            -ai + cost.c1(*x, *y) + field.as_ref().map_or(0.0, |f| f.value(&p)) + model.base_value(&p)
        })
        .collect()
}

/// `μ(x) exp(exponent(x) − shift)` at node `x_index`, together with the
/// shift (the maximum exponent) applied to every node. The constant `C_k`
/// absorbs the shift, so the next iterate does not depend on it.
pub fn algo1_integrand(
    t: &TransportMap1D,
    cost: &CostModel,
    model: &ExternalityModel,
    mu: &GridMeasure1D,
) -> (Vec<f64>, f64) {
    let e = algo1_exponent(t, cost, model, mu);
    let shift = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let md = node_density(mu);
    (md.iter().zip(&e).map(|(m, v)| m * (v - shift).exp()).collect(), shift)
}

/// Largest W1 gap between the recovered density and `T#μ` that passes
/// without a note. Healthy runs sit near the grid resolution.
const CONSISTENCY_TOL: f64 = 1e-3;

fn strictly_increasing(t: &TransportMap1D) -> Result<()> {
    match t.values().windows(2).position(|w| w[1] <= w[0]) {
        None => Ok(()),
        Some(i) => Err(Error::Numeric(format!(
            "map flat between nodes {i} and {}: the step is below floating-point resolution; lower the damping",
            i + 1
        ))),
    }
}

/// One undamped step `T_k ↦ T_{k+1} = ∫₀ˣ S_k`. Fails when the new map is
/// not strictly increasing in floating point, which happens when `S_k`
/// concentrates so sharply that its tail increments vanish next to 1.
pub fn algo1_step(state: &Algo1State, cost: &CostModel, model: &ExternalityModel, mu: &GridMeasure1D) -> Result<Algo1State> {
    let next = algo1_raw_step(state, cost, model, mu)?;
    strictly_increasing(&next.t)?;
    Ok(next)
}

fn algo1_raw_step(state: &Algo1State, cost: &CostModel, model: &ExternalityModel, mu: &GridMeasure1D) -> Result<Algo1State> {
    let h = mu.cell_width();
    let (g, shift) = algo1_integrand(&state.t, cost, model, mu);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite integrand in the map iteration".into()));
    }
    let z: f64 = g
        .iter()
        .zip(trapezoid_weights(g.len(), h))
        .map(|(v, w)| v * w)
        .sum();
    if !(z > 0.0) {
        return Err(Error::Numeric("integrand has zero total mass".into()));
    }
    let s: Vec<f64> = g.iter().map(|v| v / z).collect();
    let mut next = cumulative_trapezoid(&s, h);
    let last = next.len() - 1;
    next[last] = 1.0;
    for v in next.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    let sup = next
        .iter()
        .zip(state.t.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut history = state.step_history.clone();
    history.push(sup);
    Ok(Algo1State {
        t: TransportMap1D::new(next)?,
        log_c: -shift - z.ln(),
        k: state.k + 1,
        step_history: history,
    })
}

fn require_twist(cost: &CostModel, n: usize) -> Result<()> {
    if check_spence_mirrlees(cost, n) {
        Ok(())
    } else {
        Err(Error::Precondition(
            "cost fails the ∂²c/∂x∂y < 0 check; equilibria need not be monotone maps".into(),
        ))
    }
}

/// Solves the logarithmic-congestion equilibrium by iterating on the map.
///
/// `start` overrides the initial map (identity by default). The density is
/// recovered on the midpoints from the log-equilibrium relation
/// `log ν + φ^c + I = const`, which is the same fixed point as
/// `ν(T(x)) = μ(x)/T'(x)` but avoids differentiating `T`.
pub fn algo1_solve(
    cost: &CostModel,
    model: &ExternalityModel,
    mu: &GridMeasure1D,
    opts: &IterationOptions,
    start: Option<TransportMap1D>,
) -> Result<EquilibriumResult> {
    opts.validate()?;
    if model.congestion != Some(CongestionSpec::Log) {
        return Err(Error::Precondition("the map iteration needs logarithmic congestion".into()));
    }
    let n = mu.n_cells();
    require_twist(cost, n)?;
    let mut state = Algo1State::new(start.unwrap_or_else(|| TransportMap1D::identity(n)));
    let mut converged = false;
    let mut trace = Vec::new();
    while state.k < opts.max_iter {
        let stepped = algo1_raw_step(&state, cost, model, mu)?;
        let next = if opts.damping < 1.0 {
            let mixed: Vec<f64> = state
                .t
                .values()
                .iter()
                .zip(stepped.t.values())
                .map(|(a, b)| (1.0 - opts.damping) * a + opts.damping * b)
                .collect();
            TransportMap1D::new(mixed)?
        } else {
            stepped.t
        };
        strictly_increasing(&next)?;
        let sup = next
            .values()
            .iter()
            .zip(state.t.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        trace.push(sup);
        state = Algo1State {
            t: next,
            log_c: stepped.log_c,
            k: stepped.k,
            step_history: trace.clone(),
        };
        if sup < opts.tol {
            converged = true;
            break;
        }
    }
    let t = state.t;
    let (nu, potentials) = algo1_recover(&t, cost, model, mu)?;
    let drift = wasserstein1(&nu, &measures::pushforward_map_1d(&t, mu)?);
    let mut notes = Vec::new();
    if drift > CONSISTENCY_TOL {
        notes.push(format!(
            "recovered density is {drift:.2e} away from the pushforward of the types in W1; the map has likely collapsed"
        ));
    }
    let mut result = EquilibriumResult::new(
        "algo1",
        Distribution::Grid(mu.clone()),
        Distribution::Grid(nu),
        PlanMap::Grid(t),
    );
    result.potentials = Some(potentials);
    result.converged = converged;
    result.iterations = state.k;
    result.trace = trace;
    result.notes = notes;
    result.params.insert("damping".into(), opts.damping);
    result.params.insert("tol".into(), opts.tol);
    result.params.insert("log_c".into(), state.log_c);
    result.exploitability = verification::exploitability(&result, model, cost)?;
    Ok(result)
}

/// Density and potentials implied by a monotone map under log congestion.
fn algo1_recover(
    t: &TransportMap1D,
    cost: &CostModel,
    model: &ExternalityModel,
    mu: &GridMeasure1D,
) -> Result<(GridMeasure1D, PotentialPair)> {
    let n = mu.n_cells();
    let h = mu.cell_width();
    let ys = measures::midpoints(n);
    let xs = measures::nodes(n);
    // φ^c on 0, y_0, …, y_{n−1}: first step h/2, then h
    let g = |s: f64| cost.dcdy1(t.inverse(s), s);
    let mut phic = Vec::with_capacity(n);
    let mut acc = 0.25 * h * (g(0.0) + g(ys[0]));
    phic.push(acc);
    for j in 1..n {
        acc += 0.5 * h * (g(ys[j - 1]) + g(ys[j]));
        phic.push(acc);
    }
    let field = model.kernel.map(|k| {
        let (atoms, w) = pushed_atoms(t, mu);
        k.field(&atoms, &w)
    });
    let logs: Vec<f64> = ys
        .iter()
        .zip(&phic)
        .map(|(y, pc)| {
            let p = [*y, 0.0];
            -pc - field.as_ref().map_or(0.0, |f| f.value(&p)) - model.base_value(&p)
        })
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let nu = GridMeasure1D::normalized(logs.iter().map(|l| (l - top).exp()).collect())?;
    // envelope potential on the nodes, gauge φ^c(T(0)) = 0
    let tv = t.values();
    let dx: Vec<f64> = xs.iter().zip(tv).map(|(x, y)| cost.dcdx1(*x, *y)).collect();
    let a = cumulative_trapezoid(&dx, h);
    let phi0 = cost.c1(0.0, tv[0]);
    let phi: Vec<f64> = a.iter().map(|v| phi0 + v).collect();
    let phi_c = c_transform(&phi, &xs, &ys, cost);
    Ok((nu, PotentialPair { phi, phi_c }))
}

/// Iterate of the power scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct Algo2State {
    pub nu: GridMeasure1D,
    pub lambda: f64,
    /// Monotone map from `ν_k` to `μ`.
    pub s: TransportMap1D,
    /// `φ^c_k` at the midpoints, `φ^c_k(0) = 0`.
    pub phi_c: Vec<f64>,
    pub k: usize,
    pub step_history: Vec<f64>,
}

/// The unique `λ` with `h Σ (λ − g_j)₊^{1/α} = 1` (midpoint rule).
pub fn lambda_solve(g: &[f64], alpha: f64) -> Result<f64> {
    if g.is_empty() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("level function must be finite".into()));
    }
    if !(alpha >= 1.0) {
        return Err(Error::Domain {
            what: "congestion exponent α",
            value: alpha,
            domain: "[1, ∞)",
        });
    }
    let h = 1.0 / g.len() as f64;
    let inv = 1.0 / alpha;
    let mass = |l: f64| g.iter().map(|v| (l - v).max(0.0).powf(inv)).sum::<f64>() * h;
    let lo_g = g.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_g = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo_g, lo_g + (1.0 + hi_g - lo_g).powf(alpha) + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick whichever endpoint has the smaller residual
    Ok(if (mass(lo) - 1.0).abs() <= (mass(hi) - 1.0).abs() { lo } else { hi })
}

/// `φ^c(y) = ∫₀ʸ ∂_y c(S(s), s) ds` at the midpoints, trapezoid on the nodes
/// plus a half-cell trapezoid to reach each midpoint.
fn kantorovich_phi_c(s: &TransportMap1D, cost: &CostModel) -> Vec<f64> {
    let n = s.n_cells();
    let h = 1.0 / n as f64;
    let b = measures::nodes(n);
    let sv = s.values();
    let g: Vec<f64> = b.iter().zip(sv).map(|(y, x)| cost.dcdy1(*x, *y)).collect();
    let at_nodes = cumulative_trapezoid(&g, h);
    (0..n)
        .map(|j| {
            let y = (j as f64 + 0.5) * h;
            let gm = cost.dcdy1(0.5 * (sv[j] + sv[j + 1]), y);
            at_nodes[j] + 0.25 * h * (g[j] + gm)
        })
        .collect()
}

/// `φ^c + I[ν] + V₀` at the midpoints: everything in the equilibrium
/// condition except the congestion term.
fn level_function(nu: &GridMeasure1D, phi_c: &[f64], model: &ExternalityModel) -> Vec<f64> {
    let field = model.grid_field(nu);
    nu.midpoints()
        .iter()
        .zip(phi_c)
        .map(|(y, pc)| {
            let p = [*y, 0.0];
            pc + field.as_ref().map_or(0.0, |f| f.value(&p)) + model.base_value(&p)
        })
        .collect()
}

fn power_alpha(model: &ExternalityModel) -> Result<f64> {
    match model.congestion {
        Some(CongestionSpec::Power { alpha }) if alpha >= 1.0 => Ok(alpha),
        _ => Err(Error::Precondition("the density iteration needs power congestion with α ≥ 1".into())),
    }
}

/// One undamped step `ν_k ↦ ν_{k+1}`.
pub fn algo2_step(state: &Algo2State, cost: &CostModel, model: &ExternalityModel, mu: &GridMeasure1D) -> Result<Algo2State> {
    let alpha = power_alpha(model)?;
    let s = monotone_map(&state.nu, mu);
    let phi_c = kantorovich_phi_c(&s, cost);
    let g = level_function(&state.nu, &phi_c, model);
    let lambda = lambda_solve(&g, alpha)?;
    let dens: Vec<f64> = g.iter().map(|v| (lambda - v).max(0.0).powf(1.0 / alpha)).collect();
    let nu = GridMeasure1D::new(dens)?;
    let step = wasserstein1(&state.nu, &nu);
    let mut history = state.step_history.clone();
    history.push(step);
    Ok(Algo2State {
        nu,
        lambda,
        s,
        phi_c,
        k: state.k + 1,
        step_history: history,
    })
}

/// Solves the power-congestion equilibrium by iterating on the density.
///
/// After the damped iteration settles, one undamped step is applied so the
/// returned density has the exact `(λ − g)₊^{1/α}` form, with true zeros
/// off its support. If the step size grows five times in a row the damping
/// is halved; every such event is recorded in the result notes.
pub fn algo2_solve(
    cost: &CostModel,
    model: &ExternalityModel,
    mu: &GridMeasure1D,
    opts: &IterationOptions,
    start: Option<GridMeasure1D>,
) -> Result<EquilibriumResult> {
    opts.validate()?;
    let alpha = power_alpha(model)?;
    let n = mu.n_cells();
    require_twist(cost, n)?;
    let nu0 = start.unwrap_or_else(|| GridMeasure1D::uniform(n));
    if nu0.n_cells() != n {
        return Err(Error::Precondition("start density must share the type grid".into()));
    }
    let mut state = Algo2State {
        nu: nu0,
        lambda: f64::NAN,
        s: TransportMap1D::identity(n),
        phi_c: vec![0.0; n],
        k: 0,
        step_history: Vec::new(),
    };
    let mut omega = opts.damping;
    let mut notes = Vec::new();
    let mut trace: Vec<f64> = Vec::new();
    let mut rising = 0;
    let mut converged = false;
    while state.k < opts.max_iter {
        let stepped = algo2_step(&state, cost, model, mu)?;
        let nu = if omega < 1.0 {
            GridMeasure1D::normalized(
                state
                    .nu
                    .density()
                    .iter()
                    .zip(stepped.nu.density())
                    .map(|(a, b)| (1.0 - omega) * a + omega * b)
                    .collect(),
            )?
        } else {
            stepped.nu.clone()
        };
        let step = wasserstein1(&state.nu, &nu);
        if trace.last().is_some_and(|prev| step > *prev) {
            rising += 1;
        } else {
            rising = 0;
        }
        trace.push(step);
        state = Algo2State {
            nu,
            step_history: trace.clone(),
            ..stepped
        };
        if step < opts.tol {
            converged = true;
            break;
        }
        if rising >= 5 {
            omega *= 0.5;
            rising = 0;
            notes.push(format!("iteration {}: step grew 5 times in a row, damping halved to {omega}", state.k));
        }
    }
    // polish: one raw step, then potentials consistent with the final density
    let polished = algo2_step(&state, cost, model, mu)?;
    let nu = polished.nu;
    let s = monotone_map(&nu, mu);
    let phi_c = kantorovich_phi_c(&s, cost);
    let g = level_function(&nu, &phi_c, model);
    let lambda = lambda_solve(&g, alpha)?;
    let xs = measures::nodes(n);
    let ys = measures::midpoints(n);
    let phi = c_transform_rev(&phi_c, &ys, &xs, cost);
    let t = monotone_map(mu, &nu);
    if nu.density().contains(&0.0) {
        notes.push("density vanishes on part of the grid; the map uses the left-continuous inverse there".into());
    }
    let mut result = EquilibriumResult::new("algo2", Distribution::Grid(mu.clone()), Distribution::Grid(nu), PlanMap::Grid(t));
    result.potentials = Some(PotentialPair { phi, phi_c });
    result.lambda = Some(lambda);
    result.converged = converged;
    result.iterations = state.k;
    result.trace = trace;
    result.notes = notes;
    result.params.insert("damping".into(), opts.damping);
    result.params.insert("final_damping".into(), omega);
    result.params.insert("tol".into(), opts.tol);
    result.params.insert("alpha".into(), alpha);
    result.exploitability = verification::exploitability(&result, model, cost)?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{InteractionKernel, KernelExpr};

    fn fig2_model() -> (CostModel, ExternalityModel) {
        let k = InteractionKernel::new(KernelExpr::AbsPower { a: 2.0, b: 1.5, c: 1.0, d: [0.0, 0.0], q: 1.2 }, 1.0).unwrap();
        (
            CostModel::Power { p: 2.2 },
            ExternalityModel::one_dim(Some(CongestionSpec::Log), Some(k), None),
        )
    }

    fn fig3_model() -> (CostModel, ExternalityModel) {
        let k = InteractionKernel::new(KernelExpr::AbsPower { a: 3.0, b: 3.0, c: 2.0, d: [0.5, 0.0], q: 2.0 }, 1.0).unwrap();
        (
            CostModel::Power { p: 4.0 },
            ExternalityModel::one_dim(Some(CongestionSpec::Power { alpha: 1.0 }), Some(k), None),
        )
    }

    #[test]
    fn integrand_examples() {
        let n = 256;
        let u = GridMeasure1D::uniform(n);
        let id = TransportMap1D::identity(n);
        let log = ExternalityModel::one_dim(Some(CongestionSpec::Log), None, None);
        let (g, shift) = algo1_integrand(&id, &CostModel::Quadratic, &log, &u);
        assert_eq!(shift, 0.0);
        assert!(g.iter().all(|v| *v == 1.0));
        // c = −xy: exponent ∫₀ˣ s ds − x² = −x²/2, max at x = 0
        let (g, shift) = algo1_integrand(&id, &CostModel::Bilinear { coef: -1.0 }, &log, &u);
        assert!(shift.abs() < 1e-15);
        for (x, v) in measures::nodes(n).iter().zip(&g) {
            assert!((v - (-x * x / 2.0).exp()).abs() < 1e-12);
        }
        // fig2 at x = 0.5 against a twice finer grid
        let (cost, model) = fig2_model();
        let at = |n: usize| {
            let (g, s) = algo1_integrand(&TransportMap1D::identity(n), &cost, &model, &GridMeasure1D::uniform(n));
            g[n / 2] * s.exp()
        };
        let (a, b) = (at(512), at(1024));
        assert!(a.is_finite() && a > 0.0);
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn algo1_step_examples() {
        let n = 128;
        let u = GridMeasure1D::uniform(n);
        let log = ExternalityModel::one_dim(Some(CongestionSpec::Log), None, None);
        let s = algo1_step(&Algo1State::new(TransportMap1D::identity(n)), &CostModel::Quadratic, &log, &u).unwrap();
        assert_eq!(s.t, TransportMap1D::identity(n));
        assert!(s.log_c.abs() < 1e-15);
        let (cost, model) = fig2_model();
        let s = algo1_step(&Algo1State::new(TransportMap1D::identity(n)), &cost, &model, &u).unwrap();
        let v = s.t.values();
        assert_eq!(v[0], 0.0);
        assert_eq!(v[n], 1.0);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn collapsing_map_is_reported_not_returned_flat() {
        let k = InteractionKernel::new(KernelExpr::AbsPower { a: 2.5065, b: 1.3877, c: 1.6326, d: [0.3693, 0.0], q: 4.0 }, 1.0).unwrap();
        let model = ExternalityModel::one_dim(Some(CongestionSpec::Log), Some(k), None);
        let cost = CostModel::Power { p: 1.5 };
        let u = GridMeasure1D::uniform(64);
        let mut s = Algo1State::new(TransportMap1D::identity(64));
        let err = (0..5)
            .find_map(|_| match algo1_step(&s, &cost, &model, &u) {
                Ok(next) => {
                    s = next;
                    None
                }
                Err(e) => Some(e),
            })
            .expect("undamped steps collapse the map");
        assert!(matches!(err, Error::Numeric(_)), "{err}");
        // damping keeps the map strictly increasing, but the stalled map is
        // inconsistent with its own density and is not an equilibrium
        let opts = IterationOptions { tol: 1e-10, max_iter: 500, damping: 0.5 };
        let r = algo1_solve(&cost, &model, &GridMeasure1D::uniform(256), &opts, None).unwrap();
        assert!(r.notes.iter().any(|n| n.contains("collapsed")), "{:?}", r.notes);
        assert!(r.exploitability > 1.0);
        let (cost, model) = fig2_model();
        let r = algo1_solve(&cost, &model, &GridMeasure1D::uniform(512), &IterationOptions::algo1_default(), None).unwrap();
        assert!(r.notes.is_empty(), "{:?}", r.notes);
    }

    #[test]
    fn lambda_examples() {
        let n = 1000;
        assert!((lambda_solve(&vec![0.0; n], 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((lambda_solve(&vec![0.0; n], 2.0).unwrap() - 1.0).abs() < 1e-12);
        let g: Vec<f64> = measures::midpoints(n);
        let l = lambda_solve(&g, 1.0).unwrap();
        assert!((l - 1.5).abs() < 1e-12);
        // α = 2: the resulting density has unit mass and the bracketing
        // masses straddle 1
        let l2 = lambda_solve(&g, 2.0).unwrap();
        let mass = |l: f64| g.iter().map(|y| (l - y).max(0.0).sqrt()).sum::<f64>() / n as f64;
        assert!((mass(l2) - 1.0).abs() < 1e-12);
        assert!(mass(l2 - 1e-6) < 1.0 && mass(l2 + 1e-6) > 1.0);
    }

    #[test]
    fn algo2_step_fixed_point_and_fig3_step() {
        let n = 128;
        let u = GridMeasure1D::uniform(n);
        let p1 = ExternalityModel::one_dim(Some(CongestionSpec::Power { alpha: 1.0 }), None, None);
        let st = Algo2State {
            nu: u.clone(),
            lambda: f64::NAN,
            s: TransportMap1D::identity(n),
            phi_c: vec![0.0; n],
            k: 0,
            step_history: vec![],
        };
        let next = algo2_step(&st, &CostModel::Quadratic, &p1, &u).unwrap();
        assert!(next.phi_c.iter().all(|v| *v == 0.0));
        assert!((next.lambda - 1.0).abs() < 1e-12);
        assert!(next.nu.density().iter().all(|d| (d - 1.0).abs() < 1e-12));
        let (cost, model) = fig3_model();
        let next = algo2_step(&st, &cost, &model, &u).unwrap();
        assert!((next.nu.mass() - 1.0).abs() < 1e-10);
        assert!(next.nu.density().iter().all(|d| *d >= 0.0));
    }

    #[test]
    fn trivial_equilibria() {
        let n = 512;
        let u = GridMeasure1D::uniform(n);
        let log = ExternalityModel::one_dim(Some(CongestionSpec::Log), None, None);
        let r = algo1_solve(&CostModel::Quadratic, &log, &u, &IterationOptions::algo1_default(), None).unwrap();
        assert!(r.converged);
        assert!(r.exploitability < 1e-8);
        let p1 = ExternalityModel::one_dim(Some(CongestionSpec::Power { alpha: 1.0 }), None, None);
        let r = algo2_solve(&CostModel::Quadratic, &p1, &u, &IterationOptions::algo2_default(), None).unwrap();
        assert!(r.converged);
        assert!(r.exploitability < 1e-8);
    }

    #[test]
    fn damping_does_not_move_the_fixed_point() {
        let n = 128;
        let u = GridMeasure1D::uniform(n);
        let (cost, model) = fig2_model();
        let mut o = IterationOptions::algo1_default();
        let a = algo1_solve(&cost, &model, &u, &o, None).unwrap();
        o.damping = 0.5;
        let b = algo1_solve(&cost, &model, &u, &o, None).unwrap();
        assert!(a.converged && b.converged);
        let (PlanMap::Grid(ta), PlanMap::Grid(tb)) = (&a.map, &b.map) else {
            panic!("grid maps expected")
        };
        let sup = ta.values().iter().zip(tb.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(sup < 1e-8, "{sup}");
    }

    #[test]
    fn wrong_congestion_is_rejected() {
        let u = GridMeasure1D::uniform(16);
        let p1 = ExternalityModel::one_dim(Some(CongestionSpec::Power { alpha: 1.0 }), None, None);
        let log = ExternalityModel::one_dim(Some(CongestionSpec::Log), None, None);
        assert!(algo1_solve(&CostModel::Quadratic, &p1, &u, &IterationOptions::algo1_default(), None).is_err());
        assert!(algo2_solve(&CostModel::Quadratic, &log, &u, &IterationOptions::algo2_default(), None).is_err());
        assert!(algo1_solve(&CostModel::Bilinear { coef: 1.0 }, &log, &u, &IterationOptions::algo1_default(), None).is_err());
    }
}
