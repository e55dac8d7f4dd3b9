//! A posteriori checks of computed equilibria.
//!
//! Nothing here trusts the solver: every check recomputes `V[ν]` from the
//! returned action distribution and compares each type's realized cost with
//! the best cost available to it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::best_reply::sliced_w1;
use crate::error::{Error, Result};
use crate::game::{potential_on_grid, CongestionSpec, CostModel, ExternalityModel};
use crate::measures::{self, cdf, DiscreteMeasure, GridMeasure1D, Point};
use crate::ode1d::lambda_solve;
use crate::transport::{transport_cost_monotone, wasserstein1, wasserstein1_atoms, PotentialPair, TransportMap1D};

/// Default absolute threshold for exploitability and residual checks.
pub const DEFAULT_THRESHOLD: f64 = 1e-6;

/// Densities below this count as zero in support-dependent checks.
pub const DENSITY_FLOOR: f64 = 1e-14;

/// A probability distribution as carried by a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Grid(GridMeasure1D),
    Particles(DiscreteMeasure),
}

impl Distribution {
    pub fn dim(&self) -> usize {
        match self {
            Distribution::Grid(_) => 1,
            Distribution::Particles(m) => m.dim(),
        }
    }
}

/// The pure plan `x ↦ T(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanMap {
    Grid(TransportMap1D),
    /// `actions[i]` is the action of type atom `i`.
    Particles { actions: Vec<Point> },
}

/// Output of every solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub solver: String,
    pub mu: Distribution,
    pub nu: Distribution,
    pub map: PlanMap,
    pub potentials: Option<PotentialPair>,
    /// Mass-normalization level of the power scheme.
    pub lambda: Option<f64>,
    pub exploitability: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Step size of every iteration.
    pub trace: Vec<f64>,
    /// Events worth knowing about: damping changes, boundary hits.
    pub notes: Vec<String>,
    pub params: BTreeMap<String, f64>,
}

impl EquilibriumResult {
    pub fn new(solver: &str, mu: Distribution, nu: Distribution, map: PlanMap) -> Self {
        Self {
            solver: solver.to_string(),
            mu,
            nu,
            map,
            potentials: None,
            lambda: None,
            exploitability: f64::NAN,
            converged: false,
            iterations: 0,
            trace: Vec::new(),
            notes: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn grid_nu(&self) -> Option<&GridMeasure1D> {
        match &self.nu {
            Distribution::Grid(g) => Some(g),
            _ => None,
        }
    }

    pub fn grid_mu(&self) -> Option<&GridMeasure1D> {
        match &self.mu {
            Distribution::Grid(g) => Some(g),
            _ => None,
        }
    }

    pub fn grid_map(&self) -> Option<&TransportMap1D> {
        match &self.map {
            PlanMap::Grid(t) => Some(t),
            _ => None,
        }
    }
}

/// `∫ [c(x, T(x)) + V(T(x)) − min_y (c(x, y) + V(y))] dμ(x)`.
///
/// For grid results the integral is taken over action cells: the types
/// sending mass to cell `j` are represented by `T⁻¹(y_j)` and weighted by
/// the `μ`-mass of `T⁻¹(cell j)`. The minimum runs over every midpoint
/// with finite `V`, so `−∞` from log congestion on empty cells never wins.
/// For particle results every type atom is compared against a lattice of
/// candidate actions.
pub fn exploitability(result: &EquilibriumResult, model: &ExternalityModel, cost: &CostModel) -> Result<f64> {
    match (&result.mu, &result.nu, &result.map) {
        (Distribution::Grid(mu), Distribution::Grid(nu), PlanMap::Grid(t)) => exploitability_grid(model, cost, mu, nu, t),
        (Distribution::Particles(mu), Distribution::Particles(nu), PlanMap::Particles { actions }) => {
            exploitability_particles(model, cost, mu, nu, actions)
        }
        _ => Err(Error::Incompatible("result mixes grid and particle representations".into())),
    }
}

pub fn exploitability_grid(
    model: &ExternalityModel,
    cost: &CostModel,
    mu: &GridMeasure1D,
    nu: &GridMeasure1D,
    t: &TransportMap1D,
) -> Result<f64> {
    let n = nu.n_cells();
    if mu.n_cells() != n || t.n_cells() != n {
        return Err(Error::Incompatible("types, actions and map must share one grid".into()));
    }
    let h = nu.cell_width();
    let ys = measures::midpoints(n);
    let v = potential_on_grid(model, nu);
    let fm = cdf(mu);
    let finite: Vec<usize> = (0..n).filter(|k| v[*k].is_finite()).collect();
    let mut total = 0.0;
    for j in 0..n {
        let lo = fm.eval(t.inverse(j as f64 * h));
        let hi = if j + 1 == n { 1.0 } else { fm.eval(t.inverse((j + 1) as f64 * h)) };
        let w = hi - lo;
        if w <= 0.0 || !v[j].is_finite() {
            continue;
        }
        let x = t.inverse(ys[j]);
        let realized = cost.c1(x, ys[j]) + v[j];
        let best = finite
            .iter()
            .map(|k| cost.c1(x, ys[*k]) + v[*k])
            .fold(realized, f64::min);
        total += w * (realized - best);
    }
    Ok(total)
}

pub fn exploitability_particles(
    model: &ExternalityModel,
    cost: &CostModel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    actions: &[Point],
) -> Result<f64> {
    if actions.len() != mu.len() {
        return Err(Error::Incompatible("one action per type atom expected".into()));
    }
    let dim = mu.dim();
    let field = model.kernel.map(|k| k.field_of_atoms(nu));
    let v = |y: &Point| field.as_ref().map_or(0.0, |f| f.value(y)) + model.base_value(y);
    let side = if dim == 1 { 1025 } else { 65 };
    let axis: Vec<f64> = (0..side).map(|i| i as f64 / (side - 1) as f64).collect();
    let lattice: Vec<Point> = if dim == 1 {
        axis.iter().map(|a| [*a, 0.0]).collect()
    } else {
        axis.iter().flat_map(|a| axis.iter().map(move |b| [*a, *b])).collect()
    };
    let lv: Vec<f64> = lattice.iter().map(v).collect();
    let mut total = 0.0;
    for ((x, y), w) in mu.atoms().iter().zip(actions).zip(mu.weights()) {
        let realized = cost.c(x, y) + v(y);
        let best = lattice
            .iter()
            .zip(&lv)
            .map(|(z, vz)| cost.c(x, z) + vz)
            .fold(realized, f64::min);
        total += w * (realized - best);
    }
    Ok(total)
}

/// Admissibility and tightness of the Kantorovich pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    /// `max φ(x) + φ^c(y) − c(x, y)` over the grid.
    pub max_violation: f64,
    pub primal: f64,
    pub dual: f64,
    /// `primal − dual`.
    pub gap: f64,
    pub passed: bool,
}

pub fn duality_report(result: &EquilibriumResult, cost: &CostModel) -> Result<DualityReport> {
    let (Some(mu), Some(nu), Some(pair)) = (result.grid_mu(), result.grid_nu(), result.potentials.as_ref()) else {
        return Err(Error::Precondition("duality needs a grid result with potentials".into()));
    };
    let max_violation = pair.max_violation(cost);
    let primal = transport_cost_monotone(mu, nu, cost);
    let dual = pair.dual_value(mu, nu);
    let gap = primal - dual;
    Ok(DualityReport {
        max_violation,
        primal,
        dual,
        gap,
        passed: max_violation <= 1e-8 && gap.abs() < DEFAULT_THRESHOLD,
    })
}

/// Residuals of `ν^α + φ^c + I[ν] ≥ λ`, with equality where `ν > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityReport {
    pub lambda: f64,
    /// `λ` re-solved from the returned density's own level function.
    pub lambda_recomputed: f64,
    pub lambda_consistent: bool,
    pub mass_error: f64,
    /// `max |slack|` where `ν > floor`.
    pub max_violation_on_support: f64,
    /// `min slack` where `ν ≤ floor`; `None` when the support is everything.
    pub min_slack_off_support: Option<f64>,
    pub passed: bool,
    #[serde(skip)]
    pub slack: Vec<f64>,
}

/// `slack_j = ν_j^α + φ^c_j + I[ν](y_j) + V₀(y_j) − λ`, non-negative at an
/// equilibrium and zero on the support.
pub fn complementarity_report(
    result: &EquilibriumResult,
    model: &ExternalityModel,
    alpha: f64,
) -> Result<ComplementarityReport> {
    let (Some(nu), Some(pair), Some(lambda)) = (result.grid_nu(), result.potentials.as_ref(), result.lambda) else {
        return Err(Error::Precondition("complementarity needs a power-congestion grid result".into()));
    };
    let field = model.grid_field(nu);
    let ys = nu.midpoints();
    let g: Vec<f64> = ys
        .iter()
        .zip(&pair.phi_c)
        .map(|(y, pc)| {
            let p = [*y, 0.0];
            pc + field.as_ref().map_or(0.0, |f| f.value(&p)) + model.base_value(&p)
        })
        .collect();
    let cong = CongestionSpec::Power { alpha };
    let slack: Vec<f64> = nu.density().iter().zip(&g).map(|(d, gj)| cong.f(*d) + gj - lambda).collect();
    let mut on = 0.0f64;
    let mut off = f64::INFINITY;
    for (d, s) in nu.density().iter().zip(&slack) {
        if *d > DENSITY_FLOOR {
            on = on.max(s.abs());
        } else {
            off = off.min(*s);
        }
    }
    let lambda_recomputed = lambda_solve(&g, alpha)?;
    let lambda_consistent = (lambda_recomputed - lambda).abs() < 1e-8;
    let mass_error = (nu.mass() - 1.0).abs();
    let tol = DEFAULT_THRESHOLD;
    Ok(ComplementarityReport {
        lambda,
        lambda_recomputed,
        lambda_consistent,
        mass_error,
        max_violation_on_support: on,
        min_slack_off_support: off.is_finite().then_some(off),
        passed: on < tol && off >= -tol && lambda_consistent && mass_error < 1e-8,
        slack,
    })
}

/// The plan is a single-valued non-decreasing map.
pub fn purity_check(result: &EquilibriumResult) -> bool {
    match (&result.map, &result.mu) {
        (PlanMap::Grid(t), _) => t.is_monotone(),
        (PlanMap::Particles { actions }, Distribution::Particles(mu)) => {
            let mut idx: Vec<usize> = (0..mu.len()).collect();
            let x = |i: usize| mu.atoms()[i];
            idx.sort_by(|a, b| x(*a)[0].total_cmp(&x(*b)[0]).then(x(*a)[1].total_cmp(&x(*b)[1])));
            idx.windows(2).all(|w| {
                let (a, b) = (w[0], w[1]);
                if x(a) == x(b) {
                    actions[a] == actions[b]
                } else {
                    mu.dim() > 1 || actions[b][0] >= actions[a][0] - 1e-12
                }
            })
        }
        _ => false,
    }
}

/// W₁ between the action distributions of two results.
pub fn result_distance(a: &EquilibriumResult, b: &EquilibriumResult) -> Result<f64> {
    match (&a.nu, &b.nu) {
        (Distribution::Grid(x), Distribution::Grid(y)) => Ok(wasserstein1(x, y)),
        (Distribution::Particles(x), Distribution::Particles(y)) if x.dim() == 1 && y.dim() == 1 => {
            wasserstein1_atoms(x, y)
        }
        (Distribution::Particles(x), Distribution::Particles(y)) if x.dim() == 2 && y.dim() == 2 => Ok(sliced_w1(x, y)),
        (Distribution::Grid(g), Distribution::Particles(p)) | (Distribution::Particles(p), Distribution::Grid(g))
            if p.dim() == 1 =>
        {
            crate::transport::wasserstein1_grid_atoms(g, p)
        }
        _ => Err(Error::Incompatible(format!(
            "cannot compare a {}D result with a {}D result",
            a.nu.dim(),
            b.nu.dim()
        ))),
    }
}

/// Pairwise distance table between results.
pub fn pairwise_distances(results: &[EquilibriumResult]) -> Result<Vec<Vec<f64>>> {
    let n = results.len();
    let mut table = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = result_distance(&results[i], &results[j])?;
            table[i][j] = d;
            table[j][i] = d;
        }
    }
    Ok(table)
}

/// How much the uniqueness probe can claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeStatus {
    /// Positive monotonicity margin and every start converged.
    Certified,
    /// Every start converged but the margin does not guarantee uniqueness.
    Exploratory,
    /// Some start did not converge.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub max_w1: f64,
    pub margin: f64,
    pub status: ProbeStatus,
    pub converged: Vec<bool>,
}

/// Solves from every start and reports the largest pairwise W₁ between the
/// resulting action distributions.
pub fn uniqueness_probe<F>(solve: F, starts: &[GridMeasure1D], margin: f64) -> Result<UniquenessReport>
where
    F: Fn(&GridMeasure1D) -> Result<EquilibriumResult>,
{
    if starts.len() < 2 {
        return Err(Error::Precondition("the probe needs at least two starts".into()));
    }
    let results = starts.iter().map(&solve).collect::<Result<Vec<_>>>()?;
    let table = pairwise_distances(&results)?;
    let max_w1 = table.iter().flatten().cloned().fold(0.0, f64::max);
    let converged: Vec<bool> = results.iter().map(|r| r.converged).collect();
    let status = if !converged.iter().all(|c| *c) {
        ProbeStatus::Inconclusive
    } else if margin > 0.0 {
        ProbeStatus::Certified
    } else {
        ProbeStatus::Exploratory
    };
    Ok(UniquenessReport {
        max_w1,
        margin,
        status,
        converged,
    })
}

/// The certification block attached to result files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub threshold: f64,
    pub exploitability: f64,
    pub exploitability_passed: bool,
    pub mass_error: f64,
    pub pure: bool,
    pub duality: Option<DualityReport>,
    pub complementarity: Option<ComplementarityReport>,
    pub passed: bool,
}

/// Runs every check that applies to the result's representation.
pub fn certify(
    result: &EquilibriumResult,
    model: &ExternalityModel,
    cost: &CostModel,
    threshold: f64,
) -> Result<Certification> {
    let exploitability = exploitability(result, model, cost)?;
    let mass_error = match &result.nu {
        Distribution::Grid(g) => (g.mass() - 1.0).abs(),
        Distribution::Particles(p) => (p.total_weight() - 1.0).abs(),
    };
    let pure = purity_check(result);
    let duality = if result.potentials.is_some() {
        Some(duality_report(result, cost)?)
    } else {
        None
    };
    let complementarity = match model.congestion {
        Some(CongestionSpec::Power { alpha }) if result.lambda.is_some() => Some(complementarity_report(result, model, alpha)?),
        _ => None,
    };
    let exploitability_passed = exploitability >= -1e-12 && exploitability < threshold;
    let passed = exploitability_passed
        && mass_error < 1e-8
        && pure
        && duality.as_ref().is_none_or(|d| d.passed)
        && complementarity.as_ref().is_none_or(|c| c.passed);
    Ok(Certification {
        threshold,
        exploitability,
        exploitability_passed,
        mass_error,
        pure,
        duality,
        complementarity,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{InteractionKernel, KernelExpr};
    use crate::ode1d::{algo1_solve, algo2_solve, IterationOptions};

    fn trivial_power() -> (CostModel, ExternalityModel, GridMeasure1D) {
        (
            CostModel::Quadratic,
            ExternalityModel::one_dim(Some(CongestionSpec::Power { alpha: 1.0 }), None, None),
            GridMeasure1D::uniform(128),
        )
    }

    #[test]
    fn exploitability_of_trivial_and_perturbed_maps() {
        let (cost, model, u) = trivial_power();
        let r = algo2_solve(&cost, &model, &u, &IterationOptions::algo2_default(), None).unwrap();
        assert!(r.exploitability < 1e-8);
        let mut bad = r.clone();
        bad.map = PlanMap::Grid(TransportMap1D::from_fn(128, |x| x * x).unwrap());
        let e = exploitability(&bad, &model, &cost).unwrap();
        // brute force: V is constant, so the gap of type x is c(x, x²) minus
        // the best grid cost near y = x
        let ys = measures::midpoints(128);
        let n = 20_000;
        let brute: f64 = (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) / n as f64;
                let best = ys.iter().map(|y| cost.c1(x, *y)).fold(f64::INFINITY, f64::min);
                cost.c1(x, x * x) - best
            })
            .sum::<f64>()
            / n as f64;
        assert!(e > 1e-3);
        assert!((e - brute).abs() < 1e-3, "{e} vs {brute}");
    }

    #[test]
    fn gauge_shift_leaves_exploitability_and_duality_unchanged() {
        let (cost, model, u) = trivial_power();
        let r = algo2_solve(&cost, &model, &u, &IterationOptions::algo2_default(), None).unwrap();
        let mut shifted = r.clone();
        shifted.potentials = Some(r.potentials.as_ref().unwrap().gauge_shift(3.25));
        assert_eq!(exploitability(&shifted, &model, &cost).unwrap(), exploitability(&r, &model, &cost).unwrap());
        let (a, b) = (duality_report(&r, &cost).unwrap(), duality_report(&shifted, &cost).unwrap());
        assert!((a.gap - b.gap).abs() < 1e-12);
    }

    #[test]
    fn complementarity_examples() {
        let (cost, model, u) = trivial_power();
        let r = algo2_solve(&cost, &model, &u, &IterationOptions::algo2_default(), None).unwrap();
        let rep = complementarity_report(&r, &model, 1.0).unwrap();
        assert!(rep.slack.iter().all(|s| s.abs() < 1e-10));
        assert!(rep.passed);
        // a level inconsistent with unit mass
        let mut bad = r.clone();
        bad.lambda = Some(1.5);
        let rep = complementarity_report(&bad, &model, 1.0).unwrap();
        assert!(!rep.lambda_consistent);
        assert!(!rep.passed);
    }

    #[test]
    fn purity_examples() {
        let (cost, model, u) = trivial_power();
        let r = algo2_solve(&cost, &model, &u, &IterationOptions::algo2_default(), None).unwrap();
        assert!(purity_check(&r));
        let mut bad = r.clone();
        bad.map = PlanMap::Grid(TransportMap1D::unchecked(measures::nodes(128).iter().map(|x| 1.0 - x).collect()));
        assert!(!purity_check(&bad));
        // density with an empty stretch: the map jumps but stays monotone
        let k = InteractionKernel::new(KernelExpr::AbsPower { a: 3.0, b: 3.0, c: 2.0, d: [0.5, 0.0], q: 2.0 }, 1.0).unwrap();
        let m = ExternalityModel::one_dim(Some(CongestionSpec::Power { alpha: 1.0 }), Some(k), None);
        let r = algo2_solve(&CostModel::Power { p: 4.0 }, &m, &u, &IterationOptions::algo2_default(), None).unwrap();
        assert!(r.grid_nu().unwrap().density().contains(&0.0));
        assert!(purity_check(&r));
    }

    #[test]
    fn uniqueness_probe_labels() {
        let (cost, model, u) = trivial_power();
        let half = GridMeasure1D::from_fn(128, |y| if y < 0.5 { 2.0 } else { 0.0 }).unwrap();
        let solve = |s: &GridMeasure1D| algo2_solve(&cost, &model, &u, &IterationOptions::algo2_default(), Some(s.clone()));
        let rep = uniqueness_probe(solve, &[u.clone(), half.clone()], 1.0).unwrap();
        assert!(rep.max_w1 < 1e-6);
        assert_eq!(rep.status, ProbeStatus::Certified);
        let rep = uniqueness_probe(solve, &[u.clone(), half], 0.0).unwrap();
        assert_eq!(rep.status, ProbeStatus::Exploratory);
        let log = ExternalityModel::one_dim(Some(CongestionSpec::Log), None, None);
        let stuck = |_: &GridMeasure1D| {
            let o = IterationOptions { tol: 1e-30, max_iter: 1, damping: 1.0 };
            algo1_solve(&CostModel::Power { p: 2.2 }, &log, &u, &o, Some(TransportMap1D::from_fn(128, |x| x * x).unwrap()))
        };
        let rep = uniqueness_probe(stuck, &[u.clone(), u.clone()], 1.0).unwrap();
        assert_eq!(rep.status, ProbeStatus::Inconclusive);
    }
}
