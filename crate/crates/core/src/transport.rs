//! Exact optimal transport on the line.
//!
//! Under a cost with negative cross derivative the optimal plan between two
//! measures on `[0, 1]` is the monotone rearrangement `T = F_ν⁻¹ ∘ F_μ`, so
//! everything here reduces to CDFs and quantiles. [`discrete_ot_oracle`]
//! solves tiny discrete instances exactly and exists to test the rest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::CostModel;
use crate::measures::{self, cdf, quantile_unchecked, Cdf1D, DiscreteMeasure, GridMeasure1D};
use crate::quadrature::{gauss_legendre, GL8_NODES, GL8_WEIGHTS};

const MONOTONE_TOL: f64 = 1e-12;

/// Map values at the `n + 1` nodes of a uniform grid, linear in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportMap1D {
    values: Vec<f64>,
}

impl TransportMap1D {
    /// Validates monotonicity (up to `1e-12`) and the range `[0, 1]`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidMap("need at least two nodes".into()));
        }
        if let Some(i) = values
            .iter()
            .position(|v| !(v.is_finite() && (0.0..=1.0).contains(v)))
        {
            return Err(Error::InvalidMap(format!("value {} at node {i} outside [0, 1]", values[i])));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] < w[0] - MONOTONE_TOL) {
            return Err(Error::InvalidMap(format!("decreasing between nodes {i} and {}", i + 1)));
        }
        Ok(Self { values })
    }

    /// Wraps values without any check. Useful for building counterexamples
    /// that verification must reject.
    pub fn unchecked(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn identity(n_cells: usize) -> Self {
        Self {
            values: measures::nodes(n_cells),
        }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(n_cells: usize, f: F) -> Result<Self> {
        Self::new(measures::nodes(n_cells).into_iter().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_cells(&self) -> usize {
        self.values.len() - 1
    }

    pub fn nodes(&self) -> Vec<f64> {
        measures::nodes(self.n_cells())
    }

    pub fn is_monotone(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
            && self.values.windows(2).all(|w| w[1] >= w[0] - MONOTONE_TOL)
    }

    /// Piecewise-linear evaluation at `x ∈ [0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.n_cells();
        let s = (x.clamp(0.0, 1.0)) * n as f64;
        let i = (s.floor() as usize).min(n - 1);
        let t = s - i as f64;
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    /// Generalized inverse `inf {x : T(x) ≥ y}`, linear inside cells.
    /// Returns 0 below `T(0)` and 1 above `T(1)`.
    pub fn inverse(&self, y: f64) -> f64 {
        let v = &self.values;
        let n = self.n_cells();
        if y <= v[0] {
            return 0.0;
        }
        if y > v[n] {
            return 1.0;
        }
        let i = v.partition_point(|&t| t < y).clamp(1, n);
        let (a, b) = (v[i - 1], v[i]);
        let t = if b > a { (y - a) / (b - a) } else { 1.0 };
        ((i - 1) as f64 + t.clamp(0.0, 1.0)) / n as f64
    }
}

/// Kantorovich potentials: `phi` on the `n + 1` nodes, `phi_c` on the `n`
/// cell midpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialPair {
    pub phi: Vec<f64>,
    pub phi_c: Vec<f64>,
}

impl PotentialPair {
    pub fn n_cells(&self) -> usize {
        self.phi_c.len()
    }

    /// `max φ(x) + φ^c(y) − c(x, y)` over all grid pairs. The pair is
    /// admissible when this is at most `1e-8`.
    pub fn max_violation(&self, cost: &CostModel) -> f64 {
        let xs = measures::nodes(self.n_cells());
        let ys = measures::midpoints(self.n_cells());
        let mut worst = f64::NEG_INFINITY;
        for (x, p) in xs.iter().zip(&self.phi) {
            for (y, q) in ys.iter().zip(&self.phi_c) {
                worst = worst.max(p + q - cost.c1(*x, *y));
            }
        }
        worst
    }

    /// `∫φ dμ + ∫φ^c dν`: trapezoid against the node density of `μ` for
    /// `φ`, midpoint for `φ^c`.
    pub fn dual_value(&self, mu: &GridMeasure1D, nu: &GridMeasure1D) -> f64 {
        let n = mu.n_cells();
        let h = mu.cell_width();
        let d = mu.density();
        let a: f64 = (0..n)
            .map(|i| 0.5 * (self.phi[i] + self.phi[i + 1]) * d[i] * h)
            .sum();
        let b: f64 = self
            .phi_c
            .iter()
            .zip(nu.density())
            .map(|(p, v)| p * v)
            .sum::<f64>()
            * nu.cell_width();
        a + b
    }

    /// Shifts `φ` by `k` and `φ^c` by `−k`; the dual pair is defined up to
    /// this gauge.
    pub fn gauge_shift(&self, k: f64) -> Self {
        Self {
            phi: self.phi.iter().map(|v| v + k).collect(),
            phi_c: self.phi_c.iter().map(|v| v - k).collect(),
        }
    }
}

/// A coupling between two discrete measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingPlan {
    pub source: DiscreteMeasure,
    pub target: DiscreteMeasure,
    /// `plan[i][j]` is the mass sent from source atom `i` to target atom `j`.
    pub plan: Vec<Vec<f64>>,
}

impl CouplingPlan {
    pub fn new(source: DiscreteMeasure, target: DiscreteMeasure, plan: Vec<Vec<f64>>) -> Result<Self> {
        let tol = 1e-12;
        if plan.len() != source.len() || plan.iter().any(|r| r.len() != target.len()) {
            return Err(Error::InvalidMap("plan shape does not match the marginals".into()));
        }
        if plan.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidMap("negative plan entry".into()));
        }
        for (i, (row, w)) in plan.iter().zip(source.weights()).enumerate() {
            if (row.iter().sum::<f64>() - w).abs() > tol {
                return Err(Error::InvalidMap(format!("row {i} does not sum to its weight")));
            }
        }
        for (j, w) in target.weights().iter().enumerate() {
            if (plan.iter().map(|r| r[j]).sum::<f64>() - w).abs() > tol {
                return Err(Error::InvalidMap(format!("column {j} does not sum to its weight")));
            }
        }
        Ok(Self { source, target, plan })
    }

    pub fn cost(&self, cost: &CostModel) -> f64 {
        let (xs, ys) = (self.source.atoms(), self.target.atoms());
        self.plan
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, m)| (i, j, *m)))
            .filter(|(_, _, m)| *m > 0.0)
            .map(|(i, j, m)| m * cost.c(&xs[i], &ys[j]))
            .sum()
    }
}

/// `T = F_ν⁻¹ ∘ F_μ` at the nodes of `μ`'s grid.
pub fn monotone_map(mu: &GridMeasure1D, nu: &GridMeasure1D) -> TransportMap1D {
    let fm = cdf(mu);
    let fn_ = cdf(nu);
    let values = fm
        .values()
        .iter()
        .map(|p| quantile_unchecked(&fn_, *p))
        .collect();
    TransportMap1D { values }
}

/// A CDF on `[0, 1]` that is linear between its breakpoints, possibly with
/// jumps at them (atoms).
enum CdfView<'a> {
    Grid(&'a Cdf1D),
    Atoms { xs: Vec<f64>, cum: Vec<f64> },
}

impl CdfView<'_> {
    fn atoms(m: &DiscreteMeasure) -> Result<CdfView<'static>> {
        if m.dim() != 1 {
            return Err(Error::Precondition("1D distance needs 1D measures".into()));
        }
        let mut pairs: Vec<(f64, f64)> = m.atoms().iter().map(|p| p[0]).zip(m.weights().iter().cloned()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut xs = Vec::with_capacity(pairs.len());
        let mut cum = Vec::with_capacity(pairs.len());
        let mut acc = 0.0;
        for (x, w) in pairs {
            acc += w;
            if xs.last() == Some(&x) {
                *cum.last_mut().unwrap() = acc;
            } else {
                xs.push(x);
                cum.push(acc);
            }
        }
        Ok(CdfView::Atoms { xs, cum })
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            CdfView::Grid(f) => f.nodes(),
            CdfView::Atoms { xs, .. } => xs.clone(),
        }
    }

    /// Value on the open piece `(a, b)` between consecutive merged
    /// breakpoints, as the linear function's values at the two ends.
    fn piece(&self, a: f64, b: f64) -> (f64, f64) {
        match self {
            CdfView::Grid(f) => (f.eval(a), f.eval(b)),
            CdfView::Atoms { xs, cum } => {
                let k = xs.partition_point(|&x| x <= a);
                let v = if k == 0 { 0.0 } else { cum[k - 1] };
                (v, v)
            }
        }
    }
}

fn l1_between(a: &CdfView, b: &CdfView) -> f64 {
    let mut pts = a.breakpoints();
    pts.extend(b.breakpoints());
    pts.push(0.0);
    pts.push(1.0);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let len = x1 - x0;
        if len <= 0.0 {
            continue;
        }
        let (a0, a1) = a.piece(x0, x1);
        let (b0, b1) = b.piece(x0, x1);
        let (d0, d1) = (a0 - b0, a1 - b1);
        total += if d0 * d1 >= 0.0 {
            0.5 * (d0.abs() + d1.abs()) * len
        } else {
            // linear difference crosses zero inside the piece
            0.5 * len * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
        };
    }
    total
}

/// `W₁ = ∫|F₁ − F₂|`, exact for piecewise-constant densities; the grids may
/// differ in resolution.
pub fn wasserstein1(nu1: &GridMeasure1D, nu2: &GridMeasure1D) -> f64 {
    let (f1, f2) = (cdf(nu1), cdf(nu2));
    l1_between(&CdfView::Grid(&f1), &CdfView::Grid(&f2))
}

/// Exact `W₁` between two one-dimensional atomic measures.
pub fn wasserstein1_atoms(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    Ok(l1_between(&CdfView::atoms(a)?, &CdfView::atoms(b)?))
}

/// Exact `W₁` between an atomic measure and a grid density.
pub fn wasserstein1_grid_atoms(g: &GridMeasure1D, a: &DiscreteMeasure) -> Result<f64> {
    let f = cdf(g);
    Ok(l1_between(&CdfView::Grid(&f), &CdfView::atoms(a)?))
}

/// `∫ c(x, T(x)) dμ(x)`, 8-point Gauss-Legendre on every cell.
pub fn transport_cost_map(t: &TransportMap1D, mu: &GridMeasure1D, cost: &CostModel) -> Result<f64> {
    let n = mu.n_cells();
    if t.n_cells() != n {
        return Err(Error::InvalidMap(format!(
            "map has {} cells, measure has {}",
            t.n_cells(),
            n
        )));
    }
    let h = mu.cell_width();
    let v = t.values();
    Ok(mu
        .density()
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 0.0)
        .map(|(i, d)| {
            let x0 = i as f64 * h;
            d * gauss_legendre(x0, x0 + h, |x| {
                let s = (x - x0) / h;
                cost.c1(x, v[i] + s * (v[i + 1] - v[i]))
            })
        })
        .sum())
}

/// `∫₀¹ c(F_μ⁻¹(p), F_ν⁻¹(p)) dp`, the cost of the monotone coupling
/// computed in quantile space. Both quantiles are linear between the merged
/// CDF levels, so Gauss-Legendre per piece is accurate to rounding for
/// polynomial costs.
pub fn transport_cost_monotone(mu: &GridMeasure1D, nu: &GridMeasure1D, cost: &CostModel) -> f64 {
    let (fm, fn_) = (cdf(mu), cdf(nu));
    let mut levels: Vec<f64> = fm.values().iter().chain(fn_.values()).cloned().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut total = 0.0;
    for w in levels.windows(2) {
        let (p0, p1) = (w[0], w[1]);
        let len = p1 - p0;
        if len <= 0.0 {
            continue;
        }
        let piece: f64 = GL8_NODES
            .iter()
            .zip(GL8_WEIGHTS.iter())
            .map(|(t, wt)| {
                let p = p0 + t * len;
                wt * cost.c1(quantile_unchecked(&fm, p), quantile_unchecked(&fn_, p))
            })
            .sum();
        total += piece * len;
    }
    total
}

/// Monotone (north-west corner) coupling between two 1D atomic measures,
/// after sorting both sides.
pub fn monotone_plan(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<CouplingPlan> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(Error::Precondition("monotone coupling needs 1D measures".into()));
    }
    let order = |m: &DiscreteMeasure| {
        let mut idx: Vec<usize> = (0..m.len()).collect();
        idx.sort_by(|&a, &b| m.atoms()[a][0].total_cmp(&m.atoms()[b][0]));
        idx
    };
    let (oi, oj) = (order(mu), order(nu));
    let plan = north_west_corner(mu.weights(), nu.weights(), &oi, &oj);
    CouplingPlan::new(mu.clone(), nu.clone(), plan)
}

fn north_west_corner(a: &[f64], b: &[f64], oi: &[usize], oj: &[usize]) -> Vec<Vec<f64>> {
    let mut plan = vec![vec![0.0; b.len()]; a.len()];
    let mut ra: Vec<f64> = a.to_vec();
    let mut rb: Vec<f64> = b.to_vec();
    let (mut p, mut q) = (0, 0);
    while p < oi.len() && q < oj.len() {
        let (i, j) = (oi[p], oj[q]);
        let m = ra[i].min(rb[j]);
        plan[i][j] += m;
        ra[i] -= m;
        rb[j] -= m;
        if ra[i] <= rb[j] {
            p += 1;
        } else {
            q += 1;
        }
    }
    repair_marginals(&mut plan, a, b);
    plan
}

/// Pushes the last ulps of marginal drift into the largest entry of each row
/// and column so the plan passes the `1e-12` marginal check.
fn repair_marginals(plan: &mut [Vec<f64>], a: &[f64], b: &[f64]) {
    for (row, w) in plan.iter_mut().zip(a) {
        let s: f64 = row.iter().sum();
        if let Some(k) = argmax(row) {
            row[k] = (row[k] + w - s).max(0.0);
        }
    }
    for (j, w) in b.iter().enumerate() {
        let s: f64 = plan.iter().map(|r| r[j]).sum();
        let col: Vec<f64> = plan.iter().map(|r| r[j]).collect();
        if let Some(k) = argmax(&col) {
            plan[k][j] = (plan[k][j] + w - s).max(0.0);
        }
    }
}

fn argmax(v: &[f64]) -> Option<usize> {
    (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b]))
}

/// Exhaustive grid minimization `φ^c(y) = min_x c(x, y) − φ(x)` from the
/// nodes `xs` onto the points `ys`.
pub fn c_transform(phi: &[f64], xs: &[f64], ys: &[f64], cost: &CostModel) -> Vec<f64> {
    ys.iter()
        .map(|y| {
            xs.iter()
                .zip(phi)
                .map(|(x, p)| cost.c1(*x, *y) - p)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// The reverse transform `φ(x) = min_y c(x, y) − φ^c(y)`.
pub fn c_transform_rev(phi_c: &[f64], ys: &[f64], xs: &[f64], cost: &CostModel) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            ys.iter()
                .zip(phi_c)
                .map(|(y, p)| cost.c1(*x, *y) - p)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Exact `W₁` between two weighted samples on the real line, given as
/// `(position, weight)` pairs with equal total weight. Positions need not
/// lie in `[0, 1]`.
pub fn w1_on_line(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut events: Vec<(f64, f64)> = a
        .iter()
        .map(|(x, w)| (*x, *w))
        .chain(b.iter().map(|(x, w)| (*x, -*w)))
        .collect();
    events.sort_unstable_by(|p, q| p.0.total_cmp(&q.0));
    let mut diff = 0.0;
    let mut total = 0.0;
    for w in events.windows(2) {
        diff += w[0].1;
        total += diff.abs() * (w[1].0 - w[0].0);
    }
    total
}

/// Minimum-cost perfect assignment of a square cost matrix (Hungarian
/// method with potentials, O(n³)). Returns `col[i]`, the column given to
/// row `i`, and the total cost.
pub fn assignment(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    // 1-based arrays with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            col[p[j] - 1] = j - 1;
        }
    }
    let total = col.iter().enumerate().map(|(i, j)| cost[i][*j]).sum();
    (col, total)
}

/// Maximum number of atoms per side accepted by [`discrete_ot_oracle`].
pub const ORACLE_CAP: usize = 8;

/// Exact discrete optimal transport for tiny instances.
///
/// Equal counts with uniform weights are solved by enumerating all
/// permutation matchings, which are exactly the vertices of the Birkhoff
/// polytope. Any other weights go through successive shortest paths on the
/// transportation network, which is exact for real-valued supplies.
pub fn discrete_ot_oracle(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostModel,
) -> Result<(CouplingPlan, f64)> {
    for m in [mu, nu] {
        if m.len() > ORACLE_CAP {
            return Err(Error::Size {
                got: m.len(),
                cap: ORACLE_CAP,
            });
        }
    }
    if mu.dim() != nu.dim() {
        return Err(Error::Precondition("measures live in different dimensions".into()));
    }
    let (m, n) = (mu.len(), nu.len());
    let c: Vec<Vec<f64>> = mu
        .atoms()
        .iter()
        .map(|x| nu.atoms().iter().map(|y| cost.c(x, y)).collect())
        .collect();
    let uniform = |w: &[f64]| w.iter().all(|v| (v - w[0]).abs() <= 1e-15);
    let plan = if m == n && uniform(mu.weights()) && uniform(nu.weights()) {
        let perm = best_permutation(&c);
        let w = 1.0 / m as f64;
        let mut plan = vec![vec![0.0; n]; m];
        for (i, j) in perm.iter().enumerate() {
            plan[i][*j] = w;
        }
        plan
    } else {
        let mut plan = min_cost_flow(mu.weights(), nu.weights(), &c);
        repair_marginals(&mut plan, mu.weights(), nu.weights());
        plan
    };
    let coupling = CouplingPlan::new(mu.clone(), nu.clone(), plan)?;
    let value = coupling.cost(cost);
    Ok((coupling, value))
}

/// Heap's algorithm over all `n!` assignments.
fn best_permutation(c: &[Vec<f64>]) -> Vec<usize> {
    let n = c.len();
    let score = |p: &[usize]| p.iter().enumerate().map(|(i, j)| c[i][*j]).sum::<f64>();
    let mut p: Vec<usize> = (0..n).collect();
    let mut best = p.clone();
    let mut best_v = score(&p);
    let mut counters = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(counters[i], i);
            }
            let v = score(&p);
            if v < best_v {
                best_v = v;
                best = p.clone();
            }
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    best
}

/// Successive shortest augmenting paths (Bellman-Ford on the residual
/// bipartite graph) for the transportation problem.
fn min_cost_flow(a: &[f64], b: &[f64], c: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (m, n) = (a.len(), b.len());
    let eps = 1e-15;
    let mut flow = vec![vec![0.0; n]; m];
    let mut ra = a.to_vec();
    let mut rb = b.to_vec();
    // nodes 0..m are sources, m..m+n sinks
    for _ in 0..(4 * (m + n) * (m + n) + 16) {
        if rb.iter().all(|v| *v <= eps) || ra.iter().all(|v| *v <= eps) {
            break;
        }
        let total = m + n;
        let mut dist = vec![f64::INFINITY; total];
        let mut prev = vec![usize::MAX; total];
        for i in 0..m {
            if ra[i] > eps {
                dist[i] = 0.0;
            }
        }
        for _ in 0..total {
            let mut changed = false;
            for i in 0..m {
                for j in 0..n {
                    if dist[i].is_finite() && dist[i] + c[i][j] < dist[m + j] - 1e-15 {
                        dist[m + j] = dist[i] + c[i][j];
                        prev[m + j] = i;
                        changed = true;
                    }
                    if flow[i][j] > eps && dist[m + j].is_finite() && dist[m + j] - c[i][j] < dist[i] - 1e-15 {
                        dist[i] = dist[m + j] - c[i][j];
                        prev[i] = m + j;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let Some(sink) = (0..n)
            .filter(|j| rb[*j] > eps && dist[m + j].is_finite())
            .min_by(|x, y| dist[m + x].total_cmp(&dist[m + y]))
        else {
            break;
        };
        // walk back to a source with positive supply
        let mut path = vec![m + sink];
        let mut node = m + sink;
        while prev[node] != usize::MAX {
            node = prev[node];
            path.push(node);
            if path.len() > 2 * total + 2 {
                break;
            }
        }
        let src = *path.last().unwrap();
        let mut push = ra[src].min(rb[sink]);
        for w in path.windows(2) {
            let (to, from) = (w[0], w[1]);
            if from >= m {
                push = push.min(flow[to][from - m]);
            }
        }
        for w in path.windows(2) {
            let (to, from) = (w[0], w[1]);
            if from < m {
                flow[from][to - m] += push;
            } else {
                flow[to][from - m] -= push;
            }
        }
        ra[src] -= push;
        rb[sink] -= push;
    }
    flow
}
