//! Probability measures on `[0, 1]` and `[0, 1]²`.
//!
//! [`GridMeasure1D`] is a piecewise-constant density on `n` uniform cells,
//! its [`Cdf1D`] is piecewise linear on the `n + 1` cell boundaries, so
//! `cdf` and `quantile` are exact mutual inverses wherever the density is
//! positive. [`DiscreteMeasure`] is a weighted cloud of atoms; it carries
//! `μ` and `ν` in the best-reply route.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transport::TransportMap1D;

/// A point of `[0, 1]^d` for `d ≤ 2`. In one dimension the second
/// coordinate is kept at zero.
pub type Point = [f64; 2];

/// Default number of grid cells.
pub const DEFAULT_CELLS: usize = 512;

const MASS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure1D {
    density: Vec<f64>,
}

impl GridMeasure1D {
    /// Wraps a density that is already non-negative with unit mass.
    pub fn new(density: Vec<f64>) -> Result<Self> {
        if density.is_empty() {
            return Err(Error::InvalidMeasure("no cells".into()));
        }
        if let Some(i) = density.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidMeasure(format!(
                "density[{i}] = {} is not a finite non-negative value",
                density[i]
            )));
        }
        let h = 1.0 / density.len() as f64;
        let mass: f64 = density.iter().sum::<f64>() * h;
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!("mass {mass} differs from 1")));
        }
        Ok(Self { density })
    }

    /// Rescales arbitrary non-negative weights into a probability density.
    pub fn normalized(mut density: Vec<f64>) -> Result<Self> {
        if density.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidMeasure("negative or non-finite density".into()));
        }
        let h = 1.0 / density.len().max(1) as f64;
        let mass: f64 = density.iter().sum::<f64>() * h;
        if !(mass > 0.0) {
            return Err(Error::InvalidMeasure("zero total mass".into()));
        }
        density.iter_mut().for_each(|v| *v /= mass);
        Self::new(density)
    }

    pub fn uniform(n_cells: usize) -> Self {
        Self {
            density: vec![1.0; n_cells],
        }
    }

    /// Samples `f` at cell midpoints and renormalizes.
    pub fn from_fn<F: Fn(f64) -> f64>(n_cells: usize, f: F) -> Result<Self> {
        let h = 1.0 / n_cells as f64;
        Self::normalized((0..n_cells).map(|i| f((i as f64 + 0.5) * h)).collect())
    }

    pub fn n_cells(&self) -> usize {
        self.density.len()
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.density.len() as f64
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.cell_width()
    }

    /// Cell midpoints, the Y-grid on which densities and externalities live.
    pub fn midpoints(&self) -> Vec<f64> {
        midpoints(self.n_cells())
    }

    /// `sup ν`, the `L∞` norm of the density.
    pub fn sup(&self) -> f64 {
        self.density.iter().cloned().fold(0.0, f64::max)
    }

    /// Density value at `y`; right-closed cells, `y = 1` belongs to the last cell.
    pub fn density_at(&self, y: f64) -> f64 {
        let n = self.n_cells();
        let j = ((y * n as f64).floor().max(0.0) as usize).min(n - 1);
        self.density[j]
    }

    /// Midpoint-rule integral of `f` against the measure.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let h = self.cell_width();
        self.density
            .iter()
            .enumerate()
            .filter(|(_, d)| **d != 0.0)
            .map(|(j, d)| f((j as f64 + 0.5) * h) * d)
            .sum::<f64>()
            * h
    }

    /// Equal-weight quantization: atom `i` sits at the `(i + ½)/n` quantile.
    pub fn quantize(&self, n_atoms: usize) -> DiscreteMeasure {
        let f = cdf(self);
        let w = 1.0 / n_atoms as f64;
        let atoms = (0..n_atoms)
            .map(|i| [quantile_unchecked(&f, (i as f64 + 0.5) * w), 0.0])
            .collect();
        DiscreteMeasure {
            dim: 1,
            atoms,
            weights: vec![w; n_atoms],
        }
    }
}

pub fn midpoints(n_cells: usize) -> Vec<f64> {
    let h = 1.0 / n_cells as f64;
    (0..n_cells).map(|i| (i as f64 + 0.5) * h).collect()
}

pub fn nodes(n_cells: usize) -> Vec<f64> {
    let h = 1.0 / n_cells as f64;
    (0..=n_cells).map(|i| i as f64 * h).collect()
}

/// Piecewise-linear CDF on the uniform node grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cdf1D {
    values: Vec<f64>,
}

impl Cdf1D {
    pub fn n_cells(&self) -> usize {
        self.values.len() - 1
    }

    /// CDF values at nodes `i/n`, `i = 0..=n`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nodes(&self) -> Vec<f64> {
        nodes(self.n_cells())
    }

    /// Evaluates the CDF at an arbitrary `x ∈ [0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.n_cells();
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let s = x * n as f64;
        let i = (s.floor() as usize).min(n - 1);
        let t = s - i as f64;
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }
}

/// Cumulative distribution of a grid measure.
///
/// Values are accumulated and divided by the total, so cells of zero
/// density leave the CDF exactly flat and the last node is exactly 1.
pub fn cdf(m: &GridMeasure1D) -> Cdf1D {
    let mut values = Vec::with_capacity(m.n_cells() + 1);
    let mut acc = 0.0;
    values.push(0.0);
    for d in &m.density {
        acc += d;
        values.push(acc);
    }
    let total = acc;
    values.iter_mut().for_each(|v| *v /= total);
    values[m.n_cells()] = 1.0;
    Cdf1D { values }
}

/// Generalized inverse `inf {x : F(x) ≥ p}` with linear interpolation
/// inside cells. At `p = 0` this returns the start of the support,
/// `inf {x : F(x) > 0}`, so that the inverse is left-continuous at every
/// level including the bottom one.
pub fn quantile(f: &Cdf1D, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain {
            what: "probability level",
            value: p,
            domain: "[0, 1]",
        });
    }
    Ok(quantile_unchecked(f, p))
}

pub(crate) fn quantile_unchecked(f: &Cdf1D, p: f64) -> f64 {
    let v = &f.values;
    let n = v.len() - 1;
    let h = 1.0 / n as f64;
    if p <= 0.0 {
        // last node where F is still zero
        let i = v.partition_point(|&x| x <= 0.0);
        return (i - 1) as f64 * h;
    }
    // first node with F ≥ p; i ≥ 1 since F(0) = 0 < p
    let i = v.partition_point(|&x| x < p).min(n);
    let (f0, f1) = (v[i - 1], v[i]);
    let t = if f1 > f0 { (p - f0) / (f1 - f0) } else { 1.0 };
    ((i - 1) as f64 + t.clamp(0.0, 1.0)) * h
}

/// `T#m` re-binned onto the grid of `m`.
///
/// Each source cell carries its mass uniformly along `[T(xᵢ), T(xᵢ₊₁)]`
/// (the map is linear inside cells) and deposits it proportionally to
/// the overlap with every target cell. Flat pieces drop their mass into
/// the single cell containing the image point.
pub fn pushforward_map_1d(t: &TransportMap1D, m: &GridMeasure1D) -> Result<GridMeasure1D> {
    let n = m.n_cells();
    let vals = t.values();
    if vals.len() != n + 1 {
        return Err(Error::InvalidMap(format!(
            "map has {} nodes, measure has {} cells",
            vals.len(),
            n
        )));
    }
    let h = m.cell_width();
    let nf = n as f64;
    let cell_of = |y: f64| ((y * nf).floor().max(0.0) as usize).min(n - 1);
    let mut out = vec![0.0; n];
    for (i, d) in m.density.iter().enumerate() {
        let mass = d * h;
        if mass == 0.0 {
            continue;
        }
        let (a, b) = (vals[i].min(vals[i + 1]), vals[i].max(vals[i + 1]));
        if b - a <= 1e-15 {
            out[cell_of(a)] += mass;
            continue;
        }
        let (ja, jb) = (cell_of(a), cell_of(b));
        for (j, slot) in out.iter_mut().enumerate().take(jb + 1).skip(ja) {
            let lo = a.max(j as f64 * h);
            let hi = b.min((j + 1) as f64 * h);
            if hi > lo {
                *slot += mass * (hi - lo) / (b - a);
            }
        }
    }
    // masses → densities; renormalize away the last few ulps of drift
    let total: f64 = out.iter().sum();
    GridMeasure1D::new(out.into_iter().map(|v| v / total / h).collect())
}

/// Weighted atoms in `[0, 1]^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, atoms: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidMeasure(format!("dimension {dim} not in {{1, 2}}")));
        }
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms with {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidMeasure("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        for (index, p) in atoms.iter().enumerate() {
            if !in_unit_box(p, dim) {
                return Err(Error::Range { index, point: *p });
            }
        }
        Ok(Self { dim, atoms, weights })
    }

    /// Equal weights `1/n`.
    pub fn equal_weights(dim: usize, atoms: Vec<Point>) -> Result<Self> {
        let w = 1.0 / atoms.len().max(1) as f64;
        let n = atoms.len();
        Self::new(dim, atoms, vec![w; n])
    }

    /// Equal-weight atoms at the midpoints of a `k × k` lattice.
    pub fn uniform_lattice_2d(k: usize) -> Self {
        let h = 1.0 / k as f64;
        let atoms = (0..k)
            .flat_map(|i| (0..k).map(move |j| [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]))
            .collect::<Vec<_>>();
        let w = 1.0 / atoms.len() as f64;
        let n = atoms.len();
        Self {
            dim: 2,
            atoms,
            weights: vec![w; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate<F: Fn(&Point) -> f64>(&self, f: F) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    /// Histogram on `bins` cells per axis, returned as a density (row-major,
    /// first axis slowest in 2D).
    pub fn bin_density(&self, bins: usize) -> Vec<f64> {
        let cell = |v: f64| ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        let cells = if self.dim == 1 { bins } else { bins * bins };
        let mut out = vec![0.0; cells];
        for (p, w) in self.atoms.iter().zip(&self.weights) {
            let idx = if self.dim == 1 {
                cell(p[0])
            } else {
                cell(p[0]) * bins + cell(p[1])
            };
            out[idx] += w;
        }
        let area = if self.dim == 1 {
            1.0 / bins as f64
        } else {
            1.0 / (bins * bins) as f64
        };
        out.iter_mut().for_each(|v| *v /= area);
        out
    }

    /// Bins a one-dimensional measure into a grid density.
    pub fn to_grid(&self, bins: usize) -> Result<GridMeasure1D> {
        if self.dim != 1 {
            return Err(Error::Precondition("grid binning needs a 1D measure".into()));
        }
        GridMeasure1D::normalized(self.bin_density(bins))
    }
}

pub(crate) fn in_unit_box(p: &Point, dim: usize) -> bool {
    p[..dim].iter().all(|v| (0.0..=1.0).contains(v)) && p[dim..].iter().all(|v| *v == 0.0)
}

/// Maps every atom through `f`, keeping weights.
pub fn pushforward_particles<F>(f: F, m: &DiscreteMeasure) -> Result<DiscreteMeasure>
where
    F: Fn(&Point) -> Point,
{
    let mut atoms = Vec::with_capacity(m.len());
    for (index, p) in m.atoms.iter().enumerate() {
        let q = f(p);
        if !in_unit_box(&q, m.dim) {
            return Err(Error::Range { index, point: q });
        }
        atoms.push(q);
    }
    Ok(DiscreteMeasure {
        dim: m.dim,
        atoms,
        weights: m.weights.clone(),
    })
}
