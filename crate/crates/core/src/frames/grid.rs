use crate::exterior::{wedge, KFormPoint};
use crate::par::Policy;
use crate::{Error, Result};

/// Uniform rectangular grid on a coordinate chart.
///
/// Nodes are numbered with the first axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartGrid {
    dim: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    divisions: Vec<usize>,
}

/// Nodes at least this many cells from every boundary form the interior
/// subgrid on which convergence metrics are taken.
pub const INTERIOR_MARGIN: usize = 2;

impl ChartGrid {
    pub fn new(lo: &[f64], hi: &[f64], divisions: &[usize]) -> Result<Self> {
        let dim = lo.len();
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if hi.len() != dim || divisions.len() != dim {
            return Err(Error::DimensionMismatch("grid bounds and divisions".into()));
        }
        if divisions.iter().any(|&d| d < 4) {
            return Err(Error::InvalidInput("chart grids need at least 4 divisions per axis".into()));
        }
        if (0..dim).any(|a| !(hi[a] > lo[a])) {
            return Err(Error::InvalidInput("grid bounds must satisfy lo < hi".into()));
        }
        Ok(Self { dim, lo: lo.to_vec(), hi: hi.to_vec(), divisions: divisions.to_vec() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn divisions(&self) -> &[usize] {
        &self.divisions
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.divisions[axis] as f64
    }

    /// Largest spacing over the axes.
    pub fn h(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    pub fn node_count(&self) -> usize {
        self.divisions.iter().map(|d| d + 1).product()
    }

    fn stride(&self, axis: usize) -> usize {
        self.divisions[..axis].iter().map(|d| d + 1).product()
    }

    pub fn multi_index(&self, node: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        let mut rem = node;
        for (a, slot) in idx.iter_mut().enumerate().take(self.dim) {
            let n = self.divisions[a] + 1;
            *slot = rem % n;
            rem /= n;
        }
        idx
    }

    pub fn node_index(&self, idx: &[usize]) -> usize {
        (0..self.dim).map(|a| idx[a] * self.stride(a)).sum()
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let idx = self.multi_index(node);
        (0..self.dim).map(|a| self.lo[a] + self.spacing(a) * idx[a] as f64).collect()
    }

    /// Whether every index of `node` is at least `margin` cells from the boundary.
    pub fn is_interior(&self, node: usize, margin: usize) -> bool {
        let idx = self.multi_index(node);
        (0..self.dim).all(|a| idx[a] >= margin && idx[a] + margin <= self.divisions[a])
    }

    pub fn interior_nodes(&self, margin: usize) -> Vec<usize> {
        (0..self.node_count()).filter(|&n| self.is_interior(n, margin)).collect()
    }

    /// Nodes at least `margin[a]` (chart length) from both ends of every
    /// axis `a`. Used to compare refinement levels on one fixed region.
    pub fn nodes_inside(&self, margin: &[f64]) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&node| {
                let x = self.coords(node);
                (0..self.dim).all(|a| {
                    let slack = 1e-9 * self.spacing(a);
                    x[a] >= self.lo[a] + margin[a] - slack && x[a] <= self.hi[a] - margin[a] + slack
                })
            })
            .collect()
    }

    /// Second-order derivative of a nodal scalar along `axis`: centered in
    /// the interior, one-sided three-point at the two ends.
    pub fn partial(&self, values: impl Fn(usize) -> f64, node: usize, axis: usize) -> f64 {
        let i = self.multi_index(node)[axis];
        let last = self.divisions[axis];
        let s = self.stride(axis);
        let two_h = 2.0 * self.spacing(axis);
        if i == 0 {
            (-3.0 * values(node) + 4.0 * values(node + s) - values(node + 2 * s)) / two_h
        } else if i == last {
            (3.0 * values(node) - 4.0 * values(node - s) + values(node - 2 * s)) / two_h
        } else {
            (values(node + s) - values(node - s)) / two_h
        }
    }
}

/// A k-form sampled at every node of a chart grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FormFieldGrid {
    grid: ChartGrid,
    degree: usize,
    values: Vec<KFormPoint>,
}

impl FormFieldGrid {
    pub fn new(grid: ChartGrid, degree: usize, values: Vec<KFormPoint>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} node values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(bad) = values.iter().find(|v| v.dim() != grid.dim() || v.degree() != degree) {
            return Err(Error::DimensionMismatch(format!(
                "node form of shape ({}, {}) in a ({}, {}) field",
                bad.dim(),
                bad.degree(),
                grid.dim(),
                degree
            )));
        }
        Ok(Self { grid, degree, values })
    }

    pub fn zero(grid: ChartGrid, degree: usize) -> Result<Self> {
        let z = KFormPoint::zero(grid.dim(), degree)?;
        let values = vec![z; grid.node_count()];
        Ok(Self { grid, degree, values })
    }

    /// Samples coefficient functions at the nodes.
    pub fn sample(grid: &ChartGrid, degree: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let values = (0..grid.node_count())
            .map(|n| KFormPoint::new(grid.dim(), degree, &f(&grid.coords(n))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid.clone(), degree, values)
    }

    pub fn grid(&self) -> &ChartGrid {
        &self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn values(&self) -> &[KFormPoint] {
        &self.values
    }

    pub fn at(&self, node: usize) -> &KFormPoint {
        &self.values[node]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.max_abs()))
    }

    pub fn max_abs_on(&self, nodes: &[usize]) -> f64 {
        nodes.iter().fold(0.0, |m, &n| m.max(self.values[n].max_abs()))
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch("fields on different grids".into()));
        }
        let values =
            self.values.iter().zip(&other.values).map(|(a, b)| a.checked_add(b)).collect::<Result<Vec<_>>>()?;
        Self::new(self.grid.clone(), self.degree, values)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { grid: self.grid.clone(), degree: self.degree, values: self.values.iter().map(|v| v.scale(s)).collect() }
    }
}

/// Exterior derivative by finite differences of the node coefficients,
/// `d alpha = sum_j dx^j ^ d_j alpha`.
pub fn numeric_d(field: &FormFieldGrid) -> Result<FormFieldGrid> {
    numeric_d_with(Policy::default(), field)
}

pub fn numeric_d_with(policy: Policy, field: &FormFieldGrid) -> Result<FormFieldGrid> {
    let grid = &field.grid;
    let n = grid.dim();
    if field.degree >= n {
        return Err(Error::DegreeOutOfRange { dim: n, degree: field.degree + 1 });
    }
    let len = field.values[0].coeffs().len();
    let values = policy.try_map(grid.node_count(), |node| {
        let mut out = KFormPoint::zero(n, field.degree + 1)?;
        for axis in 0..n {
            let mut partial = KFormPoint::zero(n, field.degree)?;
            for c in 0..len {
                partial.coeffs_mut()[c] = grid.partial(|m| field.values[m].coeffs()[c], node, axis);
            }
            out = out + wedge(&KFormPoint::dx(n, axis)?, &partial)?;
        }
        Ok::<KFormPoint, Error>(out)
    })?;
    FormFieldGrid::new(grid.clone(), field.degree + 1, values)
}
