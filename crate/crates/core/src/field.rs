//! Scalar grid functions and face-sampled vector fields.

use crate::error::{LabError, Result};
use crate::grid::{CellMask, Grid, Point};

/// Where the values of a [`GridFunction`] live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    Node,
    Cell,
}

/// Scalar field on a grid restricted to a cell region.
///
/// Norms and integrals use one value per region cell: the stored value for
/// cell-sampled functions, the mean of the corner values for nodal ones.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Grid,
    sampling: Sampling,
    values: Vec<f64>,
    region: CellMask,
}

impl GridFunction {
    pub fn nodal(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(LabError::Invalid(format!(
                "{} nodal values for {} nodes",
                values.len(),
                grid.num_nodes()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            sampling: Sampling::Node,
            values,
            region: grid.domain_mask(),
        })
    }

    pub fn cellwise(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(LabError::Invalid(format!(
                "{} cell values for {} cells",
                values.len(),
                grid.num_cells()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            sampling: Sampling::Cell,
            values,
            region: grid.domain_mask(),
        })
    }

    pub fn from_nodes_fn(grid: &Grid, f: impl Fn(&Point) -> f64) -> Self {
        let values = (0..grid.num_nodes()).map(|i| f(&grid.node_coord(i))).collect();
        Self::nodal(grid, values).expect("sized by construction")
    }

    pub fn from_cells_fn(grid: &Grid, f: impl Fn(&Point) -> f64) -> Self {
        let values = (0..grid.num_cells()).map(|i| f(&grid.cell_center(i))).collect();
        Self::cellwise(grid, values).expect("sized by construction")
    }

    pub fn with_region(mut self, region: CellMask) -> Self {
        assert_eq!(region.len(), self.grid.num_cells());
        self.region = region;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn sampling(&self) -> Sampling {
        self.sampling
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn region(&self) -> &CellMask {
        &self.region
    }

    pub fn is_finite(&self) -> bool {
        self.region.indices().all(|c| self.cell_value(c).is_finite())
    }

    /// Representative value on one cell.
    pub fn cell_value(&self, cell: usize) -> f64 {
        match self.sampling {
            Sampling::Cell => self.values[cell],
            Sampling::Node => {
                let (corners, k) = self.grid.cell_corners(cell);
                corners[..k].iter().map(|&i| self.values[i]).sum::<f64>() / k as f64
            }
        }
    }

    /// (value, weight) pairs over the region.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        self.samples_on(&self.region)
    }

    /// (value, weight) pairs over `mask ∩ region`.
    pub fn samples_on(&self, mask: &CellMask) -> Vec<(f64, f64)> {
        let w = self.grid.cell_volume();
        self.region
            .indices()
            .filter(|&c| mask.contains(c))
            .map(|c| (self.cell_value(c), w))
            .collect()
    }

    /// Pointwise map of the stored values.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.sampling != other.sampling || self.values.len() != other.values.len() {
            return Err(LabError::Invalid("grid functions live on different samplings".into()));
        }
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            ..self.clone()
        })
    }

    /// Integral over `mask ∩ region` of the cell values.
    pub fn integral_on(&self, mask: &CellMask) -> f64 {
        self.samples_on(mask).iter().map(|(v, w)| v * w).sum()
    }

    /// Nodal value; cell-sampled functions report the mean of incident cells.
    pub fn node_value(&self, node: usize) -> f64 {
        match self.sampling {
            Sampling::Node => self.values[node],
            Sampling::Cell => {
                let cells = self.grid.node_cells(node);
                cells.iter().map(|&c| self.values[c]).sum::<f64>() / cells.len() as f64
            }
        }
    }

    /// Nodal values, converting from cells if needed.
    pub fn to_nodal(&self) -> Self {
        match self.sampling {
            Sampling::Node => self.clone(),
            Sampling::Cell => Self {
                grid: self.grid.clone(),
                sampling: Sampling::Node,
                values: (0..self.grid.num_nodes()).map(|i| self.node_value(i)).collect(),
                region: self.region.clone(),
            },
        }
    }
}

/// Vector field sampled at face centers: one normal component per face.
///
/// `normal[d]` holds the `d`-th component on faces orthogonal to axis `d`,
/// indexed like nodes along axis `d` and like cells along the other axes.
#[derive(Debug, Clone)]
pub struct FaceField {
    grid: Grid,
    normal: Vec<Vec<f64>>,
}

impl FaceField {
    pub fn from_fn(grid: &Grid, f: impl Fn(&Point) -> [f64; 3]) -> Self {
        let n = grid.dim();
        let mut normal = Vec::with_capacity(n);
        for d in 0..n {
            let shape = face_shape(grid, d);
            let count: usize = shape.iter().take(n).product();
            let mut vals = Vec::with_capacity(count);
            for idx in 0..count {
                let m = unravel(idx, &shape, n);
                let mut p = [0.0; 3];
                for a in 0..n {
                    let offset = if a == d { 0.0 } else { 0.5 };
                    p[a] = grid.lo() + (m[a] as f64 + offset) * grid.spacing();
                }
                vals.push(f(&p)[d]);
            }
            normal.push(vals);
        }
        Self {
            grid: grid.clone(),
            normal,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn sup_norm(&self) -> f64 {
        self.normal
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0_f64, |a, b| a.max(b.abs()))
    }

    /// Normal component on the face of `cell` along `axis`, lower (`upper = false`) or upper side.
    pub fn face_value(&self, cell: usize, axis: usize, upper: bool) -> f64 {
        let n = self.grid.dim();
        let mut m = self.grid.cell_multi(cell);
        if upper {
            m[axis] += 1;
        }
        let shape = face_shape(&self.grid, axis);
        self.normal[axis][ravel(m, &shape, n)]
    }

    /// Net outward flux through the faces of one cell.
    pub fn cell_flux(&self, cell: usize) -> f64 {
        let a = self.grid.face_area();
        (0..self.grid.dim())
            .map(|d| (self.face_value(cell, d, true) - self.face_value(cell, d, false)) * a)
            .sum()
    }

    /// Outward flux through the boundary of the box of cells `lo..=hi` (cell multi-indices).
    pub fn box_flux(&self, lo: [usize; 3], hi: [usize; 3]) -> f64 {
        let g = &self.grid;
        let n = g.dim();
        let a = g.face_area();
        let mut total = 0.0;
        for d in 0..n {
            let mut m = lo;
            loop {
                let mut low = m;
                low[d] = lo[d];
                let mut high = m;
                high[d] = hi[d];
                total += self.face_value(g.cell_index(high), d, true) * a;
                total -= self.face_value(g.cell_index(low), d, false) * a;
                // advance over the transverse axes
                let mut axis = 0;
                loop {
                    if axis == n {
                        break;
                    }
                    if axis == d {
                        axis += 1;
                        continue;
                    }
                    if m[axis] < hi[axis] {
                        m[axis] += 1;
                        break;
                    }
                    m[axis] = lo[axis];
                    axis += 1;
                }
                if axis == n {
                    break;
                }
            }
        }
        total
    }
}

fn face_shape(grid: &Grid, axis: usize) -> [usize; 3] {
    let mut s = [1usize; 3];
    for (d, slot) in s.iter_mut().enumerate().take(grid.dim()) {
        *slot = if d == axis {
            grid.nodes_per_axis()
        } else {
            grid.cells_per_axis()
        };
    }
    s
}

fn unravel(mut idx: usize, shape: &[usize; 3], n: usize) -> [usize; 3] {
    let mut m = [0usize; 3];
    for d in 0..n {
        m[d] = idx % shape[d];
        idx /= shape[d];
    }
    m
}

fn ravel(m: [usize; 3], shape: &[usize; 3], n: usize) -> usize {
    let mut idx = 0;
    for d in (0..n).rev() {
        idx = idx * shape[d] + m[d];
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodal_cell_values_average_corners() {
        let g = Grid::new(2, 0.0, 1.0, 9).unwrap();
        let f = GridFunction::from_nodes_fn(&g, |p| p[0] + 2.0 * p[1]);
        let c = g.cell_center(10);
        assert!((f.cell_value(10) - (c[0] + 2.0 * c[1])).abs() < 1e-14);
    }

    #[test]
    fn identity_field_flux() {
        let g = Grid::new(3, 0.0, 1.0, 9).unwrap();
        let f = FaceField::from_fn(&g, |p| *p);
        let vol = g.cell_volume();
        for c in [0, 100, g.num_cells() - 1] {
            assert!((f.cell_flux(c) - 3.0 * vol).abs() < 1e-14);
        }
    }
}
