//! Structured cube grids in two and three dimensions.
//!
//! Nodes and cells are addressed by linear indices with the first axis
//! varying fastest. Points are stored as `[f64; 3]`; in two dimensions the
//! third coordinate is zero and ignored.

use crate::error::{LabError, Result};

pub type Point = [f64; 3];

/// Convex domain Ω carried by a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// The whole bounding box.
    Box,
    /// Euclidean ball, intersected with the bounding box.
    Ball { center: Point, radius: f64 },
}

impl Domain {
    pub fn contains(&self, dim: usize, p: &Point) -> bool {
        match self {
            Domain::Box => true,
            Domain::Ball { center, radius } => dist(dim, p, center) < *radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    lo: f64,
    hi: f64,
    nodes: usize,
    spacing: f64,
    domain: Domain,
}

impl Grid {
    /// Cube grid `[lo, hi]^dim` with `nodes` nodes per axis.
    pub fn new(dim: usize, lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(LabError::Invalid(format!("dimension {dim} not in {{2, 3}}")));
        }
        if nodes < 9 {
            return Err(LabError::Invalid(format!("{nodes} nodes per axis (need at least 9)")));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(LabError::Invalid(format!("bad bounding box [{lo}, {hi}]")));
        }
        Ok(Self {
            dim,
            lo,
            hi,
            nodes,
            spacing: (hi - lo) / (nodes - 1) as f64,
            domain: Domain::Box,
        })
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    /// Same box and domain with `2 (nodes - 1) + 1` nodes per axis.
    pub fn refined(&self) -> Self {
        let nodes = 2 * (self.nodes - 1) + 1;
        Self {
            nodes,
            spacing: (self.hi - self.lo) / (nodes - 1) as f64,
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn hi(&self) -> f64 {
        self.hi
    }
    pub fn nodes_per_axis(&self) -> usize {
        self.nodes
    }
    pub fn cells_per_axis(&self) -> usize {
        self.nodes - 1
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.pow(self.dim as u32)
    }
    pub fn num_cells(&self) -> usize {
        (self.nodes - 1).pow(self.dim as u32)
    }
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }
    pub fn face_area(&self) -> f64 {
        self.spacing.powi(self.dim as i32 - 1)
    }

    pub fn node_multi(&self, idx: usize) -> [usize; 3] {
        split(idx, self.nodes, self.dim)
    }
    pub fn cell_multi(&self, idx: usize) -> [usize; 3] {
        split(idx, self.nodes - 1, self.dim)
    }
    pub fn node_index(&self, m: [usize; 3]) -> usize {
        join(m, self.nodes, self.dim)
    }
    pub fn cell_index(&self, m: [usize; 3]) -> usize {
        join(m, self.nodes - 1, self.dim)
    }

    pub fn node_coord(&self, idx: usize) -> Point {
        let m = self.node_multi(idx);
        let mut p = [0.0; 3];
        for d in 0..self.dim {
            p[d] = self.lo + m[d] as f64 * self.spacing;
        }
        p
    }

    pub fn cell_center(&self, idx: usize) -> Point {
        let m = self.cell_multi(idx);
        let mut p = [0.0; 3];
        for d in 0..self.dim {
            p[d] = self.lo + (m[d] as f64 + 0.5) * self.spacing;
        }
        p
    }

    /// Corner nodes of a cell; bit `d` of the position selects the upper node along axis `d`.
    pub fn cell_corners(&self, cell: usize) -> ([usize; 8], usize) {
        let m = self.cell_multi(cell);
        let count = 1 << self.dim;
        let mut out = [0usize; 8];
        for (bits, slot) in out.iter_mut().enumerate().take(count) {
            let mut nm = m;
            for (d, c) in nm.iter_mut().enumerate().take(self.dim) {
                *c += (bits >> d) & 1;
            }
            *slot = self.node_index(nm);
        }
        (out, count)
    }

    /// Cells incident to a node (up to `2^dim`).
    pub fn node_cells(&self, node: usize) -> Vec<usize> {
        let m = self.node_multi(node);
        let mc = self.nodes - 1;
        let mut out = Vec::with_capacity(1 << self.dim);
        for bits in 0..(1usize << self.dim) {
            let mut cm = [0usize; 3];
            let mut ok = true;
            for d in 0..self.dim {
                if (bits >> d) & 1 == 1 {
                    if m[d] == 0 {
                        ok = false;
                        break;
                    }
                    cm[d] = m[d] - 1;
                } else {
                    if m[d] >= mc {
                        ok = false;
                        break;
                    }
                    cm[d] = m[d];
                }
            }
            if ok {
                out.push(self.cell_index(cm));
            }
        }
        out
    }

    /// Face-adjacent cell neighbors.
    pub fn cell_neighbors(&self, cell: usize) -> Vec<usize> {
        let m = self.cell_multi(cell);
        let mc = self.nodes - 1;
        let mut out = Vec::with_capacity(2 * self.dim);
        for d in 0..self.dim {
            if m[d] > 0 {
                let mut k = m;
                k[d] -= 1;
                out.push(self.cell_index(k));
            }
            if m[d] + 1 < mc {
                let mut k = m;
                k[d] += 1;
                out.push(self.cell_index(k));
            }
        }
        out
    }

    /// True for cells in the outermost layer of the grid.
    pub fn is_boundary_cell(&self, cell: usize) -> bool {
        let m = self.cell_multi(cell);
        (0..self.dim).any(|d| m[d] == 0 || m[d] + 2 == self.nodes)
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        let m = self.node_multi(node);
        (0..self.dim).any(|d| m[d] == 0 || m[d] + 1 == self.nodes)
    }

    /// Node closest to `p` (clamped to the box).
    pub fn nearest_node(&self, p: &Point) -> usize {
        let mut m = [0usize; 3];
        for d in 0..self.dim {
            let t = ((p[d] - self.lo) / self.spacing).round();
            m[d] = t.clamp(0.0, (self.nodes - 1) as f64) as usize;
        }
        self.node_index(m)
    }

    /// Node exactly at `p`, if `p` is a grid node up to a relative `1e-9` of the spacing.
    pub fn node_at(&self, p: &Point) -> Option<usize> {
        let idx = self.nearest_node(p);
        let q = self.node_coord(idx);
        (dist(self.dim, p, &q) <= 1e-9 * self.spacing).then_some(idx)
    }

    /// Cells whose centers lie in Ω.
    pub fn domain_mask(&self) -> CellMask {
        CellMask(
            (0..self.num_cells())
                .map(|c| self.domain.contains(self.dim, &self.cell_center(c)))
                .collect(),
        )
    }

    /// Line-segment containment spot check of the domain mask; returns the number of failures.
    pub fn convexity_spot_check(&self, samples: usize, seed: u64) -> usize {
        use rand::{Rng, SeedableRng};
        let mask = self.domain_mask();
        let inside: Vec<usize> = mask.indices().collect();
        if inside.len() < 2 {
            return 0;
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut failures = 0;
        for _ in 0..samples {
            let a = self.cell_center(inside[rng.gen_range(0..inside.len())]);
            let b = self.cell_center(inside[rng.gen_range(0..inside.len())]);
            let t: f64 = rng.gen();
            let mut p = [0.0; 3];
            for d in 0..self.dim {
                p[d] = a[d] + t * (b[d] - a[d]);
            }
            if !self.domain.contains(self.dim, &p) {
                failures += 1;
            }
        }
        failures
    }
}

fn split(mut idx: usize, n: usize, dim: usize) -> [usize; 3] {
    let mut m = [0usize; 3];
    for slot in m.iter_mut().take(dim) {
        *slot = idx % n;
        idx /= n;
    }
    m
}

fn join(m: [usize; 3], n: usize, dim: usize) -> usize {
    let mut idx = 0;
    for d in (0..dim).rev() {
        idx = idx * n + m[d];
    }
    idx
}

pub fn dist(dim: usize, a: &Point, b: &Point) -> f64 {
    (0..dim).map(|d| (a[d] - b[d]).powi(2)).sum::<f64>().sqrt()
}

/// Boolean mask over the cells of a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask(pub Vec<bool>);

impl CellMask {
    pub fn empty(num_cells: usize) -> Self {
        Self(vec![false; num_cells])
    }
    pub fn full(num_cells: usize) -> Self {
        Self(vec![true; num_cells])
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn contains(&self, c: usize) -> bool {
        self.0[c]
    }
    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }
    pub fn is_subset_of(&self, other: &CellMask) -> bool {
        self.0.iter().zip(&other.0).all(|(&a, &b)| !a || b)
    }
    pub fn intersect(&self, other: &CellMask) -> CellMask {
        CellMask(self.0.iter().zip(&other.0).map(|(&a, &b)| a && b).collect())
    }
    pub fn minus(&self, other: &CellMask) -> CellMask {
        CellMask(self.0.iter().zip(&other.0).map(|(&a, &b)| a && !b).collect())
    }

    /// Number of face-connected components.
    pub fn components(&self, grid: &Grid) -> usize {
        let mut seen = vec![false; self.0.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in self.indices() {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(c) = stack.pop() {
                for nb in grid.cell_neighbors(c) {
                    if self.0[nb] && !seen[nb] {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                }
            }
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip_and_corners() {
        let g = Grid::new(3, -1.0, 1.0, 9).unwrap();
        for idx in [0, 17, 400, g.num_nodes() - 1] {
            assert_eq!(g.node_index(g.node_multi(idx)), idx);
        }
        let (corners, count) = g.cell_corners(0);
        assert_eq!(count, 8);
        assert_eq!(&corners[..count], &[0, 1, 9, 10, 81, 82, 90, 91]);
        assert_eq!(g.node_cells(0), vec![0]);
        assert_eq!(g.node_cells(g.node_index([4, 4, 4])).len(), 8);
    }

    #[test]
    fn rejects_small_grids() {
        assert!(Grid::new(2, 0.0, 1.0, 8).is_err());
        assert!(Grid::new(4, 0.0, 1.0, 9).is_err());
    }

    #[test]
    fn ball_domain_is_convex_and_connected() {
        let g = Grid::new(2, -1.0, 1.0, 33).unwrap().with_domain(Domain::Ball {
            center: [0.0; 3],
            radius: 0.9,
        });
        assert_eq!(g.convexity_spot_check(500, 3), 0);
        let m = g.domain_mask();
        assert_eq!(m.components(&g), 1);
        let area = m.count() as f64 * g.cell_volume();
        assert!((area - std::f64::consts::PI * 0.81).abs() < 0.1);
    }

    #[test]
    fn refinement_nests_nodes() {
        let g = Grid::new(2, 0.0, 1.0, 9).unwrap();
        let f = g.refined();
        assert_eq!(f.nodes_per_axis(), 17);
        for n in 0..g.num_nodes() {
            assert!(f.node_at(&g.node_coord(n)).is_some());
        }
    }
}
