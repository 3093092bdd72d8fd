//! Sections `S_u(x,h) = {y : u(y) - u(x) - Du(x)·(y - x) < h}` on grids,
//! their volumes and boundary areas, convex bodies and engulfing.

pub mod body;
pub mod contour;
pub mod engulf;

use crate::error::{LabError, Result};
use crate::grid::{dist, CellMask, Grid, Point};
use crate::potentials::ConvexPotential;

pub use body::{area_lemma_ratio, ConvexBody, Polytope};
pub use engulf::{engulfing_check, EngulfingReport};

/// Tangent-plane gap `g(y) = u(y) - u(x) - Du(x)·(y - x)` of a potential at a fixed center,
/// sampled at cell centers and nodes.
#[derive(Debug, Clone)]
pub struct GapField {
    grid: Grid,
    center: Point,
    center_node: usize,
    cell_gap: Vec<f64>,
    node_gap: Vec<f64>,
    omega: CellMask,
}

impl GapField {
    /// `x` must be a grid node inside Ω.
    pub fn new(potential: &ConvexPotential, grid: &Grid, x: &Point) -> Result<Self> {
        check_grid(potential, grid)?;
        let center_node = grid
            .node_at(x)
            .ok_or_else(|| LabError::Invalid(format!("center {:?} is not a grid node", &x[..grid.dim()])))?;
        if !grid.domain().contains(grid.dim(), x) {
            return Err(LabError::Invalid(format!("center {:?} lies outside the domain", &x[..grid.dim()])));
        }
        let at = potential.evaluate(x)?;
        let cell_gap = (0..grid.num_cells())
            .map(|c| potential.gap(&at, x, &grid.cell_center(c)))
            .collect();
        let node_gap = (0..grid.num_nodes())
            .map(|i| potential.gap(&at, x, &grid.node_coord(i)))
            .collect();
        Ok(Self {
            grid: grid.clone(),
            center: *x,
            center_node,
            cell_gap,
            node_gap,
            omega: grid.domain_mask(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn center(&self) -> &Point {
        &self.center
    }
    pub fn center_node(&self) -> usize {
        self.center_node
    }
    pub fn cell_gap(&self) -> &[f64] {
        &self.cell_gap
    }
    pub fn node_gap(&self) -> &[f64] {
        &self.node_gap
    }

    /// Cells of Ω with `g < h` at the center.
    pub fn mask(&self, h: f64) -> CellMask {
        CellMask(
            self.cell_gap
                .iter()
                .zip(&self.omega.0)
                .map(|(&g, &inside)| inside && g < h)
                .collect(),
        )
    }

    /// Cells of Ω with `g ≤ h`; the grid trace of the closed section.
    pub fn closed_mask(&self, h: f64) -> CellMask {
        CellMask(
            self.cell_gap
                .iter()
                .zip(&self.omega.0)
                .map(|(&g, &inside)| inside && g <= h)
                .collect(),
        )
    }

    /// True if some masked cell lies on the grid boundary or next to a cell outside Ω.
    pub fn touches_boundary(&self, mask: &CellMask) -> bool {
        mask.indices().any(|c| {
            self.grid.is_boundary_cell(c) || self.grid.cell_neighbors(c).iter().any(|&nb| !self.omega.contains(nb))
        })
    }

    pub fn section(&self, h: f64) -> Result<Section> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(LabError::Invalid(format!("section height {h} must be positive")));
        }
        let mask = self.mask(h);
        let count = mask.count();
        if count == 0 {
            return Err(LabError::Resolution { height: h });
        }
        let clipped = self.touches_boundary(&mask);
        let boundary_area = contour::isocontour_measure(&self.grid, &self.node_gap, h, 0..self.grid.num_cells());
        Ok(Section {
            grid: self.grid.clone(),
            center: self.center,
            height: h,
            volume: count as f64 * self.grid.cell_volume(),
            boundary_area,
            clipped,
            mask,
        })
    }

    /// Largest change of the nodal gap between `node` and its axis neighbors.
    pub fn variation_at(&self, node: usize) -> f64 {
        let m = self.grid.node_multi(node);
        let last = self.grid.nodes_per_axis() - 1;
        let g0 = self.node_gap[node];
        let mut worst: f64 = 0.0;
        for d in 0..self.grid.dim() {
            for up in [false, true] {
                let mut k = m;
                if up && m[d] < last {
                    k[d] += 1;
                } else if !up && m[d] > 0 {
                    k[d] -= 1;
                } else {
                    continue;
                }
                worst = worst.max((self.node_gap[self.grid.node_index(k)] - g0).abs());
            }
        }
        worst
    }

    /// Node with `|g - h|` within the local variation that points furthest along `direction`.
    pub fn level_node(&self, h: f64, direction: &Point) -> Option<usize> {
        let n = self.grid.dim();
        (0..self.grid.num_nodes())
            .filter(|&i| (self.node_gap[i] - h).abs() <= self.variation_at(i))
            .max_by(|&a, &b| {
                let pa = self.grid.node_coord(a);
                let pb = self.grid.node_coord(b);
                let da: f64 = (0..n).map(|d| (pa[d] - self.center[d]) * direction[d]).sum();
                let db: f64 = (0..n).map(|d| (pb[d] - self.center[d]) * direction[d]).sum();
                da.total_cmp(&db).then(b.cmp(&a))
            })
    }

    /// CSV rows `cell,g` over the cells of the section at height `h`.
    pub fn section_csv(&self, h: f64) -> String {
        let mut out = String::from("cell,g\n");
        for c in self.mask(h).indices() {
            out.push_str(&format!("{c},{:.12e}\n", self.cell_gap[c]));
        }
        out
    }
}

/// Grid realization of a section.
#[derive(Debug, Clone)]
pub struct Section {
    grid: Grid,
    center: Point,
    height: f64,
    mask: CellMask,
    volume: f64,
    boundary_area: f64,
    clipped: bool,
}

impl Section {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn center(&self) -> &Point {
        &self.center
    }
    pub fn height(&self) -> f64 {
        self.height
    }
    pub fn mask(&self) -> &CellMask {
        &self.mask
    }
    pub fn volume(&self) -> f64 {
        self.volume
    }
    pub fn is_clipped(&self) -> bool {
        self.clipped
    }

    /// Corners of masked cells.
    pub fn node_mask(&self) -> Vec<bool> {
        let mut out = vec![false; self.grid.num_nodes()];
        for c in self.mask.indices() {
            let (corners, k) = self.grid.cell_corners(c);
            for &i in &corners[..k] {
                out[i] = true;
            }
        }
        out
    }

    /// Nodes all of whose incident cells are masked.
    pub fn interior_nodes(&self) -> Vec<usize> {
        let full = 1usize << self.grid.dim();
        (0..self.grid.num_nodes())
            .filter(|&i| {
                let cells = self.grid.node_cells(i);
                cells.len() == full && cells.iter().all(|&c| self.mask.contains(c))
            })
            .collect()
    }

    /// Width of the masked cells, maximized over 13 fixed directions.
    pub fn diameter(&self) -> f64 {
        mask_diameter(&self.grid, &self.mask)
    }

    /// Euclidean radius of the largest ball around the center inside the masked cells.
    pub fn inner_radius(&self) -> f64 {
        body::mask_inradius_at(&self.grid, &self.mask, &self.center)
    }
}

/// Width of the masked cells plus one spacing, maximized over 13 fixed directions.
pub fn mask_diameter(grid: &Grid, mask: &CellMask) -> f64 {
    let n = grid.dim();
    let mut dirs: Vec<Point> = Vec::new();
    for a in -1i32..=1 {
        for b in -1i32..=1 {
            for c in -1i32..=1 {
                if n == 2 && c != 0 {
                    continue;
                }
                let v = [a as f64, b as f64, c as f64];
                // keep one of each antipodal pair
                let first = v.iter().find(|x| **x != 0.0);
                if first.is_some_and(|x| *x > 0.0) {
                    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                    dirs.push([v[0] / len, v[1] / len, v[2] / len]);
                }
            }
        }
    }
    let mut best: f64 = 0.0;
    for dir in &dirs {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for c in mask.indices() {
            let p = grid.cell_center(c);
            let t: f64 = (0..n).map(|d| p[d] * dir[d]).sum();
            lo = lo.min(t);
            hi = hi.max(t);
        }
        best = best.max(hi - lo);
    }
    best + grid.spacing()
}

/// Section of `potential` at the grid node `x` and height `h`.
pub fn compute_section(potential: &ConvexPotential, grid: &Grid, x: &Point, h: f64) -> Result<Section> {
    GapField::new(potential, grid, x)?.section(h)
}

/// Perimeter (n = 2) or surface area (n = 3) of `{g = h}`; refuses clipped sections.
pub fn section_boundary_area(section: &Section) -> Result<f64> {
    if section.clipped {
        return Err(LabError::Clipped { height: section.height });
    }
    Ok(section.boundary_area)
}

pub(crate) fn check_grid(potential: &ConvexPotential, grid: &Grid) -> Result<()> {
    if potential.dim() != grid.dim() {
        return Err(LabError::Invalid(format!(
            "potential `{}` has dimension {} but the grid has {}",
            potential.name(),
            potential.dim(),
            grid.dim()
        )));
    }
    for corner in [[grid.lo(); 3], [grid.hi(); 3]] {
        potential.evaluate(&corner)?;
    }
    Ok(())
}

/// Cells whose centers lie in the open ball `B(c, r)`.
pub fn ball_mask(grid: &Grid, c: &Point, r: f64) -> CellMask {
    CellMask(
        (0..grid.num_cells())
            .map(|i| dist(grid.dim(), &grid.cell_center(i), c) < r)
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn isotropic_section_is_unit_disk() {
        let p = ConvexPotential::isotropic(2).unwrap();
        let g = Grid::new(2, -1.5, 1.5, 129).unwrap();
        let s = compute_section(&p, &g, &[0.0; 3], 0.5).unwrap();
        assert!(!s.is_clipped());
        assert!((s.volume() - PI).abs() < 0.02 * PI);
        let perim = section_boundary_area(&s).unwrap();
        assert!((perim - 2.0 * PI).abs() < 0.02 * 2.0 * PI);
        // symmetric difference with the exact ball is confined to cells cut by the circle
        let exact = ball_mask(&g, &[0.0; 3], 1.0);
        let diff = s.mask().minus(&exact).count() + exact.minus(s.mask()).count();
        let cut = (0..g.num_cells())
            .filter(|&c| {
                let (corners, k) = g.cell_corners(c);
                let r: Vec<f64> = corners[..k].iter().map(|&i| dist(2, &g.node_coord(i), &[0.0; 3])).collect();
                r.iter().any(|&x| x < 1.0) && r.iter().any(|&x| x >= 1.0)
            })
            .count();
        assert!(diff <= cut);
    }

    #[test]
    fn ellipse_area_matches_formula() {
        let (a, b, h) = (2.0, 0.5, 0.3);
        let p = ConvexPotential::quadratic(&[a, b]).unwrap();
        let g = Grid::new(2, -2.0, 2.0, 257).unwrap();
        let s = compute_section(&p, &g, &[0.0; 3], h).unwrap();
        let want = 2.0 * PI * h / (a * b as f64).sqrt();
        assert!((s.volume() - want).abs() < 0.01 * want, "{} {want}", s.volume());
    }

    #[test]
    fn sections_are_nested_and_reject_tiny_heights() {
        let p = ConvexPotential::trig(2, 0.1, 4.0).unwrap();
        let g = Grid::new(2, -1.0, 1.0, 65).unwrap();
        let gap = GapField::new(&p, &g, &[0.25, 0.0, 0.0]).unwrap();
        let s1 = gap.section(0.05).unwrap();
        let s2 = gap.section(0.1).unwrap();
        assert!(s1.mask().is_subset_of(s2.mask()));
        for c in s1.mask().indices() {
            assert!(gap.cell_gap()[c] < 0.05);
        }
        assert!(matches!(gap.section(1e-9), Err(LabError::Resolution { .. })));
    }

    #[test]
    fn clipped_sections_refuse_area() {
        let p = ConvexPotential::isotropic(2).unwrap();
        let g = Grid::new(2, -1.0, 1.0, 33).unwrap();
        let s = compute_section(&p, &g, &[0.0; 3], 0.6).unwrap();
        assert!(s.is_clipped());
        assert!(matches!(section_boundary_area(&s), Err(LabError::Clipped { .. })));
    }

    #[test]
    fn ball_domain_clips() {
        let p = ConvexPotential::isotropic(2).unwrap();
        let g = Grid::new(2, -1.0, 1.0, 65).unwrap().with_domain(crate::grid::Domain::Ball {
            center: [0.0; 3],
            radius: 0.5,
        });
        assert!(compute_section(&p, &g, &[0.0; 3], 0.2).unwrap().is_clipped());
        assert!(!compute_section(&p, &g, &[0.0; 3], 0.05).unwrap().is_clipped());
    }

    #[test]
    fn sphere_area_scaling_slope() {
        let p = ConvexPotential::isotropic(3).unwrap();
        let g = Grid::new(3, -1.0, 1.0, 49).unwrap();
        let gap = GapField::new(&p, &g, &[0.0; 3]).unwrap();
        let hs = [0.05, 0.1, 0.2, 0.4];
        let areas: Vec<f64> = hs
            .iter()
            .map(|&h| section_boundary_area(&gap.section(h).unwrap()).unwrap())
            .collect();
        let fit = crate::fit::log_log_fit(&hs, &areas).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.05, "{}", fit.slope);
    }

    #[test]
    fn center_must_be_a_node() {
        let p = ConvexPotential::isotropic(2).unwrap();
        let g = Grid::new(2, -1.0, 1.0, 9).unwrap();
        assert!(GapField::new(&p, &g, &[0.1, 0.0, 0.0]).is_err());
        let g = Grid::new(2, -3.0, 3.0, 9).unwrap();
        assert!(matches!(GapField::new(&p, &g, &[0.0; 3]), Err(LabError::Domain { .. })));
    }
}
