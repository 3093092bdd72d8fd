//! Empirical engulfing: a section of proportional height inside the
//! intersection of two sections of the same height.

use super::{check_grid, GapField};
use crate::error::{LabError, Result};
use crate::grid::{Grid, Point};
use crate::potentials::ConvexPotential;

/// Deepest dyadic level searched.
const MAX_LEVEL: i32 = 20;
/// Cap on the number of candidate centers examined.
const MAX_CANDIDATES: usize = 600;

/// Outcome of an engulfing search.
#[derive(Debug, Clone, PartialEq)]
pub struct EngulfingReport {
    pub x1: Point,
    pub x2: Point,
    pub height: f64,
    /// `g_{x2}(x1) - h`, the boundary mismatch of `x1`.
    pub boundary_mismatch: f64,
    /// Largest `η = 2^{-k}` with `S(z, ηh)` inside the intersection.
    pub eta: f64,
    pub best_center: Point,
    pub candidates: usize,
    pub intersection_volume: f64,
}

/// Search grid nodes `z` and dyadic `η` for `S(z, ηh) ⊂ S(x1, h) ∩ S(x2, h)`.
pub fn engulfing_check(potential: &ConvexPotential, grid: &Grid, x1: &Point, x2: &Point, h: f64) -> Result<EngulfingReport> {
    check_grid(potential, grid)?;
    let g1 = GapField::new(potential, grid, x1)?;
    let g2 = GapField::new(potential, grid, x2)?;
    let same = g1.center_node() == g2.center_node();
    let mismatch = g2.node_gap()[g1.center_node()] - h;
    if !same && mismatch.abs() > g2.variation_at(g1.center_node()) {
        return Err(LabError::Invalid(format!(
            "x1 is not on the boundary of S(x2, h): g - h = {mismatch:.3e}"
        )));
    }
    let s1 = g1.section(h)?;
    let s2 = g2.section(h)?;
    if s1.is_clipped() || s2.is_clipped() {
        return Err(LabError::Clipped { height: h });
    }
    let inter = s1.mask().intersect(s2.mask());
    if inter.count() == 0 {
        return Err(LabError::Resolution { height: h });
    }
    let n = grid.dim();
    let full = 1usize << n;
    let nodes: Vec<usize> = (0..grid.num_nodes())
        .filter(|&i| {
            let cells = grid.node_cells(i);
            cells.len() == full && cells.iter().all(|&c| inter.contains(c))
        })
        .collect();
    if nodes.is_empty() {
        return Err(LabError::Resolution { height: h });
    }
    let stride = nodes.len().div_ceil(MAX_CANDIDATES).max(1);
    let mut candidates: Vec<usize> = nodes.iter().copied().step_by(stride).collect();
    for c in [g1.center_node(), g2.center_node()] {
        if nodes.contains(&c) && !candidates.contains(&c) {
            candidates.push(c);
        }
    }
    let centers: Vec<Point> = (0..grid.num_cells()).map(|c| grid.cell_center(c)).collect();
    let u_cells: Vec<f64> = centers.iter().map(|p| potential.evaluate(p).map(|e| e.u)).collect::<Result<_>>()?;
    let outside: Vec<usize> = (0..grid.num_cells()).filter(|&c| !inter.contains(c)).collect();

    let mut best = (0.0, candidates[0]);
    for &z in &candidates {
        let zp = grid.node_coord(z);
        let at = potential.evaluate(&zp)?;
        let gz = |c: usize| {
            let mut g = u_cells[c] - at.u;
            for d in 0..n {
                g -= at.du[d] * (centers[c][d] - zp[d]);
            }
            g
        };
        // S(z, t) stays inside the intersection exactly when t ≤ min over outside cells
        let room = outside.iter().map(|&c| gz(c)).fold(f64::INFINITY, f64::min);
        let smallest = grid.node_cells(z).iter().map(|&c| gz(c)).fold(f64::INFINITY, f64::min);
        for k in 0..=MAX_LEVEL {
            let eta = 0.5f64.powi(k);
            if eta <= best.0 {
                break;
            }
            if eta * h <= room && smallest < eta * h {
                best = (eta, z);
                break;
            }
        }
    }
    Ok(EngulfingReport {
        x1: *x1,
        x2: *x2,
        height: h,
        boundary_mismatch: mismatch,
        eta: best.0,
        best_center: grid.node_coord(best.1),
        candidates: candidates.len(),
        intersection_volume: inter.count() as f64 * grid.cell_volume(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn congruent_balls_quarter_height() {
        let p = ConvexPotential::isotropic(2).unwrap();
        let g = Grid::new(2, -2.0, 2.0, 129).unwrap();
        let x1 = [0.5, 0.0, 0.0];
        let r = engulfing_check(&p, &g, &x1, &[0.0; 3], 0.125).unwrap();
        // largest ball in the lens has radius R/2, i.e. height h/4
        assert!(r.eta >= 0.2, "{}", r.eta);
        assert!(r.eta <= 0.25);
    }

    #[test]
    fn coincident_centers_give_full_height() {
        let p = ConvexPotential::trig(2, 0.1, 4.0).unwrap();
        let g = Grid::new(2, -1.0, 1.0, 65).unwrap();
        let r = engulfing_check(&p, &g, &[0.0; 3], &[0.0; 3], 0.1).unwrap();
        assert_eq!(r.eta, 1.0);
    }

    #[test]
    fn off_boundary_point_rejected() {
        let p = ConvexPotential::isotropic(2).unwrap();
        let g = Grid::new(2, -1.0, 1.0, 65).unwrap();
        assert!(engulfing_check(&p, &g, &[0.25, 0.0, 0.0], &[0.0; 3], 0.125).is_err());
    }
}
