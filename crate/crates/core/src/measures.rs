//! Signed measures on grids in Hahn–Jordan form, section masses, growth fits
//! and the flux of the oscillating radial counterexample field.

use std::f64::consts::PI;

use crate::error::{LabError, Result};
use crate::field::{FaceField, GridFunction};
use crate::fit::log_log_fit;
use crate::geometry::{GapField, Section};
use crate::grid::{CellMask, Grid, Point};
use crate::potentials::ConvexPotential;
use crate::quadrature::integrate;

/// Signed measure: nonnegative per-cell masses `pos`, `neg` and node atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    grid: Grid,
    pos: Vec<f64>,
    neg: Vec<f64>,
    atoms: Vec<(usize, f64)>,
}

impl GridMeasure {
    pub fn zero(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            pos: vec![0.0; grid.num_cells()],
            neg: vec![0.0; grid.num_cells()],
            atoms: Vec::new(),
        }
    }

    /// `f dx` split into its Jordan parts over the region of `f`.
    pub fn from_density(f: &GridFunction) -> Result<Self> {
        let grid = f.grid();
        let vol = grid.cell_volume();
        let mut m = Self::zero(grid);
        for c in f.region().indices() {
            let v = f.cell_value(c);
            if !v.is_finite() {
                return Err(LabError::Invalid(format!("density is not finite on cell {c}")));
            }
            m.pos[c] = v.max(0.0) * vol;
            m.neg[c] = (-v).max(0.0) * vol;
        }
        Ok(m)
    }

    /// Cell masses equal to the net outward flux of `field`.
    ///
    /// With `require_nonneg`, a cell mass below `-1e-8 ‖F‖_∞ / spacing` times the
    /// cell volume is reported as a sign violation.
    pub fn from_divergence(field: &FaceField, require_nonneg: bool) -> Result<Self> {
        let grid = field.grid();
        let mut m = Self::zero(grid);
        let tol = 1e-8 * field.sup_norm() / grid.spacing() * grid.cell_volume();
        for c in 0..grid.num_cells() {
            let flux = field.cell_flux(c);
            if require_nonneg && flux < -tol {
                return Err(LabError::Sign { cell: c, mass: flux, tol });
            }
            if flux >= 0.0 {
                m.pos[c] = flux;
            } else {
                m.neg[c] = -flux;
            }
        }
        Ok(m)
    }

    /// Point mass at a grid node.
    pub fn atom(grid: &Grid, node: usize, mass: f64) -> Self {
        let mut m = Self::zero(grid);
        m.atoms.push((node, mass));
        m
    }

    /// Mass spread uniformly over the cells incident to `node`.
    pub fn mollified_atom(grid: &Grid, node: usize, mass: f64) -> Self {
        let mut m = Self::zero(grid);
        let cells = grid.node_cells(node);
        let share = mass.abs() / cells.len() as f64;
        for c in cells {
            if mass >= 0.0 {
                m.pos[c] += share;
            } else {
                m.neg[c] += share;
            }
        }
        m
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn pos(&self) -> &[f64] {
        &self.pos
    }
    pub fn neg(&self) -> &[f64] {
        &self.neg
    }
    pub fn atoms(&self) -> &[(usize, f64)] {
        &self.atoms
    }

    /// Sum of two measures; coincident cell parts are re-split so that `pos · neg = 0`.
    pub fn add(&self, other: &GridMeasure) -> Result<Self> {
        if self.pos.len() != other.pos.len() {
            return Err(LabError::Invalid("measures live on different grids".into()));
        }
        let mut m = Self::zero(&self.grid);
        for c in 0..self.pos.len() {
            let s = (self.pos[c] - self.neg[c]) + (other.pos[c] - other.neg[c]);
            m.pos[c] = s.max(0.0);
            m.neg[c] = (-s).max(0.0);
        }
        m.atoms = self.atoms.iter().chain(&other.atoms).copied().collect();
        Ok(m)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let (pos, neg) = if c >= 0.0 { (&self.pos, &self.neg) } else { (&self.neg, &self.pos) };
        Self {
            grid: self.grid.clone(),
            pos: pos.iter().map(|v| v * c.abs()).collect(),
            neg: neg.iter().map(|v| v * c.abs()).collect(),
            atoms: self.atoms.iter().map(|&(i, m)| (i, m * c)).collect(),
        }
    }

    /// `μ₊` as a nonnegative measure.
    pub fn positive_part(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            pos: self.pos.clone(),
            neg: vec![0.0; self.pos.len()],
            atoms: self.atoms.iter().filter(|a| a.1 > 0.0).copied().collect(),
        }
    }

    /// `μ₋` as a nonnegative measure.
    pub fn negative_part(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            pos: self.neg.clone(),
            neg: vec![0.0; self.pos.len()],
            atoms: self.atoms.iter().filter(|a| a.1 < 0.0).map(|&(i, m)| (i, -m)).collect(),
        }
    }

    pub fn total_variation(&self) -> f64 {
        self.pos.iter().sum::<f64>() + self.neg.iter().sum::<f64>() + self.atoms.iter().map(|a| a.1.abs()).sum::<f64>()
    }

    pub fn total_mass(&self) -> f64 {
        self.pos.iter().sum::<f64>() - self.neg.iter().sum::<f64>() + self.atoms.iter().map(|a| a.1).sum::<f64>()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.neg.iter().all(|&v| v == 0.0) && self.atoms.iter().all(|a| a.1 >= 0.0)
    }

    /// Largest `pos[c] · neg[c]`; zero for a Jordan decomposition.
    pub fn singularity_defect(&self) -> f64 {
        self.pos.iter().zip(&self.neg).map(|(a, b)| a * b).fold(0.0, f64::max)
    }

    /// `(μ₊(mask), μ₋(mask))`; atoms count when every cell around their node is masked.
    pub fn mass_on(&self, mask: &CellMask) -> (f64, f64) {
        let mut p = 0.0;
        let mut q = 0.0;
        for c in mask.indices() {
            p += self.pos[c];
            q += self.neg[c];
        }
        for &(node, m) in &self.atoms {
            let cells = self.grid.node_cells(node);
            if cells.iter().all(|&c| mask.contains(c)) {
                if m >= 0.0 {
                    p += m;
                } else {
                    q -= m;
                }
            }
        }
        (p, q)
    }

    /// Signed cell masses with atoms spread over their incident cells.
    pub fn mollified_cells(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.pos.iter().zip(&self.neg).map(|(a, b)| a - b).collect();
        for &(node, m) in &self.atoms {
            let cells = self.grid.node_cells(node);
            let share = m / cells.len() as f64;
            for c in cells {
                out[c] += share;
            }
        }
        out
    }

    /// Nodal load `∫ φ_i dμ`: each cell mass split equally among its corners
    /// (the shape values at the cell center), atoms mollified first.
    pub fn nodal_load(&self) -> Vec<f64> {
        let mut load = vec![0.0; self.grid.num_nodes()];
        for (c, m) in self.mollified_cells().into_iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let (corners, k) = self.grid.cell_corners(c);
            for &i in &corners[..k] {
                load[i] += m / k as f64;
            }
        }
        load
    }
}

/// Jordan masses of a section.
pub fn measure_of_section(mu: &GridMeasure, s: &Section) -> (f64, f64) {
    mu.mass_on(s.mask())
}

/// Log-log fit of `|μ|(S(x, h))` against `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthFit {
    pub center: Point,
    pub heights: Vec<f64>,
    pub masses: Vec<f64>,
    /// Fitted exponent `n/2 - 1 + ε̂`.
    pub slope: f64,
    pub m_hat: f64,
    pub eps_hat: f64,
    pub residual: f64,
}

pub fn growth_fit(mu: &GridMeasure, potential: &ConvexPotential, x: &Point, heights: &[f64]) -> Result<GrowthFit> {
    if heights.len() < 4 {
        return Err(LabError::Fit(format!("{} heights; at least 4 needed", heights.len())));
    }
    let gap = GapField::new(potential, mu.grid(), x)?;
    let mut masses = Vec::with_capacity(heights.len());
    for &h in heights {
        let s = gap.section(h)?;
        if s.is_clipped() {
            return Err(LabError::Clipped { height: h });
        }
        let (p, q) = measure_of_section(mu, &s);
        masses.push(p + q);
    }
    if masses.iter().all(|&m| m <= 0.0) {
        return Err(LabError::Fit("zero mass at every height".into()));
    }
    let fit = log_log_fit(heights, &masses)?;
    let n = mu.grid().dim() as f64;
    Ok(GrowthFit {
        center: *x,
        heights: heights.to_vec(),
        masses,
        slope: fit.slope,
        m_hat: fit.intercept.exp(),
        eps_hat: fit.slope - (n / 2.0 - 1.0),
        residual: fit.residual,
    })
}

/// Surface area of the unit sphere in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI * sphere_area(n - 2) / (n - 2) as f64,
    }
}

/// Flux of `(div F)⁺` over `B_{r_k}` for `F = (x/|x|) cos(|x|^{-ε})`.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleFlux {
    pub eps: f64,
    pub n: usize,
    pub k: u32,
    pub r_k: f64,
    /// Quadrature value over the resolved periods (a lower bound of the exact flux).
    pub flux: f64,
    /// Rigorous bound on the unresolved tail.
    pub tail_bound: f64,
    /// `ω_n ε / (14 (n - 1 - ε)) r_k^{n-1-ε}`.
    pub bound: f64,
    pub periods: usize,
}

const FLUX_REL_TOL: f64 = 1e-4;
const FLUX_MAX_PERIODS: usize = 5_000_000;

pub fn counterexample_flux(eps: f64, n: usize, k: u32) -> Result<CounterexampleFlux> {
    let nf = n as f64;
    if n < 2 || !(eps > 0.0 && eps < nf - 1.0) {
        return Err(LabError::Invalid(format!("need n ≥ 2 and 0 < ε < n - 1, got n = {n}, ε = {eps}")));
    }
    if k < 1 {
        return Err(LabError::Invalid("k must be at least 1".into()));
    }
    let t0 = PI / 6.0 + 2.0 * PI * k as f64;
    let r_k = t0.powf(-1.0 / eps);
    let omega = sphere_area(n);
    // substitute t = s^{-ε}: ∫_0^{r_k} (div F)⁺ s^{n-1} ds = ∫_{t0}^∞ f(t) dt
    let a = (1.0 + eps) / eps;
    let b = 1.0 / eps;
    let c = -nf / eps - 1.0;
    let f = |t: f64| {
        let div = eps * t.powf(a) * t.sin() + (nf - 1.0) * t.powf(b) * t.cos();
        div.max(0.0) * t.powf(c) / eps
    };
    // |f| ≤ t^{(1-n)/ε} + ((n-1)/ε) t^{(1-n)/ε - 1}
    let beta = (nf - 1.0) / eps;
    let tail = |t: f64| omega * (t.powf(1.0 - beta) / (beta - 1.0) + t.powf(-beta));
    let mut total = 0.0;
    let mut trace = Vec::new();
    for j in 0..FLUX_MAX_PERIODS {
        let lo = t0 + 2.0 * PI * j as f64;
        let hi = lo + 2.0 * PI;
        let part = integrate(f, lo, hi, 1e-14, 1e-10, 200).map_err(|e| {
            LabError::Quadrature(format!("period {j} [{lo:.6}, {hi:.6}]: {e}; running total {total:.6e}"))
        })?;
        total += omega * part.value;
        if trace.len() < 8 {
            trace.push(part.intervals);
        }
        let remaining = tail(hi);
        if remaining <= FLUX_REL_TOL * total {
            return Ok(CounterexampleFlux {
                eps,
                n,
                k,
                r_k,
                flux: total,
                tail_bound: remaining,
                bound: omega * eps / (14.0 * (nf - 1.0 - eps)) * r_k.powf(nf - 1.0 - eps),
                periods: j + 1,
            });
        }
    }
    Err(LabError::Quadrature(format!(
        "tail bound still above tolerance after {FLUX_MAX_PERIODS} periods (total {total:.6e}, first refinements {trace:?})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::ConvexPotential;

    #[test]
    fn unit_density_and_sign_split() {
        let g = Grid::new(2, 0.0, 1.0, 17).unwrap();
        let one = GridMeasure::from_density(&GridFunction::from_cells_fn(&g, |_| 1.0)).unwrap();
        assert!((one.total_variation() - 1.0).abs() < 1e-12);
        let sign = GridMeasure::from_density(&GridFunction::from_cells_fn(&g, |p| (p[0] - 0.5).signum())).unwrap();
        assert!((sign.pos().iter().sum::<f64>() - 0.5).abs() < 1e-12);
        assert!((sign.neg().iter().sum::<f64>() - 0.5).abs() < 1e-12);
        assert_eq!(sign.singularity_defect(), 0.0);
    }

    #[test]
    fn divergence_of_identity_and_constant() {
        let g = Grid::new(2, 0.0, 1.0, 17).unwrap();
        let m = GridMeasure::from_divergence(&FaceField::from_fn(&g, |p| *p), true).unwrap();
        assert!((m.total_mass() - 2.0).abs() < 1e-12);
        for &c in m.pos() {
            assert!((c - 2.0 * g.cell_volume()).abs() < 1e-14);
        }
        let m = GridMeasure::from_divergence(&FaceField::from_fn(&g, |_| [0.3, -0.2, 0.0]), true).unwrap();
        assert!(m.total_variation() < 1e-14);
        let bad = FaceField::from_fn(&g, |p| [-p[0], 0.0, 0.0]);
        assert!(matches!(GridMeasure::from_divergence(&bad, true), Err(LabError::Sign { .. })));
    }

    #[test]
    fn section_masses() {
        let p = ConvexPotential::isotropic(2).unwrap();
        let g = Grid::new(2, -1.0, 1.0, 129).unwrap();
        let gap = GapField::new(&p, &g, &[0.0; 3]).unwrap();
        let leb = GridMeasure::from_density(&GridFunction::from_cells_fn(&g, |_| 1.0)).unwrap();
        let s = gap.section(0.2).unwrap();
        let (pos, neg) = measure_of_section(&leb, &s);
        assert!((pos - 2.0 * PI * 0.2).abs() < 0.02 * 2.0 * PI * 0.2);
        assert_eq!(neg, 0.0);
        let atom = GridMeasure::atom(&g, gap.center_node(), 1.0);
        assert_eq!(measure_of_section(&atom, &s), (1.0, 0.0));
    }

    #[test]
    fn growth_exponents() {
        let p = ConvexPotential::isotropic(3).unwrap();
        let g = Grid::new(3, -1.0, 1.0, 33).unwrap();
        let x = [0.0; 3];
        let hs = [0.04, 0.08, 0.16, 0.32];
        let leb = GridMeasure::from_density(&GridFunction::from_cells_fn(&g, |_| 1.0)).unwrap();
        let fit = growth_fit(&leb, &p, &x, &hs).unwrap();
        assert!((fit.eps_hat - 1.0).abs() < 0.1, "{}", fit.eps_hat);
        let atom = GridMeasure::atom(&g, g.node_at(&x).unwrap(), 1.0);
        let fit = growth_fit(&atom, &p, &x, &hs).unwrap();
        assert!((fit.eps_hat + 0.5).abs() < 1e-12);
        assert!(growth_fit(&GridMeasure::zero(&g), &p, &x, &hs).is_err());
    }

    #[test]
    fn load_preserves_mass() {
        let g = Grid::new(2, 0.0, 1.0, 9).unwrap();
        let m = GridMeasure::from_density(&GridFunction::from_cells_fn(&g, |p| p[0] - 0.3))
            .unwrap()
            .add(&GridMeasure::atom(&g, 40, 2.0))
            .unwrap();
        let total: f64 = m.nodal_load().iter().sum();
        assert!((total - m.total_mass()).abs() < 1e-12);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn counterexample_first_radius() {
        let r = counterexample_flux(1.0, 3, 1).unwrap();
        assert!((r.r_k - 1.0 / (PI / 6.0 + 2.0 * PI)).abs() < 1e-15);
        assert!((r.r_k - 0.146_912).abs() < 1e-6);
        assert!((r.bound - 4.0 * PI / 14.0 * r.r_k).abs() < 1e-15);
        assert!((r.bound - 0.131_868).abs() < 1e-6);
        assert!(r.flux >= r.bound);
    }

    #[test]
    fn counterexample_flux_matches_direct_radial_sum() {
        // brute-force midpoint rule in the radial variable over [r_k/50, r_k]; on the
        // inner ball |div F| s^2 ≤ 1 + 2s
        let r = counterexample_flux(1.0, 3, 2).unwrap();
        let (eps, rk) = (1.0f64, r.r_k);
        let div = |s: f64| eps * s.powf(-1.0 - eps) * s.powf(-eps).sin() + 2.0 / s * s.powf(-eps).cos();
        let a = rk / 50.0;
        let m = 4_000_000;
        let w = (rk - a) / m as f64;
        let outer: f64 = (0..m)
            .map(|i| {
                let s = a + (i as f64 + 0.5) * w;
                div(s).max(0.0) * s * s
            })
            .sum::<f64>()
            * w
            * 4.0
            * PI;
        let inner_max = 4.0 * PI * (a + a * a);
        assert!(r.flux >= outer - 1e-6);
        assert!(r.flux <= outer + inner_max + r.tail_bound);
    }
}
