//! Truncated Riesz potentials over sections, the dyadic section sum, the level
//! iteration behind the pointwise potential estimate, and reports for the
//! potential estimate and its `L^p → L^∞` consequence.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::GridFunction;
use crate::geometry::GapField;
use crate::grid::{dist, CellMask, Grid, Point};
use crate::measures::{growth_fit, GridMeasure};
use crate::norms::{lorentz_norm_samples, lp_average_on, lp_norm_on, LorentzParams};
use crate::potentials::{certify_bounds, ConvexPotential};
use crate::report::{EstimateReport, Status, Term};

/// Smallest height whose section spans at least two cells: `4 h² λ_max`.
pub fn resolution_height(potential: &ConvexPotential, grid: &Grid) -> Result<f64> {
    let cert = certify_bounds(potential, grid)?;
    Ok(4.0 * grid.spacing().powi(2) * cert.max_eigenvalue)
}

/// `∫_a^b t^{-k} dt` for `k ≥ 1`.
fn power_kernel(a: f64, b: f64, k: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if (k - 1.0).abs() < 1e-12 {
        (b / a).ln()
    } else {
        (a.powf(1.0 - k) - b.powf(1.0 - k)) / (k - 1.0)
    }
}

/// Masses keyed by the smallest level at which they lie inside the sub-level set.
#[derive(Debug, Clone)]
struct MassLadder {
    levels: Vec<f64>,
    cumulative: Vec<f64>,
    entries: Vec<(f64, f64)>,
}

impl MassLadder {
    /// `level[c]` per cell; an atom enters once every incident cell has entered.
    fn new(grid: &Grid, cell_level: &[f64], inside: &CellMask, cells: &[f64], atoms: &[(usize, f64)]) -> Self {
        let mut entries: Vec<(f64, f64)> = inside
            .indices()
            .filter(|&c| cells[c] > 0.0)
            .map(|c| (cell_level[c], cells[c]))
            .collect();
        for &(node, m) in atoms {
            let around = grid.node_cells(node);
            let level = if around.iter().all(|&c| inside.contains(c)) {
                around.iter().map(|&c| cell_level[c]).fold(f64::NEG_INFINITY, f64::max)
            } else {
                f64::INFINITY
            };
            entries.push((level, m));
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cumulative = Vec::with_capacity(entries.len());
        let mut s = 0.0;
        for e in &entries {
            s += e.1;
            cumulative.push(s);
        }
        Self {
            levels: entries.iter().map(|e| e.0).collect(),
            cumulative,
            entries,
        }
    }

    /// Mass with level `< h`, or `≤ h` when `closed`.
    fn below(&self, h: f64, closed: bool) -> f64 {
        let k = if closed {
            self.levels.partition_point(|&l| l <= h)
        } else {
            self.levels.partition_point(|&l| l < h)
        };
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// Exact `∫_{lo}^{hi} mass(< t) t^{-k} dt` for the step function `mass`.
    fn integral(&self, lo: f64, hi: f64, k: f64) -> f64 {
        self.entries
            .iter()
            .take_while(|e| e.0 < hi)
            .map(|&(l, m)| m * power_kernel(l.max(lo), hi, k))
            .sum()
    }
}

fn section_ladder(mu: &GridMeasure, gap: &GapField) -> Result<MassLadder> {
    if !mu.is_nonnegative() {
        return Err(LabError::Invalid("Riesz potentials need a nonnegative measure".into()));
    }
    let grid = gap.grid();
    Ok(MassLadder::new(grid, gap.cell_gap(), &grid.domain_mask(), mu.pos(), mu.atoms()))
}

fn require_unclipped(gap: &GapField, h: f64) -> Result<()> {
    if gap.touches_boundary(&gap.mask(h)) {
        return Err(LabError::Clipped { height: h });
    }
    Ok(())
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        0.0
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RieszProfile {
    pub center: Point,
    pub h0: f64,
    pub h_min: f64,
    /// `(h, μ(S(x₀,h)))` on the dyadic ladder `h₀ 2^{-j} ≥ h_min`, then `h_min`.
    pub table: Vec<(f64, f64)>,
    /// `μ(S(h)) / h^{n/2}` at the table heights.
    pub integrand: Vec<f64>,
    pub value: f64,
    pub divergent: bool,
}

impl RieszProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,mass,integrand\n");
        for ((h, m), f) in self.table.iter().zip(&self.integrand) {
            out.push_str(&format!("{h:.10e},{m:.10e},{f:.10e}\n"));
        }
        out
    }
}

fn riesz_from_ladder(ladder: &MassLadder, center: &Point, n: usize, h0: f64, h_min: f64) -> RieszProfile {
    let k = n as f64 / 2.0;
    let mut table = Vec::new();
    let mut h = h0;
    while h >= h_min {
        table.push((h, ladder.below(h, false)));
        h *= 0.5;
    }
    table.push((h_min, ladder.below(h_min, false)));
    let integrand: Vec<f64> = table.iter().map(|&(h, m)| m / h.powf(k)).collect();
    let at_floor = *integrand.last().expect("nonempty");
    let dyadic_median = median(&integrand[..integrand.len() - 1]);
    RieszProfile {
        center: *center,
        h0,
        h_min,
        table,
        value: ladder.integral(h_min, h0, k),
        divergent: at_floor > 10.0 * dyadic_median,
        integrand,
    }
}

/// `I_u^μ(x₀,h₀) = ∫ μ(S(x₀,h)) h^{-n/2} dh` over `[h_min, h₀]`, integrated exactly
/// for the piecewise-constant grid mass function.
pub fn riesz_potential(mu: &GridMeasure, potential: &ConvexPotential, x0: &Point, h0: f64) -> Result<RieszProfile> {
    if !(h0 > 0.0 && h0.is_finite()) {
        return Err(LabError::Invalid(format!("truncation {h0} must be positive")));
    }
    let gap = GapField::new(potential, mu.grid(), x0)?;
    require_unclipped(&gap, h0)?;
    let h_min = resolution_height(potential, mu.grid())?.min(h0);
    let ladder = section_ladder(mu, &gap)?;
    Ok(riesz_from_ladder(&ladder, x0, mu.grid().dim(), h0, h_min))
}

/// Euclidean Riesz potential `∫_{s_min}^{r₀} μ(B(x₀,s)) s^{1-n} ds` from ball masses.
pub fn classical_riesz_potential(mu: &GridMeasure, x0: &Point, r0: f64, s_min: f64) -> Result<f64> {
    if !mu.is_nonnegative() {
        return Err(LabError::Invalid("Riesz potentials need a nonnegative measure".into()));
    }
    let grid = mu.grid();
    let n = grid.dim();
    let distance: Vec<f64> = (0..grid.num_cells())
        .map(|c| dist(n, x0, &grid.cell_center(c)))
        .collect();
    let ladder = MassLadder::new(grid, &distance, &grid.domain_mask(), mu.pos(), mu.atoms());
    Ok(ladder.integral(s_min, r0, n as f64 - 1.0))
}

/// `Σ_m h_m^{1-n/2} μ(S̄(x₀,h_m))` with `h_m = 2^{-m} h₀`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicSum {
    pub terms: Vec<(f64, f64)>,
    /// Sum over the resolved heights `h_m ≥ h_min`, `m ≤ depth`.
    pub partial: f64,
    /// Geometric extrapolation of the unresolved terms; `∞` if they do not decay.
    pub tail_estimate: f64,
    pub riesz_h0: f64,
    pub riesz_2h0: f64,
    /// `partial / I(x₀,h₀)`; bounded below by the lemma.
    pub lower_ratio: f64,
    /// `partial / I(x₀,2h₀)`; bounded above by the lemma.
    pub upper_ratio: f64,
}

impl DyadicSum {
    pub fn total(&self) -> f64 {
        self.partial + self.tail_estimate
    }
}

pub fn dyadic_sum(mu: &GridMeasure, potential: &ConvexPotential, x0: &Point, h0: f64, depth: usize) -> Result<DyadicSum> {
    if !(h0 > 0.0 && h0.is_finite()) {
        return Err(LabError::Invalid(format!("truncation {h0} must be positive")));
    }
    let grid = mu.grid();
    let gap = GapField::new(potential, grid, x0)?;
    require_unclipped(&gap, 2.0 * h0)?;
    let h_min = resolution_height(potential, grid)?.min(h0);
    let ladder = section_ladder(mu, &gap)?;
    let n = grid.dim() as f64;
    let mut terms = Vec::new();
    let mut h = h0;
    for _ in 0..=depth {
        if h < h_min {
            break;
        }
        terms.push((h, h.powf(1.0 - n / 2.0) * ladder.below(h, true)));
        h *= 0.5;
    }
    let partial: f64 = terms.iter().map(|t| t.1).sum();
    let tail_estimate = match terms.as_slice() {
        [.., a, b] if a.1 > 0.0 => {
            let rho = b.1 / a.1;
            if rho < 1.0 {
                b.1 * rho / (1.0 - rho)
            } else {
                f64::INFINITY
            }
        }
        _ => 0.0,
    };
    let k = n / 2.0;
    let riesz_h0 = ladder.integral(h_min, h0, k);
    let riesz_2h0 = ladder.integral(h_min, 2.0 * h0, k);
    let ratio = |den: f64| if den > 0.0 { partial / den } else if partial > 0.0 { f64::INFINITY } else { 1.0 };
    Ok(DyadicSum {
        terms,
        partial,
        tail_estimate,
        riesz_h0,
        riesz_2h0,
        lower_ratio: ratio(riesz_h0),
        upper_ratio: ratio(riesz_2h0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMIterationTrace {
    pub theta: f64,
    pub sigma: f64,
    pub heights: Vec<f64>,
    /// `l_0 = 0, l_1, …`; `levels[m+1]` is built on the section at `heights[m+1]`.
    pub levels: Vec<f64>,
    /// `‖(v - l_m)₊‖_{L^{σ,∞}(S_{m+1})}`.
    pub weak_norms: Vec<f64>,
    /// `(l_{m+1} - l_m) / (θ^{2/n}(l_m - l_{m-1}) + θ^{-1/σ} h_m^{1-n/2} μ₊(S̄_m))` for `m ≥ 1`.
    pub claim_ratios: Vec<f64>,
    pub l_inf: f64,
    pub depth: usize,
    /// Ratio of the last two nonzero increments.
    pub increment_ratio: Option<f64>,
    pub warning: Option<String>,
}

impl KMIterationTrace {
    pub fn increments(&self) -> Vec<f64> {
        self.levels.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,h_m,l_m,increment\n");
        for (m, l) in self.levels.iter().enumerate() {
            let inc = if m == 0 { 0.0 } else { l - self.levels[m - 1] };
            out.push_str(&format!("{m},{:.10e},{l:.10e},{inc:.10e}\n", self.heights[m]));
        }
        out
    }
}

const KM_DEPTH: usize = 40;

/// Level iteration with `σ = n/(n-2)`; requires `n = 3`.
pub fn km_iteration(
    v: &GridFunction,
    potential: &ConvexPotential,
    x0: &Point,
    h0: f64,
    theta: f64,
    mu: Option<&GridMeasure>,
) -> Result<KMIterationTrace> {
    let n = v.grid().dim();
    if n != 3 {
        return Err(LabError::Invalid(format!(
            "the level iteration needs n = 3 (got n = {n}); use km_iteration_with_sigma for exploratory runs"
        )));
    }
    km_iteration_with_sigma(v, potential, x0, h0, theta, n as f64 / (n as f64 - 2.0), mu)
}

/// Level iteration with a caller-chosen weak exponent `σ`.
pub fn km_iteration_with_sigma(
    v: &GridFunction,
    potential: &ConvexPotential,
    x0: &Point,
    h0: f64,
    theta: f64,
    sigma: f64,
    mu: Option<&GridMeasure>,
) -> Result<KMIterationTrace> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(LabError::Invalid(format!("θ = {theta} must lie in (0,1)")));
    }
    if !(h0 > 0.0 && h0.is_finite()) {
        return Err(LabError::Invalid(format!("truncation {h0} must be positive")));
    }
    let grid = v.grid();
    let n = grid.dim() as f64;
    let weak = LorentzParams::weak(sigma)?;
    let gap = GapField::new(potential, grid, x0)?;
    let h_min = resolution_height(potential, grid)?;
    let mu_plus = mu.map(|m| m.positive_part());
    let cell_vol = grid.cell_volume();
    let values: Vec<f64> = (0..grid.num_cells()).map(|c| v.cell_value(c)).collect();

    let mut trace = KMIterationTrace {
        theta,
        sigma,
        heights: vec![h0],
        levels: vec![0.0],
        weak_norms: Vec::new(),
        claim_ratios: Vec::new(),
        l_inf: 0.0,
        depth: 0,
        increment_ratio: None,
        warning: None,
    };
    if gap.touches_boundary(&gap.mask(h0)) {
        trace.warning = Some(format!("section at h = {h0:.3e} is clipped; ladder is empty"));
        return Ok(trace);
    }
    let mut h = h0;
    for m in 0..KM_DEPTH {
        let next = 0.5 * h;
        if next < h_min && trace.warning.is_none() {
            trace.warning = Some(format!("ladder passed the resolution height {h_min:.3e}"));
        }
        let mask = gap.mask(next);
        let count = mask.count();
        if count == 0 {
            trace.warning = Some(format!("empty section at h = {next:.3e}"));
            break;
        }
        let l = trace.levels[m];
        let samples: Vec<(f64, f64)> = mask.indices().map(|c| ((values[c] - l).max(0.0), cell_vol)).collect();
        let norm = lorentz_norm_samples(&samples, &weak);
        let volume = count as f64 * cell_vol;
        let inc = norm / (theta * volume).powf(1.0 / sigma);
        trace.heights.push(next);
        trace.levels.push(l + inc);
        trace.weak_norms.push(norm);
        if m >= 1 {
            let prev_inc = l - trace.levels[m - 1];
            let mass = mu_plus.as_ref().map_or(0.0, |p| p.mass_on(&gap.closed_mask(h)).0);
            let den = theta.powf(2.0 / n) * prev_inc + theta.powf(-1.0 / sigma) * h.powf(1.0 - n / 2.0) * mass;
            trace.claim_ratios.push(if inc <= 0.0 {
                0.0
            } else if den > 0.0 {
                inc / den
            } else {
                f64::INFINITY
            });
        }
        h = next;
        if inc <= 1e-8 * (l + inc) {
            break;
        }
    }
    let incs: Vec<f64> = trace.increments().into_iter().filter(|&d| d > 0.0).collect();
    if let [.., a, b] = incs.as_slice() {
        trace.increment_ratio = Some(b / a);
    }
    trace.depth = trace.levels.len() - 1;
    trace.l_inf = *trace.levels.last().expect("nonempty");
    Ok(trace)
}

/// Reports for `v₊(x₀)` and `v₋(x₀)` with their Riesz profiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialEstimate {
    pub plus: EstimateReport,
    pub minus: EstimateReport,
    pub riesz_plus: RieszProfile,
    pub riesz_minus: RieszProfile,
}

pub const POTENTIAL_ESTIMATE_ANCHOR: &str = "Theorem: local potential estimate";
pub const LP_LINF_ANCHOR: &str = "Corollary: L^p to L^infinity estimate";

/// `v_±(x₀) ≤ C (⨍_{S(h₀)∖S̄(h₀/2)} v_±^p)^{1/p} + C I_u^{μ±}(x₀, 2h₀)` with the minimal `C`.
///
/// Reports carry no ceiling; a divergent Riesz term is an automatic pass.
pub fn potential_estimate_report(
    v: &GridFunction,
    mu: &GridMeasure,
    potential: &ConvexPotential,
    x0: &Point,
    h0: f64,
    p: f64,
) -> Result<PotentialEstimate> {
    if !(p > 0.0) {
        return Err(LabError::Invalid(format!("exponent p = {p} must be positive")));
    }
    let grid = v.grid();
    let gap = GapField::new(potential, grid, x0)?;
    require_unclipped(&gap, 2.0 * h0)?;
    let annulus = gap.mask(h0).minus(&gap.closed_mask(0.5 * h0));
    if annulus.count() == 0 {
        return Err(LabError::Resolution { height: h0 });
    }
    let riesz_plus = riesz_potential(&mu.positive_part(), potential, x0, 2.0 * h0)?;
    let riesz_minus = riesz_potential(&mu.negative_part(), potential, x0, 2.0 * h0)?;
    let centre_value = v.node_value(gap.center_node());
    let build = |sign: f64, riesz: &RieszProfile, id: &str| {
        let part = v.map(|x| (sign * x).max(0.0));
        let avg = lp_average_on(&part, &annulus, p);
        let terms = vec![
            Term::new("annulus_lp_average", avg, "lp_average_on(S(h0) minus closed S(h0/2))"),
            Term::new("riesz_potential", riesz.value, "riesz_potential(x0, 2 h0)"),
        ];
        let report = EstimateReport::new(id, POTENTIAL_ESTIMATE_ANCHOR, (sign * centre_value).max(0.0), terms, f64::INFINITY);
        if riesz.divergent {
            report.with_status(Status::Pass, "Riesz potential diverges at resolution; automatic pass")
        } else {
            report
        }
    };
    Ok(PotentialEstimate {
        plus: build(1.0, &riesz_plus, "potential_estimate_plus"),
        minus: build(-1.0, &riesz_minus, "potential_estimate_minus"),
        riesz_plus,
        riesz_minus,
    })
}

/// `‖v‖_{L^∞(S(h₀))} ≤ C (‖v‖_{L^p(S(2h₀))} + M̂ h₀^{ε̂})` with `(M̂, ε̂)` fitted at `x₀`.
pub fn lp_linf_report(
    v: &GridFunction,
    mu: &GridMeasure,
    potential: &ConvexPotential,
    x0: &Point,
    h0: f64,
    p: f64,
) -> Result<EstimateReport> {
    if !(p > 0.0) {
        return Err(LabError::Invalid(format!("exponent p = {p} must be positive")));
    }
    let grid = v.grid();
    let gap = GapField::new(potential, grid, x0)?;
    require_unclipped(&gap, 2.0 * h0)?;
    let inner = gap.mask(h0);
    if inner.count() == 0 {
        return Err(LabError::Resolution { height: h0 });
    }
    let mut on_section = vec![false; grid.num_nodes()];
    for c in inner.indices() {
        let (corners, k) = grid.cell_corners(c);
        for &i in &corners[..k] {
            on_section[i] = true;
        }
    }
    let lhs = (0..grid.num_nodes())
        .filter(|&i| on_section[i])
        .map(|i| v.node_value(i).abs())
        .fold(0.0, f64::max);
    let lp = lp_norm_on(v, &gap.mask(2.0 * h0), p);
    let lp_term = Term::new("lp_norm", lp, "lp_norm_on(S(2 h0))");

    if mu.total_variation() == 0.0 {
        return Ok(EstimateReport::new("lp_to_linf", LP_LINF_ANCHOR, lhs, vec![lp_term], f64::INFINITY)
            .with_note("zero measure; growth term vanishes"));
    }
    let h_min = resolution_height(potential, grid)?;
    let heights: Vec<f64> = (0..6).map(|j| 2.0 * h0 * 0.5f64.powi(j)).filter(|&h| h >= 2.0 * h_min).collect();
    let skipped = |status, note: &str| {
        EstimateReport::new("lp_to_linf", LP_LINF_ANCHOR, lhs, vec![lp_term.clone()], f64::INFINITY).with_status(status, note)
    };
    if heights.len() < 4 {
        return Ok(skipped(Status::SkippedResolution, "fewer than four resolved heights for the growth fit"));
    }
    let fit = match growth_fit(mu, potential, x0, &heights) {
        Ok(f) => f,
        Err(LabError::Fit(_)) => {
            return Ok(EstimateReport::new("lp_to_linf", LP_LINF_ANCHOR, lhs, vec![lp_term], f64::INFINITY)
                .with_note("measure has no mass near x0; growth term vanishes"))
        }
        Err(e) => return Err(e),
    };
    if fit.eps_hat <= 0.0 {
        return Ok(skipped(
            Status::SkippedHypothesis,
            &format!("fitted growth exponent eps = {:.4} is not positive", fit.eps_hat),
        ));
    }
    let growth = fit.m_hat * h0.powf(fit.eps_hat);
    Ok(EstimateReport::new(
        "lp_to_linf",
        LP_LINF_ANCHOR,
        lhs,
        vec![lp_term, Term::new("growth_term", growth, "growth_fit M h0^eps")],
        f64::INFINITY,
    )
    .with_note(&format!("M = {:.4e}, eps = {:.4}", fit.m_hat, fit.eps_hat)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GapField;
    use std::f64::consts::PI;

    fn origin() -> Point {
        [0.0; 3]
    }

    fn lebesgue(grid: &Grid) -> GridMeasure {
        GridMeasure::from_density(&GridFunction::from_cells_fn(grid, |_| 1.0)).unwrap()
    }

    #[test]
    fn lebesgue_plane_potential_is_linear() {
        let grid = Grid::new(2, -1.0, 1.0, 257).unwrap();
        let u = ConvexPotential::isotropic(2).unwrap();
        let h0 = 0.2;
        let prof = riesz_potential(&lebesgue(&grid), &u, &origin(), h0).unwrap();
        // μ(S(h)) = 2πh, so the integrand is the constant 2π
        let want = 2.0 * PI * (h0 - prof.h_min);
        assert!((prof.value - want).abs() < 2e-3 * want, "{} vs {want}", prof.value);
        assert!(!prof.divergent);
        assert!(prof.table.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn atom_diverges_in_three_dimensions() {
        let grid = Grid::new(3, -1.0, 1.0, 65).unwrap();
        let u = ConvexPotential::isotropic(3).unwrap();
        let x0 = origin();
        let mu = GridMeasure::atom(&grid, grid.node_at(&x0).unwrap(), 1.0);
        let prof = riesz_potential(&mu, &u, &x0, 0.1).unwrap();
        assert!(prof.divergent);
        // step integral of the constant 1 against h^{-3/2}
        let want = 2.0 * (prof.h_min.powf(-0.5) - 0.1f64.powf(-0.5));
        assert!((prof.value - want).abs() < 1e-12 * want);
    }

    #[test]
    fn classical_reduction_for_quadratic() {
        let grid = Grid::new(3, -1.0, 1.0, 33).unwrap();
        let u = ConvexPotential::isotropic(3).unwrap();
        let x0 = origin();
        let mu = GridMeasure::from_density(&GridFunction::from_cells_fn(&grid, |p| 1.0 + p[0] * p[0])).unwrap();
        let h0 = 0.2;
        let prof = riesz_potential(&mu, &u, &x0, h0).unwrap();
        let ball = classical_riesz_potential(&mu, &x0, (2.0 * h0).sqrt(), (2.0 * prof.h_min).sqrt()).unwrap();
        let scaled = 2f64.powf(1.5) * ball;
        assert!((prof.value - scaled).abs() < 1e-3 * scaled, "{} vs {scaled}", prof.value);
    }

    #[test]
    fn dyadic_sum_geometric_series() {
        let grid = Grid::new(2, -1.0, 1.0, 257).unwrap();
        let u = ConvexPotential::isotropic(2).unwrap();
        let h0 = 0.1;
        let d = dyadic_sum(&lebesgue(&grid), &u, &origin(), h0, 60).unwrap();
        // Σ 2π h_m → 4π h₀
        assert!((d.total() - 4.0 * PI * h0).abs() < 0.01 * 4.0 * PI * h0, "{}", d.total());
        assert!((d.lower_ratio - 2.0).abs() < 0.05);
        assert!((d.upper_ratio - 1.0).abs() < 0.05);
        let zero = dyadic_sum(&GridMeasure::zero(&grid), &u, &origin(), h0, 10).unwrap();
        assert_eq!(zero.total(), 0.0);
        let far = GridMeasure::from_density(&GridFunction::from_cells_fn(&grid, |p| if p[0] > 0.8 { 1.0 } else { 0.0 })).unwrap();
        assert_eq!(dyadic_sum(&far, &u, &origin(), h0, 10).unwrap().partial, 0.0);
    }

    #[test]
    fn clipped_outer_section_rejected() {
        let grid = Grid::new(2, -1.0, 1.0, 33).unwrap();
        let u = ConvexPotential::isotropic(2).unwrap();
        assert!(matches!(dyadic_sum(&lebesgue(&grid), &u, &origin(), 0.4, 5), Err(LabError::Clipped { .. })));
        assert!(matches!(riesz_potential(&lebesgue(&grid), &u, &origin(), 0.6), Err(LabError::Clipped { .. })));
    }

    #[test]
    fn km_constant_function() {
        let grid = Grid::new(3, -1.0, 1.0, 17).unwrap();
        let u = ConvexPotential::isotropic(3).unwrap();
        let c = 2.5;
        let v = GridFunction::from_nodes_fn(&grid, |_| c);
        let theta = 0.1;
        let t = km_iteration(&v, &u, &origin(), 0.2, theta, None).unwrap();
        assert!((t.levels[1] - theta.powf(-1.0 / 3.0) * c).abs() < 1e-12);
        assert!(t.increments()[1..].iter().all(|&d| d == 0.0));
        assert!(t.l_inf >= c);
        let zero = km_iteration(&GridFunction::from_nodes_fn(&grid, |_| 0.0), &u, &origin(), 0.2, theta, None).unwrap();
        assert!(zero.levels.iter().all(|&l| l == 0.0));
        let flat = GridFunction::from_nodes_fn(&Grid::new(2, -1.0, 1.0, 17).unwrap(), |_| 1.0);
        assert!(km_iteration(&flat, &ConvexPotential::isotropic(2).unwrap(), &origin(), 0.2, theta, None).is_err());
    }

    #[test]
    fn km_levels_nondecreasing_and_monotone_in_data() {
        let grid = Grid::new(3, -1.0, 1.0, 17).unwrap();
        let u = ConvexPotential::isotropic(3).unwrap();
        let a = GridFunction::from_nodes_fn(&grid, |p| 1.0 - p[0] - 0.5 * p[1]);
        let b = GridFunction::from_nodes_fn(&grid, |p| 0.5 + p[2]);
        let ab = a.zip_with(&b, f64::max).unwrap();
        let ta = km_iteration(&a, &u, &origin(), 0.3, 0.1, None).unwrap();
        let tab = km_iteration(&ab, &u, &origin(), 0.3, 0.1, None).unwrap();
        assert!(ta.levels.windows(2).all(|w| w[1] >= w[0]));
        for (x, y) in ta.levels.iter().zip(&tab.levels) {
            assert!(y >= x);
        }
        assert!(ta.l_inf >= 1.0 - 0.2);
    }

    #[test]
    fn estimate_is_homogeneous() {
        let grid = Grid::new(2, -1.0, 1.0, 65).unwrap();
        let u = ConvexPotential::isotropic(2).unwrap();
        let v = GridFunction::from_nodes_fn(&grid, |p| 1.0 - p[0] * p[0] - p[1] * p[1]);
        let mu = lebesgue(&grid).scaled(4.0);
        let a = potential_estimate_report(&v, &mu, &u, &origin(), 0.1, 2.0).unwrap();
        let vs = v.map(|x| 3.0 * x);
        let b = potential_estimate_report(&vs, &mu.scaled(3.0), &u, &origin(), 0.1, 2.0).unwrap();
        assert!((a.plus.min_constant - b.plus.min_constant).abs() < 1e-8 * a.plus.min_constant);
        assert_eq!(a.minus.lhs, 0.0);
        let gap = GapField::new(&u, &grid, &origin()).unwrap();
        assert!(gap.mask(0.05).count() > 0);
    }

    #[test]
    fn lp_linf_for_constants() {
        let grid = Grid::new(2, -1.0, 1.0, 65).unwrap();
        let u = ConvexPotential::isotropic(2).unwrap();
        let v = GridFunction::from_nodes_fn(&grid, |_| -2.0);
        let r = lp_linf_report(&v, &GridMeasure::zero(&grid), &u, &origin(), 0.1, 2.0).unwrap();
        assert_eq!(r.lhs, 2.0);
        let gap = GapField::new(&u, &grid, &origin()).unwrap();
        let vol = gap.mask(0.2).count() as f64 * grid.cell_volume();
        // ‖c‖_{L^2(S)} = |c| |S|^{1/2}
        assert!((r.min_constant - vol.powf(-0.5)).abs() < 1e-12);
        let atom = GridMeasure::atom(&grid, gap.center_node(), 1.0);
        let r = lp_linf_report(&v, &atom, &u, &origin(), 0.1, 2.0).unwrap();
        assert_eq!(r.status, Status::SkippedHypothesis);
    }
}
