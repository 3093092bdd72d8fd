//! Exact Lorentz quasi-norms of grid functions and the Monge-Ampère energy seminorm.
//!
//! A grid function takes finitely many values, so its distribution function
//! `λ(t) = |{|f| >= t}|` is a right-continuous step function. Between two
//! consecutive distinct values `a_{k+1} < t <= a_k` it equals the cumulative
//! weight `W_k` of the cells with `|f| >= a_k`, and the defining integral
//!
//! ```text
//! ||f||_{p,q} = p^{1/q} ( ∫_0^∞ t^q λ(t)^{q/p} dt/t )^{1/q}
//! ```
//!
//! collapses to `(p/q)^{1/q} ( Σ_k W_k^{q/p} (a_k^q - a_{k+1}^q) )^{1/q}`.
//! For `q = ∞` the supremum is attained at the values: `max_k a_k W_k^{1/p}`.

use crate::element::Q1Element;
use crate::error::{LabError, Result};
use crate::field::GridFunction;
use crate::grid::CellMask;
use crate::potentials::CofactorField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzParams {
    p: f64,
    q: f64,
}

impl LorentzParams {
    /// `0 < p, q <= ∞`; `p = ∞` is accepted only together with `q = ∞` (the sup norm),
    /// since `L^{∞,q}` is trivial for finite `q`.
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p > 0.0) || !(q > 0.0) || p.is_nan() || q.is_nan() {
            return Err(LabError::Invalid(format!("Lorentz exponents ({p}, {q}) must be positive")));
        }
        if p.is_infinite() && q.is_finite() {
            return Err(LabError::Invalid(format!("L^(inf,{q}) is trivial; use q = inf")));
        }
        Ok(Self { p, q })
    }

    /// `L^{p,p} = L^p`.
    pub fn strong(p: f64) -> Result<Self> {
        Self::new(p, p)
    }

    /// Weak `L^p`, i.e. `L^{p,∞}`.
    pub fn weak(p: f64) -> Result<Self> {
        Self::new(p, f64::INFINITY)
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
}

/// `C_{p,q} = 2^{1/p} max{1, 2^{1/q - 1}}`.
pub fn quasi_triangle_constant(params: &LorentzParams) -> f64 {
    let (p, q) = (params.p, params.q);
    2f64.powf(1.0 / p) * 1f64.max(2f64.powf(1.0 / q - 1.0))
}

/// `|{x in region : |f(x)| >= t}|`.
pub fn distribution_function(f: &GridFunction, t: f64) -> f64 {
    distribution(&f.samples(), t)
}

pub fn distribution(samples: &[(f64, f64)], t: f64) -> f64 {
    samples.iter().filter(|(v, _)| v.abs() >= t).map(|(_, w)| w).sum()
}

pub fn lorentz_norm(f: &GridFunction, params: &LorentzParams) -> f64 {
    lorentz_norm_samples(&f.samples(), params)
}

/// Lorentz norm of `f` restricted to `mask`.
pub fn lorentz_norm_on(f: &GridFunction, mask: &CellMask, params: &LorentzParams) -> f64 {
    lorentz_norm_samples(&f.samples_on(mask), params)
}

/// Distinct nonzero magnitudes in decreasing order with cumulative weights.
fn steps(samples: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut vals: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(v, w)| (v.abs(), w))
        .filter(|&(a, w)| a > 0.0 && w > 0.0)
        .collect();
    vals.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut cum = 0.0;
    for (a, w) in vals {
        cum += w;
        match out.last_mut() {
            Some(last) if last.0 == a => last.1 = cum,
            _ => out.push((a, cum)),
        }
    }
    out
}

pub fn lorentz_norm_samples(samples: &[(f64, f64)], params: &LorentzParams) -> f64 {
    let (p, q) = (params.p, params.q);
    let steps = steps(samples);
    if steps.is_empty() {
        return 0.0;
    }
    if p.is_infinite() {
        return steps[0].0;
    }
    if q.is_infinite() {
        return steps
            .iter()
            .map(|&(a, w)| a * w.powf(1.0 / p))
            .fold(0.0, f64::max);
    }
    let mut sum = 0.0;
    for (k, &(a, w)) in steps.iter().enumerate() {
        let next = steps.get(k + 1).map_or(0.0, |s| s.0);
        sum += w.powf(q / p) * (a.powf(q) - next.powf(q));
    }
    (p / q).powf(1.0 / q) * sum.powf(1.0 / q)
}

/// Direct `(Σ |f|^p w)^{1/p}` (or the max for `p = ∞`).
pub fn lp_norm_samples(samples: &[(f64, f64)], p: f64) -> f64 {
    if p.is_infinite() {
        return samples.iter().map(|(v, _)| v.abs()).fold(0.0, f64::max);
    }
    samples.iter().map(|(v, w)| v.abs().powf(p) * w).sum::<f64>().powf(1.0 / p)
}

pub fn lp_norm(f: &GridFunction, p: f64) -> f64 {
    lp_norm_samples(&f.samples(), p)
}

pub fn lp_norm_on(f: &GridFunction, mask: &CellMask, p: f64) -> f64 {
    lp_norm_samples(&f.samples_on(mask), p)
}

/// `(⨍_mask |f|^p)^{1/p}`.
pub fn lp_average_on(f: &GridFunction, mask: &CellMask, p: f64) -> f64 {
    let s = f.samples_on(mask);
    let vol: f64 = s.iter().map(|(_, w)| w).sum();
    if vol == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return lp_norm_samples(&s, p);
    }
    (s.iter().map(|(v, w)| v.abs().powf(p) * w).sum::<f64>() / vol).powf(1.0 / p)
}

/// Exponents for the Hölder-type inequality `||fg||_{p,q} <= C ||f||_{p1,q1} ||g||_{p2,q2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderExponents {
    pub p1: f64,
    pub q1: f64,
    pub p2: f64,
    pub q2: f64,
}

impl HolderExponents {
    /// Target exponents `(p, q)` with `1/p = 1/p1 + 1/p2`, `1/q = 1/q1 + 1/q2`.
    pub fn target(&self) -> Result<LorentzParams> {
        let p = 1.0 / (1.0 / self.p1 + 1.0 / self.p2);
        let q = 1.0 / (1.0 / self.q1 + 1.0 / self.q2);
        if !(p >= 1.0) || !(q >= 1.0) {
            return Err(LabError::Invalid(format!(
                "Hölder exponents give p = {p}, q = {q} outside the admissible range"
            )));
        }
        LorentzParams::new(p, q)
    }
}

/// Worst observed ratios of the three Lorentz properties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzPropertyReport {
    /// `||f|| / ||g||` when `0 <= f <= g`; `None` if the hypothesis fails.
    pub monotone_ratio: Option<f64>,
    /// `||f + g|| / (||f|| + ||g||)`.
    pub quasi_triangle_ratio: f64,
    pub quasi_triangle_constant: f64,
    /// `||fg|| / (||f||_{p1,q1} ||g||_{p2,q2})`, when exponents are supplied.
    pub holder_ratio: Option<f64>,
}

impl LorentzPropertyReport {
    pub fn quasi_triangle_holds(&self) -> bool {
        self.quasi_triangle_ratio <= self.quasi_triangle_constant * (1.0 + 1e-12)
    }
}

/// Evaluate properties (i)-(iii) on one pair of grid functions sampled on the same cells.
pub fn check_lorentz_properties(
    f: &GridFunction,
    g: &GridFunction,
    params: &LorentzParams,
    holder: Option<HolderExponents>,
) -> Result<LorentzPropertyReport> {
    let fs = f.samples();
    let gs = g.samples();
    if fs.len() != gs.len() {
        return Err(LabError::Invalid("functions have different regions".into()));
    }
    let norm = |s: &[(f64, f64)], p: &LorentzParams| lorentz_norm_samples(s, p);
    let nf = norm(&fs, params);
    let ng = norm(&gs, params);

    let monotone = fs.iter().zip(&gs).all(|(a, b)| 0.0 <= a.0 && a.0 <= b.0);
    let monotone_ratio = monotone.then(|| if ng > 0.0 { nf / ng } else { 0.0 });

    let sum: Vec<(f64, f64)> = fs.iter().zip(&gs).map(|(a, b)| (a.0 + b.0, a.1)).collect();
    let denom = nf + ng;
    let quasi_triangle_ratio = if denom > 0.0 { norm(&sum, params) / denom } else { 0.0 };

    let holder_ratio = match holder {
        Some(h) => {
            let target = h.target()?;
            let prod: Vec<(f64, f64)> = fs.iter().zip(&gs).map(|(a, b)| (a.0 * b.0, a.1)).collect();
            let d = norm(&fs, &LorentzParams::new(h.p1, h.q1)?) * norm(&gs, &LorentzParams::new(h.p2, h.q2)?);
            Some(if d > 0.0 { norm(&prod, &target) / d } else { 0.0 })
        }
        None => None,
    };

    Ok(LorentzPropertyReport {
        monotone_ratio,
        quasi_triangle_ratio,
        quasi_triangle_constant: quasi_triangle_constant(params),
        holder_ratio,
    })
}

/// `∫_region U Dv·Dv` with the bilinear/trilinear element integration used by the solver.
pub fn energy(v: &GridFunction, u: &CofactorField, region: &CellMask) -> f64 {
    energy_pair(v, v, u, region)
}

/// `∫_region U Dv·Dw`.
pub fn energy_pair(v: &GridFunction, w: &GridFunction, u: &CofactorField, region: &CellMask) -> f64 {
    let grid = v.grid();
    let elem = Q1Element::new(grid.dim());
    let vn = v.to_nodal();
    let wn = w.to_nodal();
    let h = grid.spacing();
    let mut total = 0.0;
    let mut a = [0.0; 8];
    let mut b = [0.0; 8];
    for cell in region.indices() {
        let (corners, k) = grid.cell_corners(cell);
        for i in 0..k {
            a[i] = vn.values()[corners[i]];
            b[i] = wn.values()[corners[i]];
        }
        total += elem.bilinear(u.at(cell), h, &a[..k], &b[..k]);
    }
    total
}

/// `||Dv||_u = (∫_region U Dv·Dv)^{1/2}`.
pub fn energy_seminorm(v: &GridFunction, u: &CofactorField, region: &CellMask) -> f64 {
    energy(v, u, region).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use rand::{Rng, SeedableRng};

    fn unit_square(n: usize) -> Grid {
        Grid::new(2, 0.0, 1.0, n).unwrap()
    }

    #[test]
    fn distribution_of_constant() {
        let g = unit_square(9);
        let f = GridFunction::from_cells_fn(&g, |_| -2.5);
        assert!((distribution_function(&f, 2.5) - 1.0).abs() < 1e-14);
        assert!((distribution_function(&f, 0.0) - 1.0).abs() < 1e-14);
        assert_eq!(distribution_function(&f, 2.5000001), 0.0);
    }

    #[test]
    fn distribution_at_median() {
        let g = unit_square(33);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let vals: Vec<f64> = (0..g.num_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = GridFunction::cellwise(&g, vals.clone()).unwrap();
        let mut mags: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
        mags.sort_by(f64::total_cmp);
        let median = mags[mags.len() / 2];
        let d = distribution_function(&f, median);
        assert!((d - 0.5).abs() <= g.cell_volume() + 1e-12);
    }

    #[test]
    fn indicator_closed_form() {
        let g = unit_square(17);
        let f = GridFunction::from_cells_fn(&g, |p| if p[0] < 0.25 { 1.0 } else { 0.0 });
        let e: f64 = 0.25;
        for (p, q) in [(1.0, 1.0), (2.0, 3.0), (3.0, 0.5), (1.5, 4.0)] {
            let got = lorentz_norm(&f, &LorentzParams::new(p, q).unwrap());
            let want = (p / q).powf(1.0 / q) * e.powf(1.0 / p);
            assert!((got - want).abs() <= 1e-12 * want);
        }
        let weak = lorentz_norm(&f, &LorentzParams::weak(2.0).unwrap());
        assert!((weak - 0.5).abs() < 1e-14);
    }

    #[test]
    fn sup_norm_and_invalid_params() {
        let g = unit_square(9);
        let f = GridFunction::from_cells_fn(&g, |p| p[0] - 0.7);
        let sup = lorentz_norm(&f, &LorentzParams::new(f64::INFINITY, f64::INFINITY).unwrap());
        assert!((sup - lp_norm(&f, f64::INFINITY)).abs() < 1e-15);
        assert!(LorentzParams::new(f64::INFINITY, 2.0).is_err());
        assert!(LorentzParams::new(0.0, 2.0).is_err());
    }

    #[test]
    fn quasi_constant_value() {
        let c = quasi_triangle_constant(&LorentzParams::new(3.0, 2.0).unwrap());
        assert!((c - 2f64.powf(1.0 / 3.0)).abs() < 1e-15);
        let c = quasi_triangle_constant(&LorentzParams::new(2.0, 0.5).unwrap());
        assert!((c - 2f64.sqrt() * 2.0).abs() < 1e-14);
    }

    #[test]
    fn energy_of_sine_mode() {
        let g = unit_square(129);
        let v = GridFunction::from_nodes_fn(&g, |p| {
            (std::f64::consts::PI * p[0]).sin() * (std::f64::consts::PI * p[1]).sin()
        });
        let u = CofactorField::identity(&g);
        let e = energy(&v, &u, &g.domain_mask());
        let want = std::f64::consts::PI.powi(2) / 2.0;
        assert!((e - want).abs() < 0.01 * want, "{e}");
    }

    #[test]
    fn energy_of_linear_function_is_exact() {
        let g = unit_square(17);
        let v = GridFunction::from_nodes_fn(&g, |p| 2.0 * p[0] - p[1]);
        let m = [[3.0, 0.5, 0.0], [0.5, 2.0, 0.0], [0.0; 3]];
        let u = CofactorField::constant(&g, m);
        // Dv = (2, -1): U Dv·Dv = 12 - 2 + 2 = 12 over unit area
        let e = energy(&v, &u, &g.domain_mask());
        assert!((e - 12.0).abs() < 1e-11);
    }
}
