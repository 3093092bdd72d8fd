use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{MeasureSpec, PotentialSpec, ScenarioConfig, WeightedMeasure};
use super::{ReportBundle, ScenarioInfo, SolveRecord};
use crate::error::{LabError, Result};
use crate::field::GridFunction;
use crate::geometry::{area_lemma_ratio, engulfing_check, ConvexBody, GapField, Polytope};
use crate::grid::{CellMask, Grid, Point};
use crate::measures::{counterexample_flux, sphere_area, GridMeasure};
use crate::norms::{check_lorentz_properties, energy_pair, HolderExponents, LorentzParams};
use crate::potential_theory::{
    classical_riesz_potential, dyadic_sum, km_iteration, lp_linf_report, potential_estimate_report, resolution_height,
    riesz_potential, LP_LINF_ANCHOR, POTENTIAL_ESTIMATE_ANCHOR,
};
use crate::potentials::{cofactor_field, ConvexPotential};
use crate::regularity::{
    caccioppoli_profile, dyadic_heights, energy_decay_profile, functional_inequality_suite, holder_theorem_report,
    Bracket, HolderProblem, InequalityKind, RandomSmoothField, SuiteParams, HOLDER_DIVERGENCE_ANCHOR,
    HOLDER_MEASURE_ANCHOR,
};
use crate::report::{EstimateReport, Status, Term};
use crate::solver::{poisson_modify, solve_dirichlet, DirichletProblem, SolveResult};

const CLASSICAL_ANCHOR: &str = "Classical case: U = I reduces to the Laplacian";
const COUNTEREXAMPLE_ANCHOR: &str = "Remark: the growth condition cannot be dropped";
const DYADIC_ANCHOR: &str = "Lemma: dyadic comparison of the Riesz potential";
const LORENTZ_ANCHOR: &str = "Lemma: properties of Lorentz quasi-norms";
const AREA_ANCHOR: &str = "Lemma: surface area of convex bodies";
const ENGULFING_ANCHOR: &str = "Lemma: engulfing property of sections";
const ENERGY_DECAY_ANCHOR: &str = "Lemma: energy decay for homogeneous solutions";
const KM_ANCHOR: &str = "Theorem: local potential estimate, level iteration";
const POISSON_ANCHOR: &str = "Lemma: Poisson modification";
const SUITE_ANCHOR: &str = "Section inequalities: Sobolev, Poincare, local boundedness, weak Harnack, Holder";

pub(super) fn catalog() -> Vec<ScenarioInfo> {
    vec![
        ScenarioInfo {
            id: "laplacian-reduction",
            anchor: CLASSICAL_ANCHOR,
            summary: "u = |x|^2/2: Riesz identity against the Euclidean potential and all section inequality suites with U = I",
            default_config: laplacian_config,
            run: laplacian_reduction,
        },
        ScenarioInfo {
            id: "potential-estimate-n3",
            anchor: POTENTIAL_ESTIMATE_ANCHOR,
            summary: "pointwise bound of v± by the annulus L^p average and the Riesz potential, 3 potentials x 3 measures x 2 heights",
            default_config: potential_estimate_config,
            run: potential_estimate,
        },
        ScenarioInfo {
            id: "counterexample-remark",
            anchor: COUNTEREXAMPLE_ANCHOR,
            summary: "flux of (div F)+ over B_{r_k} for F = (x/|x|) cos(|x|^-1) in n = 3, k = 1..5",
            default_config: counterexample_config,
            run: counterexample,
        },
        ScenarioInfo {
            id: "dyadic-riesz",
            anchor: DYADIC_ANCHOR,
            summary: "dyadic section sums against I(h0) and I(2h0) over a measure suite",
            default_config: dyadic_config,
            run: dyadic,
        },
        ScenarioInfo {
            id: "lorentz-properties",
            anchor: LORENTZ_ANCHOR,
            summary: "monotonicity, quasi-triangle and Holder ratios of Lorentz quasi-norms on random grid functions",
            default_config: lorentz_config,
            run: lorentz,
        },
        ScenarioInfo {
            id: "area-lemma",
            anchor: AREA_ANCHOR,
            summary: "|dX| r / (n |X|) on grid sections and random polytopes",
            default_config: area_config,
            run: area,
        },
        ScenarioInfo {
            id: "engulfing",
            anchor: ENGULFING_ANCHOR,
            summary: "largest dyadic eta with S(z, eta h) inside S(x1, h) and S(x2, h) for x1 on the boundary of S(x2, h)",
            default_config: engulfing_config,
            run: engulfing,
        },
        ScenarioInfo {
            id: "energy-decay",
            anchor: ENERGY_DECAY_ANCHOR,
            summary: "energy of homogeneous solutions on shrinking sections and the Caccioppoli side identity",
            default_config: energy_decay_config,
            run: energy_decay,
        },
        ScenarioInfo {
            id: "holder-measure",
            anchor: HOLDER_MEASURE_ANCHOR,
            summary: "Holder fit and constant for mu = f in L^q",
            default_config: holder_measure_config,
            run: holder,
        },
        ScenarioInfo {
            id: "holder-divergence",
            anchor: HOLDER_DIVERGENCE_ANCHOR,
            summary: "Holder fit and constant for mu = div F + f with div F >= 0",
            default_config: holder_divergence_config,
            run: holder,
        },
        ScenarioInfo {
            id: "km-iteration",
            anchor: KM_ANCHOR,
            summary: "level sequence l_m on dyadic sections, its claim ratios and the bound l_inf >= v+(x0)",
            default_config: km_config,
            run: km,
        },
        ScenarioInfo {
            id: "poisson-modification",
            anchor: POISSON_ANCHOR,
            summary: "ordering w <= v and the flux bound for the Poisson modification on an annulus",
            default_config: poisson_config,
            run: poisson,
        },
        ScenarioInfo {
            id: "lp-linf",
            anchor: LP_LINF_ANCHOR,
            summary: "sup of |v| on a section against the L^p norm and the measure growth term",
            default_config: lp_linf_config,
            run: lp_linf,
        },
        ScenarioInfo {
            id: "functional-inequalities",
            anchor: SUITE_ANCHOR,
            summary: "randomized instances of the five section inequality suites for a curved potential",
            default_config: suites_config,
            run: suites,
        },
    ]
}

fn density(base: f64, gradient: Point) -> MeasureSpec {
    MeasureSpec::Density {
        base,
        gradient,
        power: 0.0,
        radius: None,
        center: None,
    }
}

fn radial(power: f64) -> MeasureSpec {
    MeasureSpec::Density {
        base: 1.0,
        gradient: [0.0; 3],
        power,
        radius: None,
        center: None,
    }
}

fn atom(mollified: bool) -> MeasureSpec {
    MeasureSpec::Atom {
        mass: 1.0,
        center: None,
        mollified,
    }
}

fn registry_specs(dim: usize) -> Vec<PotentialSpec> {
    let quad = if dim == 2 {
        PotentialSpec::new("quadratic", &[("a", 2.0), ("b", 0.5)])
    } else {
        PotentialSpec::new("quadratic", &[("a", 1.5), ("b", 1.0), ("c", 2.0 / 3.0)])
    };
    vec![
        PotentialSpec::new("isotropic", &[]),
        quad,
        PotentialSpec::new("trig", &[("delta", 0.1), ("k", if dim == 2 { 4.0 } else { 2.0 })]),
    ]
}

fn config(id: &str, dim: usize, nodes: usize, heights: &[f64]) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(id, dim, nodes);
    c.heights = heights.to_vec();
    c.seed = 1;
    c
}

fn laplacian_config() -> ScenarioConfig {
    let mut c = config("laplacian-reduction", 2, 65, &[0.08, 0.3]);
    c.potentials = vec![PotentialSpec::new("isotropic", &[])];
    c.measures = vec![density(1.0, [0.0; 3]), density(1.0, [0.5, 0.25, 0.0]), radial(1.0)];
    c.instances = 6;
    c
}

fn signed_mixture() -> MeasureSpec {
    MeasureSpec::Combination {
        parts: vec![
            WeightedMeasure {
                weight: 0.2,
                measure: atom(true),
            },
            WeightedMeasure {
                weight: -1.0,
                measure: MeasureSpec::Density {
                    base: 6.0,
                    gradient: [0.0; 3],
                    power: 0.0,
                    radius: Some(0.2),
                    center: Some([0.3, 0.0, 0.0]),
                },
            },
        ],
    }
}

fn potential_estimate_config() -> ScenarioConfig {
    let mut c = config("potential-estimate-n3", 3, 33, &[0.08, 0.12]);
    c.potentials = registry_specs(3);
    c.measures = vec![density(1.0, [0.5, 0.0, 0.0]), atom(true), signed_mixture()];
    c
}

fn counterexample_config() -> ScenarioConfig {
    let mut c = config("counterexample-remark", 3, 17, &[]);
    c.instances = 5;
    c
}

fn dyadic_config() -> ScenarioConfig {
    let mut c = config("dyadic-riesz", 2, 129, &[0.05, 0.1]);
    c.potentials = registry_specs(2);
    c.measures = vec![
        density(1.0, [0.0; 3]),
        radial(-1.0),
        MeasureSpec::Density {
            base: 1.0,
            gradient: [0.0; 3],
            power: 0.0,
            radius: Some(0.15),
            center: Some([0.1, 0.05, 0.0]),
        },
        atom(true),
        atom(false),
    ];
    c
}

fn lorentz_config() -> ScenarioConfig {
    let mut c = config("lorentz-properties", 2, 33, &[]);
    c.instances = 200;
    c
}

fn area_config() -> ScenarioConfig {
    let mut c = config("area-lemma", 2, 129, &[0.05, 0.1, 0.2]);
    c.potentials = registry_specs(2);
    c.instances = 50;
    c
}

fn engulfing_config() -> ScenarioConfig {
    let mut c = config("engulfing", 2, 129, &[0.025, 0.05]);
    c.potentials = registry_specs(2);
    c
}

fn energy_decay_config() -> ScenarioConfig {
    let mut c = config("energy-decay", 2, 129, &[0.2]);
    c.potentials = registry_specs(2);
    c.instances = 3;
    c
}

fn holder_measure_config() -> ScenarioConfig {
    let mut c = config("holder-measure", 2, 129, &[0.08]);
    c.potentials = vec![PotentialSpec::new("isotropic", &[])];
    c.measures = vec![radial(-0.64)];
    c
}

fn holder_divergence_config() -> ScenarioConfig {
    let mut c = holder_measure_config();
    c.scenario = "holder-divergence".into();
    c.measures.push(MeasureSpec::DivField { scale: 1.0 });
    c
}

fn km_config() -> ScenarioConfig {
    let mut c = config("km-iteration", 3, 33, &[0.08, 0.12]);
    c.potentials = vec![PotentialSpec::new("isotropic", &[]), registry_specs(3)[2].clone()];
    c.measures = vec![density(1.0, [0.5, 0.0, 0.0]), atom(true)];
    c
}

fn poisson_config() -> ScenarioConfig {
    let mut c = config("poisson-modification", 2, 129, &[0.3]);
    c.potentials = vec![
        PotentialSpec::new("isotropic", &[]),
        PotentialSpec::new("trig", &[("delta", 0.1), ("k", 4.0)]),
        PotentialSpec::new("quadratic", &[("a", 1.2), ("b", 1.0 / 1.2)]),
    ];
    c.measures = vec![MeasureSpec::Combination {
        parts: vec![
            WeightedMeasure {
                weight: 1.0,
                measure: MeasureSpec::Density {
                    base: 20.0,
                    gradient: [0.0; 3],
                    power: 0.0,
                    radius: Some(0.2),
                    center: Some([0.05, 0.05, 0.0]),
                },
            },
            WeightedMeasure {
                weight: -1.0,
                measure: MeasureSpec::Density {
                    base: 4.0,
                    gradient: [0.0, 1.0, 0.0],
                    power: 0.0,
                    radius: Some(0.35),
                    center: Some([0.5, 0.0, 0.0]),
                },
            },
        ],
    }];
    c.instances = 20;
    c
}

fn lp_linf_config() -> ScenarioConfig {
    let mut c = config("lp-linf", 3, 49, &[0.15]);
    c.potentials = registry_specs(3);
    c.measures = vec![density(1.0, [0.5, 0.0, 0.0]), radial(-0.5)];
    c
}

fn suites_config() -> ScenarioConfig {
    let mut c = config("functional-inequalities", 2, 65, &[0.3]);
    c.potentials = vec![PotentialSpec::new("trig", &[("delta", 0.1), ("k", 4.0)])];
    c.instances = 8;
    c
}

fn require(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(LabError::Config(msg.into()))
    }
}

fn need_potentials(c: &ScenarioConfig) -> Result<Vec<ConvexPotential>> {
    require(!c.potentials.is_empty(), "scenario needs at least one potential")?;
    c.resolved_potentials()
}

fn need_heights(c: &ScenarioConfig, count: usize) -> Result<()> {
    require(c.heights.len() >= count, &format!("scenario needs at least {count} height(s)"))
}

fn solve(
    c: &ScenarioConfig,
    potential: &ConvexPotential,
    grid: &Grid,
    region: CellMask,
    mu: GridMeasure,
    boundary: GridFunction,
) -> Result<SolveResult> {
    let problem = DirichletProblem::new(region, cofactor_field(potential, grid)?, mu, boundary)?;
    solve_dirichlet(&problem, c.tolerances.solver)
}

/// A pass/fail check on a measured value against a threshold.
fn flag(id: &str, anchor: &str, value: f64, threshold: f64, ok: bool, note: &str) -> EstimateReport {
    EstimateReport::new(id, anchor, value, vec![Term::new("threshold", threshold, note)], f64::INFINITY)
        .with_status(Status::from_bool(ok), note)
}

fn skipped(id: &str, anchor: &str, status: Status, err: &LabError) -> EstimateReport {
    EstimateReport::new(id, anchor, 0.0, Vec::new(), f64::INFINITY).with_status(status, &err.to_string())
}

/// A skip report for hypothesis and resolution failures; other errors pass through.
fn skip_report(id: &str, anchor: &str, err: LabError) -> Result<EstimateReport> {
    match err {
        LabError::Clipped { .. } | LabError::Sign { .. } | LabError::Disconnected { .. } => {
            Ok(skipped(id, anchor, Status::SkippedHypothesis, &err))
        }
        LabError::Resolution { .. } | LabError::Fit(_) => Ok(skipped(id, anchor, Status::SkippedResolution, &err)),
        other => Err(other),
    }
}

fn skip_or_fail(bundle: &mut ReportBundle, id: &str, anchor: &str, err: LabError) -> Result<()> {
    bundle.results.push(skip_report(id, anchor, err)?);
    Ok(())
}

fn laplacian_reduction(c: &ScenarioConfig, b: &mut ReportBundle) -> Result<()> {
    let pots = need_potentials(c)?;
    require(pots.len() == 1 && pots[0].name() == "isotropic", "laplacian-reduction runs with the isotropic potential only")?;
    need_heights(c, 2)?;
    let u = &pots[0];
    let grid = c.grid()?;
    let n = c.dim as f64;
    let mut rows = String::from("measure,h0,I_u,I_euclid_scaled,relative_error\n");
    for spec in &c.measures {
        let mu = spec.build(&grid, u, &c.center)?;
        let prof = match riesz_potential(&mu, u, &c.center, c.heights[0]) {
            Ok(p) => p,
            Err(e) => {
                skip_or_fail(b, "riesz_identity", CLASSICAL_ANCHOR, e)?;
                continue;
            }
        };
        let ball = classical_riesz_potential(&mu, &c.center, (2.0 * c.heights[0]).sqrt(), (2.0 * prof.h_min).sqrt())?;
        let scaled = 2f64.powf(n / 2.0) * ball;
        let rel = (prof.value - scaled).abs() / prof.value.abs().max(f64::MIN_POSITIVE);
        rows.push_str(&format!("{},{},{:.12e},{:.12e},{rel:.3e}\n", spec.label(), c.heights[0], prof.value, scaled));
        b.bound("riesz_identity", CLASSICAL_ANCHOR, rel, "relative_tolerance", 1e-3, "I_u = 2^{n/2} I(x0, sqrt(2 h0))");
    }
    b.table("riesz_identity", rows);
    run_suites(c, u, &grid, c.heights[1], "suites", b)
}

fn run_suites(c: &ScenarioConfig, u: &ConvexPotential, grid: &Grid, h: f64, table: &str, b: &mut ReportBundle) -> Result<()> {
    let mut rows = String::from("suite,instance,lhs,rhs,min_constant,status\n");
    for kind in InequalityKind::all() {
        let mut params = SuiteParams::new(c.dim, c.center, h, c.instances, c.seed);
        params.p0 = c.exponents.p0;
        match functional_inequality_suite(kind, u, grid, &params) {
            Ok(suite) => {
                for (k, r) in suite.reports.into_iter().enumerate() {
                    rows.push_str(&format!(
                        "{},{k},{:.10e},{:.10e},{:.10e},{}\n",
                        kind.id(),
                        r.lhs,
                        r.rhs(),
                        r.min_constant,
                        r.status.as_str()
                    ));
                    b.push(r);
                }
                if kind == InequalityKind::HomogeneousHolder {
                    let worst = suite.exponents.iter().copied().fold(f64::INFINITY, f64::min);
                    b.results.push(flag(
                        "homogeneous_holder_exponent",
                        kind.anchor(),
                        worst,
                        0.0,
                        worst > 0.0,
                        "smallest fitted Holder exponent must be positive",
                    ));
                }
            }
            Err(e) => skip_or_fail(b, kind.id(), kind.anchor(), e)?,
        }
    }
    b.table(table, rows);
    Ok(())
}

struct EstimateCase {
    label: String,
    reports: Vec<(usize, EstimateReport, EstimateReport)>,
    km: Vec<(usize, EstimateReport, String)>,
    solve: SolveRecord,
    tables: Vec<(String, String)>,
}

fn nodal_tolerance(grid: &Grid, v: &GridFunction, node: usize) -> f64 {
    let value = v.values()[node];
    grid.node_cells(node)
        .iter()
        .flat_map(|&c| {
            let (corners, k) = grid.cell_corners(c);
            corners.into_iter().take(k)
        })
        .map(|j| (v.values()[j] - value).abs())
        .fold(0.0, f64::max)
}

fn potential_estimate(c: &ScenarioConfig, b: &mut ReportBundle) -> Result<()> {
    require(c.dim == 3, "potential-estimate-n3 needs dim = 3")?;
    need_heights(c, 1)?;
    let pots = need_potentials(c)?;
    require(!c.measures.is_empty(), "scenario needs at least one measure")?;
    let grid = c.grid()?;
    let center = grid
        .node_at(&c.center)
        .ok_or_else(|| LabError::Config("center must be a grid node".into()))?;
    let cases: Vec<(usize, usize)> = (0..pots.len()).flat_map(|i| (0..c.measures.len()).map(move |j| (i, j))).collect();
    let outs: Vec<Result<EstimateCase>> = cases
        .par_iter()
        .map(|&(i, j)| {
            let u = &pots[i];
            let mu = c.measures[j].build(&grid, u, &c.center)?;
            let label = format!("{}/{}", c.potentials[i].id, c.measures[j].label());
            let r = solve(c, u, &grid, grid.domain_mask(), mu.clone(), GridFunction::from_nodes_fn(&grid, |_| 0.0))?;
            let v = &r.solution;
            let mut case = EstimateCase {
                label: label.clone(),
                reports: Vec::new(),
                km: Vec::new(),
                solve: SolveRecord::new(&label, &r),
                tables: Vec::new(),
            };
            let tol = nodal_tolerance(&grid, v, center);
            for (hi, &h0) in c.heights.iter().enumerate() {
                match potential_estimate_report(v, &mu, u, &c.center, h0, c.exponents.p) {
                    Ok(est) => {
                        case.tables.push((format!("riesz_{i}_{j}_{hi}"), est.riesz_plus.to_csv()));
                        case.reports.push((hi, est.plus, est.minus));
                    }
                    Err(e) => {
                        let plus = skip_report("potential_estimate_plus", POTENTIAL_ESTIMATE_ANCHOR, e.clone())?;
                        let minus = skip_report("potential_estimate_minus", POTENTIAL_ESTIMATE_ANCHOR, e)?;
                        case.reports.push((hi, plus, minus));
                    }
                }
                if mu.is_nonnegative() {
                    let trace = km_iteration(v, u, &c.center, h0, c.exponents.theta, Some(&mu))?;
                    if trace.depth == 0 {
                        let note = trace.warning.clone().unwrap_or_else(|| "empty level ladder".into());
                        let rep = EstimateReport::new("km_lower_bound", KM_ANCHOR, 0.0, Vec::new(), 1.0)
                            .with_status(Status::SkippedHypothesis, &note);
                        case.km.push((hi, rep, trace.to_csv()));
                        continue;
                    }
                    let want = v.values()[center].max(0.0) - tol;
                    let rep = EstimateReport::new(
                        "km_lower_bound",
                        KM_ANCHOR,
                        want,
                        vec![Term::new("l_inf", trace.l_inf, "km_iteration")],
                        1.0,
                    );
                    case.km.push((hi, rep, trace.to_csv()));
                }
            }
            Ok(case)
        })
        .collect();
    for ((i, j), out) in cases.into_iter().zip(outs) {
        let case = out?;
        b.solves.push(case.solve);
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for (_, p, m) in case.reports {
            if p.lhs > 0.0 {
                plus.push(p.min_constant);
            }
            if m.lhs > 0.0 {
                minus.push(m.min_constant);
            }
            b.push(p.with_note(&case.label));
            b.push(m.with_note(&case.label));
        }
        for (name, csv) in case.tables {
            b.table(&name, csv);
        }
        for (hi, rep, csv) in case.km {
            b.table(&format!("km_{i}_{j}_{hi}"), csv);
            b.results.push(rep.with_note(&case.label));
        }
        for (sign, list) in [("plus", plus), ("minus", minus)] {
            if !list.is_empty() {
                b.stability(&format!("potential_estimate_{sign}/stability"), POTENTIAL_ESTIMATE_ANCHOR, &list);
                b.results.last_mut().expect("pushed").note = Some(case.label.clone());
            }
        }
    }
    Ok(())
}

fn counterexample(c: &ScenarioConfig, b: &mut ReportBundle) -> Result<()> {
    let n = 3;
    let floor = sphere_area(n) / 14.0;
    let mut rows = String::from("k,r_k,flux,tail_bound,bound,flux_over_r_k,periods\n");
    for k in 1..=c.instances as u32 {
        let f = counterexample_flux(1.0, n, k)?;
        rows.push_str(&format!(
            "{k},{:.12e},{:.12e},{:.6e},{:.12e},{:.12e},{}\n",
            f.r_k,
            f.flux,
            f.tail_bound,
            f.bound,
            f.flux / f.r_k,
            f.periods
        ));
        b.bound("counterexample_flux", COUNTEREXAMPLE_ANCHOR, f.bound, "flux", f.flux, "counterexample_flux");
        b.bound(
            "counterexample_flux_over_r",
            COUNTEREXAMPLE_ANCHOR,
            floor,
            "flux_over_r_k",
            f.flux / f.r_k.powi(n as i32 - 2),
            "counterexample_flux / r_k^{n-2}",
        );
    }
    b.table("counterexample_flux", rows);
    Ok(())
}

fn dyadic(c: &ScenarioConfig, b: &mut ReportBundle) -> Result<()> {
    need_heights(c, 1)?;
    let pots = need_potentials(c)?;
    let grid = c.grid()?;
    let mut rows = String::from("potential,measure,h0,partial,tail_estimate,I_h0,I_2h0,lower_ratio,upper_ratio\n");
    for (pi, u) in pots.iter().enumerate() {
        for spec in &c.measures {
            let mu = spec.build(&grid, u, &c.center)?;
            let mut lower = Vec::new();
            let mut upper = Vec::new();
            for &h0 in &c.heights {
                let d = match dyadic_sum(&mu, u, &c.center, h0, 40) {
                    Ok(d) => d,
                    Err(e) => {
                        skip_or_fail(b, "dyadic_sum", DYADIC_ANCHOR, e)?;
                        continue;
                    }
                };
                rows.push_str(&format!(
                    "{},{},{h0},{:.12e},{:.6e},{:.12e},{:.12e},{:.6e},{:.6e}\n",
                    c.potentials[pi].id,
                    spec.label(),
                    d.partial,
                    d.tail_estimate,
                    d.riesz_h0,
                    d.riesz_2h0,
                    d.lower_ratio,
                    d.upper_ratio
                ));
                let lo = EstimateReport::new(
                    "dyadic_lower",
                    DYADIC_ANCHOR,
                    d.riesz_h0,
                    vec![Term::new("dyadic_sum", d.partial, "dyadic_sum")],
                    f64::INFINITY,
                );
                let hi = EstimateReport::new(
                    "dyadic_upper",
                    DYADIC_ANCHOR,
                    d.partial,
                    vec![Term::new("riesz_2h0", d.riesz_2h0, "riesz_potential at 2h0")],
                    f64::INFINITY,
                );
                if lo.lhs > 0.0 {
                    lower.push(lo.min_constant);
                }
                if hi.lhs > 0.0 {
                    upper.push(hi.min_constant);
                }
                b.push(lo);
                b.push(hi);
            }
            b.stability("dyadic_lower/stability", DYADIC_ANCHOR, &lower);
            b.stability("dyadic_upper/stability", DYADIC_ANCHOR, &upper);
        }
    }
    b.table("dyadic_sums", rows);
    Ok(())
}

fn lorentz(c: &ScenarioConfig, b: &mut ReportBundle) -> Result<()> {
    let grid = c.grid()?;
    let (p, q) = (c.exponents.p, c.exponents.q);
    let params = LorentzParams::new(p, q)?;
    let holder = HolderExponents {
        p1: 2.0 * p,
        q1: 2.0 * q,
        p2: 2.0 * p,
        q2: 2.0 * q,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut rows = String::from("instance,monotone_ratio,quasi_triangle_ratio,C_pq,holder_ratio\n");
    let mut worst_holder: f64 = 0.0;
    for k in 0..c.instances {
        let g: Vec<f64> = (0..grid.num_cells())
            .map(|_| if rng.gen_bool(0.4) { rng.gen_range(0.0..4.0) } else { 0.0 })
            .collect();
        let f: Vec<f64> = g.iter().map(|x| x * rng.gen_range(0.0..1.0)).collect();
        let f = GridFunction::cellwise(&grid, f)?;
        let g = GridFunction::cellwise(&grid, g)?;
        let r = check_lorentz_properties(&f, &g, &params, Some(holder))?;
        let mono = r.monotone_ratio.unwrap_or(f64::NAN);
        let hold = r.holder_ratio.unwrap_or(f64::NAN);
        worst_holder = worst_holder.max(hold);
        rows.push_str(&format!(
            "{k},{mono:.12e},{:.12e},{:.12e},{hold:.12e}\n",
            r.quasi_triangle_ratio, r.quasi_triangle_constant
        ));
        b.bound("lorentz_monotone", LORENTZ_ANCHOR, mono, "one", 1.0 + 1e-12, "0 <= f <= g");
        b.bound(
            "lorentz_quasi_triangle",
            LORENTZ_ANCHOR,
            r.quasi_triangle_ratio,
            "C_pq",
            r.quasi_triangle_constant * (1.0 + 1e-12),
            "2^{1/p} max(1, 2^{1/q - 1})",
        );
    }
    b.push(EstimateReport::new(
        "lorentz_holder",
        LORENTZ_ANCHOR,
        worst_holder,
        vec![Term::new("unit", 1.0, "||fg|| / (||f|| ||g||)")],
        f64::INFINITY,
    ));
    b.table("lorentz_properties", rows);
    Ok(())
}

fn area(c: &ScenarioConfig, b: &mut ReportBundle) -> Result<()> {
    let pots = need_potentials(c)?;
    let grid = c.grid()?;
    let mut rows = String::from("body,h,volume,area,inradius,ratio\n");
    for (pi, u) in pots.iter().enumerate() {
        let gap = GapField::new(u, &grid, &c.center)?;
        for &h in &c.heights {
            let body = gap.section(h).and_then(|s| {
                if s.is_clipped() {
                    Err(LabError::Clipped { height: h })
                } else {
                    ConvexBody::from_section(&s)
                }
            });
            let body = match body {
                Ok(body) => body,
                Err(e) => {
                    skip_or_fail(b, "area_lemma_section", AREA_ANCHOR, e)?;
                    continue;
                }
            };
            let ratio = area_lemma_ratio(&body)?;
            rows.push_str(&format!(
                "{}@{h},{h},{:.12e},{:.12e},{:.12e},{ratio:.12e}\n",
                c.potentials[pi].id,
                body.volume(),
                body.surface_area()?,
                body.inradius()
            ));
            b.push(EstimateReport::new(
                "area_lemma_section",
                AREA_ANCHOR,
                ratio,
                vec![Term::new("one", 1.0, "|dX| r / (n |X|) <= 1")],
                f64::INFINITY,
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    for k in 0..c.instances {
        let pts: Vec<Point> = (0..8 + k % 8)
            .map(|_| {
                let mut p = [0.0; 3];
                for x in p.iter_mut().take(c.dim) {
                    *x = rng.gen_range(-1.0..1.0);
                }
                p
            })
            .collect();
        let poly = match Polytope::hull(c.dim, &pts) {
            Ok(p) => p,
            Err(e) => {
                skip_or_fail(b, "area_lemma_polytope", AREA_ANCHOR, e)?;
                continue;
            }
        };
        let body = ConvexBody::Polytope(poly);
        let ratio = area_lemma_ratio(&body)?;
        rows.push_str(&format!(
            "polytope{k},,{:.12e},{:.12e},{:.12e},{ratio:.12e}\n",
            body.volume(),
            body.surface_area()?,
            body.inradius()
        ));
        b.bound("area_lemma_polytope", AREA_ANCHOR, ratio, "one", 1.0 + 1e-9, "exact polytope geometry");
    }
    b.table("area_lemma", rows);
    Ok(())
}

fn engulfing(c: &ScenarioConfig, b: &mut ReportBundle) -> Result<()> {
    need_heights(c, 1)?;
    let pots = need_potentials(c)?;
    let grid = c.grid()?;
    let mut rows = String::from("potential,h,direction,eta,boundary_mismatch,candidates\n");
    let dirs: Vec<Point> = (0..4)
        .map(|k| {
            let t = std::f64::consts::FRAC_PI_4 * k as f64 + 0.3;
            [t.cos(), t.sin(), if c.dim == 3 { 0.5 } else { 0.0 }]
        })
        .collect();
    for (pi, u) in pots.iter().enumerate() {
        let gap = GapField::new(u, &grid, &c.center)?;
        let mut constants = Vec::new();
        for &h in &c.heights {
            for (k, d) in dirs.iter().enumerate() {
                let Some(node) = gap.level_node(h, d) else {
                    b.results.push(
                        EstimateReport::new("engulfing", ENGULFING_ANCHOR, 0.0, Vec::new(), f64::INFINITY)
                            .with_status(Status::SkippedResolution, "no grid node on the section boundary"),
                    );
                    continue;
                };
                let x1 = grid.node_coord(node);
                match engulfing_check(u, &grid, &x1, &c.center, h) {
                    Ok(r) => {
                        rows.push_str(&format!(
                            "{},{h},{k},{:.6e},{:.6e},{}\n",
                            c.potentials[pi].id, r.eta, r.boundary_mismatch, r.candidates
                        ));
                        let rep = EstimateReport::new(
                            "engulfing",
                            ENGULFING_ANCHOR,
                            1.0,
                            vec![Term::new("eta", r.eta, "engulfing_check")],
                            f64::INFINITY,
                        );
                        constants.push(rep.min_constant);
                        b.push(rep);
                    }
                    Err(e) => skip_or_fail(b, "engulfing", ENGULFING_ANCHOR, e)?,
                }
            }
        }
        b.stability("engulfing/stability", ENGULFING_ANCHOR, &constants);
    }
    b.table("engulfing", rows);
    Ok(())
}

fn energy_decay(c: &ScenarioConfig, b: &mut ReportBundle) -> Result<()> {
    need_heights(c, 1)?;
    let pots = need_potentials(c)?;
    let grid = c.grid()?;
    let n = c.dim as f64;
    let threshold = n / 2.0 - 1.0 + 0.05;
    let mut rows = String::from("potential,instance,slope,residual,euclidean_exponent\n");
    for (pi, u) in pots.iter().enumerate() {
        for k in 0..c.instances {
            let g = RandomSmoothField::new(c.dim, 4, c.seed.wrapping_add((pi * 1000 + k) as u64), false).sample(&grid);
            match energy_decay_profile(&g, u, &c.center, c.heights[0]) {
                Ok(d) => {
                    b.solves.push(SolveRecord::new(&format!("{}/{k}", c.potentials[pi].id), &d.solve));
                    rows.push_str(&format!(
                        "{},{k},{:.6e},{:.3e},{:.6e}\n",
                        c.potentials[pi].id, d.profile.slope, d.profile.residual, d.profile.euclidean_exponent
                    ));
                    b.table(&format!("energy_{pi}_{k}"), d.profile.to_csv());
                    b.bound("energy_decay_slope", ENERGY_DECAY_ANCHOR, threshold, "slope", d.profile.slope, "n/2 - 1 + 0.05 <= slope");
                }
                Err(e) => skip_or_fail(b, "energy_decay_slope", ENERGY_DECAY_ANCHOR, e)?,
            }
        }
        if u.is_quadratic() {
            let floor = resolution_height(u, &grid)?;
            let rhos = dyadic_heights(0.5 * c.heights[0], floor, 6);
            match caccioppoli_profile(u, &grid, &c.center, &rhos) {
                Ok(cp) => {
                    let dev = (cp.profile.slope - (n / 2.0 + 1.0)).abs();
                    b.table(&format!("caccioppoli_{pi}"), cp.profile.to_csv());
                    b.bound("caccioppoli_slope", ENERGY_DECAY_ANCHOR, dev, "tolerance", 0.1, "|slope - (n/2 + 1)|");
                }
                Err(e) => skip_or_fail(b, "caccioppoli_slope", ENERGY_DECAY_ANCHOR, e)?,
            }
        }
    }
    b.table("energy_decay", rows);
    Ok(())
}

fn holder(c: &ScenarioConfig, b: &mut ReportBundle) -> Result<()> {
    need_heights(c, 1)?;
    let pots = need_potentials(c)?;
    let u = &pots[0];
    let grid = c.grid()?;
    let mut density = None;
    let mut field = None;
    for spec in &c.measures {
        if let Some(f) = spec.density(&grid, &c.center) {
            density = Some(f);
        } else if let Some(f) = spec.div_field(&grid, u)? {
            field = Some(f);
        } else {
            return Err(LabError::Config(format!("Holder scenarios take density and div_field measures, not {}", spec.label())));
        }
    }
    let divergence = field.is_some();
    let anchor = if divergence { HOLDER_DIVERGENCE_ANCHOR } else { HOLDER_MEASURE_ANCHOR };
    let problem = HolderProblem {
        potential: u.clone(),
        grid: grid.clone(),
        x0: c.center,
        h0: c.heights[0],
        density,
        field,
        boundary: GridFunction::from_nodes_fn(&grid, |p| p[0] + 0.5 * p[1] * p[1]),
        p: c.exponents.p,
        q: c.exponents.q,
        bracket: Bracket::DataNorms,
        seed: c.seed,
    };
    let out = match holder_theorem_report(&problem) {
        Ok(o) => o,
        Err(e) => return skip_or_fail(b, "holder_constant", anchor, e),
    };
    b.solves.push(SolveRecord {
        label: "holder".into(),
        unknowns: out.solve.unknowns,
        iterations: out.solve.iterations,
        residual: out.solve.residual,
        converged: out.solve.residual <= c.tolerances.solver,
    });
    b.push(out.report.clone());
    b.results.push(flag(
        "holder_exponent",
        anchor,
        out.fit.exponent,
        0.0,
        out.fit.exponent > 0.0,
        "fitted Holder exponent must be positive",
    ));
    match (&out.growth, out.predicted_eps) {
        (Some(g), Some(pred)) => {
            let (ok, note) = if divergence {
                (g.eps_hat >= pred - 0.1, "predicted exponent is a lower bound for a smooth div part; eps_hat >= predicted - 0.1")
            } else {
                ((g.eps_hat - pred).abs() <= 0.1, "|eps_hat - predicted| <= 0.1")
            };
            b.results.push(flag("growth_exponent", anchor, g.eps_hat, pred, ok, note));
            let mut rows = String::from("h,mass\n");
            for (h, m) in g.heights.iter().zip(&g.masses) {
                rows.push_str(&format!("{h:.10e},{m:.10e}\n"));
            }
            b.table("growth", rows);
        }
        _ => b.results.push(
            EstimateReport::new("growth_exponent", anchor, 0.0, Vec::new(), f64::INFINITY)
                .with_status(Status::SkippedResolution, "growth fit unavailable"),
        ),
    }
    let mut rows = String::from("distance_lo,distance_hi,max_quotient,pairs\n");
    for (lo, hi, n) in &out.quotients.by_decade {
        rows.push_str(&format!("{lo:.6e},{hi:.6e},,{n}\n"));
    }
    b.table("quotients", rows);
    b.notes.push(format!("alpha proxy {:.4}, Holder fit exponent {:.4}", out.alpha_proxy, out.fit.exponent));
    Ok(())
}

fn km(c: &ScenarioConfig, b: &mut ReportBundle) -> Result<()> {
    require(c.dim == 3, "km-iteration needs dim = 3")?;
    need_heights(c, 1)?;
    let pots = need_potentials(c)?;
    let grid = c.grid()?;
    let center = grid
        .node_at(&c.center)
        .ok_or_else(|| LabError::Config("center must be a grid node".into()))?;
    for (pi, u) in pots.iter().enumerate() {
        for (mi, spec) in c.measures.iter().enumerate() {
            let mu = spec.build(&grid, u, &c.center)?;
            let label = format!("{}/{}", c.potentials[pi].id, spec.label());
            let r = solve(c, u, &grid, grid.domain_mask(), mu.clone(), GridFunction::from_nodes_fn(&grid, |_| 0.0))?;
            b.solves.push(SolveRecord::new(&label, &r));
            let v = &r.solution;
            let tol = nodal_tolerance(&grid, v, center);
            for (hi, &h0) in c.heights.iter().enumerate() {
                let trace = km_iteration(v, u, &c.center, h0, c.exponents.theta, Some(&mu))?;
                for (m, ratio) in trace.claim_ratios.iter().enumerate() {
                    b.push(
                        EstimateReport::new(
                            "km_claim",
                            KM_ANCHOR,
                            *ratio,
                            vec![Term::new("unit", 1.0, "increment / (theta^{2/n} previous + mass term)")],
                            f64::INFINITY,
                        )
                        .with_note(&format!("{label}, h0 = {h0}, m = {}", m + 1)),
                    );
                }
                if trace.depth == 0 {
                    let note = trace.warning.clone().unwrap_or_else(|| "empty level ladder".into());
                    b.results.push(
                        EstimateReport::new("km_lower_bound", KM_ANCHOR, 0.0, Vec::new(), 1.0)
                            .with_status(Status::SkippedHypothesis, &note),
                    );
                } else if mu.is_nonnegative() {
                    b.results.push(
                        EstimateReport::new(
                            "km_lower_bound",
                            KM_ANCHOR,
                            v.values()[center].max(0.0) - tol,
                            vec![Term::new("l_inf", trace.l_inf, "km_iteration")],
                            1.0,
                        )
                        .with_note(&label),
                    );
                }
                b.table(&format!("km_{pi}_{mi}_{hi}"), trace.to_csv());
            }
        }
    }
    Ok(())
}

fn poisson(c: &ScenarioConfig, b: &mut ReportBundle) -> Result<()> {
    require(c.dim == 2, "poisson-modification needs dim = 2")?;
    need_heights(c, 1)?;
    let pots = need_potentials(c)?;
    require(c.measures.len() == 1, "poisson-modification takes one signed measure")?;
    let grid = c.grid()?;
    let h0 = c.heights[0];
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut rows = String::from("potential,test,max_w_minus_v,flux,bound\n");
    for (pi, u) in pots.iter().enumerate() {
        let gap = GapField::new(u, &grid, &c.center)?;
        let section = gap.section(h0)?;
        if section.is_clipped() {
            skip_or_fail(b, "poisson_order", POISSON_ANCHOR, LabError::Clipped { height: h0 })?;
            continue;
        }
        let annulus = gap.mask(h0).minus(&gap.closed_mask(0.5 * h0));
        let mu = c.measures[0].build(&grid, u, &c.center)?;
        let g = RandomSmoothField::new(2, 3, c.seed.wrapping_add(pi as u64), false).sample(&grid);
        let r = solve(c, u, &grid, gap.mask(h0), mu.clone(), g)?;
        b.solves.push(SolveRecord::new(&c.potentials[pi].id, &r));
        let v = r.solution;
        let coeff = cofactor_field(u, &grid)?;
        let w = poisson_modify(&v, &annulus, &mu.negative_part(), &coeff)?;
        let order = w
            .values()
            .iter()
            .zip(v.values())
            .map(|(a, b)| a - b)
            .fold(f64::NEG_INFINITY, f64::max);
        b.bound("poisson_order", POISSON_ANCHOR, order, "tolerance", 1e-8, "max(w - v)");
        let bound = 2.0 * mu.positive_part().mass_on(&gap.closed_mask(h0)).0;
        let inner = gap.mask(0.75 * h0);
        let full = 1usize << c.dim;
        let keep: Vec<bool> = (0..grid.num_nodes())
            .map(|i| {
                let cells = grid.node_cells(i);
                cells.len() == full && cells.iter().all(|&q| inner.contains(q))
            })
            .collect();
        let nodes: Vec<usize> = (0..grid.num_nodes()).filter(|&i| keep[i]).collect();
        if nodes.is_empty() {
            skip_or_fail(b, "poisson_flux", POISSON_ANCHOR, LabError::Resolution { height: 0.75 * h0 })?;
            continue;
        }
        for t in 0..c.instances {
            let center = grid.node_coord(nodes[rng.gen_range(0..nodes.len())]);
            let radius = rng.gen_range(0.02..0.4);
            let phi = GridFunction::nodal(
                &grid,
                (0..grid.num_nodes())
                    .map(|i| {
                        if !keep[i] {
                            return 0.0;
                        }
                        let p = grid.node_coord(i);
                        (1.0 - crate::grid::dist(2, &p, &center) / radius).max(0.0)
                    })
                    .collect(),
            )?;
            let flux = energy_pair(&w, &phi, &coeff, &grid.domain_mask());
            rows.push_str(&format!("{},{t},{order:.6e},{flux:.10e},{bound:.10e}\n", c.potentials[pi].id));
            b.bound("poisson_flux", POISSON_ANCHOR, flux, "two_mu_plus", bound + 1e-8, "2 mu+(closed S(h0)) + tolerance");
        }
    }
    b.table("poisson_modification", rows);
    Ok(())
}

fn lp_linf(c: &ScenarioConfig, b: &mut ReportBundle) -> Result<()> {
    need_heights(c, 1)?;
    let pots = need_potentials(c)?;
    let grid = c.grid()?;
    for (pi, u) in pots.iter().enumerate() {
        for spec in &c.measures {
            let mu = spec.build(&grid, u, &c.center)?;
            let label = format!("{}/{}", c.potentials[pi].id, spec.label());
            let r = solve(c, u, &grid, grid.domain_mask(), mu.clone(), GridFunction::from_nodes_fn(&grid, |_| 0.0))?;
            b.solves.push(SolveRecord::new(&label, &r));
            for &h0 in &c.heights {
                match lp_linf_report(&r.solution, &mu, u, &c.center, h0, c.exponents.p) {
                    Ok(rep) => b.push(rep.clone().with_note(&format!("{label}{}", rep.note.as_deref().map(|n| format!(": {n}")).unwrap_or_default()))),
                    Err(e) => skip_or_fail(b, "lp_linf", LP_LINF_ANCHOR, e)?,
                }
            }
        }
    }
    Ok(())
}

fn suites(c: &ScenarioConfig, b: &mut ReportBundle) -> Result<()> {
    need_heights(c, 1)?;
    let pots = need_potentials(c)?;
    let grid = c.grid()?;
    for (pi, u) in pots.iter().enumerate() {
        run_suites(c, u, &grid, c.heights[0], &format!("suites_{pi}"), b)?;
    }
    Ok(())
}
