//! Scenario registry, orchestration and report emission.

mod config;
mod scenarios;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::report::{spread, EstimateReport, Status, Term};
use crate::solver::SolveResult;

pub use config::{max_nodes, Exponents, MeasureSpec, PotentialSpec, ScenarioConfig, Tolerances, WeightedMeasure, CONFIG_VERSION};

/// Diagnostics of one linear solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveRecord {
    pub label: String,
    pub unknowns: usize,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

impl SolveRecord {
    pub fn new(label: &str, r: &SolveResult) -> Self {
        Self {
            label: label.into(),
            unknowns: r.unknowns,
            iterations: r.iterations,
            residual: r.residual,
            converged: r.converged,
        }
    }
}

/// Everything a scenario run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub scenario: String,
    pub anchor: String,
    pub config: ScenarioConfig,
    pub results: Vec<EstimateReport>,
    pub solves: Vec<SolveRecord>,
    /// File name (inside `tables/`) to CSV text.
    pub tables: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

impl ReportBundle {
    pub fn new(config: &ScenarioConfig, anchor: &str) -> Self {
        Self {
            scenario: config.scenario.clone(),
            anchor: anchor.into(),
            config: config.clone(),
            results: Vec::new(),
            solves: Vec::new(),
            tables: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, report: EstimateReport) {
        let report = match self.config.tolerances.ceiling {
            Some(c) if report.ceiling.is_infinite() => report.with_ceiling(c),
            _ => report,
        };
        self.results.push(report);
    }

    pub fn table(&mut self, name: &str, csv: String) {
        self.tables.insert(format!("{name}.csv"), csv);
    }

    /// Append a stability check: the max/min ratio of `constants` is at most the configured factor.
    pub fn stability(&mut self, id: &str, anchor: &str, constants: &[f64]) {
        let bound = self.config.tolerances.stability;
        let positive: Vec<f64> = constants.iter().copied().filter(|c| *c > 0.0).collect();
        if positive.len() < 2 {
            self.results.push(
                EstimateReport::new(id, anchor, 0.0, Vec::new(), 1.0)
                    .with_status(Status::SkippedResolution, "fewer than two positive constants to compare"),
            );
            return;
        }
        let s = spread(&positive);
        self.results.push(EstimateReport::new(
            id,
            anchor,
            s,
            vec![Term::new("stability_factor", bound, "tolerances.stability")],
            1.0,
        ));
    }

    /// `lhs ≤ rhs` as a report with unit ceiling.
    pub fn bound(&mut self, id: &str, anchor: &str, lhs: f64, rhs_name: &str, rhs: f64, source: &str) {
        self.results
            .push(EstimateReport::new(id, anchor, lhs, vec![Term::new(rhs_name, rhs, source)], 1.0));
    }

    pub fn count(&self, status: Status) -> usize {
        self.results.iter().filter(|r| r.status == status).count()
    }

    /// No check failed; skips are not failures.
    pub fn passed(&self) -> bool {
        self.count(Status::Fail) == 0
    }
}

#[derive(Serialize)]
struct Environment {
    crate_name: &'static str,
    crate_version: &'static str,
    config_version: u32,
    os: &'static str,
    arch: &'static str,
}

#[derive(Serialize)]
struct Summary {
    pass: usize,
    fail: usize,
    skipped_hypothesis: usize,
    skipped_resolution: usize,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    scenario: &'a str,
    paper_anchor: &'a str,
    config: &'a ScenarioConfig,
    summary: Summary,
    results: &'a [EstimateReport],
    solves: &'a [SolveRecord],
    notes: &'a [String],
    tables: Vec<&'a String>,
    environment: Environment,
}

impl ReportBundle {
    pub fn to_json(&self) -> String {
        let doc = ReportJson {
            scenario: &self.scenario,
            paper_anchor: &self.anchor,
            config: &self.config,
            summary: Summary {
                pass: self.count(Status::Pass),
                fail: self.count(Status::Fail),
                skipped_hypothesis: self.count(Status::SkippedHypothesis),
                skipped_resolution: self.count(Status::SkippedResolution),
            },
            results: &self.results,
            solves: &self.solves,
            notes: &self.notes,
            tables: self.tables.keys().collect(),
            environment: Environment {
                crate_name: env!("CARGO_PKG_NAME"),
                crate_version: env!("CARGO_PKG_VERSION"),
                config_version: CONFIG_VERSION,
                os: std::env::consts::OS,
                arch: std::env::consts::ARCH,
            },
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Catalog entry.
pub struct ScenarioInfo {
    pub id: &'static str,
    pub anchor: &'static str,
    pub summary: &'static str,
    pub default_config: fn() -> ScenarioConfig,
    run: fn(&ScenarioConfig, &mut ReportBundle) -> Result<()>,
}

pub fn catalog() -> Vec<ScenarioInfo> {
    scenarios::catalog()
}

/// `(id, anchor)` for every registered scenario, in catalog order.
pub fn list_scenarios() -> Vec<(&'static str, &'static str)> {
    catalog().iter().map(|s| (s.id, s.anchor)).collect()
}

pub fn find_scenario(id: &str) -> Result<ScenarioInfo> {
    let all = catalog();
    let ids: Vec<&str> = all.iter().map(|s| s.id).collect();
    match all.into_iter().find(|s| s.id == id) {
        Some(s) => Ok(s),
        None => {
            let best = ids.iter().min_by_key(|c| edit_distance(id, c)).copied().unwrap_or("");
            Err(LabError::Config(format!(
                "unknown scenario `{id}`; did you mean `{best}`? (known: {})",
                ids.join(", ")
            )))
        }
    }
}

fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut prev = row[0];
        row[0] = i + 1;
        for j in 0..b.len() {
            let cur = row[j + 1];
            row[j + 1] = (prev + usize::from(ca != b[j])).min(row[j] + 1).min(cur + 1);
            prev = cur;
        }
    }
    row[b.len()]
}

/// Default configuration of a registered scenario.
pub fn default_config(id: &str) -> Result<ScenarioConfig> {
    Ok((find_scenario(id)?.default_config)())
}

/// Validate the configuration and run its scenario.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ReportBundle> {
    let info = find_scenario(&config.scenario)?;
    config.validate()?;
    let mut bundle = ReportBundle::new(config, info.anchor);
    (info.run)(config, &mut bundle)?;
    Ok(bundle)
}

/// Write `report.json` and `tables/*.csv` under `dir`; returns the written paths.
pub fn emit_report(bundle: &ReportBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    let tables = dir.join("tables");
    std::fs::create_dir_all(&tables).map_err(|e| LabError::Io(format!("{}: {e}", tables.display())))?;
    let mut written = Vec::new();
    let report = dir.join("report.json");
    std::fs::write(&report, bundle.to_json()).map_err(|e| LabError::Io(format!("{}: {e}", report.display())))?;
    written.push(report);
    for (name, csv) in &bundle.tables {
        let path = tables.join(name);
        std::fs::write(&path, csv).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}
