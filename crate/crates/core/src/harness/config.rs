//! Declarative scenario configuration (TOML).
//!
//! ```toml
//! version = 1
//! scenario = "potential-estimate-n3"
//! dim = 3
//! nodes = 33
//! seed = 7
//!
//! [[potentials]]
//! id = "trig"
//! params = { delta = 0.1, k = 2.0 }
//!
//! [[measures]]
//! type = "density"
//! base = 1.0
//! gradient = [0.5, 0.0, 0.0]
//!
//! [[measures]]
//! type = "combination"
//! parts = [
//!   { weight = 0.2, measure = { type = "atom", mass = 1.0 } },
//!   { weight = -1.0, measure = { type = "density", base = 6.0, radius = 0.2, center = [0.3, 0.0, 0.0] } },
//! ]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{FaceField, GridFunction};
use crate::grid::{Grid, Point};
use crate::measures::GridMeasure;
use crate::potentials::ConvexPotential;
use crate::solver::DEFAULT_TOL;

pub const CONFIG_VERSION: u32 = 1;

/// Largest admissible node count per axis.
pub fn max_nodes(dim: usize) -> usize {
    if dim == 2 {
        513
    } else {
        65
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub id: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl PotentialSpec {
    pub fn new(id: &str, params: &[(&str, f64)]) -> Self {
        Self {
            id: id.into(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    pub fn resolve(&self, dim: usize) -> Result<ConvexPotential> {
        ConvexPotential::from_id(&self.id, dim, &self.params)
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedMeasure {
    pub weight: f64,
    pub measure: MeasureSpec,
}

/// Measure specification; atoms and radii are relative to the scenario center unless `center` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    /// `(base + gradient·x) |x − c|^power`, restricted to `|x − c| < radius` when a radius is given.
    Density {
        #[serde(default = "one")]
        base: f64,
        #[serde(default)]
        gradient: Point,
        #[serde(default)]
        power: f64,
        #[serde(default)]
        radius: Option<f64>,
        #[serde(default)]
        center: Option<Point>,
    },
    /// Point mass at the grid node nearest to `center`; mollified before entering a solve.
    Atom {
        #[serde(default = "one")]
        mass: f64,
        #[serde(default)]
        center: Option<Point>,
        #[serde(default)]
        mollified: bool,
    },
    /// `div(scale · Du)` for the scenario's potential.
    DivField {
        #[serde(default = "one")]
        scale: f64,
    },
    Combination { parts: Vec<WeightedMeasure> },
}

impl MeasureSpec {
    pub fn label(&self) -> String {
        match self {
            MeasureSpec::Density { power, radius, .. } => match (power, radius) {
                (p, _) if *p != 0.0 => format!("density(power={p})"),
                (_, Some(r)) => format!("density(radius={r})"),
                _ => "density".into(),
            },
            MeasureSpec::Atom { mollified, .. } => if *mollified { "mollified_atom" } else { "atom" }.into(),
            MeasureSpec::DivField { .. } => "div_field".into(),
            MeasureSpec::Combination { parts } => {
                let names: Vec<String> = parts.iter().map(|p| format!("{}*{}", p.weight, p.measure.label())).collect();
                format!("combination({})", names.join("+"))
            }
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        match self {
            MeasureSpec::Density { power, radius, .. } => {
                if *power <= -(dim as f64) {
                    return Err(LabError::Config(format!("density power {power} is not locally integrable in n = {dim}")));
                }
                if radius.is_some_and(|r| !(r > 0.0)) {
                    return Err(LabError::Config("density radius must be positive".into()));
                }
            }
            MeasureSpec::Atom { mass, .. } => {
                if !mass.is_finite() {
                    return Err(LabError::Config("atom mass must be finite".into()));
                }
            }
            MeasureSpec::DivField { scale } => {
                if !scale.is_finite() {
                    return Err(LabError::Config("field scale must be finite".into()));
                }
            }
            MeasureSpec::Combination { parts } => {
                if parts.is_empty() {
                    return Err(LabError::Config("combination needs at least one part".into()));
                }
                for p in parts {
                    p.measure.check(dim)?;
                }
            }
        }
        Ok(())
    }

    /// Build the grid measure; `center` is the default for atoms and radial profiles.
    pub fn build(&self, grid: &Grid, potential: &ConvexPotential, center: &Point) -> Result<GridMeasure> {
        match self {
            MeasureSpec::Density { .. } => GridMeasure::from_density(&self.density(grid, center).expect("density variant")),
            MeasureSpec::Atom { mass, center: c, mollified } => {
                let node = grid.nearest_node(&c.unwrap_or(*center));
                Ok(if *mollified {
                    GridMeasure::mollified_atom(grid, node, *mass)
                } else {
                    GridMeasure::atom(grid, node, *mass)
                })
            }
            MeasureSpec::DivField { scale } => GridMeasure::from_divergence(&self.field(grid, potential, *scale)?, true),
            MeasureSpec::Combination { parts } => {
                let mut total = GridMeasure::zero(grid);
                for p in parts {
                    total = total.add(&p.measure.build(grid, potential, center)?.scaled(p.weight))?;
                }
                Ok(total)
            }
        }
    }

    /// Cellwise density of a `density` spec.
    pub fn density(&self, grid: &Grid, center: &Point) -> Option<GridFunction> {
        let MeasureSpec::Density {
            base,
            gradient,
            power,
            radius,
            center: c,
        } = self
        else {
            return None;
        };
        let c = c.unwrap_or(*center);
        Some(GridFunction::from_cells_fn(grid, |x| {
            let r = crate::grid::dist(grid.dim(), x, &c);
            if radius.is_some_and(|rad| r >= rad) {
                return 0.0;
            }
            let lin = base + (0..grid.dim()).map(|i| gradient[i] * x[i]).sum::<f64>();
            if *power == 0.0 {
                lin
            } else {
                lin * r.powf(*power)
            }
        }))
    }

    /// `scale · Du` on faces for a `div_field` spec.
    pub fn div_field(&self, grid: &Grid, potential: &ConvexPotential) -> Result<Option<FaceField>> {
        match self {
            MeasureSpec::DivField { scale } => self.field(grid, potential, *scale).map(Some),
            _ => Ok(None),
        }
    }

    fn field(&self, grid: &Grid, potential: &ConvexPotential, scale: f64) -> Result<FaceField> {
        for c in 0..grid.num_cells() {
            potential.evaluate(&grid.cell_center(c))?;
        }
        Ok(FaceField::from_fn(grid, |x| {
            let du = potential.evaluate(x).map(|e| e.du).unwrap_or([0.0; 3]);
            [scale * du[0], scale * du[1], scale * du[2]]
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exponents {
    #[serde(default = "Exponents::default_p")]
    pub p: f64,
    #[serde(default = "Exponents::default_q")]
    pub q: f64,
    #[serde(default = "Exponents::default_p0")]
    pub p0: f64,
    #[serde(default = "Exponents::default_theta")]
    pub theta: f64,
}

impl Exponents {
    fn default_p() -> f64 {
        2.0
    }
    fn default_q() -> f64 {
        3.0
    }
    fn default_p0() -> f64 {
        0.5
    }
    fn default_theta() -> f64 {
        0.1
    }
}

impl Default for Exponents {
    fn default() -> Self {
        Self {
            p: 2.0,
            q: 3.0,
            p0: 0.5,
            theta: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Ceiling on individual minimal constants; absent means no absolute ceiling.
    #[serde(default)]
    pub ceiling: Option<f64>,
    /// Largest admissible max/min ratio of a constant across heights.
    #[serde(default = "Tolerances::default_stability")]
    pub stability: f64,
    #[serde(default = "Tolerances::default_solver")]
    pub solver: f64,
}

impl Tolerances {
    fn default_stability() -> f64 {
        2.0
    }
    fn default_solver() -> f64 {
        DEFAULT_TOL
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ceiling: None,
            stability: 2.0,
            solver: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub scenario: String,
    pub dim: usize,
    pub nodes: usize,
    #[serde(default = "ScenarioConfig::default_bounds")]
    pub bounds: [f64; 2],
    #[serde(default)]
    pub potentials: Vec<PotentialSpec>,
    #[serde(default)]
    pub measures: Vec<MeasureSpec>,
    #[serde(default)]
    pub center: Point,
    #[serde(default)]
    pub heights: Vec<f64>,
    #[serde(default)]
    pub exponents: Exponents,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "ScenarioConfig::default_instances")]
    pub instances: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ScenarioConfig {
    fn default_bounds() -> [f64; 2] {
        [-1.0, 1.0]
    }
    fn default_instances() -> usize {
        4
    }

    pub fn new(scenario: &str, dim: usize, nodes: usize) -> Self {
        Self {
            version: CONFIG_VERSION,
            scenario: scenario.into(),
            dim,
            nodes,
            bounds: Self::default_bounds(),
            potentials: Vec::new(),
            measures: Vec::new(),
            center: [0.0; 3],
            heights: Vec::new(),
            exponents: Exponents::default(),
            tolerances: Tolerances::default(),
            instances: Self::default_instances(),
            seed: 0,
            output: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dim, self.bounds[0], self.bounds[1], self.nodes)
    }

    pub fn resolved_potentials(&self) -> Result<Vec<ConvexPotential>> {
        self.potentials.iter().map(|p| p.resolve(self.dim)).collect()
    }

    /// Structural checks; scenario-specific requirements are checked by the scenario.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("config version {} is not supported (expected {CONFIG_VERSION})", self.version));
        }
        if !(self.dim == 2 || self.dim == 3) {
            return bad(format!("dimension {} must be 2 or 3", self.dim));
        }
        if self.nodes < 5 || self.nodes > max_nodes(self.dim) {
            return bad(format!("{} nodes per axis outside [5, {}] for n = {}", self.nodes, max_nodes(self.dim), self.dim));
        }
        if !(self.bounds[0] < self.bounds[1]) {
            return bad(format!("bounds {:?} must be increasing", self.bounds));
        }
        let grid = self.grid()?;
        if !grid.domain().contains(self.dim, &self.center) {
            return bad(format!("center {:?} lies outside the domain", self.center));
        }
        for p in &self.potentials {
            p.resolve(self.dim).map_err(|e| LabError::Config(e.to_string()))?;
        }
        for m in &self.measures {
            m.check(self.dim)?;
        }
        if let Some(h) = self.heights.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return bad(format!("height {h} must be positive"));
        }
        let e = &self.exponents;
        if !(e.p >= 1.0 && e.q > 0.0 && e.p0 > 0.0 && e.theta > 0.0 && e.theta < 1.0) {
            return bad(format!("exponents {e:?} out of range (p ≥ 1, q > 0, p0 > 0, 0 < θ < 1)"));
        }
        let t = &self.tolerances;
        if !(t.stability >= 1.0 && t.solver > 0.0 && t.ceiling.is_none_or(|c| c > 0.0)) {
            return bad(format!("tolerances {t:?} out of range"));
        }
        if self.instances == 0 {
            return bad("instances must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn module_example_parses() {
        let text = r#"
version = 1
scenario = "potential-estimate-n3"
dim = 3
nodes = 33
seed = 7

[[potentials]]
id = "trig"
params = { delta = 0.1, k = 2.0 }

[[measures]]
type = "density"
base = 1.0
gradient = [0.5, 0.0, 0.0]

[[measures]]
type = "combination"
parts = [
  { weight = 0.2, measure = { type = "atom", mass = 1.0 } },
  { weight = -1.0, measure = { type = "density", base = 6.0, radius = 0.2, center = [0.3, 0.0, 0.0] } },
]
"#;
        let c = ScenarioConfig::from_toml(text).unwrap();
        c.validate().unwrap();
        assert_eq!(c.measures.len(), 2);
        assert_eq!(c.exponents.theta, 0.1);
        let again = ScenarioConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = ScenarioConfig::new("x", 3, 129);
        assert!(matches!(c.validate(), Err(LabError::Config(_))));
        c.nodes = 17;
        c.potentials.push(PotentialSpec::new("cubic", &[]));
        assert!(c.validate().is_err());
        c.potentials.clear();
        c.version = 2;
        assert!(c.validate().is_err());
        assert!(ScenarioConfig::from_toml("version = 1\nscenario = 'a'\ndim = 2\nnodes = 9\nbogus = 1").is_err());
    }

    #[test]
    fn signed_combination_builds() {
        let grid = Grid::new(2, -1.0, 1.0, 17).unwrap();
        let u = ConvexPotential::isotropic(2).unwrap();
        let spec = MeasureSpec::Combination {
            parts: vec![
                WeightedMeasure {
                    weight: 1.0,
                    measure: MeasureSpec::Atom {
                        mass: 2.0,
                        center: None,
                        mollified: false,
                    },
                },
                WeightedMeasure {
                    weight: -1.0,
                    measure: MeasureSpec::Density {
                        base: 1.0,
                        gradient: [0.0; 3],
                        power: 0.0,
                        radius: None,
                        center: None,
                    },
                },
            ],
        };
        let mu = spec.build(&grid, &u, &[0.0; 3]).unwrap();
        assert!((mu.total_mass() - (2.0 - 4.0)).abs() < 1e-12);
        let div = MeasureSpec::DivField { scale: 1.0 }.build(&grid, &u, &[0.0; 3]).unwrap();
        assert!((div.total_mass() - 2.0 * 4.0).abs() < 1e-9);
    }
}
