use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::jensen::{scenario_viability, verify_jensen, JensenReport};
use super::{LabError, Scenario};
use crate::bsde::PdeConfig;

/// The bundled scenario catalog.
pub const CATALOG_TOML: &str = include_str!("catalog.toml");

/// Solver keys of a scenario block.
pub type SolverSection = PdeConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Holds,
    Fails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEntry {
    pub id: String,
    pub gen: String,
    pub payoff: String,
    pub h: String,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub expect: Option<Expectation>,
    #[serde(default)]
    pub solver: Option<SolverSection>,
}

impl ScenarioEntry {
    pub fn to_scenario(&self) -> Result<Scenario, LabError> {
        let mut sc = Scenario::parse(&self.id, &self.gen, &self.payoff, &self.h, self.horizon)?;
        if let Some(times) = &self.times {
            sc.eval_times = times.clone();
        }
        if let Some(solver) = &self.solver {
            sc.solver = solver.clone();
        }
        sc.tol = self.tol;
        Ok(sc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchFile {
    #[serde(default)]
    pub scenario: Vec<ScenarioEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRecord {
    pub id: String,
    pub jensen: JensenReport,
    pub viable: bool,
    /// Smallest `u_{h(X)} - h(u_X)` reported by the viability check.
    pub viability_margin: f64,
    /// Viability and Jensen verdicts coincide.
    pub verdicts_agree: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
    pub passed: bool,
}

pub fn parse_batch(text: &str) -> Result<Vec<ScenarioEntry>, LabError> {
    let file: BatchFile = toml::from_str(text).map_err(|e| LabError::Scenario(e.to_string()))?;
    let mut seen = BTreeSet::new();
    for s in &file.scenario {
        if !seen.insert(s.id.as_str()) {
            return Err(LabError::Scenario(format!("duplicate scenario id {:?}", s.id)));
        }
    }
    Ok(file.scenario)
}

/// The bundled catalog, parsed.
pub fn catalog() -> Vec<ScenarioEntry> {
    parse_batch(CATALOG_TOML).expect("bundled catalog parses")
}

fn run_one(entry: &ScenarioEntry) -> Result<ScenarioRecord, LabError> {
    let sc = entry.to_scenario()?;
    let jensen = verify_jensen(&sc)?;
    let (viable, viability_margin) = match scenario_viability(&sc) {
        Ok(r) => (true, r.min_margin),
        Err(LabError::ViabilityViolated { margin, .. }) => (false, margin),
        Err(e) => return Err(e),
    };
    let verdicts_agree = viable == jensen.holds;
    let met = entry.expect.is_none_or(|e| (e == Expectation::Holds) == jensen.holds);
    Ok(ScenarioRecord {
        id: entry.id.clone(),
        jensen,
        viable,
        viability_margin,
        verdicts_agree,
        expect: entry.expect,
        passed: verdicts_agree && met,
    })
}

/// Runs scenarios in parallel; records come back sorted by id.
pub fn run_batch(entries: &[ScenarioEntry]) -> Result<Vec<ScenarioRecord>, LabError> {
    if entries.is_empty() {
        return Err(LabError::Scenario("no scenarios".into()));
    }
    let mut order: Vec<&ScenarioEntry> = entries.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    order.par_iter().map(|e| run_one(e)).collect()
}
