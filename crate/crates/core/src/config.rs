//! Run configuration: a sectioned TOML file, `--set section.key=value`
//! overrides, and validation that reports every problem at once.
//!
//! ```toml
//! [operator]
//! beta = "y1"
//! gamma = "0"
//! n = 2
//!
//! [sim]
//! dt = 1e-3
//! t_max = 1.0
//! n_paths = 100000
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::operator::{CylinderDomain, OperatorSpec};
use crate::sde::{ExitRule, SimConfig};

pub const SEED_ENV: &str = "HARNACK_LAB_SEED";
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSection {
    pub beta: String,
    pub gamma: String,
    pub n: usize,
}

impl Default for OperatorSection {
    fn default() -> Self {
        OperatorSection {
            beta: "y1".into(),
            gamma: "0".into(),
            n: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub t_max: f64,
    pub n_paths: usize,
    pub seed: Option<u64>,
    pub exit_rule: ExitRule,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            dt: SimConfig::DEFAULT_DT,
            t_max: 1.0,
            n_paths: SimConfig::DEFAULT_PATHS,
            seed: None,
            exit_rule: ExitRule::Bridge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    pub r: u32,
    pub grid_step: f64,
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection { r: 1, grid_step: 0.05 }
    }
}

/// Start point for `simulate` and `evaluate`; `y` defaults to the origin.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StartSection {
    pub x: f64,
    pub y: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub bins: usize,
    pub mass_floor: u64,
    /// Second start for the comparability constant at horizon `t_max`.
    pub compare_y: Option<Vec<f64>>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            bins: 20,
            mass_floor: 20,
            compare_y: None,
        }
    }
}

/// At most one of `solution` (catalog entry) or `data` (expression in `x, y1..`);
/// with neither, `kolmogorov(10)` is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub solution: Option<String>,
    pub data: Option<String>,
    /// Defaults to `1/‖β‖∞`.
    pub t: Option<f64>,
    pub sandwich: bool,
    pub k_sigma: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            solution: None,
            data: None,
            t: None,
            sandwich: false,
            k_sigma: 3.0,
            nx: 111,
            ny: 61,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MakeSolutionSection {
    pub data: String,
    pub t_solve: f64,
    pub n_paths: usize,
    pub nx: usize,
    pub ny: usize,
}

impl Default for MakeSolutionSection {
    fn default() -> Self {
        MakeSolutionSection {
            data: "2 + sin(x) * cos(y1)".into(),
            t_solve: 2.0,
            n_paths: 2_000,
            nx: 23,
            ny: 13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnackSection {
    /// Catalog entries; empty means the shipped family for the operator.
    pub family: Vec<String>,
    /// Number of additional fields manufactured from random positive data.
    pub random: usize,
    pub t_solve: f64,
    pub n_paths: usize,
    pub random_nx: usize,
    pub random_ny: usize,
    pub nx: usize,
    pub ny: usize,
}

impl Default for HarnackSection {
    fn default() -> Self {
        HarnackSection {
            family: Vec::new(),
            random: 0,
            t_solve: 2.0,
            n_paths: 1_000,
            random_nx: 11,
            random_ny: 21,
            nx: 101,
            ny: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleSection {
    pub lambdas: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
}

impl Default for CounterexampleSection {
    fn default() -> Self {
        CounterexampleSection {
            lambdas: vec![1.0, 2.0, 4.0, 8.0],
            nx: 101,
            ny: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionsSection {
    pub d: f64,
    pub grid_step: f64,
    /// Catalog entry for the sup/inf comparison; none means classification only.
    pub solution: Option<String>,
    pub nx: usize,
    pub cap: f64,
}

impl Default for RegionsSection {
    fn default() -> Self {
        RegionsSection {
            d: 0.5,
            grid_step: 0.05,
            solution: None,
            nx: 11,
            cap: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AverageSection {
    pub solution: String,
    pub z: f64,
    pub nx: usize,
    pub ny: usize,
    /// Defaults to the subcylinder's x-range.
    pub target: Option<[f64; 2]>,
}

impl Default for AverageSection {
    fn default() -> Self {
        AverageSection {
            solution: "kolmogorov(10)".into(),
            z: 1.0 / 3.0,
            nx: 111,
            ny: 61,
            target: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub operator: OperatorSection,
    pub domain: CylinderDomain,
    pub sim: SimSection,
    pub check: CheckSection,
    pub start: StartSection,
    pub simulate: SimulateSection,
    pub evaluate: EvaluateSection,
    pub make_solution: MakeSolutionSection,
    pub harnack: HarnackSection,
    pub counterexample: CounterexampleSection,
    pub regions: RegionsSection,
    pub average: AverageSection,
}

/// Every problem found while loading or validating, in discovery order.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("configuration error:\n  {}", .0.join("\n  "))]
pub struct ConfigError(pub Vec<String>);

/// Keys whose override text is taken verbatim, so `operator.beta=0` stays an expression.
const STRING_KEYS: &[&str] = &[
    "operator.beta",
    "operator.gamma",
    "evaluate.solution",
    "evaluate.data",
    "make_solution.data",
    "regions.solution",
    "average.solution",
];

fn parse_override(item: &str) -> Result<(Vec<String>, toml::Value), String> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| format!("override `{item}` is not of the form section.key=value"))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(format!("override `{item}` has an empty key"));
    }
    let raw = raw.trim();
    if STRING_KEYS.contains(&key.trim()) && !raw.starts_with('"') {
        return Ok((path, toml::Value::String(raw.to_string())));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path, value))
}

fn apply_override(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), String> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for p in parents {
        cur = cur
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| format!("`{p}` is not a section"))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

impl RunConfig {
    /// Reads `path` (defaults when `None`) and applies the overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| ConfigError(vec![format!("{}: {e}", p.display())]))?,
            None => String::new(),
        };
        Self::from_str_with(&text, overrides)
    }

    pub fn from_str_with(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError(vec![e.to_string()]))?;
        let mut problems = Vec::new();
        for item in overrides {
            match parse_override(item).and_then(|(path, value)| apply_override(&mut table, &path, value)) {
                Ok(()) => {}
                Err(e) => problems.push(e),
            }
        }
        if !problems.is_empty() {
            return Err(ConfigError(problems));
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError(vec![e.to_string().trim().to_string()]))
    }

    pub fn start_y(&self) -> Vec<f64> {
        self.start
            .y
            .clone()
            .unwrap_or_else(|| vec![0.0; self.operator.n.saturating_sub(1)])
    }

    /// Builds the operator and domain, collecting every problem.
    pub fn operator(&self) -> Result<(OperatorSpec, CylinderDomain), ConfigError> {
        let mut problems: Vec<String> = self.domain.problems().into_iter().map(|p| format!("domain: {p}")).collect();
        if !problems.is_empty() {
            // Norm estimates need a valid domain; still report expression problems.
            let probe = CylinderDomain::default();
            if let Err(e) = OperatorSpec::new(&self.operator.beta, &self.operator.gamma, self.operator.n, &probe) {
                problems.push(format!("operator: {e}"));
            }
            return Err(ConfigError(problems));
        }
        match OperatorSpec::new(&self.operator.beta, &self.operator.gamma, self.operator.n, &self.domain) {
            Ok(op) => Ok((op, self.domain)),
            Err(e) => Err(ConfigError(vec![format!("operator: {e}")])),
        }
    }

    /// Simulation settings with the seed resolved as flag, then `[sim] seed`,
    /// then `HARNACK_LAB_SEED`, then the default.
    pub fn sim_config(&self, seed_flag: Option<u64>, env_seed: Option<&str>) -> Result<SimConfig, ConfigError> {
        let seed = match (seed_flag, self.sim.seed, env_seed) {
            (Some(s), _, _) | (None, Some(s), _) => s,
            (None, None, Some(text)) => text
                .trim()
                .parse()
                .map_err(|_| ConfigError(vec![format!("{SEED_ENV}=`{text}` is not an unsigned 64-bit integer")]))?,
            (None, None, None) => DEFAULT_SEED,
        };
        Ok(SimConfig {
            dt: self.sim.dt,
            t_max: self.sim.t_max,
            n_paths: self.sim.n_paths,
            master_seed: seed,
            exit_rule: self.sim.exit_rule,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = RunConfig::from_str_with("", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.start_y(), vec![0.0]);
    }

    #[test]
    fn sections_and_overrides() {
        let text = "[operator]\nbeta = \"sin(y1)\"\nn = 3\n[sim]\nn_paths = 10\n";
        let c = RunConfig::from_str_with(
            text,
            &[
                "sim.dt=0.01".into(),
                "operator.gamma = 0.5*cos(x)".into(),
                "evaluate.data=1".into(),
                "counterexample.lambdas=[1, 3]".into(),
                "sim.exit_rule=grid_only".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.operator.beta, "sin(y1)");
        assert_eq!(c.operator.gamma, "0.5*cos(x)");
        assert_eq!(c.evaluate.data.as_deref(), Some("1"));
        assert_eq!(c.sim.dt, 0.01);
        assert_eq!(c.sim.n_paths, 10);
        assert_eq!(c.sim.exit_rule, ExitRule::GridOnly);
        assert_eq!(c.counterexample.lambdas, vec![1.0, 3.0]);
        assert_eq!(c.start_y(), vec![0.0, 0.0]);
    }

    #[test]
    fn unknown_keys_and_bad_types_are_rejected() {
        assert!(RunConfig::from_str_with("[sim]\nsteps = 3\n", &[]).is_err());
        assert!(RunConfig::from_str_with("[bogus]\n", &[]).is_err());
        assert!(RunConfig::from_str_with("", &["sim.n_paths=many".into()]).is_err());
        assert!(RunConfig::from_str_with("", &["nokey".into()]).is_err());
    }

    #[test]
    fn operator_problems_are_aggregated() {
        let c = RunConfig::from_str_with(
            "[operator]\nbeta = \"q1\"\n[domain]\nradius = -1\n",
            &[],
        )
        .unwrap();
        let err = c.operator().unwrap_err();
        assert!(err.0.len() >= 2, "{err}");
        assert!(err.0.iter().any(|p| p.contains("q1")));
    }

    #[test]
    fn seed_precedence() {
        let mut c = RunConfig::default();
        assert_eq!(c.sim_config(None, None).unwrap().master_seed, DEFAULT_SEED);
        assert_eq!(c.sim_config(None, Some("7")).unwrap().master_seed, 7);
        assert!(c.sim_config(None, Some("x")).is_err());
        c.sim.seed = Some(5);
        assert_eq!(c.sim_config(None, Some("7")).unwrap().master_seed, 5);
        assert_eq!(c.sim_config(Some(9), Some("7")).unwrap().master_seed, 9);
    }
}
