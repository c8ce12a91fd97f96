//! JSON system files and number formatting for reports.
//!
//! A system file lists the variables and, per component, its variable
//! names and a flat probability list (row-major, last variable fastest):
//!
//! ```json
//! {
//!   "variables": [{"name": "A", "card": 2}, {"name": "B", "card": 2}],
//!   "components": [{"vars": ["A", "B"], "probs": [0.3, 0.2, 0.1, 0.4]}]
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::ProbabilitySystem;
use crate::model::{JointSpace, ProbTable, Variable};
use crate::web::Structure;

/// Tables further than this from summing to one are rejected on load.
pub const LOAD_SUM_TOL: f64 = 1e-6;
/// Tables further than this from one (but within [`LOAD_SUM_TOL`]) load
/// with a warning.
pub const WARN_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    pub card: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub vars: Vec<String>,
    /// Optional when only the structure is needed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub variables: Vec<VariableSpec>,
    pub components: Vec<ComponentSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedSystem {
    pub system: ProbabilitySystem,
    pub warnings: Vec<String>,
}

impl SystemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system file serializes")
    }

    pub fn from_system(system: &ProbabilitySystem) -> Self {
        let space = system.space();
        SystemFile {
            variables: space
                .variables()
                .iter()
                .map(|v| VariableSpec {
                    name: v.name().to_string(),
                    card: v.card(),
                })
                .collect(),
            components: system
                .tables()
                .iter()
                .map(|t| ComponentSpec {
                    vars: t.scope().iter().map(|&v| space.name(v).to_string()).collect(),
                    probs: Some(t.values().to_vec()),
                })
                .collect(),
        }
    }

    pub fn structure(&self) -> Result<Structure> {
        let vars = self
            .variables
            .iter()
            .map(|v| Variable::new(v.name.clone(), v.card))
            .collect::<Result<Vec<_>>>()?;
        let space = JointSpace::new(vars)?;
        let comps = self
            .components
            .iter()
            .map(|c| space.ids_of(&c.vars))
            .collect::<Result<Vec<_>>>()?;
        Structure::new(space, comps)
    }

    /// Builds the system, renormalizing each table that is off by more than
    /// rounding. Tables off by more than
    /// [`LOAD_SUM_TOL`] are an error; more than [`WARN_SUM_TOL`] a warning.
    pub fn to_system(&self) -> Result<LoadedSystem> {
        let structure = self.structure()?;
        let mut warnings = Vec::new();
        let mut tables = Vec::with_capacity(self.components.len());
        for (i, spec) in self.components.iter().enumerate() {
            let label = structure.label(i);
            let probs = spec
                .probs
                .as_ref()
                .ok_or_else(|| Error::InvalidTable(format!("component {label} has no probs")))?;
            if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
                return Err(Error::InvalidTable(format!(
                    "component {label} has invalid entry {bad}"
                )));
            }
            let sum: f64 = probs.iter().sum();
            let dev = (sum - 1.0).abs();
            if dev > LOAD_SUM_TOL {
                return Err(Error::Normalization {
                    component: label,
                    sum,
                });
            }
            if dev > WARN_SUM_TOL {
                warnings.push(format!(
                    "component {label} sums to {sum}; renormalized"
                ));
            }
            let values = if dev > renormalize_tol(probs.len()) {
                probs.iter().map(|p| (p / sum).min(1.0)).collect()
            } else {
                probs.clone()
            };
            tables.push(ProbTable::over(
                structure.space(),
                structure.component(i).to_vec(),
                values,
            )?);
        }
        let system = ProbabilitySystem::new(structure, tables)?;
        Ok(LoadedSystem { system, warnings })
    }
}

/// Sums this close to one are rounding noise and left alone, which keeps
/// load and save idempotent.
fn renormalize_tol(len: usize) -> f64 {
    (len as f64 * f64::EPSILON).max(1e-15)
}

pub fn parse_system(text: &str) -> Result<LoadedSystem> {
    SystemFile::from_json(text)?.to_system()
}

pub fn load_system(path: impl AsRef<Path>) -> Result<LoadedSystem> {
    parse_system(&std::fs::read_to_string(path)?)
}

pub fn load_structure(path: impl AsRef<Path>) -> Result<Structure> {
    SystemFile::from_json(&std::fs::read_to_string(path)?)?.structure()
}

pub fn system_to_json(system: &ProbabilitySystem) -> String {
    SystemFile::from_system(system).to_json()
}

/// `%.{sig}g`-style formatting: `sig` significant digits, trailing zeros
/// dropped, plain notation for magnitudes from `1e-4` up to `10^sig`.
pub fn format_g(x: f64, sig: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
