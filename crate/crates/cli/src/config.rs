//! Run configuration: a named case plus TOML overrides.

use std::path::{Path, PathBuf};

use obstacle_core::experiments::{geometric_masses, preset, CaseParams, DomainParams, Tolerances};
use obstacle_core::solver::SolverOptions;
use serde::{Deserialize, Serialize};

use crate::CliError;

const MIN_RESOLUTION: usize = 64;

/// Explicit levels or a geometric ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MassSpec {
    List { list: Vec<f64> },
    Range { max: f64, min: f64, levels: usize },
}

impl MassSpec {
    pub fn levels(&self) -> Result<Vec<f64>, CliError> {
        match self {
            MassSpec::List { list } => Ok(list.clone()),
            MassSpec::Range { max, min, levels } => Ok(geometric_masses(*max, *min, *levels)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub case: String,
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub domain: DomainParams,
    pub signal: CaseParams,
    pub masses: MassSpec,
    pub solver: SolverOptions,
    pub tolerances: Tolerances,
}

impl RunConfig {
    /// Preset values for `case` with no overrides.
    pub fn from_preset(case: &str) -> Result<Self, CliError> {
        let setup = preset(case)?;
        Ok(Self {
            case: case.to_string(),
            workers: 1,
            out: None,
            domain: setup.domain,
            signal: setup.case,
            masses: MassSpec::List { list: setup.masses },
            solver: setup.solver,
            tolerances: Tolerances::default(),
        })
    }

    /// Parse TOML text; keys override the preset named by `case` (or by
    /// `case_flag`, which wins).
    pub fn parse(text: &str, case_flag: Option<&str>) -> Result<Self, CliError> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let case = match (case_flag, user.get("case")) {
            (Some(c), _) => c.to_string(),
            (None, Some(toml::Value::String(c))) => c.clone(),
            (None, Some(_)) => return Err(CliError::Config("'case' must be a string".into())),
            (None, None) => return Err(CliError::Config("no case given (set 'case' or pass --case)".into())),
        };
        let base = Self::from_preset(&case)?;
        let mut merged = toml::Table::try_from(&base).map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut merged, user);
        merged.insert("case".into(), toml::Value::String(case));
        let cfg: RunConfig = merged.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, case_flag: Option<&str>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, case_flag)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let n = self.domain.dims();
        if n[0] < MIN_RESOLUTION || n[1] < MIN_RESOLUTION {
            return bad(format!("resolution {n:?} below {MIN_RESOLUTION} per axis"));
        }
        if self.workers == 0 {
            return bad("workers must be positive".into());
        }
        let s = &self.solver;
        if !(s.tol > 0.0 && s.mass_rtol > 0.0) {
            return bad("solver tolerances must be positive".into());
        }
        let t = &self.tolerances;
        let tols = [
            t.morse_slope,
            t.morse_hausdorff,
            t.mass_fraction,
            t.aniso_slope,
            t.aniso_hausdorff,
            t.noncoercive_slope,
            t.separation_slope,
            t.homogeneous_slope,
            t.width_slack,
        ];
        if tols.iter().any(|v| !(*v > 0.0)) {
            return bad("fit tolerances must be positive".into());
        }
        let m = self.masses.levels()?;
        if m.is_empty() || m.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("masses must be positive".into());
        }
        if m.windows(2).any(|w| w[1] >= w[0]) {
            return bad("masses must be strictly decreasing".into());
        }
        Ok(())
    }
}

/// Recursive table merge; a tagged table whose tag changes, or any non-table
/// value, replaces the base entry wholesale.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if same_variant(b, &o) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn same_variant(base: &toml::Table, over: &toml::Table) -> bool {
    let untagged_mass = |t: &toml::Table| t.contains_key("list") || t.contains_key("levels");
    if untagged_mass(base) || untagged_mass(over) {
        return false;
    }
    ["case", "kind"].iter().all(|tag| match (base.get(*tag), over.get(*tag)) {
        (Some(a), Some(b)) => a == b,
        _ => true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_round_trips() {
        let cfg = RunConfig::from_preset("morse1").unwrap();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::parse(&text, None).unwrap(), cfg);
    }

    #[test]
    fn overrides_merge() {
        let cfg = RunConfig::parse(
            "case = \"morse1\"\n[solver]\ntol = 1e-8\n[domain]\nn = [128, 128]\n[masses]\nmax = 1e-3\nmin = 1e-4\nlevels = 5\n",
            None,
        )
        .unwrap();
        assert_eq!(cfg.solver.tol, 1e-8);
        assert_eq!(cfg.domain.dims(), [128, 128]);
        assert_eq!(cfg.masses.levels().unwrap().len(), 5);
        assert!(cfg.solver.auto_omega);
    }

    #[test]
    fn invariants_enforced() {
        assert!(RunConfig::parse("case = \"morse1\"\n[domain]\nn = [32, 128]\n", None).is_err());
        assert!(RunConfig::parse("case = \"morse1\"\n[masses]\nlist = [1e-4, 1e-3]\n", None).is_err());
        assert!(RunConfig::parse("case = \"morse1\"\n[tolerances]\nmorse_slope = 0.0\n", None).is_err());
        assert!(RunConfig::parse("[solver]\ntol = 1e-8\n", None).is_err());
        assert!(RunConfig::parse("case = \"nope\"\n", None).is_err());
    }
}
