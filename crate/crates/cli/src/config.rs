use std::path::{Path, PathBuf};

use elastic_register::registration::RegistrationConfig;
use elastic_register::synthesis::CaseSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CmdResult, Failure};

/// Declarative run description read from `--config`. Every field is
/// optional; command-line flags override whatever is set here.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mesh: Option<PathBuf>,
    pub cloud: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub trace: bool,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    /// Node list held at zero displacement by penalty springs.
    pub fixed_nodes: Option<PathBuf>,
    /// Node list allowed to carry force.
    pub force_mask: Option<PathBuf>,
    pub registration: RegistrationConfig,
    pub simulate: SimulateConfig,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub preset: Option<String>,
    pub visibility: Vec<f64>,
    pub noise: Vec<f64>,
    /// Number of seeds per (visibility, noise) pair.
    pub seeds: Option<u64>,
    /// Phantom grid resolution when no mesh is given.
    pub cells: Option<[usize; 3]>,
    /// Base case recipe; visibility, noise and seed are overwritten per case.
    pub case: Option<CaseSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub k_ss: Vec<f64>,
    pub poisson_ratio: Vec<f64>,
    pub iters: Vec<usize>,
}

impl RunConfig {
    /// Parses TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> CmdResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Failure::input(format!("config {}: {e}", path.display())))?;
        Self::parse(&text, path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")))
            .map_err(|e| Failure::input(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str, json: bool) -> Result<Self, String> {
        if json {
            serde_json::from_str(text).map_err(|e| e.to_string())
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_sections() {
        let c = RunConfig::parse(
            "mesh = \"a.vtk\"\n[registration]\nk_ss = 0.05\n[sweep]\nk_ss = [0.001, 0.01]\n",
            false,
        )
        .unwrap();
        assert_eq!(c.mesh.as_deref(), Some(Path::new("a.vtk")));
        assert_eq!(c.registration.k_ss, 0.05);
        assert_eq!(c.registration.max_iters, 200);
        assert_eq!(c.sweep.k_ss, vec![0.001, 0.01]);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("kss = 1\n", false).is_err());
        assert!(RunConfig::parse("[registration]\nkss = 1\n", false).is_err());
        assert!(RunConfig::parse(r#"{"registration": {"iters": 3}}"#, true).is_err());
    }

    #[test]
    fn empty_is_default() {
        let c = RunConfig::parse("", false).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.registration, RegistrationConfig::default());
    }
}
