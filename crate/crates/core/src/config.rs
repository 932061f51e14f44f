//! Experiment configuration: a TOML file with one table per subcommand.
//!
//! ```toml
//! seed = 7
//! replicas = 20000
//!
//! [sample]
//! family = "square"
//! l = 8
//! p = [0.3, 0.5]
//!
//! [critical_scan]
//! family = "tree3"
//! l = [5, 10, 20]
//! ```
//!
//! Every key is optional; unknown keys are rejected. Command-line flags win
//! over the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acceptance::AcceptanceConfig;
use crate::error::{Error, Result};
use crate::longrange::Kernel;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub out: Option<PathBuf>,
    pub quick: bool,
    pub graph: GraphSection,
    pub sample: SampleSection,
    pub order_param: OrderParamSection,
    pub diffineq: DiffineqSection,
    pub exact: ExactSection,
    pub decay_fit: DecayFitSection,
    pub critical_scan: CriticalScanSection,
    pub longrange: LongRangeSection,
    pub accept: AcceptanceConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

pub const DEFAULT_SEED: u64 = 20240601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub family: String,
    /// Volume radius; the patch is the smallest one that holds `Λ_l`.
    pub l: usize,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self {
            family: "square".into(),
            l: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub family: String,
    pub kind: String,
    pub l: usize,
    pub p: Vec<f64>,
    pub replicas: usize,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            family: "square".into(),
            kind: "bond".into(),
            l: 8,
            p: vec![0.3, 0.5, 0.7],
            replicas: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrderParamSection {
    pub family: String,
    pub kind: String,
    pub l: usize,
    pub p: f64,
    pub h: Vec<f64>,
    pub replicas: usize,
}

impl Default for OrderParamSection {
    fn default() -> Self {
        Self {
            family: "square".into(),
            kind: "bond".into(),
            l: 8,
            p: 0.5,
            h: vec![1.0, 0.5, 0.25, 0.125, 0.0625],
            replicas: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffineqSection {
    pub family: String,
    pub kind: String,
    pub l: usize,
    pub p: Vec<f64>,
    pub h: Vec<f64>,
    pub replicas: usize,
}

impl Default for DiffineqSection {
    fn default() -> Self {
        Self {
            family: "square".into(),
            kind: "bond".into(),
            l: 4,
            p: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            h: vec![1.0, 0.25, 0.05],
            replicas: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactSection {
    /// A built-in graph name, or `all`.
    pub graph: String,
    pub kind: String,
    pub p: Vec<f64>,
}

impl Default for ExactSection {
    fn default() -> Self {
        Self {
            graph: "all".into(),
            kind: "bond".into(),
            p: crate::exact::default_p_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayFitSection {
    pub family: String,
    pub kind: String,
    pub l: usize,
    pub p: f64,
    /// `size` or `radius`.
    pub tail: String,
    pub window: (u32, u32),
    pub replicas: usize,
}

impl Default for DecayFitSection {
    fn default() -> Self {
        Self {
            family: "square".into(),
            kind: "bond".into(),
            l: 32,
            p: 0.3,
            tail: "size".into(),
            window: (5, 40),
            replicas: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticalScanSection {
    pub family: String,
    pub kind: String,
    pub l: Vec<usize>,
    pub p_min: f64,
    pub p_max: f64,
    pub p_step: f64,
    pub replicas: usize,
    pub epsilon: f64,
    pub bootstrap: usize,
    pub confidence: f64,
}

impl Default for CriticalScanSection {
    fn default() -> Self {
        let scan = crate::analysis::ScanConfig::default();
        Self {
            family: "square".into(),
            kind: "bond".into(),
            l: vec![16, 32, 64],
            p_min: 0.4,
            p_max: 0.6,
            p_step: 0.01,
            replicas: 10_000,
            epsilon: scan.epsilon,
            bootstrap: scan.bootstrap,
            confidence: scan.confidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LongRangeSection {
    /// Half-width of the square-lattice patch carrying the model.
    pub half_width: usize,
    pub unoriented: Kernel,
    pub oriented: Kernel,
    pub l: usize,
    /// Radius of the comparison volume for the tail bound.
    pub large_l: usize,
    /// `beta * J0`.
    pub beta_j0: f64,
    pub h: Vec<f64>,
    pub replicas: usize,
}

impl Default for LongRangeSection {
    fn default() -> Self {
        Self {
            half_width: 18,
            unoriented: Kernel::Exponential {
                amplitude: 1.0,
                rate: 1.0,
            },
            oriented: Kernel::Exponential {
                amplitude: 0.5,
                rate: 1.0,
            },
            l: 4,
            large_l: 17,
            beta_j0: 0.3,
            h: vec![0.1, 1.0],
            replicas: 20_000,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn sections_parse() {
        let c = Config::from_toml(
            r#"
seed = 3
[critical_scan]
family = "tree3"
l = [5, 10, 20]
[longrange]
unoriented = { family = "finite_range", weights = [1.0] }
oriented = { family = "zero" }
[accept]
only = [1, 3]
budget_seconds = { "5" = 60.0 }
"#,
        )
        .unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.critical_scan.l, [5, 10, 20]);
        assert_eq!(c.critical_scan.p_step, 0.01);
        assert_eq!(c.longrange.unoriented, Kernel::FiniteRange { weights: vec![1.0] });
        assert_eq!(c.accept.only, [1, 3]);
    }

    #[test]
    fn malformed_is_a_config_error() {
        for bad in ["seed = \"x\"", "[sample]\nreplica = 3", "[nosuch]", "seed = "] {
            assert!(matches!(Config::from_toml(bad), Err(Error::Config(_))), "{bad}");
        }
    }
}
