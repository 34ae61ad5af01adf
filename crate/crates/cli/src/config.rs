//! Run configuration: a single JSON document, validated on load.

use std::path::{Path, PathBuf};

use ellopt_core::catalog::ProblemSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    #[serde(default = "default_mesh")]
    pub mesh: usize,
    #[serde(default)]
    pub seed: u64,
    /// Replace the catalog reference control by the improver's fixed point.
    #[serde(default)]
    pub improve: Option<ImproveConfig>,
    #[serde(default)]
    pub candidates: Vec<CandidateSpec>,
    #[serde(default)]
    pub directions: DirectionSpec,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub homogenization: Option<HomogenizationConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_mesh() -> usize {
    32
}

fn default_alphas() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025, 0.0125]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImproveConfig {
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
}

fn default_rounds() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CandidateSpec {
    /// The same label everywhere.
    Constant { name: String, label: usize },
    /// The reference control with `label` on a rectangle `[x0, x1, y0, y1]`,
    /// or on the instance's own subregion when no rectangle is given.
    Region {
        name: String,
        label: usize,
        #[serde(default)]
        rect: Option<[f64; 4]>,
    },
    /// Every element moved from `v̄` to `(v̄ + shift) mod |U|`.
    Flip {
        name: String,
        #[serde(default = "one")]
        shift: usize,
    },
    /// Independent labels drawn per element; elements keep the reference
    /// label with probability `keep`.
    Random {
        name: String,
        #[serde(default = "half")]
        keep: f64,
    },
}

fn one() -> usize {
    1
}

fn half() -> f64 {
    0.5
}

impl CandidateSpec {
    pub fn name(&self) -> &str {
        match self {
            Self::Constant { name, .. } | Self::Region { name, .. } | Self::Flip { name, .. } | Self::Random { name, .. } => {
                name
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DirectionSpec {
    /// Directions attaining the maximal quotient.
    #[default]
    Selected,
    Constant { angle: f64 },
    /// Uniform random angles.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogenizationConfig {
    /// Phase matrices as 2x2 row lists.
    pub b: [[f64; 2]; 2],
    pub c: [[f64; 2]; 2],
    pub alpha: f64,
    /// Rational direction as `[numerator, denominator]` per component.
    #[serde(default = "default_direction")]
    pub direction: [[i64; 2]; 2],
    pub eps: Vec<f64>,
    #[serde(default)]
    pub mesh: Option<usize>,
    #[serde(default = "default_source")]
    pub source: f64,
}

fn default_direction() -> [[i64; 2]; 2] {
    [[1, 1], [0, 1]]
}

fn default_source() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest accepted first-order violation.
    pub pontryagin: f64,
    /// Singularity tolerance; derived from the Hamiltonian scale when absent.
    pub sing: Option<f64>,
    pub improve_tie: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { pontryagin: 1e-6, sing: None, improve_tie: 1e-9 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let err = |message: String| CliError::Config { path: path.to_owned(), message };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        cfg.validate().map_err(err)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.mesh < 2 {
            return Err(format!("mesh resolution {} is below 2", self.mesh));
        }
        if self.alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) || self.alphas.windows(2).any(|w| w[1] >= w[0]) {
            return Err("alphas must be strictly decreasing inside (0, 1)".to_owned());
        }
        let mut names: Vec<&str> = self.candidates.iter().map(CandidateSpec::name).collect();
        if names.iter().any(|n| n.is_empty() || !n.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')) {
            return Err("candidate names must be nonempty and use only [A-Za-z0-9_-]".to_owned());
        }
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err("candidate names must be unique".to_owned());
        }
        for c in &self.candidates {
            if let CandidateSpec::Random { keep, .. } = c {
                if !(0.0..=1.0).contains(keep) {
                    return Err(format!("keep probability {keep} outside [0, 1]"));
                }
            }
        }
        if let Some(h) = &self.homogenization {
            if !(h.alpha > 0.0 && h.alpha < 1.0) {
                return Err(format!("homogenization alpha {} outside (0, 1)", h.alpha));
            }
            if h.eps.is_empty() {
                return Err("homogenization needs at least one period".to_owned());
            }
        }
        if !(self.tolerances.pontryagin >= 0.0) || !(self.tolerances.improve_tie >= 0.0) {
            return Err("tolerances must be nonnegative".to_owned());
        }
        Ok(())
    }

    /// Canonical serialization: defaults filled in, fixed field order, no
    /// output directory.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        serde_json::to_string(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.canonical_json().as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
