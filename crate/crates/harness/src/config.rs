//! Experiment configuration.
//!
//! Configs are TOML on disk. The resolved config (defaults filled in, seed
//! override applied) is echoed as canonical JSON next to every run's output.
//! Both encodings round-trip bit-exactly through [`ExperimentConfig`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use oscchain::ChainParams;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSpec>,
    #[serde(default)]
    pub grids: Grids,
    /// Check thresholds by name; missing entries take the experiment default
    /// and are written back into the resolved config.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    SymplecticSuite(SymplecticSuite),
    PropagatorOracle(PropagatorOracle),
    BesselAccuracy(BesselAccuracy),
    MomentOracle(MomentOracle),
    DecoherenceScan(DecoherenceScan),
    Thermalization(Thermalization),
    HydroFixedPoint(HydroFixedPoint),
    HydroCompare(HydroCompare),
    ConservationCheck(ConservationCheck),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::SymplecticSuite(_) => "symplectic-suite",
            Experiment::PropagatorOracle(_) => "propagator-oracle",
            Experiment::BesselAccuracy(_) => "bessel-accuracy",
            Experiment::MomentOracle(_) => "moment-oracle",
            Experiment::DecoherenceScan(_) => "decoherence-scan",
            Experiment::Thermalization(_) => "thermalization",
            Experiment::HydroFixedPoint(_) => "hydro-fixed-point",
            Experiment::HydroCompare(_) => "hydro-compare",
            Experiment::ConservationCheck(_) => "conservation-check",
        }
    }
}

/// Random chains and product states; times in units of 1/Omega.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymplecticSuite {
    pub cases: usize,
    pub n_max: usize,
    pub times: Vec<f64>,
}

impl Default for SymplecticSuite {
    fn default() -> Self {
        SymplecticSuite {
            cases: 50,
            n_max: 50,
            times: vec![0.1, 1.0, 10.0, 100.0],
        }
    }
}

/// Exact means vs the RK4 oracle; t_final and dt in units of 1/Omega.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagatorOracle {
    pub cases: usize,
    pub n_max: usize,
    pub t_final: f64,
    pub dt: f64,
    pub samples: usize,
}

impl Default for PropagatorOracle {
    fn default() -> Self {
        PropagatorOracle {
            cases: 20,
            n_max: 10,
            t_final: 10.0,
            dt: 1e-3,
            samples: 11,
        }
    }
}

/// Approximate vs exact propagator over t in [0, t_max/(gamma Omega)].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BesselAccuracy {
    /// nu^2 values; the error-ratio check compares the last to the first.
    pub couplings: Vec<f64>,
    pub t_max: f64,
    pub points: usize,
    /// r_max = ceil(gamma Omega t) + r_pad
    pub r_pad: usize,
}

impl Default for BesselAccuracy {
    fn default() -> Self {
        BesselAccuracy {
            couplings: vec![0.01, 0.0025],
            t_max: 5.0,
            points: 51,
            r_pad: 20,
        }
    }
}

/// Closed-form moments vs Monte Carlo on random correlated states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentOracle {
    pub states: usize,
    pub n_max: usize,
    pub samples: usize,
    pub batches: usize,
    /// Wavenumbers in units of 1/mean(dq).
    pub wavenumbers: Vec<f64>,
    /// Real-space probe points per state.
    pub probes: usize,
}

impl Default for MomentOracle {
    fn default() -> Self {
        MomentOracle {
            states: 20,
            n_max: 6,
            samples: 100_000,
            batches: 50,
            wavenumbers: vec![0.3, 1.0],
            probes: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoherenceCheck {
    /// R(0, t) = 0 for the number density.
    ZeroK,
    /// R / (k^2 dX^2 / N^2) near 1 for k max(dq) below a cutoff.
    Asymptote,
    /// R N constant across chain sizes at fixed small k.
    NScaling,
    /// cross/diagonal crossover vs 1/corr_length and small-k peaking.
    Crossover,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoherenceScan {
    pub which: Vec<oscchain::Which>,
    pub checks: Vec<DecoherenceCheck>,
    /// Peaking tolerance used for k*.
    pub peaking: f64,
    /// Cutoff on k max(dq) for the asymptote check.
    pub asymptote_cutoff: f64,
    pub n_scaling: Vec<usize>,
    /// k max(dq) at which the N scaling is compared.
    pub scaling_k: f64,
}

impl Default for DecoherenceScan {
    fn default() -> Self {
        DecoherenceScan {
            which: vec![oscchain::Which::Number],
            checks: vec![DecoherenceCheck::ZeroK],
            peaking: 0.05,
            asymptote_cutoff: 1e-2,
            n_scaling: Vec::new(),
            scaling_k: 1e-2,
        }
    }
}

/// Times in units of 1/(gamma Omega).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thermalization {
    pub gammas: Vec<f64>,
    pub t_max: f64,
    pub dt: f64,
    /// Width of the windows over which the correlation envelope is taken.
    pub window: f64,
    /// Site-to-site variance scatter c_n ~ U[1 - jitter, 1 + jitter].
    pub jitter: f64,
    /// Initial (dp)^2 in units of the ground-state value.
    pub momentum_excess: f64,
}

impl Default for Thermalization {
    fn default() -> Self {
        Thermalization {
            gammas: vec![0.01, 0.02],
            t_max: 10.0,
            dt: 0.02,
            window: 0.5,
            jitter: 0.3,
            momentum_excess: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HydroFixedPoint {
    pub theta0: f64,
    pub cells: usize,
    /// Domain half-width in units of sqrt(theta0/K).
    pub half_width: f64,
    pub steps: usize,
    pub cfl: f64,
}

impl Default for HydroFixedPoint {
    fn default() -> Self {
        HydroFixedPoint {
            theta0: 1.0,
            cells: 400,
            half_width: 8.0,
            steps: 1000,
            cfl: 0.4,
        }
    }
}

/// Micro vs hydro; times in units of 1/(gamma Omega).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HydroCompare {
    /// Coarse-graining window; hydro cells have width window/2.
    pub window: f64,
    /// Cells with n below mask * max(n) are excluded.
    pub mask: f64,
    pub times: Vec<f64>,
    /// Discrepancies are asserted for times up to this value.
    pub assert_until: f64,
    pub cfl: f64,
    pub sponge: f64,
}

impl Default for HydroCompare {
    fn default() -> Self {
        HydroCompare {
            window: 5.0,
            mask: 0.05,
            times: vec![0.0, 0.025, 0.05, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0],
            assert_until: 1.0,
            cfl: 0.4,
            sponge: 1e-4,
        }
    }
}

/// Residual convergence; dt in units of 1/Omega.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConservationCheck {
    pub levels: usize,
    pub dt: f64,
    /// Time samples at the coarsest level.
    pub samples: usize,
    pub t_start: f64,
}

impl Default for ConservationCheck {
    fn default() -> Self {
        ConservationCheck {
            levels: 3,
            dt: 0.01,
            samples: 5,
            t_start: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Static equilibrium of the chain (the binding centers when nu^2 = 0).
    FixedPoint,
    /// Evenly spread over [-spread/2, spread/2].
    Uniform,
    /// Independent uniform draws over [-spread/2, spread/2].
    RandomUniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    ProductGaussian {
        layout: Layout,
        #[serde(default)]
        spread: f64,
        var_q: f64,
        var_p: f64,
        /// Variances in units of the single-oscillator ground state.
        #[serde(default)]
        ground_units: bool,
        /// Relative per-site scatter applied to both variances.
        #[serde(default)]
        jitter: f64,
        /// Standard deviation of random mean momenta.
        #[serde(default)]
        momentum_spread: f64,
    },
    /// Smooth perturbation of the trapped Maxwell-Boltzmann profile:
    /// f ~ G (1 + eps sin(x/sigma) exp(-x^2/8sigma^2)),
    /// v = 1.5 eps sqrt(theta0/m) sin(x/sigma) exp(-x^2/2sigma^2),
    /// theta = theta0 (1 + 2 eps cos(x/sigma) exp(-x^2/2sigma^2)).
    LocalEquilibrium {
        theta0: f64,
        width: f64,
        epsilon: f64,
        /// Domain half-width in units of sigma = sqrt(theta0/K).
        #[serde(default = "default_half_width")]
        half_width: f64,
    },
}

fn default_half_width() -> f64 {
    8.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeUnit {
    #[default]
    Absolute,
    /// 1/Omega
    Omega,
    /// 1/(gamma Omega)
    GammaOmega,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(default)]
    pub unit: TimeUnit,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KUnit {
    #[default]
    Absolute,
    /// 1/max(dq_j) of the initial state.
    InverseWidth,
}

/// Zero followed by `points` log-spaced values on [lo, hi].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KGrid {
    #[serde(default)]
    pub unit: KUnit,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XGrid {
    pub lo: f64,
    pub hi: f64,
    pub dx: f64,
    pub window: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<TimeGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<KGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<XGrid>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.to_path_buf(), e))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_toml(&text),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn chain(&self) -> Result<&ChainParams> {
        self.chain.as_ref().ok_or_else(|| {
            HarnessError::Config(format!("{} needs a [chain] block", self.experiment.name()))
        })
    }

    pub fn state(&self) -> Result<&StateSpec> {
        self.state.as_ref().ok_or_else(|| {
            HarnessError::Config(format!("{} needs a [state] block", self.experiment.name()))
        })
    }

    /// Threshold `name`, recording `default` in the config when absent.
    pub fn tolerance(&mut self, name: &str, default: f64) -> f64 {
        *self.tolerances.entry(name.to_string()).or_insert(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7

[experiment]
kind = "decoherence-scan"
checks = ["zero-k", "asymptote"]

[chain]
n_particles = 10
mass = 1.0
coupling = 0.0
binding = 1.0

[state]
kind = "product-gaussian"
layout = "uniform"
spread = 10.0
var_q = 1.0
var_p = 0.25

[grids.k]
unit = "inverse-width"
lo = 1e-4
hi = 1.0
points = 9

[tolerances]
asymptote = 0.05
"#;

    #[test]
    fn toml_json_round_trip() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.experiment.name(), "decoherence-scan");
        let json = c.to_json();
        let back = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), json);
        let again = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_toml("[experiment]\nkind = \"symplectic-suite\"\n").unwrap();
        assert_eq!(
            c.experiment,
            Experiment::SymplecticSuite(SymplecticSuite::default())
        );
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_toml(
            "[experiment]\nkind = \"symplectic-suite\"\ncasez = 3\n"
        )
        .is_err());
        assert!(ExperimentConfig::from_toml("[experiment]\nkind = \"plotting\"\n").is_err());
    }
}
