//! Declarative run configuration and its validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use wfl_core::drift::{DriftSpec, ScalarFn};
use wfl_core::dynamics::SimConfig;
use wfl_core::kernels::{MassKernel, SpectralDecay};
use wfl_core::meanfield::MeanFieldConfig;
use wfl_core::state::{BinLayout, QuantileState};
use wfl_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Simulate,
    Covariance,
    Invert,
    Regularize,
    Picard,
    Peano,
    Arratia,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Simulate => "simulate",
            Scenario::Covariance => "covariance",
            Scenario::Invert => "invert",
            Scenario::Regularize => "regularize",
            Scenario::Picard => "picard",
            Scenario::Peano => "peano",
            Scenario::Arratia => "arratia",
        }
    }
}

/// Initial quantile function sampled on the midpoint grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialQuantile {
    /// `g(u) = lo + (hi − lo) u`
    Linear { lo: f64, hi: f64 },
    /// `g(u) = lo + (hi − lo) u + amplitude · sin(2πu)`
    Wavy { lo: f64, hi: f64, amplitude: f64 },
    Values { values: Vec<f64> },
}

impl InitialQuantile {
    pub fn state(&self, n: usize) -> Result<QuantileState> {
        let tau = std::f64::consts::TAU;
        match self {
            InitialQuantile::Linear { lo, hi } => Ok(QuantileState::from_fn(n, |u| lo + (hi - lo) * u)),
            InitialQuantile::Wavy { lo, hi, amplitude } => {
                Ok(QuantileState::from_fn(n, |u| lo + (hi - lo) * u + amplitude * (tau * u).sin()))
            }
            InitialQuantile::Values { values } => {
                if values.len() != n {
                    return Err(Error::Config(format!("{} initial values for n = {n}", values.len())));
                }
                Ok(QuantileState::new(values.clone()))
            }
        }
    }

    /// `g'` on the grid, when known in closed form.
    #[cfg(test)]
    pub fn derivative(&self, n: usize) -> Option<Vec<f64>> {
        let tau = std::f64::consts::TAU;
        let u = |i: usize| (i as f64 + 0.5) / n as f64;
        match *self {
            InitialQuantile::Linear { lo, hi } => Some(vec![hi - lo; n]),
            InitialQuantile::Wavy { lo, hi, amplitude } => {
                Some((0..n).map(|i| hi - lo + amplitude * tau * (tau * u(i)).cos()).collect())
            }
            InitialQuantile::Values { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralInversion {
    pub kernel: MassKernel,
    pub drift: DriftSpec,
    pub particles: usize,
    pub initial: InitialQuantile,
    pub k_max: f64,
    pub dk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertBlock {
    pub alpha: f64,
    pub target: ScalarFn,
    pub support: [f64; 2],
    /// `(k_max, dk)` per refinement level, coarse to fine.
    pub levels: Vec<[f64; 2]>,
    /// x-grid extends this far beyond the support.
    #[serde(default = "half")]
    pub margin: f64,
    pub general: Option<GeneralInversion>,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizeBlock {
    pub delta: f64,
    pub coef: f64,
    pub weights: usize,
    /// `ε = 2^{−j}` for each listed `j`.
    pub eps_exponents: Vec<i32>,
    pub s_range: [f64; 2],
    pub s_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardBlock {
    pub ensemble: MeanFieldConfig,
    pub drift: DriftSpec,
    /// Stream index of the frozen common noise.
    #[serde(default)]
    pub common_path: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeanoBlock {
    pub particles: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    pub perturbation: f64,
    pub decay: SpectralDecay,
    pub layout: BinLayout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArratiaBlock {
    pub particles: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    pub initial: InitialQuantile,
    /// Spectral model the covariation is compared with.
    pub decay: SpectralDecay,
    pub kernel: MassKernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub paths: usize,
    /// Record every `stride`-th time step.
    #[serde(default = "one")]
    pub stride: usize,
    pub out: Option<PathBuf>,
    pub sim: Option<SimConfig>,
    pub initial: Option<InitialQuantile>,
    pub drift: Option<DriftSpec>,
    pub invert: Option<InvertBlock>,
    pub regularize: Option<RegularizeBlock>,
    pub picard: Option<PicardBlock>,
    pub peano: Option<PeanoBlock>,
    pub arratia: Option<ArratiaBlock>,
}

fn one() -> usize {
    1
}

fn missing(scenario: Scenario, block: &str) -> Error {
    Error::Config(format!("scenario `{}` requires a [{block}] section", scenario.name()))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs serialize to TOML")
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Simulation block with the top-level seed and path count applied.
    pub fn sim(&self) -> Result<SimConfig> {
        let mut sim = self.sim.clone().ok_or_else(|| missing(self.scenario, "sim"))?;
        sim.seed = self.seed;
        sim.paths = self.paths;
        Ok(sim)
    }

    /// Ensemble block with the top-level seed applied.
    pub fn ensemble(&self) -> Result<MeanFieldConfig> {
        let mut e = self.picard.as_ref().ok_or_else(|| missing(self.scenario, "picard"))?.ensemble.clone();
        e.seed = self.seed;
        Ok(e)
    }

    pub fn initial_state(&self, n: usize) -> Result<QuantileState> {
        self.initial.as_ref().ok_or_else(|| missing(self.scenario, "initial"))?.state(n)
    }

    pub fn drift(&self) -> DriftSpec {
        self.drift.clone().unwrap_or(DriftSpec::Zero)
    }

    /// Checks that the sections the scenario needs are present and valid.
    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::Config("paths must be positive".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be positive".into()));
        }
        match self.scenario {
            Scenario::Simulate | Scenario::Covariance => {
                let sim = self.sim()?;
                sim.validate()?;
                let g = self.initial_state(sim.particles)?;
                if g.values.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config("initial quantile values must be strictly increasing".into()));
                }
                self.drift().validate()
            }
            Scenario::Invert => {
                let b = self.invert.as_ref().ok_or_else(|| missing(self.scenario, "invert"))?;
                if b.levels.is_empty() {
                    return Err(Error::Config("invert needs at least one refinement level".into()));
                }
                if !(b.support[0] < b.support[1]) || !(b.margin >= 0.0) {
                    return Err(Error::Config("invert support must be an interval and margin non-negative".into()));
                }
                for l in &b.levels {
                    SpectralDecay::new(b.alpha, l[0], l[1]).validate()?;
                }
                if let Some(g) = &b.general {
                    SpectralDecay::new(b.alpha, g.k_max, g.dk).validate()?;
                    g.kernel.validate()?;
                    g.drift.validate()?;
                    g.initial.state(g.particles)?;
                    if g.particles < 2 {
                        return Err(Error::Config("general inversion needs at least two particles".into()));
                    }
                }
                Ok(())
            }
            Scenario::Regularize => {
                let b = self.regularize.as_ref().ok_or_else(|| missing(self.scenario, "regularize"))?;
                if !(b.delta > 0.0 && b.delta <= 1.0) {
                    return Err(Error::Config(format!("delta must lie in (0, 1], got {}", b.delta)));
                }
                if b.weights < 2 || b.s_steps < 1 || b.eps_exponents.len() < 2 {
                    return Err(Error::Config("regularize needs weights >= 2, s_steps >= 1 and two or more eps values".into()));
                }
                if !(0.0 <= b.s_range[0] && b.s_range[0] < b.s_range[1] && b.s_range[1] <= 1.0) {
                    return Err(Error::Config("s_range must be an interval inside [0, 1]".into()));
                }
                Ok(())
            }
            Scenario::Picard => {
                let b = self.picard.as_ref().ok_or_else(|| missing(self.scenario, "picard"))?;
                self.ensemble()?.validate()?;
                b.drift.validate()
            }
            Scenario::Peano => {
                let b = self.peano.as_ref().ok_or_else(|| missing(self.scenario, "peano"))?;
                let mut sim = SimConfig::new(b.horizon, b.dt, b.particles, b.decay, MassKernel::Constant);
                sim.paths = self.paths;
                sim.validate()?;
                b.layout.validate()
            }
            Scenario::Arratia => {
                let b = self.arratia.as_ref().ok_or_else(|| missing(self.scenario, "arratia"))?;
                let steps = b.horizon / b.dt;
                if !(b.dt > 0.0) || !(b.horizon >= 0.0) || (steps - steps.round()).abs() > 1e-6 {
                    return Err(Error::Config(format!("arratia needs dt > 0 and integer T/dt, got T = {}, dt = {}", b.horizon, b.dt)));
                }
                if b.particles < 2 {
                    return Err(Error::Config("arratia needs at least two particles".into()));
                }
                b.decay.validate()?;
                b.kernel.validate()?;
                b.initial.state(b.particles).map(|_| ())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIMULATE: &str = r#"
scenario = "simulate"
seed = 3
paths = 2

[sim]
T = 0.1
dt = 0.01
n = 8
decay = { alpha = 2.0, k_max = 5.0, dk = 0.25 }
phi = { variant = "gaussian", scale = 1.0 }

[initial]
kind = "linear"
lo = -1.0
hi = 1.0

[drift]
variant = "b2"
a = { kind = "constant", value = 0.2 }
"#;

    #[test]
    fn round_trip_is_lossless() {
        let cfg = RunConfig::parse(SIMULATE).unwrap();
        cfg.validate().unwrap();
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_eq!(cfg.hash().len(), 16);
    }

    #[test]
    fn top_level_seed_and_paths_reach_the_simulation() {
        let sim = RunConfig::parse(SIMULATE).unwrap().sim().unwrap();
        assert_eq!((sim.seed, sim.paths), (3, 2));
    }

    #[test]
    fn unknown_fields_and_scenarios_are_rejected() {
        assert!(RunConfig::parse(&SIMULATE.replace("seed = 3", "seed = 3\nbogus = 1")).is_err());
        let e = RunConfig::parse(&SIMULATE.replace("\"simulate\"", "\"warp\"")).unwrap_err();
        assert!(e.to_string().contains("simulate"), "{e}");
    }

    #[test]
    fn missing_sections_are_reported() {
        let cfg = RunConfig::parse("scenario = \"picard\"").unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("[picard]"));
    }

    #[test]
    fn initial_quantiles() {
        let g = InitialQuantile::Wavy { lo: 0.0, hi: 1.0, amplitude: 0.1 };
        let y = g.state(64).unwrap();
        let d = g.derivative(64).unwrap();
        for i in 1..63 {
            let fd = (y.values[i + 1] - y.values[i - 1]) * 32.0;
            assert!((fd - d[i]).abs() < 1e-2);
        }
        assert!(InitialQuantile::Values { values: vec![0.0] }.state(2).is_err());
    }
}
