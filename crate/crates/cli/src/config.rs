//! Run configuration: one TOML file describing the system, the
//! discretisation and every stage's knobs.

use std::path::{Path, PathBuf};

use seqrpf::map_zoo::{
    make_driven_mp_system, make_linear_expanding, make_mp_map, make_perturbed_expanding, BetaMap, Bump, Observable,
    Potential, PotentialKind, Scalar, SequentialSystem,
};
use seqrpf::spectral_stats::DEFAULT_R0;
use seqrpf::transfer_op::{Grid, Transfer, DEFAULT_TRIALS};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    /// `m x mod 1`, on the circle unless `interval` is set.
    Linear {
        m: u32,
        #[serde(default)]
        interval: bool,
    },
    /// `m x mod 1` with a bump lowering the first branch's minimum slope.
    Perturbed { m: u32, min_slope: f64 },
    /// Manneville–Pomeau with parameter `beta`.
    Mp { beta: f64 },
    /// MP maps driven by a circle rotation: `β_j = beta + slope·cos 2πω_j`.
    DrivenMp { angle: f64, beta: f64, slope: f64, horizon: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    #[serde(default)]
    pub scale: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Zero,
    Identity,
    /// `cos 2πkx`
    Cos {
        k: u32,
    },
    /// `sin 2πkx`
    Sin {
        k: u32,
    },
    /// `r∘T − r` with `r = cos 2πkx`.
    Coboundary {
        k: u32,
    },
    /// `Σ_{i≤k} (1 − (i−1)/k) cos 2πix`, carried as a `k`-vector and projected.
    Fejer {
        k: u32,
    },
}

impl ObservableSpec {
    /// The observable and the default projection direction.
    pub fn build(&self) -> (Observable, Vec<f64>) {
        match *self {
            ObservableSpec::Zero => (Observable::zero(), vec![1.0]),
            ObservableSpec::Identity => (Observable::scalar(Scalar::Identity), vec![1.0]),
            ObservableSpec::Cos { k } => (Observable::scalar(Scalar::Cos(k)), vec![1.0]),
            ObservableSpec::Sin { k } => (Observable::scalar(Scalar::Sin(k)), vec![1.0]),
            ObservableSpec::Coboundary { k } => (Observable::coboundary(Scalar::Cos(k)), vec![1.0]),
            ObservableSpec::Fejer { k } => {
                let comps: Vec<Scalar> = (1..=k).map(Scalar::Cos).collect();
                let v = (1..=k).map(|i| 1.0 - (i - 1) as f64 / k as f64).collect();
                (Observable::vector(&comps), v)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub map: MapSpec,
    #[serde(default = "zero_potential")]
    pub potential: PotentialSpec,
    #[serde(default = "zero_observable")]
    pub observable: ObservableSpec,
    #[serde(default = "one")]
    pub alpha: f64,
}

fn zero_potential() -> PotentialSpec {
    PotentialSpec { kind: PotentialKind::Zero, scale: 0.0 }
}

fn zero_observable() -> ObservableSpec {
    ObservableSpec::Zero
}

fn one() -> f64 {
    1.0
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            map: MapSpec::Linear { m: 2, interval: false },
            potential: zero_potential(),
            observable: ObservableSpec::Cos { k: 1 },
            alpha: 1.0,
        }
    }
}

impl SystemConfig {
    pub fn build(&self) -> seqrpf::Result<SequentialSystem> {
        let (obs, _) = self.observable.build();
        let pot = Potential::new(self.potential.kind, self.potential.scale);
        let sys = match &self.map {
            MapSpec::Linear { m, interval } => {
                let map = make_linear_expanding(*m)?;
                let map = if *interval { map.on_interval() } else { map };
                SequentialSystem::homogeneous(map, pot, obs)
            }
            MapSpec::Perturbed { m, min_slope } => SequentialSystem::homogeneous(
                make_perturbed_expanding(*m, Bump::for_min_slope(*m, *min_slope))?,
                pot,
                obs,
            ),
            MapSpec::Mp { beta } => SequentialSystem::homogeneous(make_mp_map(*beta)?, pot, obs),
            MapSpec::DrivenMp { angle, beta, slope, horizon } => {
                make_driven_mp_system(*angle, BetaMap { offset: *beta, slope: *slope }, *horizon)?
                    .with_potential(pot)
                    .with_observable(obs)
            }
        };
        sys.with_alpha(self.alpha)
    }

    /// The same system with its MP parameter moved by `delta`.
    pub fn shift_beta(&self, delta: f64) -> Option<SystemConfig> {
        let map = match &self.map {
            MapSpec::Mp { beta } => MapSpec::Mp { beta: beta + delta },
            MapSpec::DrivenMp { angle, beta, slope, horizon } => {
                MapSpec::DrivenMp { angle: *angle, beta: beta + delta, slope: *slope, horizon: *horizon }
            }
            _ => return None,
        };
        Some(SystemConfig { map, ..self.clone() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Number of grid cells; a power of two.
    pub n: usize,
    pub depth: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: 1024, depth: 40 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairingConfig {
    pub samples: usize,
}

impl Default for PairingConfig {
    fn default() -> Self {
        PairingConfig { samples: 3000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RpfConfig {
    /// Length of the solved window starting at fiber 0.
    pub fibers: usize,
    /// Largest `n` in the convergence and correlation scans.
    pub n_max: usize,
    pub conformal_sets: usize,
}

impl Default for RpfConfig {
    fn default() -> Self {
        RpfConfig { fibers: 1, n_max: 25, conformal_sets: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConesConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub samples: usize,
    pub aperture_samples: usize,
    pub decompose_samples: usize,
    pub perturbation_samples: usize,
    pub triples: usize,
    pub moduli: Vec<f64>,
}

impl Default for ConesConfig {
    fn default() -> Self {
        ConesConfig {
            kappa: None,
            delta: None,
            samples: 100,
            aperture_samples: 500,
            decompose_samples: 500,
            perturbation_samples: 20,
            triples: 2000,
            moduli: vec![1e-1, 1e-2, 1e-3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    /// Block lengths at which covariance and pressure Hessian are compared.
    pub cov_ns: Vec<usize>,
    pub growth_ns: Vec<usize>,
    pub declared_c: f64,
    pub pressure_ns: Vec<usize>,
    pub norm_ts: Vec<f64>,
    pub norm_n_max: usize,
    pub burn_in: usize,
    pub trials: usize,
    /// `Δβ` values for the stability scan; empty skips it.
    pub beta_sweep: Vec<f64>,
    pub stability_n: usize,
    pub r0: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            cov_ns: vec![1, 10, 50, 100, 200],
            growth_ns: vec![64, 256, 1024],
            declared_c: 0.4,
            pressure_ns: vec![1, 10, 50],
            norm_ts: vec![0.05, 0.1, 0.2],
            norm_n_max: 200,
            burn_in: 40,
            trials: DEFAULT_TRIALS,
            beta_sweep: Vec::new(),
            stability_n: 200,
            r0: DEFAULT_R0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionHConfig {
    pub block_len: usize,
    pub t: f64,
    pub k_max: usize,
    pub eps0: f64,
    /// Gap at which the Monte Carlo cross-check runs.
    pub cross_k: usize,
}

impl Default for ConditionHConfig {
    fn default() -> Self {
        ConditionHConfig { block_len: 8, t: 0.1, k_max: 30, eps0: 0.2, cross_k: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdpSection {
    pub gamma: f64,
    pub xs: Vec<f64>,
    pub n: usize,
    pub replicas: usize,
}

impl Default for MdpSection {
    fn default() -> Self {
        MdpSection { gamma: 0.7, xs: vec![1.0], n: 4096, replicas: 100_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub replicas: usize,
    pub ladder: Vec<usize>,
    /// Projection direction; defaults to the observable's own.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition_h: Option<ConditionHConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mdp: Option<MdpSection>,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection { replicas: 20_000, ladder: vec![16, 64, 256], direction: None, condition_h: None, mdp: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

/// Pass thresholds. Every entry must be positive and finite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rpf_residual: f64,
    pub conformal: f64,
    pub decay_r2: f64,
    pub correlation_r2: f64,
    pub perturbation_ratio: f64,
    pub cov_hessian: f64,
    pub norm_bound: f64,
    pub ks_ratio: f64,
    pub h_gap: f64,
    pub h_sigmas: f64,
    pub mdp_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rpf_residual: 1e-6,
            conformal: 1e-3,
            decay_r2: 0.95,
            correlation_r2: 0.9,
            perturbation_ratio: 2.0,
            cov_hessian: 0.05,
            norm_bound: 10.0,
            ks_ratio: 3.0,
            h_gap: 1e-6,
            h_sigmas: 3.0,
            mdp_rel: 0.5,
        }
    }
}

impl Tolerances {
    fn entries(&self) -> [(&'static str, f64); 11] {
        [
            ("rpf_residual", self.rpf_residual),
            ("conformal", self.conformal),
            ("decay_r2", self.decay_r2),
            ("correlation_r2", self.correlation_r2),
            ("perturbation_ratio", self.perturbation_ratio),
            ("cov_hessian", self.cov_hessian),
            ("norm_bound", self.norm_bound),
            ("ks_ratio", self.ks_ratio),
            ("h_gap", self.h_gap),
            ("h_sigmas", self.h_sigmas),
            ("mdp_rel", self.mdp_rel),
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub system: SystemConfig,
    pub grid: GridConfig,
    pub pairing: PairingConfig,
    pub rpf: RpfConfig,
    pub cones: ConesConfig,
    pub spectral: SpectralConfig,
    pub sim: SimSection,
    pub output: OutputConfig,
    pub tolerances: Tolerances,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| usage(format!("config: {e}")))
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.seed > i64::MAX as u64 {
            return Err(usage("seed must fit in a signed 64-bit integer"));
        }
        if !self.grid.n.is_power_of_two() || self.grid.n < 8 {
            return Err(usage(format!("grid.n = {} must be a power of two ≥ 8", self.grid.n)));
        }
        if self.grid.depth == 0 {
            return Err(usage("grid.depth must be positive"));
        }
        for (name, v) in self.tolerances.entries() {
            if !(v.is_finite() && v > 0.0) {
                return Err(usage(format!("tolerance {name} = {v} must be positive")));
            }
        }
        let pos = |name: &str, v: usize| if v == 0 { Err(usage(format!("{name} must be positive"))) } else { Ok(()) };
        pos("pairing.samples", self.pairing.samples)?;
        pos("rpf.fibers", self.rpf.fibers)?;
        pos("rpf.n_max", self.rpf.n_max)?;
        pos("sim.replicas", self.sim.replicas)?;
        if self.sim.ladder.is_empty() || self.sim.ladder.windows(2).any(|w| w[1] <= w[0]) || self.sim.ladder[0] == 0 {
            return Err(usage("sim.ladder must be positive and strictly increasing"));
        }
        if !self.spectral.beta_sweep.is_empty() && self.system.shift_beta(0.0).is_none() {
            return Err(usage("spectral.beta_sweep needs an MP-type map"));
        }
        let (obs, v) = self.system.observable.build();
        let v = self.sim.direction.clone().unwrap_or(v);
        if v.len() != obs.dim() {
            return Err(usage(format!("sim.direction has {} entries, the observable has {}", v.len(), obs.dim())));
        }
        // Catch bad map parameters now rather than mid-pipeline.
        let sys = self.system.build().map_err(|e| usage(format!("system: {e}")))?;
        Grid::new(sys.space(), self.grid.n).map_err(|e| usage(format!("grid: {e}")))?;
        Ok(())
    }

    pub fn direction(&self) -> Vec<f64> {
        self.sim.direction.clone().unwrap_or_else(|| self.system.observable.build().1)
    }

    pub fn transfer(&self) -> seqrpf::Result<Transfer> {
        transfer_for(&self.system, self.grid.n)
    }
}

pub fn transfer_for(system: &SystemConfig, n: usize) -> seqrpf::Result<Transfer> {
    let sys = system.build()?;
    let grid = Grid::new(sys.space(), n)?;
    Transfer::new(sys, grid)
}
