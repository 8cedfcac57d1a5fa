//! Run configuration: a JSON document describing the channel, the ensemble,
//! the rate grid and what to compute.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gld::DecodingMetric;
use crate::opt::SolverConfig;
use crate::prob::{ChannelModel, EnsembleSpec, RatePair, User};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    /// Nats per unit.
    pub fn scale(self) -> f64 {
        match self {
            Units::Nats => 1.0,
            Units::Bits => std::f64::consts::LN_2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }
}

/// The exponents a run can request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    RcWeak,
    RcStrong,
    Ml1Weak,
    Ml1Strong,
    Ml2Weak,
    Ml2Strong,
    GldWeak,
    GldStrong,
}

impl Bound {
    pub const ALL: [Bound; 8] = [
        Bound::RcWeak,
        Bound::RcStrong,
        Bound::Ml1Weak,
        Bound::Ml1Strong,
        Bound::Ml2Weak,
        Bound::Ml2Strong,
        Bound::GldWeak,
        Bound::GldStrong,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Bound::RcWeak => "rc-weak",
            Bound::RcStrong => "rc-strong",
            Bound::Ml1Weak => "ml1-weak",
            Bound::Ml1Strong => "ml1-strong",
            Bound::Ml2Weak => "ml2-weak",
            Bound::Ml2Strong => "ml2-strong",
            Bound::GldWeak => "gld-weak",
            Bound::GldStrong => "gld-strong",
        }
    }

    pub fn user(self) -> User {
        match self {
            Bound::RcWeak | Bound::Ml1Weak | Bound::Ml2Weak | Bound::GldWeak => User::Weak,
            _ => User::Strong,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    /// Strong-user channel, rows indexed by the input symbol.
    pub w1: Vec<Vec<f64>>,
    /// Weak-user channel.
    pub w2: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub p_u: Vec<f64>,
    pub p_x_given_u: Vec<Vec<f64>>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            p_u: vec![0.5, 0.5],
            p_x_given_u: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        }
    }
}

/// Either an explicit list of rates or `count` evenly spaced rates from
/// `start` to `stop` inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateAxis {
    List(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl Default for RateAxis {
    fn default() -> Self {
        RateAxis::List(vec![0.0])
    }
}

impl RateAxis {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            RateAxis::List(ref v) => v.clone(),
            RateAxis::Range { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![start],
                _ => (0..count)
                    .map(|k| start + (stop - start) * k as f64 / (count - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateGrid {
    pub units: Units,
    pub r_y: RateAxis,
    pub r_z: RateAxis,
}

impl RateGrid {
    /// The cartesian grid in nats, `R_z` outermost.
    pub fn points(&self) -> Result<Vec<RatePair>> {
        let scale = self.units.scale();
        let (ys, zs) = (self.r_y.values(), self.r_z.values());
        let mut out = Vec::with_capacity(ys.len() * zs.len());
        for &z in &zs {
            for &y in &ys {
                out.push(RatePair::new(y * scale, z * scale)?);
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderKind {
    /// Maximum likelihood at the strong receiver.
    #[default]
    Ml,
    /// Cloud-summed likelihood at the weak receiver.
    Bin,
    /// Generalized likelihood decoder with the run's metric.
    Gld,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n: Vec<usize>,
    /// Channel realizations per transmitted message.
    pub trials: u64,
    pub decoder: DecoderKind,
    /// Receiver of the GLD; the other decoders fix their own.
    pub user: User,
    /// Sum over every output instead of sampling.
    pub exhaustive: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            n: vec![8],
            trials: 1000,
            decoder: DecoderKind::Ml,
            user: User::Strong,
            exhaustive: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Random instances per oracle operation.
    pub instances: usize,
    /// Overrides every per-operation tolerance when set.
    pub tolerance: Option<f64>,
    /// Slack of the dominance checks.
    pub dominance_tolerance: f64,
    /// Operations to check; empty means all.
    pub ops: Vec<crate::verify::OracleOp>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            instances: 1,
            tolerance: None,
            dominance_tolerance: 5e-3,
            ops: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub channel: ChannelConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub rates: RateGrid,
    #[serde(default)]
    pub bounds: Vec<Bound>,
    #[serde(default = "default_metric")]
    pub metric: DecodingMetric,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Also emit the named components of each bound.
    #[serde(default)]
    pub components: bool,
    /// Overrides `solver.rng_seed` and seeds the simulator.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

fn default_metric() -> DecodingMetric {
    DecodingMetric::Likelihood
}

/// A configuration checked and converted to library types.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: RunConfig,
    pub channel: ChannelModel,
    pub ensemble: EnsembleSpec,
    pub points: Vec<RatePair>,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_json(&text)
    }

    /// Checks everything and builds the library objects. Channel problems
    /// come back as [`Error::InvalidChannel`]; anything else is a config error.
    pub fn prepare(self, seed_override: Option<u64>) -> Result<Prepared> {
        let channel = ChannelModel::from_matrices(&self.channel.w1, &self.channel.w2)
            .map_err(|e| Error::InvalidChannel(e.to_string()))?;
        let ensemble = EnsembleSpec::from_vectors(&self.ensemble.p_u, &self.ensemble.p_x_given_u)
            .map_err(|e| Error::Parse(format!("ensemble: {e}")))?;
        if ensemble.nx() != channel.nx() {
            return Err(Error::Parse(format!(
                "ensemble has {} inputs, channel {}",
                ensemble.nx(),
                channel.nx()
            )));
        }
        let points = self.rates.points().map_err(|e| Error::Parse(format!("rates: {e}")))?;
        self.metric
            .validate()
            .map_err(|e| Error::Parse(format!("metric: {e}")))?;
        if let DecodingMetric::Mismatched { channel: m, .. } = &self.metric {
            if m.len() != channel.nx() {
                return Err(Error::Parse(
                    "mismatched metric channel has the wrong input alphabet".into(),
                ));
            }
        }
        self.solver.validate().map_err(|e| Error::Parse(e.to_string()))?;
        let seed = seed_override.or(self.seed).unwrap_or(self.solver.rng_seed);
        let solver = self.solver.with_seed(seed);
        Ok(Prepared {
            config: self,
            channel,
            ensemble,
            points,
            solver,
            seed,
        })
    }
}
