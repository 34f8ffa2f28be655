//! Experiment configuration files (TOML). Unknown keys are rejected.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array::{make_ula, make_upa, AntennaArray, Axis, Geometry};
use crate::channel::{AnomalyEvent, AnomalyKind, ChannelGenConfig, SnrModel};
use crate::error::{Error, Result};
use crate::estimators::{StopCriterion, StoppingRule};
use crate::mpnet::{InitTag, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub geometry: Geometry,
    /// Antenna count of a linear array.
    #[serde(default)]
    pub antennas: Option<usize>,
    /// Planar array dimensions.
    #[serde(default)]
    pub nx: Option<usize>,
    #[serde(default)]
    pub nz: Option<usize>,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default)]
    pub sigma_g: f64,
    #[serde(default)]
    pub sigma_p: f64,
}

fn default_spacing() -> f64 {
    0.5
}

impl ArraySpec {
    pub fn nominal(&self) -> Result<AntennaArray> {
        match self.geometry {
            Geometry::Ula => {
                let n = self
                    .antennas
                    .ok_or_else(|| Error::Config("array.antennas is required for a ULA".into()))?;
                make_ula(n, self.spacing)
            }
            Geometry::Upa => {
                let (nx, nz) = self.nx.zip(self.nz).ok_or_else(|| {
                    Error::Config("array.nx and array.nz are required for a UPA".into())
                })?;
                make_upa(nx, nz, self.spacing)
            }
            Geometry::Custom => Err(Error::Config(
                "array.geometry = \"custom\" cannot be built from a config".into(),
            )),
        }
    }

    /// Axes along which antenna positions are uncertain.
    pub fn perturbation_axes(&self) -> &'static [Axis] {
        match self.geometry {
            Geometry::Ula => &[Axis::X],
            Geometry::Upa | Geometry::Custom => &[Axis::X, Axis::Z],
        }
    }

    pub fn n_antennas(&self) -> Result<usize> {
        Ok(self.nominal()?.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionarySpec {
    pub atoms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSpec {
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub total_samples: usize,
    #[serde(default)]
    pub adam: crate::mpnet::AdamConfig,
}

fn default_batch() -> usize {
    200
}

impl TrainingSpec {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            adam: self.adam,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Ls,
    Mp,
    Omp,
    Mpnet,
}

/// Which array a classical estimator's dictionary is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictionarySource {
    Nominal,
    /// The true array before any anomaly, frozen.
    Ideal,
    /// The true array, rebuilt after every anomaly.
    IdealTracking,
}

impl DictionarySource {
    fn as_str(&self) -> &'static str {
        match self {
            DictionarySource::Nominal => "nominal",
            DictionarySource::Ideal => "ideal",
            DictionarySource::IdealTracking => "ideal_tracking",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub dictionary: Option<DictionarySource>,
    #[serde(default)]
    pub init: Option<InitTag>,
    #[serde(default)]
    pub rule: Option<StopCriterion>,
    #[serde(default)]
    pub max_depth: Option<usize>,
}

/// A validated roster entry.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Ls,
    Mp {
        dictionary: DictionarySource,
        rule: StoppingRule,
    },
    Omp {
        dictionary: DictionarySource,
        rule: StoppingRule,
    },
    MpNet {
        init: InitTag,
        rule: StoppingRule,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RosterEntry {
    pub name: String,
    pub estimator: Estimator,
}

impl EstimatorSpec {
    fn resolve(&self, index: usize, n: usize) -> Result<RosterEntry> {
        let key = format!("estimators[{index}]");
        let rule = || -> Result<StoppingRule> {
            let criterion = self
                .rule
                .ok_or_else(|| Error::Config(format!("{key}.rule is required")))?;
            let max_depth = match criterion {
                StopCriterion::FixedDepth { depth } => self.max_depth.unwrap_or(depth),
                _ => self.max_depth.unwrap_or(StoppingRule::default_max_depth(n)),
            };
            let r = StoppingRule {
                criterion,
                max_depth,
            };
            r.validate()
                .map_err(|e| Error::Config(format!("{key}.rule: {e}")))?;
            Ok(r)
        };
        let dictionary = || {
            self.dictionary
                .ok_or_else(|| Error::Config(format!("{key}.dictionary is required")))
        };
        let reject = |field: &str, present: bool| {
            if present {
                Err(Error::Config(format!(
                    "{key}.{field} does not apply to {:?}",
                    self.kind
                )))
            } else {
                Ok(())
            }
        };
        let estimator = match self.kind {
            EstimatorKind::Ls => {
                reject("dictionary", self.dictionary.is_some())?;
                reject("init", self.init.is_some())?;
                reject("rule", self.rule.is_some())?;
                reject("max_depth", self.max_depth.is_some())?;
                Estimator::Ls
            }
            EstimatorKind::Mp => {
                reject("init", self.init.is_some())?;
                Estimator::Mp {
                    dictionary: dictionary()?,
                    rule: rule()?,
                }
            }
            EstimatorKind::Omp => {
                reject("init", self.init.is_some())?;
                Estimator::Omp {
                    dictionary: dictionary()?,
                    rule: rule()?,
                }
            }
            EstimatorKind::Mpnet => {
                reject("dictionary", self.dictionary.is_some())?;
                Estimator::MpNet {
                    init: self.init.unwrap_or(InitTag::Nominal),
                    rule: rule()?,
                }
            }
        };
        let name = self
            .name
            .clone()
            .unwrap_or_else(|| default_name(&estimator));
        if name.is_empty()
            || !name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(Error::Config(format!(
                "{key}.name {name:?} must be non-empty ASCII letters, digits, '_' or '-'"
            )));
        }
        Ok(RosterEntry { name, estimator })
    }
}

fn default_name(e: &Estimator) -> String {
    match e {
        Estimator::Ls => "ls".into(),
        Estimator::Mp { dictionary, rule } => {
            format!("mp_{}_{}", dictionary.as_str(), rule.label())
        }
        Estimator::Omp { dictionary, rule } => {
            format!("omp_{}_{}", dictionary.as_str(), rule.label())
        }
        Estimator::MpNet { init, rule } => format!("mpnet_{}_{}", init.as_str(), rule.label()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyType {
    Break,
    Age,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalySpec {
    pub kind: AnomalyType,
    /// Sample index of the first occurrence.
    pub at: usize,
    #[serde(default)]
    pub fraction: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Number of occurrences (aging is applied repeatedly).
    #[serde(default = "one")]
    pub repeat: usize,
    /// Samples between occurrences.
    #[serde(default)]
    pub every: usize,
}

fn one() -> usize {
    1
}

impl AnomalySpec {
    fn events(&self, index: usize) -> Result<Vec<AnomalyEvent>> {
        let key = format!("anomalies[{index}]");
        let kind = match self.kind {
            AnomalyType::Break => {
                if self.sigma.is_some() {
                    return Err(Error::Config(format!(
                        "{key}.sigma does not apply to a break"
                    )));
                }
                let fraction = self
                    .fraction
                    .ok_or_else(|| Error::Config(format!("{key}.fraction is required")))?;
                if !(0.0..=1.0).contains(&fraction) {
                    return Err(Error::Config(format!("{key}.fraction must lie in [0, 1]")));
                }
                AnomalyKind::Break { fraction }
            }
            AnomalyType::Age => {
                if self.fraction.is_some() {
                    return Err(Error::Config(format!(
                        "{key}.fraction does not apply to aging"
                    )));
                }
                let sigma = self
                    .sigma
                    .ok_or_else(|| Error::Config(format!("{key}.sigma is required")))?;
                if !(sigma >= 0.0) {
                    return Err(Error::Config(format!("{key}.sigma must be non-negative")));
                }
                AnomalyKind::Age { sigma }
            }
        };
        if self.repeat == 0 {
            return Err(Error::Config(format!("{key}.repeat must be at least 1")));
        }
        if self.repeat > 1 && self.every == 0 {
            return Err(Error::Config(format!(
                "{key}.every must be positive when repeating"
            )));
        }
        Ok((0..self.repeat)
            .map(|k| AnomalyEvent {
                at: self.at + k * self.every,
                kind,
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Also write the observation record file `stream.csv`.
    pub dump_stream: bool,
    /// Write one checkpoint per network at the end of the run.
    pub checkpoints: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrLossSpec {
    pub sigma_p: Vec<f64>,
    pub sigma_g: Vec<f64>,
    #[serde(default = "default_arrays")]
    pub arrays: usize,
    #[serde(default = "default_channels")]
    pub channels: usize,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    /// Dictionary size; 32 atoms per antenna when absent.
    #[serde(default)]
    pub atoms: Option<usize>,
}

fn default_arrays() -> usize {
    5
}
fn default_channels() -> usize {
    200
}
fn default_snr() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub array: ArraySpec,
    #[serde(default)]
    pub dictionary: Option<DictionarySpec>,
    #[serde(default)]
    pub channel: ChannelGenConfig,
    #[serde(default)]
    pub snr: Option<SnrModel>,
    #[serde(default)]
    pub training: Option<TrainingSpec>,
    #[serde(default)]
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub anomalies: Vec<AnomalySpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub snr_loss: Option<SnrLossSpec>,
}

/// Everything a learning run needs, validated.
#[derive(Debug, Clone)]
pub struct LearningPlan {
    pub seed: u64,
    pub array: ArraySpec,
    pub atoms: usize,
    pub channel: ChannelGenConfig,
    pub snr: SnrModel,
    pub training: TrainingSpec,
    pub roster: Vec<RosterEntry>,
    pub events: Vec<AnomalyEvent>,
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text)
            .map_err(|e| Error::Config(e.message().to_string() + &span_hint(text, e.span())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn learning_plan(&self) -> Result<LearningPlan> {
        let nominal = self.array.nominal()?;
        let n = nominal.len();
        check_std("array.sigma_g", self.array.sigma_g)?;
        check_std("array.sigma_p", self.array.sigma_p)?;
        let atoms = self
            .dictionary
            .ok_or_else(|| Error::Config("[dictionary] section with `atoms` is required".into()))?
            .atoms;
        if atoms == 0 {
            return Err(Error::Config("dictionary.atoms must be positive".into()));
        }
        self.channel.validate()?;
        let snr = self
            .snr
            .ok_or_else(|| Error::Config("[snr] section is required".into()))?;
        snr.validate()?;
        let training = self
            .training
            .ok_or_else(|| Error::Config("[training] section is required".into()))?;
        training.train_config().validate()?;
        if self.estimators.is_empty() {
            return Err(Error::Config(
                "at least one [[estimators]] entry is required".into(),
            ));
        }
        let roster = self
            .estimators
            .iter()
            .enumerate()
            .map(|(i, e)| e.resolve(i, n))
            .collect::<Result<Vec<_>>>()?;
        let mut names = HashSet::new();
        for r in &roster {
            if !names.insert(r.name.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate estimator name {:?}",
                    r.name
                )));
            }
        }
        let mut events = Vec::new();
        for (i, a) in self.anomalies.iter().enumerate() {
            for e in a.events(i)? {
                if e.at >= training.total_samples {
                    return Err(Error::Config(format!(
                        "anomalies[{i}] occurs at sample {} beyond the stream length {}",
                        e.at, training.total_samples
                    )));
                }
                events.push(e);
            }
        }
        Ok(LearningPlan {
            seed: self.seed,
            array: self.array.clone(),
            atoms,
            channel: self.channel,
            snr,
            training,
            roster,
            events,
            output: self.output,
        })
    }

    pub fn snr_loss_spec(&self) -> Result<&SnrLossSpec> {
        let s = self
            .snr_loss
            .as_ref()
            .ok_or_else(|| Error::Config("[snr_loss] section is required".into()))?;
        if s.sigma_p.is_empty() || s.sigma_g.is_empty() {
            return Err(Error::Config(
                "snr_loss.sigma_p and snr_loss.sigma_g must be non-empty".into(),
            ));
        }
        for v in s.sigma_p.iter() {
            check_std("snr_loss.sigma_p", *v)?;
        }
        for v in s.sigma_g.iter() {
            check_std("snr_loss.sigma_g", *v)?;
        }
        if s.arrays == 0 || s.channels == 0 {
            return Err(Error::Config(
                "snr_loss.arrays and snr_loss.channels must be positive".into(),
            ));
        }
        if s.atoms == Some(0) {
            return Err(Error::Config("snr_loss.atoms must be positive".into()));
        }
        if !s.snr_db.is_finite() {
            return Err(Error::Config("snr_loss.snr_db must be finite".into()));
        }
        self.array.nominal()?;
        Ok(s)
    }
}

fn check_std(key: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{key} must be a non-negative number, got {v}"
        )))
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}
