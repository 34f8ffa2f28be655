//! Online learning runs: every roster entry sees the same observation
//! stream, networks learn from it as it arrives.

use std::collections::BTreeMap;

use super::config::{DictionarySource, Estimator, LearningPlan, RosterEntry};
use crate::array::{build_dictionary, doa_grid_for, perturb_array, Dictionary, Direction};
use crate::channel::{make_stream, AnomalySchedule, ChannelSample};
use crate::error::{Error, Result};
use crate::estimators::{ls_estimate, matching_pursuit, omp, Estimate, StoppingRule};
use crate::metrics::{rmse, to_db};
use crate::mpnet::{AdamState, InitTag, MpNetModel, OnlineTrainer};
use crate::rng::{rng_for, rng_for_indexed, Purpose};

/// Per-minibatch learning curve of one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    /// Mean linear rMSE of each minibatch, in dB.
    pub rmse_db: Vec<f64>,
    pub mean_depth: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainedNetwork {
    pub name: String,
    pub model: MpNetModel,
    pub adam: AdamState,
}

#[derive(Debug, Clone)]
pub struct LearningOutcome {
    pub batch_size: usize,
    pub curves: Vec<Curve>,
    /// Depth counts per estimator, keyed by name.
    pub depth_hist: Vec<(String, BTreeMap<usize, u64>)>,
    pub snr_db: Vec<f64>,
    pub networks: Vec<TrainedNetwork>,
    /// Every observation, kept when the plan asks for a stream dump.
    pub samples: Option<Vec<ChannelSample>>,
}

impl LearningOutcome {
    pub fn curve(&self, name: &str) -> Option<&Curve> {
        self.curves.iter().find(|c| c.name == name)
    }
}

/// Where observations come from.
pub enum SampleSource {
    Generated,
    Replay(Vec<ChannelSample>),
}

enum Runner {
    Ls,
    Mp(DictionarySource, StoppingRule),
    Omp(DictionarySource, StoppingRule),
    Net(Box<OnlineTrainer>),
}

struct Dictionaries {
    grid: Vec<Direction>,
    nominal: Option<Dictionary>,
    ideal: Option<Dictionary>,
    tracking: Option<(usize, Dictionary)>,
}

impl Dictionaries {
    fn get(
        &mut self,
        src: DictionarySource,
        schedule: &AnomalySchedule,
        epoch: usize,
    ) -> Result<&Dictionary> {
        match src {
            DictionarySource::Nominal => {
                Ok(self.nominal.as_ref().expect("nominal dictionary built"))
            }
            DictionarySource::Ideal => Ok(self.ideal.as_ref().expect("ideal dictionary built")),
            DictionarySource::IdealTracking => {
                if self.tracking.as_ref().map(|t| t.0) != Some(epoch) {
                    let d = build_dictionary(&schedule.arrays()[epoch], &self.grid, true)?;
                    self.tracking = Some((epoch, d));
                }
                Ok(&self.tracking.as_ref().expect("just built").1)
            }
        }
    }
}

/// Nominal array, true (perturbed) array and the realized anomaly schedule.
pub fn realize_arrays(
    plan: &LearningPlan,
) -> Result<(crate::array::AntennaArray, AnomalySchedule)> {
    let nominal = plan.array.nominal()?;
    let mut rng = rng_for(plan.seed, Purpose::Array);
    let truth = perturb_array(
        &nominal,
        plan.array.sigma_g,
        plan.array.sigma_p,
        plan.array.perturbation_axes(),
        &mut rng,
    )?;
    let schedule = if plan.events.is_empty() {
        AnomalySchedule::none(truth)
    } else {
        AnomalySchedule::realize(
            truth,
            plan.events.clone(),
            &mut rng_for(plan.seed, Purpose::Anomalies),
        )?
    };
    Ok((nominal, schedule))
}

pub fn run_learning(plan: &LearningPlan, source: SampleSource) -> Result<LearningOutcome> {
    let (nominal, schedule) = realize_arrays(plan)?;
    let n = nominal.len();
    let grid = doa_grid_for(nominal.geometry(), plan.atoms);
    let needs = |src: DictionarySource| {
        plan.roster.iter().any(|r| match &r.estimator {
            Estimator::Mp { dictionary, .. } | Estimator::Omp { dictionary, .. } => {
                *dictionary == src
            }
            Estimator::MpNet { init, .. } => {
                src == DictionarySource::Nominal && *init == InitTag::Nominal
            }
            Estimator::Ls => false,
        })
    };
    let nominal_dict = build_dictionary(&nominal, &grid, true)?;
    let mut dicts = Dictionaries {
        nominal: None,
        ideal: if needs(DictionarySource::Ideal) {
            Some(build_dictionary(schedule.initial(), &grid, true)?)
        } else {
            None
        },
        tracking: None,
        grid,
    };

    let train_cfg = plan.training.train_config();
    let mut runners = Vec::with_capacity(plan.roster.len());
    for (i, RosterEntry { estimator, .. }) in plan.roster.iter().enumerate() {
        runners.push(match estimator {
            Estimator::Ls => Runner::Ls,
            Estimator::Mp { dictionary, rule } => Runner::Mp(*dictionary, *rule),
            Estimator::Omp { dictionary, rule } => Runner::Omp(*dictionary, *rule),
            Estimator::MpNet { init, rule } => {
                let model = match init {
                    InitTag::Nominal => MpNetModel::from_dictionary(&nominal_dict, *rule)?,
                    InitTag::Xavier => {
                        let mut rng = rng_for_indexed(plan.seed, Purpose::Init, i as u64);
                        MpNetModel::xavier(n, plan.atoms, *rule, &mut rng)?
                    }
                };
                Runner::Net(Box::new(OnlineTrainer::new(model, &train_cfg)?))
            }
        });
    }
    if needs(DictionarySource::Nominal) {
        dicts.nominal = Some(nominal_dict);
    }

    let samples: Box<dyn Iterator<Item = Result<ChannelSample>>> = match source {
        SampleSource::Generated => Box::new(make_stream(
            plan.channel,
            plan.snr,
            schedule.clone(),
            rng_for(plan.seed, Purpose::Channels),
            plan.training.total_samples,
        )?),
        SampleSource::Replay(v) => {
            for (i, s) in v.iter().enumerate() {
                if s.index != i {
                    return Err(Error::InvalidArgument(format!(
                        "replayed sample {i} carries index {}",
                        s.index
                    )));
                }
                if s.n_antennas() != n || s.x.len() != n {
                    return Err(Error::Shape(format!(
                        "replayed sample {i} has {} antennas, the configured array has {n}",
                        s.x.len()
                    )));
                }
            }
            Box::new(v.into_iter().map(Ok))
        }
    };

    let b = plan.training.batch_size;
    let k = plan.roster.len();
    let mut curves: Vec<Curve> = plan
        .roster
        .iter()
        .map(|r| Curve {
            name: r.name.clone(),
            rmse_db: Vec::new(),
            mean_depth: Vec::new(),
        })
        .collect();
    let mut hist = vec![BTreeMap::<usize, u64>::new(); k];
    let mut err_acc = vec![0.0; k];
    let mut depth_acc = vec![0usize; k];
    let mut in_batch = 0usize;
    let mut snr_db = Vec::new();
    let mut kept = plan.output.dump_stream.then(Vec::new);
    let total = samples.size_hint().1.unwrap_or(0);
    let mut next_log = 0.1;

    for (count, sample) in samples.enumerate() {
        let sample = sample?;
        let epoch = schedule.epoch_at(sample.index);
        for (j, runner) in runners.iter_mut().enumerate() {
            let est: Estimate = match runner {
                Runner::Ls => ls_estimate(&sample.x),
                Runner::Mp(src, rule) => matching_pursuit(
                    dicts.get(*src, &schedule, epoch)?,
                    &sample.x,
                    rule,
                    sample.sigma2,
                )?,
                Runner::Omp(src, rule) => omp(
                    dicts.get(*src, &schedule, epoch)?,
                    &sample.x,
                    rule,
                    sample.sigma2,
                )?,
                Runner::Net(t) => t.process(&sample.x, sample.sigma2)?,
            };
            err_acc[j] += rmse(&est.h_hat, &sample.h)?;
            depth_acc[j] += est.depth;
            *hist[j].entry(est.depth).or_insert(0) += 1;
        }
        snr_db.push(sample.snr_db);
        if let Some(v) = kept.as_mut() {
            v.push(sample);
        }
        in_batch += 1;
        if in_batch == b {
            for j in 0..k {
                curves[j].rmse_db.push(to_db(err_acc[j] / b as f64));
                curves[j].mean_depth.push(depth_acc[j] as f64 / b as f64);
                err_acc[j] = 0.0;
                depth_acc[j] = 0;
            }
            in_batch = 0;
        }
        if total > 0 && (count + 1) as f64 >= next_log * total as f64 {
            log::info!("processed {}/{} observations", count + 1, total);
            next_log += 0.1;
        }
    }

    let mut networks = Vec::new();
    for (r, runner) in plan.roster.iter().zip(runners) {
        if let Runner::Net(t) = runner {
            let (model, adam) = t.into_parts();
            networks.push(TrainedNetwork {
                name: r.name.clone(),
                model,
                adam,
            });
        }
    }
    Ok(LearningOutcome {
        batch_size: b,
        curves,
        depth_hist: plan
            .roster
            .iter()
            .map(|r| r.name.clone())
            .zip(hist)
            .collect(),
        snr_db,
        networks,
        samples: kept,
    })
}
