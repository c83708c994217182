//! Experiment protocols: learning curves, latency/jitter sweeps,
//! leave-one-subject-out transfer, and adaptive session replay.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{auc, CurvePoint, EvaluationReport};
use crate::classifier::{train, AdaptationState, AlphaSchedule, MdmModel, FLASHES_PER_REPETITION};
use crate::erp_cov::{EstimatorConfig, Label, Trial};
use crate::error::{Error, Result};
use crate::preprocess::{epoch_at, inject_jitter, inject_latency, ContinuousRecording};
use crate::spd::{frechet_mean, geodesic, MeanConfig, SpdMatrix};

pub fn score_trials(model: &MdmModel, trials: &[Trial]) -> Result<Vec<f64>> {
    trials.par_iter().map(|t| model.score(t)).collect()
}

fn labels(trials: &[Trial]) -> Vec<Label> {
    trials.iter().map(|t| t.label).collect()
}

fn model_auc(model: &MdmModel, trials: &[Trial]) -> Result<f64> {
    auc(&score_trials(model, trials)?, &labels(trials))
}

/// Canonical protocol: train on one split, AUC on the other.
pub fn train_test_auc(train_set: &[Trial], test_set: &[Trial], est: &EstimatorConfig, mean: &MeanConfig) -> Result<f64> {
    model_auc(&train(train_set, est, mean)?, test_set)
}

/// AUC as a function of the number of training repetitions (12 consecutive
/// trials each). For every seed the repetition order is shuffled and the
/// first `size` repetitions are used; the test split is fixed.
pub fn learning_curve(
    train_set: &[Trial],
    test_set: &[Trial],
    sizes: &[usize],
    seeds: &[u64],
    est: &EstimatorConfig,
    mean: &MeanConfig,
) -> Result<EvaluationReport> {
    let reps: Vec<&[Trial]> = train_set.chunks(FLASHES_PER_REPETITION).collect();
    if sizes.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidConfig("learning curve needs sizes and seeds".into()));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidConfig("training size 0 is not allowed".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("training sizes must be strictly increasing".into()));
    }
    if let Some(&max) = sizes.last() {
        if max > reps.len() {
            return Err(Error::InvalidConfig(format!(
                "training size {max} exceeds the {} available repetitions",
                reps.len()
            )));
        }
    }
    let jobs: Vec<(usize, u64)> = sizes.iter().flat_map(|&s| seeds.iter().map(move |&seed| (s, seed))).collect();
    let results: Vec<f64> = jobs
        .par_iter()
        .map(|&(size, seed)| {
            let mut order: Vec<usize> = (0..reps.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let subset: Vec<Trial> = order[..size].iter().flat_map(|&r| reps[r].iter().cloned()).collect();
            train_test_auc(&subset, test_set, est, mean)
        })
        .collect::<Result<_>>()?;
    let points: Vec<CurvePoint> = results
        .chunks(seeds.len())
        .zip(sizes)
        .map(|(vals, &s)| CurvePoint::from_samples(s as f64, vals))
        .collect();
    let headline = points.last().map(|p| p.mean).unwrap_or(f64::NAN);
    Ok(EvaluationReport::new("learning-curve", headline, points)
        .with_meta("train_repetitions", reps.len())
        .with_meta("test_trials", test_set.len()))
}

/// `-max, ..., 0, ..., max` in steps of `step`.
pub fn symmetric_grid(max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= 0.0) {
        return Err(Error::InvalidConfig(format!("invalid grid max {max} / step {step}")));
    }
    let n = (max / step).round() as i64;
    Ok((-n..=n).map(|i| i as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepKind {
    /// Fixed trigger delays in ms.
    Latency(Vec<f64>),
    /// Jitter standard deviations in ms, each averaged over `seeds`.
    Jitter { stds_ms: Vec<f64>, seeds: Vec<u64> },
}

/// Re-epochs `rec` (already filtered and decimated) with perturbed triggers,
/// scores with a fixed model, and reports AUC normalized by the AUC at the
/// unperturbed triggers.
pub fn robustness_sweep(
    model: &MdmModel,
    rec: &ContinuousRecording,
    window_s: f64,
    kind: &SweepKind,
) -> Result<EvaluationReport> {
    let fs = rec.sample_rate();
    let len = rec.len();
    let auc_at = |triggers: &[crate::preprocess::Trigger]| -> Result<f64> {
        model_auc(model, &epoch_at(rec, triggers, window_s)?.trials)
    };
    let reference = auc_at(rec.triggers())?;
    if !(reference > 0.0) {
        return Err(Error::Domain("reference AUC is zero; cannot normalize".into()));
    }
    let (name, points) = match kind {
        SweepKind::Latency(grid) => {
            check_increasing(grid)?;
            let points = grid
                .par_iter()
                .map(|&d| {
                    let a = auc_at(&inject_latency(rec.triggers(), d, fs, len))?;
                    Ok(CurvePoint::from_samples(d, &[a / reference]))
                })
                .collect::<Result<Vec<_>>>()?;
            ("latency-sweep", points)
        }
        SweepKind::Jitter { stds_ms, seeds } => {
            check_increasing(stds_ms)?;
            if seeds.is_empty() {
                return Err(Error::InvalidConfig("jitter sweep needs at least one seed".into()));
            }
            let points = stds_ms
                .par_iter()
                .map(|&sd| {
                    let vals = seeds
                        .iter()
                        .map(|&seed| Ok(auc_at(&inject_jitter(rec.triggers(), sd, fs, len, seed)?)? / reference))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(CurvePoint::from_samples(sd, &vals))
                })
                .collect::<Result<Vec<_>>>()?;
            ("jitter-sweep", points)
        }
    };
    Ok(EvaluationReport::new(name, reference, points).with_meta("reference_auc", reference))
}

fn check_increasing(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidConfig("sweep grid must be non-empty and strictly increasing".into()));
    }
    Ok(())
}

/// Leave-one-subject-out: train on the pooled other subjects, test on the
/// held-out one. Points are per subject (x = subject index); the headline
/// is the mean AUC.
pub fn cross_subject_eval(sessions: &[Vec<Trial>], est: &EstimatorConfig, mean: &MeanConfig) -> Result<EvaluationReport> {
    if sessions.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "leave-one-subject-out needs at least 2 subjects, got {}",
            sessions.len()
        )));
    }
    let aucs = (0..sessions.len())
        .into_par_iter()
        .map(|held_out| {
            let pooled: Vec<Trial> = sessions
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != held_out)
                .flat_map(|(_, s)| s.iter().cloned())
                .collect();
            train_test_auc(&pooled, &sessions[held_out], est, mean)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_auc = aucs.iter().sum::<f64>() / aucs.len() as f64;
    let points = aucs
        .iter()
        .enumerate()
        .map(|(i, &a)| CurvePoint::from_samples(i as f64, &[a]))
        .collect();
    Ok(EvaluationReport::new("cross-subject", mean_auc, points).with_meta("subjects", sessions.len()))
}

/// AUC of each of `blocks` contiguous chunks (the last absorbs the remainder).
pub fn block_aucs(scores: &[f64], labels: &[Label], blocks: usize) -> Result<Vec<f64>> {
    if blocks == 0 || blocks > scores.len() {
        return Err(Error::InvalidConfig(format!("cannot split {} trials into {blocks} blocks", scores.len())));
    }
    let size = scores.len() / blocks;
    (0..blocks)
        .map(|b| {
            let start = b * size;
            let end = if b + 1 == blocks { scores.len() } else { start + size };
            auc(&scores[start..end], &labels[start..end])
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub report: EvaluationReport,
    /// Score of each trial, computed before the trial was learned from.
    pub scores: Vec<f64>,
    pub state: AdaptationState,
}

/// Chronological replay: score each trial with the current blend, then
/// learn from its label. Reports AUC per block of trials.
pub fn adaptive_replay(
    generic: &MdmModel,
    session: &[Trial],
    schedule: AlphaSchedule,
    blocks: usize,
) -> Result<ReplayOutcome> {
    let mut state = AdaptationState::new(generic.clone(), schedule)?;
    let mut scores = Vec::with_capacity(session.len());
    for t in session {
        let cov = generic.covariance(t)?;
        scores.push(state.scoring_model()?.score_covariance(&cov)?);
        if t.label != Label::Unknown {
            state.update_covariance(cov, t.label)?;
        }
    }
    let labels = labels(session);
    let per_block = block_aucs(&scores, &labels, blocks)?;
    let points = per_block
        .iter()
        .enumerate()
        .map(|(b, &a)| CurvePoint::from_samples((b + 1) as f64, &[a]))
        .collect();
    let report = EvaluationReport::new("adaptive-replay", auc(&scores, &labels)?, points)
        .with_meta("final_alpha", state.alpha())
        .with_meta("trials", session.len());
    Ok(ReplayOutcome { report, scores, state })
}

/// Final model of a replayed session: each class mean moves from the generic
/// mean toward the batch Fréchet mean of the session's trials of that class,
/// by `alpha` along the geodesic. A class absent from the session keeps its
/// generic mean; `alpha = 0` returns the generic means exactly.
pub fn batch_blended_model(generic: &MdmModel, session: &[Trial], alpha: f64, mean: &MeanConfig) -> Result<MdmModel> {
    let blend = |label: Label, generic_mean: &SpdMatrix| -> Result<SpdMatrix> {
        if alpha == 0.0 {
            return Ok(generic_mean.clone());
        }
        let covs = session
            .par_iter()
            .filter(|t| t.label == label)
            .map(|t| generic.covariance(t))
            .collect::<Result<Vec<_>>>()?;
        if covs.is_empty() {
            return Ok(generic_mean.clone());
        }
        geodesic(generic_mean, &frechet_mean(&covs, mean)?.mean, alpha)
    };
    generic.with_means(
        blend(Label::Target, generic.mean_target())?,
        blend(Label::NonTarget, generic.mean_nontarget())?,
    )
}
