//! Minimum Distance to Mean classification on super-trial covariances, and
//! the generic-to-subject geodesic adaptation.

use serde::{Deserialize, Serialize};

use crate::erp_cov::{estimate_prototype, super_covariance, ErpPrototype, EstimatorConfig, Label, Trial};
use crate::error::{Error, Result};
use crate::spd::{frechet_mean, geodesic, riemannian_distance, MeanConfig, SpdMatrix};

/// Trials per class required by [`train`].
pub const MIN_TRIALS_PER_CLASS: usize = 2;

/// Flashes in one repetition of the row/column paradigm.
pub const FLASHES_PER_REPETITION: usize = 12;

/// Prototype plus one mean super-covariance per class.
#[derive(Debug, Clone, PartialEq)]
pub struct MdmModel {
    prototype: ErpPrototype,
    mean_target: SpdMatrix,
    mean_nontarget: SpdMatrix,
    estimator: EstimatorConfig,
}

impl MdmModel {
    pub fn new(
        prototype: ErpPrototype,
        mean_target: SpdMatrix,
        mean_nontarget: SpdMatrix,
        estimator: EstimatorConfig,
    ) -> Result<Self> {
        estimator.validate()?;
        let dim = 2 * prototype.channels();
        for m in [&mean_target, &mean_nontarget] {
            if m.dim() != dim {
                return Err(Error::dims(format!("{dim}x{dim} class mean"), format!("{0}x{0}", m.dim())));
            }
        }
        Ok(MdmModel {
            prototype,
            mean_target,
            mean_nontarget,
            estimator,
        })
    }

    pub fn prototype(&self) -> &ErpPrototype {
        &self.prototype
    }

    pub fn mean_target(&self) -> &SpdMatrix {
        &self.mean_target
    }

    pub fn mean_nontarget(&self) -> &SpdMatrix {
        &self.mean_nontarget
    }

    pub fn estimator(&self) -> &EstimatorConfig {
        &self.estimator
    }

    /// Order of the class means, `2C`.
    pub fn dim(&self) -> usize {
        self.mean_target.dim()
    }

    pub fn channels(&self) -> usize {
        self.prototype.channels()
    }

    pub fn samples(&self) -> usize {
        self.prototype.samples()
    }

    /// Same prototype and estimator, different class means.
    pub fn with_means(&self, mean_target: SpdMatrix, mean_nontarget: SpdMatrix) -> Result<MdmModel> {
        MdmModel::new(self.prototype.clone(), mean_target, mean_nontarget, self.estimator)
    }

    pub fn swapped(&self) -> MdmModel {
        MdmModel {
            prototype: self.prototype.clone(),
            mean_target: self.mean_nontarget.clone(),
            mean_nontarget: self.mean_target.clone(),
            estimator: self.estimator,
        }
    }

    pub fn covariance(&self, x: &Trial) -> Result<SpdMatrix> {
        if x.channels() != self.channels() || x.samples() != self.samples() {
            return Err(Error::dims(
                format!("{}x{} trial", self.channels(), self.samples()),
                format!("{}x{}", x.channels(), x.samples()),
            ));
        }
        super_covariance(&self.prototype, x, &self.estimator)
    }

    /// `d(mean_nontarget, cov) - d(mean_target, cov)`; positive favors Target.
    pub fn score_covariance(&self, cov: &SpdMatrix) -> Result<f64> {
        Ok(riemannian_distance(&self.mean_nontarget, cov)? - riemannian_distance(&self.mean_target, cov)?)
    }

    pub fn score(&self, x: &Trial) -> Result<f64> {
        self.score_covariance(&self.covariance(x)?)
    }

    pub fn predict(&self, x: &Trial) -> Result<Label> {
        self.score(x).map(label_for_score)
    }
}

/// Target iff the score is strictly positive.
pub fn label_for_score(score: f64) -> Label {
    if score > 0.0 {
        Label::Target
    } else {
        Label::NonTarget
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainReport {
    pub target_trials: usize,
    pub nontarget_trials: usize,
    pub target_iterations: usize,
    pub nontarget_iterations: usize,
}

pub fn train(trials: &[Trial], estimator: &EstimatorConfig, mean: &MeanConfig) -> Result<MdmModel> {
    train_with_report(trials, estimator, mean).map(|(m, _)| m)
}

/// Prototype from the target trials, then one Fréchet mean of super
/// covariances per class. Trials labeled `Unknown` are ignored.
pub fn train_with_report(
    trials: &[Trial],
    estimator: &EstimatorConfig,
    mean: &MeanConfig,
) -> Result<(MdmModel, TrainReport)> {
    estimator.validate()?;
    mean.validate()?;
    let targets: Vec<&Trial> = trials.iter().filter(|t| t.label == Label::Target).collect();
    let nontargets: Vec<&Trial> = trials.iter().filter(|t| t.label == Label::NonTarget).collect();
    for (label, found) in [(Label::Target, targets.len()), (Label::NonTarget, nontargets.len())] {
        if found < MIN_TRIALS_PER_CLASS {
            return Err(Error::ClassCoverage {
                label,
                found,
                required: MIN_TRIALS_PER_CLASS,
            });
        }
    }
    let prototype = estimate_prototype(targets.iter().copied())?;
    let covs = |set: &[&Trial]| -> Result<Vec<SpdMatrix>> {
        set.iter().map(|t| super_covariance(&prototype, t, estimator)).collect()
    };
    let target_mean = frechet_mean(&covs(&targets)?, mean)?;
    let nontarget_mean = frechet_mean(&covs(&nontargets)?, mean)?;
    let report = TrainReport {
        target_trials: targets.len(),
        nontarget_trials: nontargets.len(),
        target_iterations: target_mean.iterations,
        nontarget_iterations: nontarget_mean.iterations,
    };
    let model = MdmModel::new(prototype, target_mean.mean, nontarget_mean.mean, *estimator)?;
    Ok((model, report))
}

pub fn score(model: &MdmModel, x: &Trial) -> Result<f64> {
    model.score(x)
}

pub fn predict(model: &MdmModel, x: &Trial) -> Result<Label> {
    model.predict(x)
}

/// How the blend weight toward the subject means evolves over a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AlphaSchedule {
    /// `alpha = min(1, n / n_full)` after `n` labeled trials.
    LinearByTrialCount { n_full: usize },
    Fixed(f64),
}

impl Default for AlphaSchedule {
    fn default() -> Self {
        AlphaSchedule::LinearByTrialCount { n_full: 120 }
    }
}

impl AlphaSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AlphaSchedule::LinearByTrialCount { n_full: 0 } => {
                Err(Error::InvalidConfig("n_full must be positive".into()))
            }
            AlphaSchedule::Fixed(a) if !(0.0..=1.0).contains(&a) => {
                Err(Error::InvalidConfig(format!("alpha must lie in [0, 1], got {a}")))
            }
            _ => Ok(()),
        }
    }

    pub fn alpha_after(&self, n_seen: usize) -> f64 {
        match *self {
            AlphaSchedule::LinearByTrialCount { n_full } => (n_seen as f64 / n_full as f64).min(1.0),
            AlphaSchedule::Fixed(a) => a,
        }
    }
}

/// Streaming Fréchet mean: each new point pulls the estimate along the
/// geodesic by `1 / (n + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMean {
    mean: SpdMatrix,
    count: usize,
}

impl RunningMean {
    pub fn new(first: SpdMatrix) -> Self {
        RunningMean { mean: first, count: 1 }
    }

    pub fn update(&mut self, cov: &SpdMatrix) -> Result<()> {
        self.mean = geodesic(&self.mean, cov, 1.0 / (self.count + 1) as f64)?;
        self.count += 1;
        Ok(())
    }

    pub fn mean(&self) -> &SpdMatrix {
        &self.mean
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

fn push(slot: &mut Option<RunningMean>, cov: SpdMatrix) -> Result<()> {
    match slot {
        Some(rm) => rm.update(&cov),
        None => {
            *slot = Some(RunningMean::new(cov));
            Ok(())
        }
    }
}

/// Generic model plus streaming subject means; blends the two per class
/// along the geodesic at a single global `alpha`. The prototype stays the
/// generic one.
#[derive(Debug, Clone)]
pub struct AdaptationState {
    generic: MdmModel,
    subject_target: Option<RunningMean>,
    subject_nontarget: Option<RunningMean>,
    schedule: AlphaSchedule,
    alpha: f64,
    n_seen: usize,
}

impl AdaptationState {
    pub fn new(generic: MdmModel, schedule: AlphaSchedule) -> Result<Self> {
        schedule.validate()?;
        Ok(AdaptationState {
            generic,
            subject_target: None,
            subject_nontarget: None,
            alpha: schedule.alpha_after(0),
            schedule,
            n_seen: 0,
        })
    }

    pub fn generic(&self) -> &MdmModel {
        &self.generic
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn schedule(&self) -> AlphaSchedule {
        self.schedule
    }

    pub fn trials_seen(&self) -> usize {
        self.n_seen
    }

    pub fn subject_target(&self) -> Option<&RunningMean> {
        self.subject_target.as_ref()
    }

    pub fn subject_nontarget(&self) -> Option<&RunningMean> {
        self.subject_nontarget.as_ref()
    }

    /// Blended `(target, nontarget)` means. Alpha 0 returns the generic
    /// means and alpha 1 the subject means, both exactly.
    pub fn adapt_means(&self) -> Result<(SpdMatrix, SpdMatrix)> {
        let g = &self.generic;
        if self.alpha == 0.0 {
            return Ok((g.mean_target.clone(), g.mean_nontarget.clone()));
        }
        let blend = |generic: &SpdMatrix, subject: Option<&RunningMean>, label| match subject {
            Some(rm) => geodesic(generic, &rm.mean, self.alpha),
            None => Err(Error::ClassCoverage {
                label,
                found: 0,
                required: 1,
            }),
        };
        Ok((
            blend(&g.mean_target, self.subject_target.as_ref(), Label::Target)?,
            blend(&g.mean_nontarget, self.subject_nontarget.as_ref(), Label::NonTarget)?,
        ))
    }

    /// Snapshot of the blended classifier.
    pub fn blended_model(&self) -> Result<MdmModel> {
        let (t, nt) = self.adapt_means()?;
        self.generic.with_means(t, nt)
    }

    /// Model used to score the next trial: like [`Self::blended_model`], but a
    /// class without subject data yet keeps its generic mean.
    pub fn scoring_model(&self) -> Result<MdmModel> {
        let g = &self.generic;
        let blend = |generic: &SpdMatrix, subject: Option<&RunningMean>| match subject {
            Some(rm) if self.alpha > 0.0 => geodesic(generic, &rm.mean, self.alpha),
            _ => Ok(generic.clone()),
        };
        g.with_means(
            blend(&g.mean_target, self.subject_target.as_ref())?,
            blend(&g.mean_nontarget, self.subject_nontarget.as_ref())?,
        )
    }

    /// Supervised update with one labeled trial; advances alpha.
    pub fn online_update(&mut self, x: &Trial, label: Label) -> Result<()> {
        let cov = self.generic.covariance(x)?;
        self.update_covariance(cov, label)
    }

    pub fn update_covariance(&mut self, cov: SpdMatrix, label: Label) -> Result<()> {
        if cov.dim() != self.generic.dim() {
            return Err(Error::dims(self.generic.dim(), cov.dim()));
        }
        match label {
            Label::Target => push(&mut self.subject_target, cov)?,
            Label::NonTarget => push(&mut self.subject_nontarget, cov)?,
            Label::Unknown => {
                return Err(Error::Domain("supervised adaptation needs a labeled trial".into()));
            }
        }
        self.n_seen += 1;
        self.alpha = self.schedule.alpha_after(self.n_seen);
        Ok(())
    }
}

pub fn adapt_means(state: &AdaptationState) -> Result<(SpdMatrix, SpdMatrix)> {
    state.adapt_means()
}

/// 1-based flash index with the highest mean score over the repetitions so
/// far; ties go to the lowest index.
pub fn select_target(repetitions: &[Vec<f64>]) -> Result<usize> {
    if repetitions.is_empty() {
        return Err(Error::Domain("target selection needs at least one repetition".into()));
    }
    let mut sums = [0.0; FLASHES_PER_REPETITION];
    for (r, rep) in repetitions.iter().enumerate() {
        if rep.len() != FLASHES_PER_REPETITION {
            return Err(Error::Format(format!(
                "repetition {r} has {} scores, expected {FLASHES_PER_REPETITION}",
                rep.len()
            )));
        }
        for (s, v) in sums.iter_mut().zip(rep) {
            *s += v;
        }
    }
    let n = repetitions.len() as f64;
    let mut best = 0;
    for i in 1..FLASHES_PER_REPETITION {
        if sums[i] / n > sums[best] / n {
            best = i;
        }
    }
    Ok(best + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::SymmetricMatrix;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_spd(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> SpdMatrix {
        let a = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
        let sym = SymmetricMatrix::symmetrized((&a + a.transpose()) * (0.5 * spread));
        crate::spd::spd_exp(&sym).unwrap()
    }

    fn toy_model(rng: &mut ChaCha8Rng) -> MdmModel {
        let proto = ErpPrototype {
            data: DMatrix::from_fn(2, 16, |_, _| StandardNormal.sample(rng)),
            n_averaged: 3,
        };
        MdmModel::new(proto, random_spd(rng, 4, 0.5), random_spd(rng, 4, 0.5), EstimatorConfig::default()).unwrap()
    }

    fn noise_trial(rng: &mut ChaCha8Rng, label: Label) -> Trial {
        Trial::new(DMatrix::from_fn(2, 16, |_, _| StandardNormal.sample(rng)), label, 0, 128.0).unwrap()
    }

    #[test]
    fn score_on_class_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = toy_model(&mut rng);
        let gap = riemannian_distance(m.mean_nontarget(), m.mean_target()).unwrap();
        let s = m.score_covariance(m.mean_target()).unwrap();
        assert!(s > 0.0 && (s - gap).abs() < 1e-10);
        assert_eq!(label_for_score(s), Label::Target);
        let s = m.score_covariance(m.mean_nontarget()).unwrap();
        assert!(s < 0.0 && (s + gap).abs() < 1e-10);
        assert_eq!(label_for_score(s), Label::NonTarget);
        assert_eq!(label_for_score(0.0), Label::NonTarget);
    }

    #[test]
    fn swapped_means_negate_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = toy_model(&mut rng);
        let sw = m.swapped();
        for _ in 0..10 {
            let x = noise_trial(&mut rng, Label::Unknown);
            assert_eq!(m.score(&x).unwrap(), -sw.score(&x).unwrap());
            assert_eq!(m.predict(&x).unwrap(), label_for_score(m.score(&x).unwrap()));
        }
    }

    #[test]
    fn common_congruence_keeps_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = toy_model(&mut rng);
        let v = DMatrix::from_fn(4, 4, |i, j| if i == j { 2.0 } else { 0.0 } + 0.3 * Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let moved = m
            .with_means(m.mean_target().congruence(&v).unwrap(), m.mean_nontarget().congruence(&v).unwrap())
            .unwrap();
        for _ in 0..20 {
            let cov = m.covariance(&noise_trial(&mut rng, Label::Unknown)).unwrap();
            let before = m.score_covariance(&cov).unwrap();
            let after = moved.score_covariance(&cov.congruence(&v).unwrap()).unwrap();
            assert!((before - after).abs() < 1e-8);
            assert_eq!(label_for_score(before), label_for_score(after));
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = toy_model(&mut rng);
        let x = Trial::new(DMatrix::zeros(3, 16), Label::Unknown, 0, 128.0).unwrap();
        assert!(matches!(m.score(&x), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn training_requires_both_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let only_targets: Vec<_> = (0..4).map(|_| noise_trial(&mut rng, Label::Target)).collect();
        let err = train(&only_targets, &EstimatorConfig::default(), &MeanConfig::default()).unwrap_err();
        assert!(matches!(err, Error::ClassCoverage { label: Label::NonTarget, found: 0, .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn identical_target_covariances_give_that_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = noise_trial(&mut rng, Label::Target);
        let mut trials = vec![t.clone(), t.clone()];
        trials.extend((0..3).map(|_| noise_trial(&mut rng, Label::NonTarget)));
        // with identical targets P1 equals the trial, so the super trial is rank deficient
        let est = EstimatorConfig::new(0.1).unwrap();
        let (m, report) = train_with_report(&trials, &est, &MeanConfig::default()).unwrap();
        let cov = super_covariance(m.prototype(), &t, m.estimator()).unwrap();
        assert!((m.mean_target().as_matrix() - cov.as_matrix()).norm() < 1e-10 * cov.as_matrix().norm());
        assert_eq!(report.target_trials, 2);
        assert_eq!(report.nontarget_trials, 3);
    }

    #[test]
    fn class_means_do_not_depend_on_trial_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut trials: Vec<_> = (0..12)
            .map(|i| noise_trial(&mut rng, if i % 4 == 0 { Label::Target } else { Label::NonTarget }))
            .collect();
        let a = train(&trials, &EstimatorConfig::default(), &MeanConfig::default()).unwrap();
        trials.reverse();
        let b = train(&trials, &EstimatorConfig::default(), &MeanConfig::default()).unwrap();
        assert!((a.mean_target().as_matrix() - b.mean_target().as_matrix()).norm() < 1e-8);
        assert!((a.mean_nontarget().as_matrix() - b.mean_nontarget().as_matrix()).norm() < 1e-8);
    }

    fn commuting_state(alpha: f64) -> AdaptationState {
        let proto = ErpPrototype { data: DMatrix::zeros(1, 4), n_averaged: 1 };
        let generic = MdmModel::new(
            proto,
            SpdMatrix::from_diagonal(&[1.0, 1.0]).unwrap(),
            SpdMatrix::from_diagonal(&[1.0, 1.0]).unwrap(),
            EstimatorConfig::default(),
        )
        .unwrap();
        let mut st = AdaptationState::new(generic, AlphaSchedule::Fixed(alpha)).unwrap();
        st.update_covariance(SpdMatrix::from_diagonal(&[4.0, 4.0]).unwrap(), Label::Target).unwrap();
        st.update_covariance(SpdMatrix::from_diagonal(&[9.0, 1.0]).unwrap(), Label::NonTarget).unwrap();
        st
    }

    #[test]
    fn adapt_means_endpoints_and_midpoint() {
        let st = commuting_state(0.0);
        let (t, nt) = st.adapt_means().unwrap();
        assert_eq!(&t, st.generic().mean_target());
        assert_eq!(&nt, st.generic().mean_nontarget());

        let st = commuting_state(1.0);
        let (t, nt) = st.adapt_means().unwrap();
        assert_eq!(&t, st.subject_target().unwrap().mean());
        assert_eq!(&nt, st.subject_nontarget().unwrap().mean());

        let st = commuting_state(0.5);
        let (t, nt) = st.adapt_means().unwrap();
        assert!((t.as_matrix()[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((nt.as_matrix()[(0, 0)] - 3.0).abs() < 1e-12);
        assert!((nt.as_matrix()[(1, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adapt_without_subject_data_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let st = AdaptationState::new(toy_model(&mut rng), AlphaSchedule::Fixed(0.5)).unwrap();
        assert!(matches!(st.adapt_means(), Err(Error::ClassCoverage { .. })));
        // the scoring model falls back to the generic means
        assert_eq!(&st.scoring_model().unwrap(), st.generic());
        assert!(AdaptationState::new(toy_model(&mut rng), AlphaSchedule::Fixed(1.5)).is_err());
        assert!(AdaptationState::new(toy_model(&mut rng), AlphaSchedule::LinearByTrialCount { n_full: 0 }).is_err());
    }

    #[test]
    fn adapt_is_continuous_in_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = toy_model(&mut rng);
        let mut st = AdaptationState::new(g.clone(), AlphaSchedule::Fixed(0.3)).unwrap();
        st.update_covariance(random_spd(&mut rng, 4, 0.5), Label::Target).unwrap();
        st.update_covariance(random_spd(&mut rng, 4, 0.5), Label::NonTarget).unwrap();
        let span = riemannian_distance(g.mean_target(), st.subject_target().unwrap().mean()).unwrap();
        let delta = 1e-6;
        let (a, _) = st.adapt_means().unwrap();
        st.schedule = AlphaSchedule::Fixed(0.3 + delta);
        st.alpha = 0.3 + delta;
        let (b, _) = st.adapt_means().unwrap();
        let slope = riemannian_distance(&a, &b).unwrap() / delta;
        assert!(slope <= span + 1e-4, "{slope} vs {span}");
    }

    #[test]
    fn first_update_copies_covariance_and_alpha_ramps() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = toy_model(&mut rng);
        let mut st = AdaptationState::new(g.clone(), AlphaSchedule::LinearByTrialCount { n_full: 4 }).unwrap();
        assert_eq!(st.alpha(), 0.0);
        let x = noise_trial(&mut rng, Label::Target);
        st.online_update(&x, Label::Target).unwrap();
        assert_eq!(st.subject_target().unwrap().mean(), &g.covariance(&x).unwrap());
        assert_eq!(st.alpha(), 0.25);
        for _ in 0..5 {
            st.online_update(&x, Label::Target).unwrap();
        }
        assert_eq!(st.alpha(), 1.0);
        let diff = st.subject_target().unwrap().mean().as_matrix() - g.covariance(&x).unwrap().as_matrix();
        assert!(diff.norm() < 1e-10);
        assert!(st.online_update(&x, Label::Unknown).is_err());
    }

    #[test]
    fn running_mean_tracks_batch_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let center = random_spd(&mut rng, 6, 0.5);
        let set: Vec<SpdMatrix> = (0..50)
            .map(|_| {
                let e = random_spd(&mut rng, 6, 0.15);
                let s = center.sqrt();
                SpdMatrix::from_symmetric(SymmetricMatrix::symmetrized(&s * e.as_matrix() * &s)).unwrap()
            })
            .collect();
        let batch = frechet_mean(&set, &MeanConfig::default()).unwrap().mean;
        let mut rm = RunningMean::new(set[0].clone());
        for s in &set[1..] {
            rm.update(s).unwrap();
        }
        let spread = (set.iter().map(|s| riemannian_distance(&batch, s).unwrap().powi(2)).sum::<f64>() / 50.0).sqrt();
        let err = riemannian_distance(&batch, rm.mean()).unwrap();
        assert!(err <= 0.05 * spread, "{err} vs spread {spread}");
    }

    #[test]
    fn select_target_examples() {
        let mut rep = vec![0.0; 12];
        rep[3] = 2.0;
        assert_eq!(select_target(&[rep]).unwrap(), 4);

        let mut a = vec![0.0; 12];
        let mut b = vec![0.0; 12];
        a[6] = 1.0;
        b[6] = 1.0;
        b[2] = 1.5;
        assert_eq!(select_target(&[a, b]).unwrap(), 7);

        // averaged winner differs from each repetition's own argmax
        let mut r1 = vec![0.0; 12];
        let mut r2 = vec![0.0; 12];
        r1[0] = 3.0;
        r1[5] = 2.0;
        r2[1] = 3.0;
        r2[5] = 2.0;
        assert_eq!(select_target(std::slice::from_ref(&r1)).unwrap(), 1);
        assert_eq!(select_target(std::slice::from_ref(&r2)).unwrap(), 2);
        assert_eq!(select_target(&[r1, r2]).unwrap(), 6);

        assert_eq!(select_target(&[vec![1.0; 12]]).unwrap(), 1);
        assert!(select_target(&[]).is_err());
        assert!(select_target(&[vec![0.0; 11]]).is_err());
    }
}
