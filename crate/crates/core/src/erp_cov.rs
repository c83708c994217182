//! Trials, the averaged ERP prototype, and the super-trial covariance.
//!
//! A super trial stacks the prototype `P1` (C x N) on top of a single trial
//! `X` (C x N). Its sample covariance has three kinds of block: the
//! prototype covariance (identical for every trial), the trial covariance,
//! and the cross-covariance between prototype and trial, which is large only
//! when the trial carries an ERP in phase with the prototype.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spd::{SpdMatrix, SymmetricMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Target,
    NonTarget,
    Unknown,
}

impl Label {
    pub fn to_byte(self) -> u8 {
        match self {
            Label::NonTarget => 0,
            Label::Target => 1,
            Label::Unknown => 2,
        }
    }

    pub fn from_byte(b: u8) -> Option<Label> {
        match b {
            0 => Some(Label::NonTarget),
            1 => Some(Label::Target),
            2 => Some(Label::Unknown),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Target => "target",
            Label::NonTarget => "nontarget",
            Label::Unknown => "unknown",
        })
    }
}

/// One epoch: `channels x samples` signal with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    data: DMatrix<f64>,
    pub label: Label,
    pub trial_id: i64,
    pub sample_rate: f64,
}

impl Trial {
    pub fn new(data: DMatrix<f64>, label: Label, trial_id: i64, sample_rate: f64) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::Domain("trial has no channels".into()));
        }
        if data.ncols() < 2 {
            return Err(Error::Domain(format!("trial needs at least 2 samples, got {}", data.ncols())));
        }
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::Domain(format!("invalid sample rate {sample_rate}")));
        }
        Ok(Trial {
            data,
            label,
            trial_id,
            sample_rate,
        })
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }
}

/// Averaged target response `P1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErpPrototype {
    pub data: DMatrix<f64>,
    pub n_averaged: usize,
}

impl ErpPrototype {
    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }
}

/// Elementwise mean of the given trials. Callers pass the target trials.
pub fn estimate_prototype<'a, I>(trials: I) -> Result<ErpPrototype>
where
    I: IntoIterator<Item = &'a Trial>,
{
    let mut iter = trials.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::Domain("prototype needs at least one trial".into()))?;
    let mut sum = first.data.clone();
    let mut count = 1usize;
    for t in iter {
        if t.data.shape() != sum.shape() {
            return Err(Error::dims(
                format!("{}x{}", sum.nrows(), sum.ncols()),
                format!("{}x{}", t.channels(), t.samples()),
            ));
        }
        sum += &t.data;
        count += 1;
    }
    Ok(ErpPrototype {
        data: sum / count as f64,
        n_averaged: count,
    })
}

/// `[P1; X]`, shape `2C x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperTrial {
    pub data: DMatrix<f64>,
}

pub fn build_super_trial(p1: &ErpPrototype, x: &Trial) -> Result<SuperTrial> {
    if p1.data.shape() != x.data.shape() {
        return Err(Error::dims(
            format!("{}x{}", p1.channels(), p1.samples()),
            format!("{}x{}", x.channels(), x.samples()),
        ));
    }
    let (c, n) = p1.data.shape();
    let mut data = DMatrix::zeros(2 * c, n);
    data.rows_mut(0, c).copy_from(&p1.data);
    data.rows_mut(c, c).copy_from(&x.data);
    Ok(SuperTrial { data })
}

/// `X X^T / (N - 1)`, no mean removal.
pub fn sample_covariance(st: &SuperTrial) -> Result<SymmetricMatrix> {
    let n = st.data.ncols();
    if n < 2 {
        return Err(Error::Domain(format!("sample covariance needs N >= 2, got {n}")));
    }
    let scm = &st.data * st.data.transpose() / (n - 1) as f64;
    Ok(SymmetricMatrix::symmetrized(scm))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShrinkageTarget {
    /// `trace(S) / dim * I`
    ScaledIdentity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub shrinkage: f64,
    pub target: ShrinkageTarget,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            shrinkage: 0.0,
            target: ShrinkageTarget::ScaledIdentity,
        }
    }
}

impl EstimatorConfig {
    pub fn new(shrinkage: f64) -> Result<Self> {
        let cfg = EstimatorConfig {
            shrinkage,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 0.1 when the super-trial covariance would be rank deficient
    /// (`2C >= N`), otherwise no shrinkage.
    pub fn default_for(channels: usize, samples: usize) -> Self {
        let shrinkage = if 2 * channels >= samples { 0.1 } else { 0.0 };
        EstimatorConfig {
            shrinkage,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.shrinkage) {
            return Err(Error::InvalidConfig(format!(
                "shrinkage must lie in [0, 1], got {}",
                self.shrinkage
            )));
        }
        Ok(())
    }
}

/// `(1 - l) S + l (trace(S) / dim) I`.
pub fn shrink(scm: &SymmetricMatrix, cfg: &EstimatorConfig) -> Result<SymmetricMatrix> {
    cfg.validate()?;
    let lambda = cfg.shrinkage;
    if lambda == 0.0 {
        return Ok(scm.clone());
    }
    let dim = scm.dim();
    let trace = scm.trace();
    if !(trace > 0.0) {
        return Err(Error::DegenerateTrace);
    }
    let mut m = scm.as_matrix() * (1.0 - lambda);
    let diag = lambda * trace / dim as f64;
    for i in 0..dim {
        m[(i, i)] += diag;
    }
    Ok(SymmetricMatrix::symmetrized(m))
}

/// Regularized super-trial covariance, the feature the classifier works on.
pub fn super_covariance(p1: &ErpPrototype, x: &Trial, cfg: &EstimatorConfig) -> Result<SpdMatrix> {
    let st = build_super_trial(p1, x)?;
    let scm = sample_covariance(&st)?;
    SpdMatrix::from_symmetric(shrink(&scm, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn trial(rows: usize, vals: &[f64], label: Label) -> Trial {
        let cols = vals.len() / rows;
        Trial::new(DMatrix::from_row_slice(rows, cols, vals), label, 0, 128.0).unwrap()
    }

    fn noise(rng: &mut ChaCha8Rng, c: usize, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(c, n, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn trial_validation() {
        assert!(Trial::new(DMatrix::zeros(2, 1), Label::Target, 0, 128.0).is_err());
        assert!(Trial::new(DMatrix::zeros(0, 4), Label::Target, 0, 128.0).is_err());
        assert!(Trial::new(DMatrix::zeros(2, 4), Label::Target, 0, 0.0).is_err());
    }

    #[test]
    fn prototype_examples() {
        let a = trial(2, &[1.0, 2.0, 3.0, 4.0], Label::Target);
        let p = estimate_prototype([&a]).unwrap();
        assert_eq!(p.data, *a.data());
        assert_eq!(p.n_averaged, 1);

        let neg = trial(2, &[-1.0, -2.0, -3.0, -4.0], Label::Target);
        let p = estimate_prototype([&a, &neg]).unwrap();
        assert!(p.data.iter().all(|&v| v == 0.0));

        let ts: Vec<_> = [1.0, 2.0, 3.0].iter().map(|&v| trial(1, &[v; 3], Label::Target)).collect();
        let p = estimate_prototype(&ts).unwrap();
        assert!(p.data.iter().all(|&v| (v - 2.0).abs() < 1e-15));

        assert!(estimate_prototype(std::iter::empty::<&Trial>()).is_err());
        let other = trial(1, &[1.0, 2.0], Label::Target);
        assert!(matches!(estimate_prototype([&a, &other]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn super_trial_stacks_rows() {
        let p = ErpPrototype {
            data: DMatrix::from_row_slice(1, 2, &[1.0, 2.0]),
            n_averaged: 1,
        };
        let x = trial(1, &[3.0, 4.0], Label::Unknown);
        let st = build_super_trial(&p, &x).unwrap();
        assert_eq!(st.data, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));

        let bad = trial(1, &[3.0, 4.0, 5.0], Label::Unknown);
        assert!(build_super_trial(&p, &bad).is_err());
    }

    #[test]
    fn scm_hand_examples() {
        let st = SuperTrial {
            data: DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, -1.0]),
        };
        let s = sample_covariance(&st).unwrap();
        assert_eq!(s.as_matrix(), &DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]));

        let st = SuperTrial {
            data: DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, 1.0]),
        };
        let s = sample_covariance(&st).unwrap();
        assert_eq!(s.as_matrix(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]));

        let zero = SuperTrial { data: DMatrix::zeros(4, 10) };
        assert_eq!(sample_covariance(&zero).unwrap().frobenius_norm(), 0.0);
        assert!(sample_covariance(&SuperTrial { data: DMatrix::zeros(2, 1) }).is_err());
    }

    #[test]
    fn shrinkage_examples() {
        let scm = SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0])).unwrap();
        let half = shrink(&scm, &EstimatorConfig::new(0.5).unwrap()).unwrap();
        assert_eq!(half.as_matrix(), &DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
        let full = shrink(&scm, &EstimatorConfig::new(1.0).unwrap()).unwrap();
        assert_eq!(full.as_matrix(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]));
        let none = shrink(&scm, &EstimatorConfig::new(0.0).unwrap()).unwrap();
        assert_eq!(none, scm);

        assert!(EstimatorConfig::new(1.2).is_err());
        assert!(EstimatorConfig::new(-0.1).is_err());
        assert!(matches!(
            shrink(&SymmetricMatrix::zeros(3), &EstimatorConfig::new(0.3).unwrap()),
            Err(Error::DegenerateTrace)
        ));
    }

    #[test]
    fn rank_deficient_without_shrinkage_is_not_pd() {
        // 2C = 4 > N = 3: rank at most 3
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = ErpPrototype { data: noise(&mut rng, 2, 3), n_averaged: 1 };
        let x = Trial::new(noise(&mut rng, 2, 3), Label::Unknown, 0, 128.0).unwrap();
        let err = super_covariance(&p, &x, &EstimatorConfig::new(0.0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
        assert!(super_covariance(&p, &x, &EstimatorConfig::new(0.1).unwrap()).is_ok());
        assert_eq!(EstimatorConfig::default_for(2, 3).shrinkage, 0.1);
        assert_eq!(EstimatorConfig::default_for(8, 128).shrinkage, 0.0);
    }

    #[test]
    fn block_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (c, n) = (4, 64);
        let p = ErpPrototype { data: noise(&mut rng, c, n), n_averaged: 1 };
        let x = Trial::new(noise(&mut rng, c, n), Label::Unknown, 0, 128.0).unwrap();
        let s = sample_covariance(&build_super_trial(&p, &x).unwrap()).unwrap();
        let expected = &p.data * p.data.transpose() / (n - 1) as f64;
        let block = s.as_matrix().view((0, 0), (c, c)).into_owned();
        assert!((&block - &expected).amax() <= 1e-14 * expected.amax());

        // X = P1: cross block equals the prototype block
        let same = Trial::new(p.data.clone(), Label::Unknown, 0, 128.0).unwrap();
        let s = sample_covariance(&build_super_trial(&p, &same).unwrap()).unwrap();
        let cross = s.as_matrix().view((c, 0), (c, c)).into_owned();
        assert!((&cross - &expected).amax() <= 1e-14 * expected.amax());
    }

    #[test]
    fn cross_block_vanishes_for_independent_noise() {
        // P1 is a fixed-energy ERP-like bump; lengthening the epoch adds
        // only noise samples, so cross-covariance entries decay like 1/N.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = 3;
        let mean_abs_cross = |rng: &mut ChaCha8Rng, n: usize| {
            let reps = 20;
            let bump = DMatrix::from_fn(c, n, |ch, t| (1.0 + ch as f64) * (-((t as f64 - 30.0) / 6.0).powi(2) / 2.0).exp());
            let p = ErpPrototype { data: bump, n_averaged: 1 };
            let mut acc = 0.0;
            for _ in 0..reps {
                let x = Trial::new(noise(rng, c, n), Label::Unknown, 0, 128.0).unwrap();
                let s = sample_covariance(&build_super_trial(&p, &x).unwrap()).unwrap();
                acc += s.as_matrix().view((c, 0), (c, c)).abs().mean();
            }
            acc / reps as f64
        };
        let small = mean_abs_cross(&mut rng, 64);
        let large = mean_abs_cross(&mut rng, 4096);
        assert!(large < 0.1 * small, "{large} vs {small}");
    }
}
