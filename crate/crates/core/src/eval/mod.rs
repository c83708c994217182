//! Evaluation: AUC, synthetic sessions, and the experiment protocols.

pub mod protocols;
pub mod synth;

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::erp_cov::Label;
use crate::error::{Error, Result};

pub use protocols::{
    adaptive_replay, batch_blended_model, block_aucs, cross_subject_eval, learning_curve, robustness_sweep, score_trials,
    symmetric_grid, train_test_auc, ReplayOutcome, SweepKind,
};
pub use synth::{generate_recording, generate_session, random_mixing, SynthConfig};

/// Area under the ROC curve via the Mann-Whitney rank sum, ties at midrank:
/// `P(target > nontarget) + P(equal) / 2`. `Unknown` labels are ignored.
pub fn auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::dims(format!("{} labels", scores.len()), labels.len()));
    }
    let mut items: Vec<(f64, bool)> = scores
        .iter()
        .zip(labels)
        .filter(|(_, l)| **l != Label::Unknown)
        .map(|(&s, &l)| (s, l == Label::Target))
        .collect();
    if items.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::Domain("NaN score".into()));
    }
    let n_pos = items.iter().filter(|(_, t)| *t).count();
    let n_neg = items.len() - n_pos;
    for (label, found) in [(Label::Target, n_pos), (Label::NonTarget, n_neg)] {
        if found == 0 {
            return Err(Error::ClassCoverage { label, found, required: 1 });
        }
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < items.len() {
        let mut end = start + 1;
        while end < items.len() && items[end].0 == items[start].0 {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their average
        let midrank = (start + 1 + end) as f64 / 2.0;
        rank_sum += midrank * items[start..end].iter().filter(|(_, t)| *t).count() as f64;
        start = end;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// One point of a curve: mean and spread over `seeds` runs at `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub mean: f64,
    pub std: f64,
    pub seeds: usize,
}

impl CurvePoint {
    pub fn from_samples(x: f64, values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        CurvePoint { x, mean, std, seeds: n }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub protocol: String,
    /// Headline AUC of the protocol (overall, mean, or reference value).
    pub auc: f64,
    pub points: Vec<CurvePoint>,
    pub metadata: BTreeMap<String, String>,
}

/// One line of report output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub protocol: String,
    pub x: f64,
    pub mean: f64,
    pub std: f64,
    pub seeds: usize,
}

impl EvaluationReport {
    pub fn new(protocol: impl Into<String>, auc: f64, points: Vec<CurvePoint>) -> Self {
        EvaluationReport {
            protocol: protocol.into(),
            auc,
            points,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn records(&self) -> Vec<ReportRecord> {
        self.points
            .iter()
            .map(|p| ReportRecord {
                protocol: self.protocol.clone(),
                x: p.x,
                mean: p.mean,
                std: p.std,
                seeds: p.seeds,
            })
            .collect()
    }

    /// Line-delimited JSON, one record per curve point.
    pub fn write_records<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in self.records() {
            serde_json::to_writer(&mut out, &r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn read_records<R: BufRead>(input: R) -> Result<Vec<ReportRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format(format!("report line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// O(n^2) pairwise oracle.
    fn brute_force_auc(scores: &[f64], labels: &[Label]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, li) in labels.iter().enumerate() {
            for (j, lj) in labels.iter().enumerate() {
                if *li == Label::Target && *lj == Label::NonTarget {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn trivial_cases() {
        let labels = [Label::NonTarget, Label::NonTarget, Label::Target, Label::Target];
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &labels).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &labels).unwrap(), 0.0);
        assert_eq!(auc(&[0.5; 4], &labels).unwrap(), 0.5);
        assert!(matches!(auc(&[0.1, 0.2], &[Label::Target, Label::Target]), Err(Error::ClassCoverage { .. })));
        assert!(auc(&[0.1], &labels).is_err());
    }

    #[test]
    fn matches_brute_force_on_random_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let n = 200;
            // coarse grid to force ties
            let scores: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 20.0).floor()).collect();
            let mut labels: Vec<Label> = (0..n)
                .map(|_| if rng.random_bool(0.3) { Label::Target } else { Label::NonTarget })
                .collect();
            labels[0] = Label::Target;
            labels[1] = Label::NonTarget;
            let a = auc(&scores, &labels).unwrap();
            assert!((a - brute_force_auc(&scores, &labels)).abs() < 1e-12);
        }
    }

    fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<Label>)> {
        (3usize..60).prop_flat_map(|n| {
            (
                prop::collection::vec(-100.0f64..100.0, n),
                prop::collection::vec(prop::bool::ANY, n),
            )
                .prop_map(|(s, b)| {
                    let mut l: Vec<Label> = b.into_iter().map(|t| if t { Label::Target } else { Label::NonTarget }).collect();
                    l[0] = Label::Target;
                    l[1] = Label::NonTarget;
                    (s, l)
                })
        })
    }

    proptest! {
        #[test]
        fn negation_complements((scores, labels) in scored()) {
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let a = auc(&scores, &labels).unwrap();
            let b = auc(&neg, &labels).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn invariant_under_increasing_transform((scores, labels) in scored()) {
            let warped: Vec<f64> = scores.iter().map(|s| (s / 50.0).exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(auc(&scores, &labels).unwrap(), auc(&warped, &labels).unwrap());
        }
    }

    #[test]
    fn curve_point_statistics() {
        let p = CurvePoint::from_samples(2.0, &[1.0, 3.0]);
        assert_eq!(p.mean, 2.0);
        assert!((p.std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(CurvePoint::from_samples(0.0, &[0.7]).std, 0.0);
    }

    #[test]
    fn report_lines_parse_back() {
        let r = EvaluationReport::new("latency-sweep", 0.9, vec![CurvePoint::from_samples(-11.0, &[0.95, 0.97])]);
        let mut buf = Vec::new();
        r.write_records(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.contains("\"protocol\":\"latency-sweep\""));
        assert_eq!(read_records(&buf[..]).unwrap(), r.records());
        assert!(matches!(read_records(&b"{nope\n"[..]), Err(Error::Format(_))));
    }
}
