use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{bail, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub n_classes: usize,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub total: u64,
    pub accuracy: f64,
    /// 0/0 is reported as 0.
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub mean_loss: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_predictions(targets: &[usize], predictions: &[usize], n_classes: usize, mean_loss: f64) -> Result<Self> {
        if targets.is_empty() {
            bail!(TooFewSamples, "cannot score an empty set");
        }
        if targets.len() != predictions.len() {
            bail!(Shape, "{} targets for {} predictions", targets.len(), predictions.len());
        }
        let mut confusion = vec![vec![0u64; n_classes]; n_classes];
        for (&t, &p) in targets.iter().zip(predictions) {
            if t >= n_classes || p >= n_classes {
                bail!(InvalidLabel, "class index out of range: target {t}, prediction {p}");
            }
            confusion[t][p] += 1;
        }
        let total = targets.len() as u64;
        let trace: u64 = (0..n_classes).map(|k| confusion[k][k]).sum();
        let precision = (0..n_classes)
            .map(|k| ratio(confusion[k][k], (0..n_classes).map(|t| confusion[t][k]).sum()))
            .collect();
        let recall = (0..n_classes)
            .map(|k| ratio(confusion[k][k], confusion[k].iter().sum()))
            .collect();
        Ok(Metrics {
            n_classes,
            confusion,
            total,
            accuracy: ratio(trace, total),
            precision,
            recall,
            mean_loss,
        })
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|k| self.confusion[k][k]).sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.confusion[class].iter().sum()
    }

    /// Plain-text report: headline numbers, per-class precision/recall and
    /// the confusion matrix (rows true class, columns prediction, 1-based).
    pub fn report(&self, title: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{title}: accuracy {:.4} ({} / {}), mean loss {:.6}", self.accuracy, self.trace(), self.total, self.mean_loss);
        let _ = writeln!(s, "class  precision  recall  support");
        for k in 0..self.n_classes {
            let _ = writeln!(s, "{:>5}  {:>9.4}  {:>6.4}  {:>7}", k + 1, self.precision[k], self.recall[k], self.support(k));
        }
        let _ = writeln!(s, "confusion (rows true, cols predicted):");
        let _ = write!(s, "     ");
        for k in 0..self.n_classes {
            let _ = write!(s, "{:>7}", k + 1);
        }
        let _ = writeln!(s);
        for (k, row) in self.confusion.iter().enumerate() {
            let _ = write!(s, "{:>5}", k + 1);
            for c in row {
                let _ = write!(s, "{c:>7}");
            }
            let _ = writeln!(s);
        }
        s
    }
}

/// Majority vote of window predictions per trial; ties go to the lowest
/// class. Every window of a trial shares the trial's target.
pub fn vote_per_trial(trial_ids: &[u32], targets: &[usize], predictions: &[usize], n_classes: usize) -> Result<Metrics> {
    if trial_ids.len() != targets.len() || targets.len() != predictions.len() {
        bail!(Shape, "trial ids, targets and predictions differ in length");
    }
    let mut votes: BTreeMap<u32, (usize, Vec<u64>)> = BTreeMap::new();
    for ((&trial, &t), &p) in trial_ids.iter().zip(targets).zip(predictions) {
        if p >= n_classes {
            bail!(InvalidLabel, "prediction {p} out of range");
        }
        let entry = votes.entry(trial).or_insert_with(|| (t, vec![0; n_classes]));
        if entry.0 != t {
            bail!(InvalidLabel, "trial {trial} has windows with different targets");
        }
        entry.1[p] += 1;
    }
    let (trial_targets, trial_preds): (Vec<usize>, Vec<usize>) = votes
        .values()
        .map(|(t, counts)| {
            let mut best = 0;
            for (k, &c) in counts.iter().enumerate() {
                if c > counts[best] {
                    best = k;
                }
            }
            (*t, best)
        })
        .unzip();
    Metrics::from_predictions(&trial_targets, &trial_preds, n_classes, f64::NAN)
}
