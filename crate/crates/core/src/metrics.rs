//! Binary classification metrics with `Stress` / `Anomaly` as the positive class.

use serde::Serialize;

use crate::data::Class;
use crate::ocsvm::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_outcomes(truth: &[Class], predicted: &[Outcome]) -> Self {
        let mut c = Confusion::default();
        for (t, p) in truth.iter().zip(predicted) {
            match (t, p) {
                (Class::Stress, Outcome::Anomaly) => c.tp += 1,
                (Class::Baseline, Outcome::Anomaly) => c.fp += 1,
                (Class::Baseline, Outcome::Normal) => c.tn += 1,
                (Class::Stress, Outcome::Normal) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    fn ratio(num: usize, den: usize) -> Option<f64> {
        (den > 0).then(|| num as f64 / den as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        Self::ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> Option<f64> {
        Self::ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        Self::ratio(self.tp, self.tp + self.fn_)
    }

    /// Undefined when precision or recall is, or when both are zero.
    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        (p + r > 0.0).then(|| 2.0 * p * r / (p + r))
    }

    pub fn scores(&self) -> Scores {
        Scores {
            accuracy: self.accuracy(),
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
        }
    }
}

/// `None` marks an undefined metric (zero denominator).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Scores {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

/// Max and mean over trials where the metric is defined.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Summary {
    pub max: Option<f64>,
    pub avg: Option<f64>,
    /// Trials where the metric was undefined.
    pub excluded: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let mut defined = Vec::new();
        let mut excluded = 0;
        for v in values {
            match v {
                Some(x) => defined.push(x),
                None => excluded += 1,
            }
        }
        if defined.is_empty() {
            return Summary { max: None, avg: None, excluded };
        }
        Summary {
            max: defined.iter().copied().reduce(f64::max),
            avg: Some(defined.iter().sum::<f64>() / defined.len() as f64),
            excluded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Aggregate {
    pub accuracy: Summary,
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
}

impl Aggregate {
    pub fn of(scores: &[Scores]) -> Self {
        Aggregate {
            accuracy: Summary::of(scores.iter().map(|s| s.accuracy)),
            precision: Summary::of(scores.iter().map(|s| s.precision)),
            recall: Summary::of(scores.iter().map(|s| s.recall)),
            f1: Summary::of(scores.iter().map(|s| s.f1)),
        }
    }
}
