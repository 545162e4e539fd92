//! Scoring rules for probabilistic predictions, ROC analysis and the
//! regression baselines used as comparators.

mod baselines;
mod scores;

pub use baselines::{FeatureMap, GaussianBaseline, Logistic, Ols, StudentTPredictive};
pub use scores::{
    ibs_window, integrated_brier, integrated_brier_steps, interval_score, interval_scores, log_score, mann_whitney_auc,
    quad_score, quad_score_discrete, rmse, roc_auc, IntervalScore, LogScore, Roc, BRIER_NODES,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::{ConditionalDistribution, PredictOptions};

/// A predictive distribution of a scalar response.
pub trait Predictive {
    fn mean(&self) -> Result<f64>;
    /// Log density; log probability of the atom for a discrete response.
    fn ln_pdf(&self, y: f64) -> f64;
    fn cdf(&self, y: f64) -> f64;
    fn quantile(&self, alpha: f64) -> Result<f64>;
    /// Support and probabilities of a discrete response.
    fn pmf(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }
}

/// A vine conditional distribution with fixed solver options.
pub struct VinePredictive<'a> {
    pub cd: ConditionalDistribution<'a>,
    pub opts: PredictOptions,
}

impl Predictive for VinePredictive<'_> {
    fn mean(&self) -> Result<f64> {
        self.cd.mean(&self.opts)
    }
    fn ln_pdf(&self, y: f64) -> f64 {
        self.cd.ln_pdf(y)
    }
    fn cdf(&self, y: f64) -> f64 {
        self.cd.cdf(y)
    }
    fn quantile(&self, alpha: f64) -> Result<f64> {
        self.cd.quantile(alpha, &self.opts)
    }
    fn pmf(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let m = self.cd.response_margin();
        let sup = m.support()?;
        Some((sup.values.clone(), self.cd.pmf().ok()?))
    }
}

/// The five scores of one model on one test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub rmse: f64,
    pub logs: f64,
    pub qs: f64,
    pub is: f64,
    pub ibs: f64,
}

pub const METRICS: [&str; 5] = ["RMSE", "LogS", "QS", "IS", "IBS"];
/// Direction per metric, in the order of [`METRICS`].
pub const HIGHER_IS_BETTER: [bool; 5] = [false, true, true, false, false];

impl ScoreSet {
    pub fn values(&self) -> [f64; 5] {
        [self.rmse, self.logs, self.qs, self.is, self.ibs]
    }
}

/// Options of [`score_predictive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreOptions {
    /// central interval at level 1 - alpha
    pub interval_alpha: f64,
    /// integration window for QS and IBS
    pub window: (f64, f64),
}

/// Score a batch of predictive distributions against the truths.
pub fn score_predictive<P: Predictive>(preds: &[P], truth: &[f64], opts: &ScoreOptions) -> Result<(ScoreSet, Vec<String>)> {
    if preds.len() != truth.len() || truth.is_empty() {
        return Err(Error::Input(format!("{} predictions for {} truths", preds.len(), truth.len())));
    }
    let a = opts.interval_alpha;
    let (lo, hi) = opts.window;
    let mut means = Vec::with_capacity(truth.len());
    let mut ln = Vec::with_capacity(truth.len());
    let mut qs = 0.0;
    let mut lower = Vec::with_capacity(truth.len());
    let mut upper = Vec::with_capacity(truth.len());
    let mut ibs = 0.0;
    for (p, &y) in preds.iter().zip(truth) {
        means.push(p.mean()?);
        ln.push(p.ln_pdf(y));
        lower.push(p.quantile(a / 2.0)?);
        upper.push(p.quantile(1.0 - a / 2.0)?);
        match p.pmf() {
            Some((sup, probs)) => {
                qs += quad_score_discrete(&sup, &probs, y);
                let mut acc = 0.0;
                let cum: Vec<f64> = probs
                    .iter()
                    .map(|q| {
                        acc += q;
                        acc
                    })
                    .collect();
                ibs += integrated_brier_steps(&sup, &cum, y, (lo, hi));
            }
            None => {
                qs += quad_score(|t| p.ln_pdf(t).exp(), y, (lo, hi))?;
                ibs += integrated_brier(|t| p.cdf(t), y, (lo, hi));
            }
        }
    }
    let n = truth.len() as f64;
    let logs = log_score(&ln);
    let mut warnings = Vec::new();
    if logs.zero_density > 0 {
        warnings.push(format!("{} test points have zero predictive density", logs.zero_density));
    }
    let set = ScoreSet {
        rmse: rmse(truth, &means)?,
        logs: logs.value,
        qs: qs / n,
        is: interval_scores(&lower, &upper, truth, a)?.total,
        ibs: ibs / n,
    };
    Ok((set, warnings))
}

/// Mean and standard error of one metric over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    /// None with a single replicate
    pub se: Option<f64>,
    pub higher_is_better: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub model: String,
    pub replicates: usize,
    pub metrics: Vec<MetricSummary>,
}

impl ScoreReport {
    pub fn from_replicates(model: &str, sets: &[ScoreSet]) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::Input("no replicates to summarize".into()));
        }
        let metrics = (0..5)
            .map(|k| {
                let xs: Vec<f64> = sets.iter().map(|s| s.values()[k]).collect();
                let (mean, se) = mean_se(&xs);
                MetricSummary { metric: METRICS[k].into(), mean, se, higher_is_better: HIGHER_IS_BETTER[k] }
            })
            .collect();
        Ok(ScoreReport { model: model.into(), replicates: sets.len(), metrics })
    }

    pub fn get(&self, metric: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == metric)
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}
