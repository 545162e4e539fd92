use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::quad::{composite_nodes, integrate};

/// Quadrature nodes for the IBS and the first QS pass.
pub const BRIER_NODES: usize = 512;
const PANEL_ORDER: usize = 8;
const QS_SELF_TOL: f64 = 1e-6;

pub fn rmse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::Input(format!("rmse needs equal nonempty lengths, got {} and {}", truth.len(), pred.len())));
    }
    let s: f64 = truth.iter().zip(pred).map(|(y, p)| (y - p).powi(2)).sum();
    Ok((s / truth.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogScore {
    pub value: f64,
    /// points with zero predictive density (the mean is then -inf)
    pub zero_density: usize,
}

/// Mean log predictive density from per-point log densities.
pub fn log_score(ln_dens: &[f64]) -> LogScore {
    let zero_density = ln_dens.iter().filter(|l| **l == f64::NEG_INFINITY).count();
    let value = ln_dens.iter().sum::<f64>() / ln_dens.len() as f64;
    LogScore { value, zero_density }
}

/// 2 f(y) - int f^2 over the window. Composite Gauss-Legendre with 512 and
/// 1024 nodes; when the two disagree the integral is redone adaptively.
pub fn quad_score<F: FnMut(f64) -> f64>(mut pdf: F, y: f64, window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window;
    let mut sq = |t: f64| {
        let f = pdf(t);
        f * f
    };
    let coarse: f64 = composite_nodes(lo, hi, BRIER_NODES, PANEL_ORDER, None).iter().map(|(t, w)| w * sq(*t)).sum();
    let fine: f64 = composite_nodes(lo, hi, 2 * BRIER_NODES, PANEL_ORDER, None).iter().map(|(t, w)| w * sq(*t)).sum();
    let l2 = if (coarse - fine).abs() < QS_SELF_TOL { fine } else { integrate(&mut sq, lo, hi, 1e-10, 1e-10) };
    if !l2.is_finite() {
        return Err(Error::Numeric("squared predictive density is not integrable on the window".into()));
    }
    let fy = pdf(y);
    Ok(2.0 * fy - l2)
}

/// 2 p(y) - sum p^2 for a discrete predictive distribution.
pub fn quad_score_discrete(support: &[f64], probs: &[f64], y: f64) -> f64 {
    let py: f64 = support.iter().zip(probs).filter(|(s, _)| (**s - y).abs() <= 1e-9 * s.abs().max(1.0)).map(|(_, p)| p).sum();
    2.0 * py - probs.iter().map(|p| p * p).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalScore {
    pub total: f64,
    /// average interval width
    pub width: f64,
    /// average miss penalty
    pub penalty: f64,
}

pub fn interval_score(lower: f64, upper: f64, y: f64, alpha: f64) -> Result<f64> {
    if lower > upper {
        return Err(Error::Input(format!("interval lower {lower} exceeds upper {upper}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("interval level {alpha} outside (0, 1)")));
    }
    let mut s = upper - lower;
    if y < lower {
        s += 2.0 / alpha * (lower - y);
    }
    if y > upper {
        s += 2.0 / alpha * (y - upper);
    }
    Ok(s)
}

pub fn interval_scores(lower: &[f64], upper: &[f64], truth: &[f64], alpha: f64) -> Result<IntervalScore> {
    if lower.len() != truth.len() || upper.len() != truth.len() || truth.is_empty() {
        return Err(Error::Input("interval bounds and truths must have equal nonempty lengths".into()));
    }
    let n = truth.len() as f64;
    let (mut total, mut width) = (0.0, 0.0);
    for ((l, u), y) in lower.iter().zip(upper).zip(truth) {
        total += interval_score(*l, *u, *y, alpha)?;
        width += u - l;
    }
    Ok(IntervalScore { total: total / n, width: width / n, penalty: (total - width) / n })
}

/// Integration window [min - 3 IQR, max + 3 IQR] from training responses.
pub fn ibs_window(y_train: &[f64]) -> Result<(f64, f64)> {
    if y_train.is_empty() || y_train.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("window needs finite training responses".into()));
    }
    let mut s = y_train.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = (s.len() - 1) as f64 * p;
        let i = h.floor() as usize;
        let j = (i + 1).min(s.len() - 1);
        s[i] + (h - i as f64) * (s[j] - s[i])
    };
    let mut iqr = q(0.75) - q(0.25);
    if iqr <= 0.0 {
        iqr = (s[s.len() - 1] - s[0]).max(1.0);
    }
    Ok((s[0] - 3.0 * iqr, s[s.len() - 1] + 3.0 * iqr))
}

/// int [F(t) - 1{t >= y}]^2 dt over the window, split at y.
pub fn integrated_brier<F: FnMut(f64) -> f64>(mut cdf: F, y: f64, window: (f64, f64)) -> f64 {
    let (lo, hi) = window;
    composite_nodes(lo, hi, BRIER_NODES, PANEL_ORDER, Some(y))
        .iter()
        .map(|&(t, w)| {
            let ind = if t >= y { 1.0 } else { 0.0 };
            w * (cdf(t) - ind).powi(2)
        })
        .sum()
}

/// Exact IBS for a step CDF: `cum[k]` holds F on [support[k], support[k+1]).
pub fn integrated_brier_steps(support: &[f64], cum: &[f64], y: f64, window: (f64, f64)) -> f64 {
    let (lo, hi) = window;
    let mut cuts: Vec<f64> = support.iter().copied().chain([y, lo, hi]).filter(|t| *t >= lo && *t <= hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let f_at = |t: f64| support.iter().zip(cum).filter(|(s, _)| **s <= t).map(|(_, c)| *c).last().unwrap_or(0.0);
    cuts.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let ind = if mid >= y { 1.0 } else { 0.0 };
            (w[1] - w[0]) * (f_at(mid) - ind).powi(2)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    /// (false positive rate, true positive rate), from (0, 0) to (1, 1)
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

fn class_counts(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Input(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Input("scores contain NaN".into()));
    }
    let pos = labels.iter().filter(|l| **l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc("labels contain a single class".into()));
    }
    Ok((pos, neg))
}

/// ROC curve over all thresholds; tied scores form one step, so the
/// trapezoid area equals the midrank statistic.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<Roc> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        let (tp0, fp0) = (tp, fp);
        while i < idx.len() && scores[idx[i]] == s {
            if labels[idx[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        auc += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(Roc { points, auc: auc / (pos as f64 * neg as f64) })
}

/// Mann-Whitney statistic with midranks for ties, scaled to [0, 1].
pub fn mann_whitney_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = mid;
        }
        i = j + 1;
    }
    let rpos: f64 = ranks.iter().zip(labels).filter(|(_, l)| **l).map(|(r, _)| r).sum();
    let p = pos as f64;
    Ok((rpos - p * (p + 1.0) / 2.0) / (p * neg as f64))
}
