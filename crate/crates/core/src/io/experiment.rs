use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::sim::{child_seed, fold_assignment, simulate, train_test_split, SimCase, SimSpec};
use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::evaluation::{
    ibs_window, mean_se, roc_auc, score_predictive, FeatureMap, Logistic, Ols, ScoreOptions, ScoreReport, ScoreSet,
    VinePredictive,
};
use crate::fitting::{fit, FitConfig, FittedModel};
use crate::margins::MarginKind;
use crate::prediction::{conditionals, PredictOptions};
use crate::vine::VineModel;

/// Central prediction intervals at 95%.
pub const INTERVAL_ALPHA: f64 = 0.05;

/// Rows of `ds` reordered to the model's variables. A missing response
/// column is filled with zeros, which the conditional recursion ignores.
pub fn align_rows(model: &VineModel, ds: &Dataset, response: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let mut map = Vec::with_capacity(model.dim());
    for (v, name) in model.names().iter().enumerate() {
        match ds.names().iter().position(|n| n == name) {
            Some(j) => map.push(Some(j)),
            None if Some(v) == response => map.push(None),
            None => return Err(Error::Schema(format!("data has no column {name}"))),
        }
    }
    Ok(ds.rows().iter().map(|r| map.iter().map(|j| j.map_or(0.0, |j| r[j])).collect()).collect())
}

/// FNV-1a hash of column names and value bits, used to spot scoring on the
/// training data.
pub fn fingerprint(ds: &Dataset) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    for n in ds.names() {
        eat(n.as_bytes());
        eat(&[0]);
    }
    for r in ds.rows() {
        for v in r {
            eat(&v.to_bits().to_le_bytes());
        }
    }
    format!("{h:016x}")
}

fn response_of(ds: &Dataset) -> Result<usize> {
    ds.response().ok_or_else(|| Error::Input("data set has no response column".into()))
}

fn predictor_rows(ds: &Dataset) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let y = response_of(ds)?;
    let preds = ds.predictors();
    let x = ds.rows().iter().map(|r| preds.iter().map(|&j| r[j]).collect()).collect();
    Ok((x, ds.column(y)))
}

/// Scores of a fitted vine on a test set with a response column.
pub fn score_vine(fm: &FittedModel, test: &Dataset, window: (f64, f64)) -> Result<(ScoreSet, Vec<String>)> {
    let y = fm.response.ok_or_else(|| Error::Input("model has no response".into()))?;
    let name = &fm.model.names()[y];
    let truth = test.column(test.index_of(name)?);
    let rows = align_rows(&fm.model, test, Some(y))?;
    let opts = PredictOptions::default();
    let preds: Vec<VinePredictive> = conditionals(&fm.model, &rows)?.into_iter().map(|cd| VinePredictive { cd, opts }).collect();
    score_predictive(&preds, &truth, &ScoreOptions { interval_alpha: INTERVAL_ALPHA, window })
}

pub fn score_ols(ols: &Ols, test: &Dataset, window: (f64, f64)) -> Result<ScoreSet> {
    let (x, truth) = predictor_rows(test)?;
    let preds: Vec<_> = x.iter().map(|r| ols.predictive(r)).collect();
    Ok(score_predictive(&preds, &truth, &ScoreOptions { interval_alpha: INTERVAL_ALPHA, window })?.0)
}

/// A regression method compared in the experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Vine { name: String, config: FitConfig },
    Ols { name: String, features: FeatureMap },
}

impl Method {
    pub fn name(&self) -> &str {
        match self {
            Method::Vine { name, .. } | Method::Ols { name, .. } => name,
        }
    }

    /// Fit on `train`, score on `test`; the QS/IBS window comes from the
    /// training responses.
    pub fn fit_and_score(&self, train: &Dataset, test: &Dataset) -> Result<(ScoreSet, Vec<String>)> {
        let window = ibs_window(&train.column(response_of(train)?))?;
        match self {
            Method::Vine { config, .. } => {
                let fm = fit(train, config)?;
                let (s, mut w) = score_vine(&fm, test, window)?;
                w.extend(fm.warnings);
                Ok((s, w))
            }
            Method::Ols { features, .. } => {
                let (x, y) = predictor_rows(train)?;
                let ols = Ols::fit(&x, &y, *features)?;
                Ok((score_ols(&ols, test, window)?, Vec::new()))
            }
        }
    }
}

/// Margins used in the simulation study: normal predictors; a normal
/// response in the homoscedastic case and skew-normal otherwise.
pub fn simulation_config(case: SimCase, p: usize, seed: u64) -> FitConfig {
    let mut margins = BTreeMap::new();
    for i in 1..=p {
        margins.insert(format!("x{i}"), MarginKind::Normal);
    }
    let ym = if case == SimCase::LinearHomo { MarginKind::Normal } else { MarginKind::SkewNormal };
    margins.insert("y".into(), ym);
    FitConfig { margins, seed, ..Default::default() }
}

pub fn simulation_methods(case: SimCase, p: usize, seed: u64) -> Vec<Method> {
    vec![
        Method::Vine { name: "vine".into(), config: simulation_config(case, p, seed) },
        Method::Ols { name: "linear".into(), features: FeatureMap::Linear },
        Method::Ols { name: "quadratic".into(), features: FeatureMap::Quadratic },
    ]
}

/// Training and test halves of one simulation replicate of size n.
pub fn simulation_split(case: SimCase, p: usize, n: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let ds = simulate(&SimSpec { case, p, n, seed: child_seed(seed, 0) })?;
    train_test_split(&ds, n / 2, child_seed(seed, 1))
}

/// Per-method scores over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub methods: Vec<String>,
    /// replicates[m][r]
    pub replicates: Vec<Vec<ScoreSet>>,
    pub warnings: Vec<String>,
}

impl ExperimentResult {
    fn new(methods: &[Method]) -> Self {
        ExperimentResult {
            methods: methods.iter().map(|m| m.name().to_string()).collect(),
            replicates: vec![Vec::new(); methods.len()],
            warnings: Vec::new(),
        }
    }

    pub fn reports(&self) -> Result<Vec<ScoreReport>> {
        self.methods.iter().zip(&self.replicates).map(|(m, r)| ScoreReport::from_replicates(m, r)).collect()
    }

    pub fn report(&self, method: &str) -> Result<ScoreReport> {
        let i = self
            .methods
            .iter()
            .position(|m| m == method)
            .ok_or_else(|| Error::Input(format!("no method named {method}")))?;
        ScoreReport::from_replicates(method, &self.replicates[i])
    }
}

/// Seeded replicates of the simulation study with n = 2000 split in halves.
/// Replicate r uses the child seed r of `master`.
pub fn run_simulation(case: SimCase, p: usize, replicates: usize, master: u64) -> Result<ExperimentResult> {
    let methods = simulation_methods(case, p, master);
    let mut out = ExperimentResult::new(&methods);
    for r in 0..replicates {
        let (train, test) = simulation_split(case, p, 2000, child_seed(master, r as u64))?;
        for (m, method) in methods.iter().enumerate() {
            let (s, w) = method.fit_and_score(&train, &test)?;
            out.replicates[m].push(s);
            out.warnings.extend(w.into_iter().map(|w| format!("replicate {r}, {}: {w}", method.name())));
        }
    }
    Ok(out)
}

fn average_sets(sets: &[ScoreSet]) -> ScoreSet {
    let n = sets.len() as f64;
    let mut acc = [0.0; 5];
    for s in sets {
        for (a, v) in acc.iter_mut().zip(s.values()) {
            *a += v / n;
        }
    }
    ScoreSet { rmse: acc[0], logs: acc[1], qs: acc[2], is: acc[3], ibs: acc[4] }
}

fn fold_split(ds: &Dataset, labels: &[usize], k: usize) -> (Dataset, Dataset) {
    let train: Vec<usize> = (0..ds.n_rows()).filter(|&i| labels[i] != k).collect();
    let test: Vec<usize> = (0..ds.n_rows()).filter(|&i| labels[i] == k).collect();
    (ds.subset(&train), ds.subset(&test))
}

/// Repeated k-fold cross validation. Each repeat's replicate value is the
/// average of the fold scores; repeat r draws its folds from child seed r.
pub fn crossval(ds: &Dataset, methods: &[Method], folds: usize, repeats: usize, master: u64) -> Result<ExperimentResult> {
    response_of(ds)?;
    if repeats == 0 {
        return Err(Error::Input("repeats must be positive".into()));
    }
    let mut out = ExperimentResult::new(methods);
    for r in 0..repeats {
        let labels = fold_assignment(ds.n_rows(), folds, child_seed(master, r as u64))?;
        let mut per_fold: Vec<Vec<ScoreSet>> = vec![Vec::new(); methods.len()];
        for k in 0..folds {
            let (train, test) = fold_split(ds, &labels, k);
            for (m, method) in methods.iter().enumerate() {
                let (s, w) = method.fit_and_score(&train, &test)?;
                per_fold[m].push(s);
                out.warnings.extend(w.into_iter().map(|w| format!("repeat {r}, fold {k}, {}: {w}", method.name())));
            }
        }
        for (m, sets) in per_fold.iter().enumerate() {
            out.replicates[m].push(average_sets(sets));
        }
    }
    Ok(out)
}

/// Binary classifiers of "response > threshold".
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    /// vine with the response as an ordinal variable; the score is
    /// P(Y > threshold | x)
    Vine { name: String, config: FitConfig },
    Logistic { name: String, features: FeatureMap },
}

impl Classifier {
    pub fn name(&self) -> &str {
        match self {
            Classifier::Vine { name, .. } | Classifier::Logistic { name, .. } => name,
        }
    }

    /// Positive-class scores for the test rows.
    pub fn fit_and_score(&self, train: &Dataset, test: &Dataset, threshold: f64) -> Result<Vec<f64>> {
        match self {
            Classifier::Vine { config, .. } => {
                let fm = fit(train, config)?;
                let y = fm.response.ok_or_else(|| Error::Input("model has no response".into()))?;
                let rows = align_rows(&fm.model, test, Some(y))?;
                Ok(conditionals(&fm.model, &rows)?.iter().map(|cd| 1.0 - cd.cdf(threshold)).collect())
            }
            Classifier::Logistic { features, .. } => {
                let (x, y) = predictor_rows(train)?;
                let labels: Vec<bool> = y.iter().map(|v| *v > threshold).collect();
                let lr = Logistic::fit(&x, &labels, *features)?;
                let (xt, _) = predictor_rows(test)?;
                Ok(xt.iter().map(|r| lr.probability(r)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucSummary {
    pub method: String,
    pub mean: f64,
    pub se: Option<f64>,
    /// fold-averaged AUC of each repeat
    pub per_repeat: Vec<f64>,
}

/// Repeated k-fold cross validation of AUC for "response > threshold". The
/// response column is treated as ordinal.
pub fn crossval_auc(
    ds: &Dataset,
    classifiers: &[Classifier],
    threshold: f64,
    folds: usize,
    repeats: usize,
    master: u64,
) -> Result<Vec<AucSummary>> {
    let yi = response_of(ds)?;
    let ds = ds.clone().with_kind(&ds.names()[yi].clone(), ColumnKind::Ordinal)?;
    let mut per: Vec<Vec<f64>> = vec![Vec::new(); classifiers.len()];
    for r in 0..repeats {
        let labels = fold_assignment(ds.n_rows(), folds, child_seed(master, r as u64))?;
        let mut acc = vec![0.0; classifiers.len()];
        for k in 0..folds {
            let (train, test) = fold_split(&ds, &labels, k);
            let truth: Vec<bool> = test.column(yi).iter().map(|v| *v > threshold).collect();
            for (c, cl) in classifiers.iter().enumerate() {
                let scores = cl.fit_and_score(&train, &test, threshold)?;
                acc[c] += roc_auc(&scores, &truth)?.auc / folds as f64;
            }
        }
        for (c, a) in acc.into_iter().enumerate() {
            per[c].push(a);
        }
    }
    Ok(classifiers
        .iter()
        .zip(per)
        .map(|(cl, xs)| {
            let (mean, se) = mean_se(&xs);
            AucSummary { method: cl.name().to_string(), mean, se, per_repeat: xs }
        })
        .collect())
}
