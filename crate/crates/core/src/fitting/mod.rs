//! Two-stage estimation: margins first, then vine structure and pair copulas
//! on the pseudo-observations.

mod structure;

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use structure::{attach_response, correlation_matrix, greedy_vine, normal_scores, partial_correlation};

use crate::bicop::fit::{select_family, Criterion, EdgeData, EdgeFit};
use crate::bicop::{Family, PairCopula};
use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::margins::{fit_margin, MarginKind, MarginModel};
use crate::vine::{pit_pair, recurse, Edge, LevelPairs, PairObs, VineArray, VineModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum StructureMode {
    #[default]
    #[serde(rename = "rvine", alias = "rvine-greedy")]
    Rvine,
    #[serde(rename = "dvine", alias = "dvine-forward")]
    Dvine,
    #[serde(rename = "gaussian", alias = "gaussian-only")]
    Gaussian,
    #[serde(rename = "fixed", alias = "fixed-array")]
    Fixed,
}

impl FromStr for StructureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Input(format!("unknown structure mode {s}")))
    }
}

/// Estimation settings. Read from JSON; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub structure: StructureMode,
    pub candidates: Vec<Family>,
    pub criterion: Criterion,
    /// number of trees with fitted pair copulas; all trees when absent
    pub truncation: Option<usize>,
    /// margin kind for continuous columns without an entry in `margins`
    pub default_margin: MarginKind,
    /// margin kind by column name
    pub margins: BTreeMap<String, MarginKind>,
    /// vine array for the fixed mode: 1-based column indices of the data,
    /// upper triangular
    pub array: Option<Vec<Vec<usize>>>,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            structure: StructureMode::Rvine,
            candidates: Family::ALL.to_vec(),
            criterion: Criterion::Aic,
            truncation: None,
            default_margin: MarginKind::EmpiricalContinuous,
            margins: BTreeMap::new(),
            array: None,
            seed: 1,
        }
    }
}

impl FitConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Check the settings against a data dimension.
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::Input("candidate family list is empty".into()));
        }
        if let Some(t) = self.truncation {
            if t < 1 || t + 1 > d {
                return Err(Error::Input(format!("truncation {t} outside [1, {}]", d.saturating_sub(1))));
            }
        }
        if self.structure == StructureMode::Fixed && self.array.is_none() {
            return Err(Error::Input("fixed structure mode needs an array".into()));
        }
        Ok(())
    }

    fn truncation_for(&self, d: usize) -> usize {
        self.truncation.unwrap_or(d - 1).clamp(1, d - 1)
    }

    fn margin_kind(&self, name: &str, kind: ColumnKind) -> MarginKind {
        match self.margins.get(name) {
            Some(k) => *k,
            None if kind == ColumnKind::Ordinal => MarginKind::EmpiricalDiscrete,
            None => self.default_margin,
        }
    }

    fn effective_candidates(&self) -> Vec<Family> {
        if self.structure == StructureMode::Gaussian {
            vec![Family::Gaussian]
        } else {
            self.candidates.clone()
        }
    }
}

/// A fitted vine with its fit statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub model: VineModel,
    /// response column, placed last on the diagonal
    pub response: Option<usize>,
    pub copula_loglik: f64,
    pub n_obs: usize,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl FittedModel {
    pub fn aic(&self) -> f64 {
        Criterion::Aic.value(self.copula_loglik, self.model.n_params(), self.n_obs)
    }

    pub fn bic(&self) -> f64 {
        Criterion::Bic.value(self.copula_loglik, self.model.n_params(), self.n_obs)
    }
}

/// Fit every margin of the data set.
pub fn fit_margins(ds: &Dataset, config: &FitConfig) -> Result<Vec<MarginModel>> {
    (0..ds.n_cols())
        .map(|j| {
            let kind = config.margin_kind(&ds.names()[j], ds.kinds()[j]);
            fit_margin(kind, &ds.column(j)).map_err(|e| match e {
                Error::Fit { msg, best, loglik } => {
                    Error::Fit { msg: format!("margin of {}: {msg}", ds.names()[j]), best, loglik }
                }
                other => other,
            })
        })
        .collect()
}

/// Pseudo-observations by original variable.
pub fn pseudo_observations(margins: &[MarginModel], rows: &[Vec<f64>]) -> LevelPairs {
    margins.iter().enumerate().map(|(v, m)| rows.iter().map(|r| pit_pair(m, r[v])).collect()).collect()
}

/// Normal-scores correlation matrix of pseudo-observations by variable.
pub fn normal_scores_correlation(u: &LevelPairs) -> Vec<Vec<f64>> {
    let z: Vec<Vec<f64>> = u.iter().map(|x| normal_scores(x)).collect();
    correlation_matrix(&z)
}

/// Greedy regular vine over the predictors `preds`, as an array in the
/// labels `0..preds.len()` (position i stands for `preds[i]`).
pub fn learn_predictor_structure(r: &[Vec<f64>], preds: &[usize], trunc: usize) -> Result<VineArray> {
    if preds.len() < 2 {
        return Err(Error::Input("a predictor vine needs at least two predictors".into()));
    }
    let levels = greedy_vine(r, preds);
    let local = relabel_levels(&levels, preds);
    VineArray::from_edge_sets(local, trunc.min(preds.len() - 1), None)
}

fn relabel_levels(levels: &[Vec<Edge>], vars: &[usize]) -> Vec<Vec<Edge>> {
    let map = |x: usize| vars.iter().position(|&v| v == x).expect("label in variable set");
    levels
        .iter()
        .map(|lev| {
            lev.iter()
                .map(|e| {
                    let (a, b) = (map(e.pair.0), map(e.pair.1));
                    let mut cond: Vec<usize> = e.cond.iter().map(|&c| map(c)).collect();
                    cond.sort_unstable();
                    Edge { pair: (a.min(b), a.max(b)), cond }
                })
                .collect()
        })
        .collect()
}

type EdgeKey = (usize, usize, Vec<usize>);

/// Sequential pair-copula selection with a cache keyed by the oriented edge
/// (partner, column variable, conditioning set) in original labels.
pub struct EdgeSelector {
    candidates: Vec<Family>,
    criterion: Criterion,
    cache: HashMap<EdgeKey, EdgeFit>,
    warnings: Vec<String>,
}

impl EdgeSelector {
    pub fn new(candidates: Vec<Family>, criterion: Criterion) -> Self {
        Self { candidates, criterion, cache: HashMap::new(), warnings: Vec::new() }
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn select(&mut self, key: EdgeKey, s: &[PairObs], w: &[PairObs], sd: bool, wd: bool) -> Result<EdgeFit> {
        if let Some(f) = self.cache.get(&key) {
            return Ok(f.clone());
        }
        let data = EdgeData {
            u_plus: s.iter().map(|x| x.0).collect(),
            u_minus: s.iter().map(|x| x.1).collect(),
            v_plus: w.iter().map(|x| x.0).collect(),
            v_minus: w.iter().map(|x| x.1).collect(),
            u_discrete: sd,
            v_discrete: wd,
        };
        let fit = match select_family(&data, &self.candidates, self.criterion) {
            Ok(f) => f,
            Err(e) if e.is_data_error() => {
                self.warnings.push(format!(
                    "edge {},{}|{:?}: {e}; using independence",
                    key.0 + 1,
                    key.1 + 1,
                    key.2.iter().map(|c| c + 1).collect::<Vec<_>>()
                ));
                EdgeFit { copula: PairCopula::independence(), loglik: 0.0, n_obs: s.len() }
            }
            Err(e) => return Err(e),
        };
        self.cache.insert(key, fit.clone());
        Ok(fit)
    }

    /// Fit the pair copulas of `structure` tree by tree. `labels[i]` is the
    /// original variable of structure label `i`; `u` and `discrete` are by
    /// original variable. Edges for which `skip` holds are independence.
    /// Returns the fits as `fits[l][j]` (None for skipped or `j <= l`).
    pub fn fit_structure(
        &mut self,
        structure: &VineArray,
        labels: &[usize],
        u: &LevelPairs,
        discrete: &[bool],
        skip: &dyn Fn(&Edge) -> bool,
    ) -> Result<Vec<Vec<Option<EdgeFit>>>> {
        let d = structure.dim();
        let orig = |pos: usize| labels[structure.order()[pos]];
        let u_pos: LevelPairs = (0..d).map(|p| u[orig(p)].clone()).collect();
        let disc_pos: Vec<bool> = (0..d).map(|p| discrete[orig(p)]).collect();
        let ws = structure.workspace();
        let mut fits: Vec<Vec<Option<EdgeFit>>> = vec![vec![None; d]; structure.truncation()];
        recurse(structure, &ws, &disc_pos, &u_pos, structure.truncation(), |l, j, s, w| {
            let partner = orig(structure.entry(l, j));
            let var = orig(j);
            let mut cond: Vec<usize> = (0..l).map(|k| orig(structure.entry(k, j))).collect();
            cond.sort_unstable();
            let edge = Edge { pair: (partner.min(var), partner.max(var)), cond: cond.clone() };
            if skip(&edge) {
                return Ok(PairCopula::independence());
            }
            let sd = disc_pos[structure.entry(l, j)];
            let fit = self.select((partner, var, cond), s, w, sd, disc_pos[j])?;
            let c = fit.copula.clone();
            fits[l][j] = Some(fit);
            Ok(c)
        })?;
        Ok(fits)
    }
}

fn edges_from_fits(fits: &[Vec<Option<EdgeFit>>], d: usize) -> (Vec<Vec<PairCopula>>, f64) {
    let mut ll = 0.0;
    let edges = fits
        .iter()
        .map(|row| {
            (0..d)
                .map(|j| match &row[j] {
                    Some(f) => {
                        ll += f.loglik;
                        f.copula.clone()
                    }
                    None => PairCopula::independence(),
                })
                .collect()
        })
        .collect();
    (edges, ll)
}

/// Fit the pair copulas of a given structure over all columns of the data.
pub fn select_and_fit_edges(
    structure: &VineArray,
    u: &LevelPairs,
    discrete: &[bool],
    candidates: &[Family],
    criterion: Criterion,
) -> Result<(Vec<Vec<PairCopula>>, f64, Vec<String>)> {
    let mut sel = EdgeSelector::new(candidates.to_vec(), criterion);
    let labels: Vec<usize> = (0..structure.dim()).collect();
    let fits = sel.fit_structure(structure, &labels, u, discrete, &|_| false)?;
    let (edges, ll) = edges_from_fits(&fits, structure.dim());
    Ok((edges, ll, sel.warnings))
}

/// Forward selection of a D-vine path ending at the response `y`. Starts
/// from the predictor with the largest |normal-scores correlation| with `y`;
/// each step adds the predictor whose new response edge has the lowest
/// criterion value, and stops once no addition lowers the criterion.
/// Returns the linked predictors in the order they were added.
pub fn learn_dvine_path(
    sel: &mut EdgeSelector,
    r: &[Vec<f64>],
    u: &LevelPairs,
    discrete: &[bool],
    preds: &[usize],
    y: usize,
    trunc: usize,
) -> Result<Vec<usize>> {
    let criterion = sel.criterion;
    let first = preds
        .iter()
        .copied()
        .fold(None, |best: Option<usize>, x| match best {
            Some(b) if r[b][y].abs() >= r[x][y].abs() => Some(b),
            _ => Some(x),
        })
        .ok_or_else(|| Error::Input("no predictors".into()))?;
    let mut linked = vec![first];
    loop {
        let mut best: Option<(f64, usize)> = None;
        for &c in preds.iter().filter(|x| !linked.contains(x)) {
            // local labels follow the path: c, newest linked, ..., first, y
            let mut path: Vec<usize> = vec![c];
            path.extend(linked.iter().rev());
            path.push(y);
            let k = path.len();
            if k - 2 >= trunc {
                continue;
            }
            let local: Vec<usize> = (0..k).collect();
            let arr = VineArray::dvine(&local, trunc.min(k - 1))?;
            let fits = sel.fit_structure(&arr, &path, u, discrete, &|_| false)?;
            let gain = fits[k - 2][k - 1].as_ref().map_or(0.0, |f| f.criterion(criterion));
            if best.is_none_or(|(g, _)| gain < g) {
                best = Some((gain, c));
            }
        }
        match best {
            Some((g, c)) if g < 0.0 => linked.push(c),
            _ => break,
        }
    }
    Ok(linked)
}

/// Estimate a vine model on all columns of the data set. With a response the
/// response is a leaf of every tree and the last diagonal variable.
pub fn fit(ds: &Dataset, config: &FitConfig) -> Result<FittedModel> {
    let d = ds.n_cols();
    if d < 2 {
        return Err(Error::Input("at least two columns are needed".into()));
    }
    config.validate(d)?;
    let n = ds.n_rows();
    let trunc = config.truncation_for(d);
    let margins = fit_margins(ds, config)?;
    let discrete: Vec<bool> = margins.iter().map(|m| m.is_discrete()).collect();
    let u = pseudo_observations(&margins, ds.rows());
    let r = normal_scores_correlation(&u);
    let candidates = config.effective_candidates();
    let mut sel = EdgeSelector::new(candidates, config.criterion);
    let all: Vec<usize> = (0..d).collect();
    let response = ds.response();

    let (structure, dropped) = match (config.structure, response) {
        (StructureMode::Fixed, _) => {
            let raw = config.array.as_ref().expect("validated");
            let v = VineArray::validate(raw, trunc)?;
            let v = match response {
                Some(y) => v.with_last(y)?,
                None => v,
            };
            (v, Vec::new())
        }
        (StructureMode::Dvine, Some(y)) => {
            let preds = ds.predictors();
            let linked = learn_dvine_path(&mut sel, &r, &u, &discrete, &preds, y, trunc)?;
            let dropped: Vec<usize> = preds.iter().copied().filter(|x| !linked.contains(x)).collect();
            let mut path = dropped.clone();
            path.extend(linked.iter().rev());
            path.push(y);
            (VineArray::dvine(&path, trunc)?, dropped)
        }
        (StructureMode::Dvine, None) => {
            return Err(Error::Input("the D-vine mode needs a response column".into()));
        }
        (_, Some(y)) => {
            let preds = ds.predictors();
            let pred_levels = greedy_vine(&r, &preds);
            let levels = attach_response(&pred_levels, &r, &preds, y);
            (VineArray::from_edge_sets(levels, trunc, Some(y))?, Vec::new())
        }
        (_, None) => (VineArray::from_edge_sets(greedy_vine(&r, &all), trunc, None)?, Vec::new()),
    };

    let skip = |e: &Edge| dropped.iter().any(|x| e.pair.0 == *x || e.pair.1 == *x || e.cond.contains(x));
    let fits = sel.fit_structure(&structure, &all, &u, &discrete, &skip)?;
    let (edges, ll) = edges_from_fits(&fits, d);
    let mut warnings = sel.warnings.clone();
    for x in &dropped {
        warnings.push(format!("predictor {} not selected; its edges are independence", ds.names()[*x]));
    }
    let model = VineModel::new(ds.names().to_vec(), margins, structure, edges)?;
    Ok(FittedModel { model, response, copula_loglik: ll, n_obs: n, seed: config.seed, warnings })
}

#[cfg(test)]
mod tests;
