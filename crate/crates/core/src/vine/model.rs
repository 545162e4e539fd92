//! Vine copula models with mixed margins: the forward h-function recursion
//! shared by fitting, density evaluation and prediction.

use super::array::{VineArray, Workspace};
use crate::bicop::fit::{ln_tilde_c, DIFF_FLOOR};
use crate::bicop::PairCopula;
use crate::error::{Error, Result};
use crate::margins::MarginModel;

/// (F⁺, F⁻): a conditional CDF value and its left limit.
pub type PairObs = (f64, f64);

/// Per diagonal position, one pair per observation.
pub type LevelPairs = Vec<Vec<PairObs>>;

/// Probability integral transform of one value. Continuous values are kept
/// strictly inside (0, 1).
pub fn pit_pair(m: &MarginModel, y: f64) -> PairObs {
    if m.is_discrete() {
        m.pit(y)
    } else {
        let u = m.cdf(y).clamp(PIT_EPS, 1.0 - PIT_EPS);
        (u, u)
    }
}

const PIT_EPS: f64 = 1e-12;

/// F(j | a, S) from the edge copula C(s, w), where `s` belongs to the partner
/// a and `w` to the column variable j.
pub fn edge_v(c: &PairCopula, s: PairObs, w: PairObs, s_discrete: bool) -> PairObs {
    if c.is_independence() {
        return w;
    }
    let ds = s.0 - s.1;
    if s_discrete && ds >= DIFF_FLOOR {
        let f = |wv: f64| ((c.cdf(s.0, wv) - c.cdf(s.1, wv)) / ds).clamp(0.0, 1.0);
        let plus = f(w.0);
        (plus, if w.1 == w.0 { plus } else { f(w.1) })
    } else {
        let sm = if s_discrete { 0.5 * (s.0 + s.1) } else { s.0 };
        let plus = c.h21(w.0, sm);
        (plus, if w.1 == w.0 { plus } else { c.h21(w.1, sm) })
    }
}

/// F(a | j, S), the complementary conditional of the same edge.
pub fn edge_vprime(c: &PairCopula, s: PairObs, w: PairObs, w_discrete: bool) -> PairObs {
    if c.is_independence() {
        return s;
    }
    let dw = w.0 - w.1;
    if w_discrete && dw >= DIFF_FLOOR {
        let f = |sv: f64| ((c.cdf(sv, w.0) - c.cdf(sv, w.1)) / dw).clamp(0.0, 1.0);
        let plus = f(s.0);
        (plus, if s.1 == s.0 { plus } else { f(s.1) })
    } else {
        let wm = if w_discrete { 0.5 * (w.0 + w.1) } else { w.0 };
        let plus = c.h12(s.0, wm);
        (plus, if s.1 == s.0 { plus } else { c.h12(s.1, wm) })
    }
}

/// Forward recursion over the first `levels` trees. `u[p]` holds the
/// pseudo-observations of diagonal position `p`; `discrete[p]` flags
/// discrete positions. For every edge, `edge` receives (level, column, s, w)
/// and returns the copula to propagate with.
pub(crate) fn recurse<F>(
    structure: &VineArray,
    ws: &Workspace,
    discrete: &[bool],
    u: &LevelPairs,
    levels: usize,
    mut edge: F,
) -> Result<()>
where
    F: FnMut(usize, usize, &[PairObs], &[PairObs]) -> Result<PairCopula>,
{
    let d = structure.dim();
    let levels = levels.min(d - 1);
    let mut s: LevelPairs = vec![Vec::new(); d];
    let mut w: LevelPairs = vec![Vec::new(); d];
    for j in 1..d {
        s[j] = u[structure.entry(0, j)].clone();
        w[j] = u[j].clone();
    }
    for l in 0..levels {
        let mut v: LevelPairs = vec![Vec::new(); d];
        let mut vp: LevelPairs = vec![Vec::new(); d];
        for j in (l + 1)..d {
            let c = edge(l, j, &s[j], &w[j])?;
            let sd = discrete[structure.entry(l, j)];
            let wd = discrete[j];
            v[j] = s[j].iter().zip(&w[j]).map(|(&a, &b)| edge_v(&c, a, b, sd)).collect();
            if ws.i[l][j] {
                vp[j] = s[j].iter().zip(&w[j]).map(|(&a, &b)| edge_vprime(&c, a, b, wd)).collect();
            }
        }
        if l + 1 < levels {
            for j in (l + 2)..d {
                let m = ws.m[l + 1][j];
                s[j] = if structure.entry(l + 1, j) == m { v[m].clone() } else { vp[m].clone() };
            }
            for j in (l + 2)..d {
                w[j] = std::mem::take(&mut v[j]);
            }
        }
    }
    Ok(())
}

/// Margins, structure and pair copulas of a fitted vine. Edges above the
/// truncation level are independence.
#[derive(Debug, Clone, PartialEq)]
pub struct VineModel {
    names: Vec<String>,
    margins: Vec<MarginModel>,
    structure: VineArray,
    /// edges[l][j] for level l < truncation and column j > l
    edges: Vec<Vec<PairCopula>>,
}

impl VineModel {
    /// `margins` and `names` are indexed by original variable. `edges[l]`
    /// must have `d` entries (entries with `j <= l` are ignored).
    pub fn new(
        names: Vec<String>,
        margins: Vec<MarginModel>,
        structure: VineArray,
        mut edges: Vec<Vec<PairCopula>>,
    ) -> Result<Self> {
        let d = structure.dim();
        if names.len() != d || margins.len() != d {
            return Err(Error::Input(format!(
                "vine of dimension {d} needs {d} names and margins, got {} and {}",
                names.len(),
                margins.len()
            )));
        }
        let t = structure.truncation();
        if edges.len() < t {
            return Err(Error::Input(format!("expected pair copulas for {t} trees, got {}", edges.len())));
        }
        edges.truncate(t);
        if edges.iter().any(|row| row.len() != d) {
            return Err(Error::Input("each tree needs one slot per column".into()));
        }
        for (l, row) in edges.iter_mut().enumerate() {
            for c in row.iter_mut().take(l + 1) {
                *c = PairCopula::independence();
            }
        }
        Ok(Self { names, margins, structure, edges })
    }

    /// All edges independence.
    pub fn independence(names: Vec<String>, margins: Vec<MarginModel>, structure: VineArray) -> Result<Self> {
        let d = structure.dim();
        let edges = vec![vec![PairCopula::independence(); d]; structure.truncation()];
        Self::new(names, margins, structure, edges)
    }

    pub fn dim(&self) -> usize {
        self.structure.dim()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn margins(&self) -> &[MarginModel] {
        &self.margins
    }

    pub fn structure(&self) -> &VineArray {
        &self.structure
    }

    pub fn truncation(&self) -> usize {
        self.structure.truncation()
    }

    /// Pair copula at level `l`, column `j` (relabeled positions).
    pub fn copula(&self, l: usize, j: usize) -> &PairCopula {
        static INDEP: std::sync::OnceLock<PairCopula> = std::sync::OnceLock::new();
        if l < self.edges.len() && j > l {
            &self.edges[l][j]
        } else {
            INDEP.get_or_init(PairCopula::independence)
        }
    }

    /// Number of free copula parameters.
    pub fn n_params(&self) -> usize {
        self.edges.iter().flatten().map(|c| c.n_params()).sum()
    }

    /// Discreteness flags by diagonal position.
    pub fn discrete_positions(&self) -> Vec<bool> {
        self.structure.order().iter().map(|&v| self.margins[v].is_discrete()).collect()
    }

    /// Pseudo-observations by diagonal position for a batch of rows given in
    /// original variable order.
    pub fn pit_rows(&self, rows: &[Vec<f64>]) -> LevelPairs {
        self.structure
            .order()
            .iter()
            .map(|&v| rows.iter().map(|r| pit_pair(&self.margins[v], r[v])).collect())
            .collect()
    }

    fn check_rows(&self, rows: &[Vec<f64>]) -> Result<()> {
        let d = self.dim();
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::Schema(format!("row has {} values, model has {d} variables", r.len())));
        }
        Ok(())
    }

    /// Sum of log tilde-c over all edges, per row.
    pub fn copula_log_densities(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_rows(rows)?;
        let u = self.pit_rows(rows);
        let disc = self.discrete_positions();
        let ws = self.structure.workspace();
        let mut out = vec![0.0; rows.len()];
        recurse(&self.structure, &ws, &disc, &u, self.truncation(), |l, j, s, w| {
            let c = self.copula(l, j);
            if !c.is_independence() {
                let sd = disc[self.structure.entry(l, j)];
                for (k, (a, b)) in s.iter().zip(w).enumerate() {
                    out[k] += ln_tilde_c(c, a.0, a.1, b.0, b.1, sd, disc[j]);
                }
            }
            Ok(c.clone())
        })?;
        Ok(out)
    }

    /// Joint log density (mass for discrete coordinates) per row. Rows
    /// outside a margin's support give negative infinity.
    pub fn log_densities(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut out = self.copula_log_densities(rows)?;
        for (k, r) in rows.iter().enumerate() {
            let lm: f64 = self.margins.iter().zip(r).map(|(m, &y)| m.ln_pdf(y)).sum();
            out[k] = if lm == f64::NEG_INFINITY { f64::NEG_INFINITY } else { out[k] + lm };
        }
        Ok(out)
    }

    pub fn log_density(&self, row: &[f64]) -> Result<f64> {
        Ok(self.log_densities(&[row.to_vec()])?[0])
    }

    /// Copula log-likelihood of a data set.
    pub fn copula_loglik(&self, rows: &[Vec<f64>]) -> Result<f64> {
        Ok(self.copula_log_densities(rows)?.iter().sum())
    }

    /// The same model at another truncation level; missing trees are independence.
    pub fn truncated(&self, trunc: usize) -> Result<Self> {
        let structure = self.structure.with_truncation(trunc)?;
        let mut edges = self.edges.clone();
        edges.resize(trunc, vec![PairCopula::independence(); self.dim()]);
        Self::new(self.names.clone(), self.margins.clone(), structure, edges)
    }

    /// Normal-scores correlation matrix (original variable order) when every
    /// edge is Gaussian or independence; None otherwise.
    pub fn gaussian_correlation(&self) -> Option<Vec<Vec<f64>>> {
        use crate::bicop::{Family, Reflection};
        use nalgebra::{DMatrix, DVector};
        let d = self.dim();
        let v = &self.structure;
        let mut r = DMatrix::<f64>::identity(d, d);
        for l in 0..d - 1 {
            for j in (l + 1)..d {
                let c = self.copula(l, j);
                let mut rho = match c.family() {
                    Family::Independence => 0.0,
                    Family::Gaussian => c.params()[0],
                    _ => return None,
                };
                if c.reflection().is_flip() {
                    rho = -rho;
                } else if c.reflection() != Reflection::None && c.reflection() != Reflection::Survival {
                    return None;
                }
                let a = v.partner(l, j);
                let b = v.order()[j];
                let s: Vec<usize> = (0..l).map(|k| v.partner(k, j)).collect();
                let val = if s.is_empty() {
                    rho
                } else {
                    let k = s.len();
                    let inv = DMatrix::from_fn(k, k, |x, y| r[(s[x], s[y])]).try_inverse()?;
                    let ra = DVector::from_fn(k, |x, _| r[(a, s[x])]);
                    let rb = DVector::from_fn(k, |x, _| r[(b, s[x])]);
                    let qa = (ra.transpose() * &inv * &ra)[(0, 0)];
                    let qb = (rb.transpose() * &inv * &rb)[(0, 0)];
                    let qab = (ra.transpose() * &inv * &rb)[(0, 0)];
                    rho * ((1.0 - qa) * (1.0 - qb)).max(0.0).sqrt() + qab
                };
                r[(a, b)] = val;
                r[(b, a)] = val;
            }
        }
        Some((0..d).map(|i| (0..d).map(|j| r[(i, j)]).collect()).collect())
    }
}

#[cfg(test)]
mod tests;
