//! Conditional distribution of the response (the last diagonal variable)
//! given the predictors, and the Bayes-rule classifier.

use serde::{Deserialize, Serialize};

use crate::bicop::fit::ln_tilde_c;
use crate::error::{Error, Result};
use crate::margins::MarginModel;
use crate::numeric::quad::GaussLegendre;
use crate::numeric::special::log_add_exp;
use crate::vine::{edge_v, pit_pair, recurse, LevelPairs, PairObs, VineModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictOptions {
    /// Gauss-Legendre nodes for the conditional mean
    pub quad_nodes: usize,
    /// root-finding tolerance on the probability scale of the response
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self { quad_nodes: 25, tol: 1e-8, max_iter: 200 }
    }
}

/// The response's conditioning values along its column, one per tree.
#[derive(Debug, Clone)]
pub struct ConditionalDistribution<'a> {
    model: &'a VineModel,
    /// (s, s discrete) per tree level
    chain: Vec<(PairObs, bool)>,
}

/// Check that the response can be handled by the recursion: it must be the
/// last diagonal variable.
pub fn check_response(model: &VineModel, response: usize) -> Result<()> {
    let d = model.dim();
    if response >= d {
        return Err(Error::Schema(format!("response index {response} out of range")));
    }
    if model.structure().order()[d - 1] != response {
        return Err(Error::UnsupportedStructure(format!(
            "response {} is not the last diagonal variable; the conditional distribution would need numerical integration",
            model.names()[response]
        )));
    }
    Ok(())
}

/// Conditional distributions of the response for a batch of rows (original
/// variable order; the response entry is ignored).
pub fn conditionals<'a>(model: &'a VineModel, rows: &[Vec<f64>]) -> Result<Vec<ConditionalDistribution<'a>>> {
    let d = model.dim();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::Schema(format!("row has {} values, model has {d} variables", r.len())));
    }
    let structure = model.structure();
    let y = structure.order()[d - 1];
    let disc = model.discrete_positions();
    let u: LevelPairs = structure
        .order()
        .iter()
        .map(|&v| {
            rows.iter()
                .map(|r| if v == y { (0.5, 0.5) } else { pit_pair(&model.margins()[v], r[v]) })
                .collect()
        })
        .collect();
    let trunc = model.truncation();
    let mut chains: Vec<Vec<(PairObs, bool)>> = vec![Vec::with_capacity(trunc); rows.len()];
    let ws = structure.workspace();
    recurse(structure, &ws, &disc, &u, trunc, |l, j, s, _w| {
        if j == d - 1 {
            let sd = disc[structure.entry(l, j)];
            for (chain, &sv) in chains.iter_mut().zip(s) {
                chain.push((sv, sd));
            }
        }
        Ok(model.copula(l, j).clone())
    })?;
    Ok(chains.into_iter().map(|chain| ConditionalDistribution { model, chain }).collect())
}

impl<'a> ConditionalDistribution<'a> {
    pub fn new(model: &'a VineModel, row: &[f64]) -> Result<Self> {
        Ok(conditionals(model, &[row.to_vec()])?.pop().expect("one row"))
    }

    pub fn response_margin(&self) -> &MarginModel {
        let d = self.model.dim();
        &self.model.margins()[self.model.structure().order()[d - 1]]
    }

    /// p(u | x) = P(F_Y(Y) <= u | X = x).
    pub fn cdf_u(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let d = self.model.dim();
        let mut w = (u, u);
        for (l, &(s, sd)) in self.chain.iter().enumerate() {
            w = edge_v(self.model.copula(l, d - 1), s, w, sd);
        }
        w.0.clamp(0.0, 1.0)
    }

    /// P(Y <= y | X = x).
    pub fn cdf(&self, y: f64) -> f64 {
        self.cdf_u(self.response_margin().cdf(y))
    }

    /// Log conditional density of a continuous response; for a discrete
    /// response the log conditional probability of the atom.
    pub fn ln_pdf(&self, y: f64) -> f64 {
        let m = self.response_margin();
        if m.is_discrete() {
            let (up, um) = m.pit(y);
            let p = self.cdf_u(up) - self.cdf_u(um);
            return if p > 0.0 && m.pdf(y) > 0.0 { p.ln() } else { f64::NEG_INFINITY };
        }
        let lf = m.ln_pdf(y);
        if lf == f64::NEG_INFINITY {
            return lf;
        }
        let d = self.model.dim();
        let mut w = pit_pair(m, y);
        let mut lc = 0.0;
        for (l, &(s, sd)) in self.chain.iter().enumerate() {
            let c = self.model.copula(l, d - 1);
            if !c.is_independence() {
                lc += ln_tilde_c(c, s.0, s.1, w.0, w.1, sd, false);
            }
            w = edge_v(c, s, w, sd);
        }
        lf + lc
    }

    /// Solve p(u | x) = alpha on [0, 1] by secant steps safeguarded by
    /// bisection.
    pub fn quantile_u(&self, alpha: f64, opts: &PredictOptions) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("quantile level {alpha} outside (0, 1)")));
        }
        let f = |u: f64| self.cdf_u(u) - alpha;
        let (mut a, mut b) = (0.0, 1.0);
        let (mut xp, mut fp) = (a, -alpha);
        let mut x = alpha;
        let mut fx = f(x);
        for _ in 0..opts.max_iter {
            if fx == 0.0 {
                return Ok(x);
            }
            if fx < 0.0 {
                a = x;
            } else {
                b = x;
            }
            if b - a < opts.tol * 1e-3 {
                return Ok(0.5 * (a + b));
            }
            let mut next = if fx != fp { x - fx * (x - xp) / (fx - fp) } else { f64::NAN };
            // bisect when the secant step leaves the bracket or stalls at its edge
            let margin = 1e-3 * (b - a);
            if !(next > a + margin && next < b - margin) {
                next = 0.5 * (a + b);
            }
            xp = x;
            fp = fx;
            x = next;
            fx = f(x);
            if (x - xp).abs() < opts.tol * 1e-3 && fx.abs() < 1e-12 {
                return Ok(x);
            }
        }
        if b - a < opts.tol {
            return Ok(0.5 * (a + b));
        }
        Err(Error::Numeric(format!(
            "conditional quantile at level {alpha} did not converge after {} iterations (bracket [{a}, {b}], residual {fx:e})",
            opts.max_iter
        )))
    }

    /// Conditional quantile on the response scale.
    pub fn quantile(&self, alpha: f64, opts: &PredictOptions) -> Result<f64> {
        let m = self.response_margin();
        if m.is_discrete() {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Domain(format!("quantile level {alpha} outside (0, 1)")));
            }
            let sup = m.support().expect("discrete margin has a support");
            let mut acc = 0.0;
            for (y, p) in sup.values.iter().zip(self.pmf()?) {
                acc += p;
                if acc >= alpha - 1e-12 {
                    return Ok(*y);
                }
            }
            return Ok(*sup.values.last().unwrap());
        }
        Ok(m.quantile(self.quantile_u(alpha, opts)?))
    }

    /// Conditional mean: Gauss-Legendre quadrature of the conditional
    /// quantile over (0, 1); exact sum for a discrete response.
    pub fn mean(&self, opts: &PredictOptions) -> Result<f64> {
        let m = self.response_margin();
        if m.is_discrete() {
            let sup = m.support().expect("discrete margin has a support");
            return Ok(sup.values.iter().zip(self.pmf()?).map(|(y, p)| y * p).sum());
        }
        let gl = GaussLegendre::new(opts.quad_nodes);
        let mut s = 0.0;
        for (a, w) in gl.mapped(0.0, 1.0) {
            s += w * m.quantile(self.quantile_u(a, opts)?);
        }
        Ok(s)
    }

    /// Conditional probabilities over the support of a discrete response.
    pub fn pmf(&self) -> Result<Vec<f64>> {
        let m = self.response_margin();
        let sup = m
            .support()
            .ok_or_else(|| Error::Unsupported("probability mass needs a discrete response".into()))?;
        let mut prev = 0.0;
        let mut out: Vec<f64> = sup
            .values
            .iter()
            .map(|&y| {
                let c = self.cdf_u(m.cdf(y));
                let p = (c - prev).max(0.0);
                prev = c;
                p
            })
            .collect();
        let s: f64 = out.iter().sum();
        if s > 0.0 {
            out.iter_mut().for_each(|p| *p /= s);
        }
        Ok(out)
    }
}

/// Posterior class probabilities from per-class log densities and priors.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub probs: Vec<f64>,
    /// every class density underflowed; the posterior is uniform
    pub underflow: bool,
}

/// Bayes' rule in log space: posterior_k proportional to prior_k f(x | k).
pub fn posterior_from_log_densities(ln_dens: &[f64], priors: &[f64]) -> Result<Posterior> {
    if ln_dens.len() != priors.len() || priors.is_empty() {
        return Err(Error::Input("one prior per class is needed".into()));
    }
    if priors.iter().any(|p| !(*p >= 0.0)) || (priors.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Input("priors must be nonnegative and sum to 1".into()));
    }
    let terms: Vec<f64> = ln_dens
        .iter()
        .zip(priors)
        .map(|(l, p)| if *p > 0.0 { l + p.ln() } else { f64::NEG_INFINITY })
        .collect();
    let total = terms.iter().fold(f64::NEG_INFINITY, |a, &b| log_add_exp(a, b));
    if !total.is_finite() {
        let k = priors.len() as f64;
        return Ok(Posterior { probs: vec![1.0 / k; priors.len()], underflow: true });
    }
    Ok(Posterior { probs: terms.iter().map(|t| (t - total).exp()).collect(), underflow: false })
}

/// Posterior class probabilities from one predictor-only vine per class.
pub fn bayes_classify(class_models: &[VineModel], priors: &[f64], x: &[f64]) -> Result<Posterior> {
    let ln: Vec<f64> = class_models.iter().map(|m| m.log_density(x)).collect::<Result<_>>()?;
    posterior_from_log_densities(&ln, priors)
}

#[cfg(test)]
mod tests;
