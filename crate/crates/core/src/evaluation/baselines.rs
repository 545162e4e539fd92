use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Predictive;
use crate::error::{Error, Result};
use crate::numeric::special::{norm_quantile, t_cdf, t_ln_pdf, t_quantile};

/// Relative singular-value cutoff for rank deficiency.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMap {
    Linear,
    /// linear terms plus all squares and pairwise products
    Quadratic,
}

impl FeatureMap {
    /// Design row with a leading intercept.
    pub fn expand(self, x: &[f64]) -> Vec<f64> {
        let mut r = Vec::with_capacity(1 + x.len() * (x.len() + 3) / 2);
        r.push(1.0);
        r.extend_from_slice(x);
        if self == FeatureMap::Quadratic {
            for i in 0..x.len() {
                for j in i..x.len() {
                    r.push(x[i] * x[j]);
                }
            }
        }
        r
    }
}

fn design(rows: &[Vec<f64>], features: FeatureMap) -> Result<DMatrix<f64>> {
    let p = rows.first().map(|r| r.len()).ok_or_else(|| Error::Input("empty design".into()))?;
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::Input("design rows have different lengths".into()));
    }
    let expanded: Vec<Vec<f64>> = rows.iter().map(|r| features.expand(r)).collect();
    let k = expanded[0].len();
    Ok(DMatrix::from_fn(rows.len(), k, |i, j| expanded[i][j]))
}

fn check_rank(x: &DMatrix<f64>) -> Result<()> {
    let sv = x.singular_values();
    let max = sv.max();
    if !(max > 0.0) || sv.min() <= RANK_TOL * max {
        return Err(Error::Rank(format!("design with {} columns is rank deficient", x.ncols())));
    }
    Ok(())
}

/// Least squares with the exact Student-t predictive distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Ols {
    pub features: FeatureMap,
    /// intercept first
    pub beta: Vec<f64>,
    /// unbiased residual variance
    pub sigma2: f64,
    pub df: f64,
    xtx_inv: DMatrix<f64>,
}

impl Ols {
    pub fn fit(rows: &[Vec<f64>], y: &[f64], features: FeatureMap) -> Result<Self> {
        if rows.len() != y.len() {
            return Err(Error::Input(format!("{} rows for {} responses", rows.len(), y.len())));
        }
        let x = design(rows, features)?;
        let (n, k) = x.shape();
        if n <= k {
            return Err(Error::Rank(format!("{n} rows for {k} coefficients")));
        }
        check_rank(&x)?;
        let yv = DVector::from_column_slice(y);
        let xtx = x.transpose() * &x;
        let xtx_inv = xtx.try_inverse().ok_or_else(|| Error::Rank("singular normal equations".into()))?;
        let beta = &xtx_inv * (x.transpose() * &yv);
        let resid = &yv - &x * &beta;
        let df = (n - k) as f64;
        Ok(Ols { features, beta: beta.iter().copied().collect(), sigma2: resid.norm_squared() / df, df, xtx_inv })
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        self.features.expand(x).iter().zip(&self.beta).map(|(a, b)| a * b).sum()
    }

    /// Location, scale and degrees of freedom of the predictive t distribution.
    pub fn predictive(&self, x: &[f64]) -> StudentTPredictive {
        let z = DVector::from_vec(self.features.expand(x));
        let lev = (z.transpose() * &self.xtx_inv * &z)[(0, 0)];
        StudentTPredictive { loc: self.mean(x), scale: (self.sigma2 * (1.0 + lev)).sqrt(), df: self.df }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentTPredictive {
    pub loc: f64,
    pub scale: f64,
    pub df: f64,
}

impl Predictive for StudentTPredictive {
    fn mean(&self) -> Result<f64> {
        Ok(self.loc)
    }
    fn ln_pdf(&self, y: f64) -> f64 {
        t_ln_pdf((y - self.loc) / self.scale, self.df) - self.scale.ln()
    }
    fn cdf(&self, y: f64) -> f64 {
        t_cdf((y - self.loc) / self.scale, self.df)
    }
    fn quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("quantile level {alpha} outside (0, 1)")));
        }
        Ok(self.loc + self.scale * t_quantile(alpha, self.df))
    }
}

/// Conditional normal regression: y | x ~ N(intercept + beta'x, residual_scale^2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBaseline {
    pub intercept: f64,
    pub beta: Vec<f64>,
    pub r2: f64,
    pub residual_scale: f64,
}

impl GaussianBaseline {
    /// Least squares with the maximum-likelihood residual scale.
    pub fn fit(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let p = rows.first().map_or(0, |r| r.len());
        if rows.len() <= p + 1 {
            return Err(Error::Rank(format!("{} rows for {p} predictors", rows.len())));
        }
        let ols = Ols::fit(rows, y, FeatureMap::Linear)?;
        let n = y.len() as f64;
        let my = y.iter().sum::<f64>() / n;
        let sst: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
        let sse = ols.sigma2 * ols.df;
        let r2 = if sst > 0.0 { (1.0 - sse / sst).clamp(0.0, 1.0) } else { 1.0 };
        Ok(GaussianBaseline { intercept: ols.beta[0], beta: ols.beta[1..].to_vec(), r2, residual_scale: (sse / n).sqrt() })
    }

    /// Conditional distribution of variable `response` given the others
    /// under N(mean, cov). Predictors keep their original order.
    pub fn from_moments(mean: &[f64], cov: &[Vec<f64>], response: usize) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d || cov.iter().any(|r| r.len() != d) || response >= d {
            return Err(Error::Input("moment dimensions do not match".into()));
        }
        let preds: Vec<usize> = (0..d).filter(|&i| i != response).collect();
        let sxx = DMatrix::from_fn(preds.len(), preds.len(), |i, j| cov[preds[i]][preds[j]]);
        let sxy = DVector::from_fn(preds.len(), |i, _| cov[preds[i]][response]);
        let inv = sxx.try_inverse().ok_or_else(|| Error::Rank("singular predictor covariance".into()))?;
        let beta = &inv * &sxy;
        let explained = sxy.dot(&beta);
        let syy = cov[response][response];
        let intercept = mean[response] - preds.iter().zip(beta.iter()).map(|(&i, b)| b * mean[i]).sum::<f64>();
        Ok(GaussianBaseline {
            intercept,
            beta: beta.iter().copied().collect(),
            r2: explained / syy,
            residual_scale: (syy - explained).max(0.0).sqrt(),
        })
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        self.intercept + self.beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn quantile(&self, x: &[f64], alpha: f64) -> f64 {
        self.mean(x) + norm_quantile(alpha) * self.residual_scale
    }
}

/// Logistic regression fitted by iteratively reweighted least squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub features: FeatureMap,
    /// intercept first
    pub beta: Vec<f64>,
    pub iterations: usize,
}

impl Logistic {
    pub fn fit(rows: &[Vec<f64>], labels: &[bool], features: FeatureMap) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Input(format!("{} rows for {} labels", rows.len(), labels.len())));
        }
        let x = design(rows, features)?;
        let (n, k) = x.shape();
        if n <= k {
            return Err(Error::Rank(format!("{n} rows for {k} coefficients")));
        }
        check_rank(&x)?;
        let y = DVector::from_fn(n, |i, _| if labels[i] { 1.0 } else { 0.0 });
        let mut beta = DVector::zeros(k);
        let mut iterations = 0;
        for it in 0..100 {
            iterations = it + 1;
            let eta = &x * &beta;
            let p = eta.map(|e| 1.0 / (1.0 + (-e).exp()));
            let w = p.map(|q| (q * (1.0 - q)).max(1e-12));
            let mut xtwx = DMatrix::zeros(k, k);
            for i in 0..n {
                let row = x.row(i);
                xtwx += w[i] * row.transpose() * row;
            }
            // small ridge keeps separated data finite
            for j in 0..k {
                xtwx[(j, j)] += 1e-8;
            }
            let grad = x.transpose() * (&y - &p);
            let step = xtwx.cholesky().ok_or_else(|| Error::Rank("singular weighted normal equations".into()))?.solve(&grad);
            beta += &step;
            if step.amax() < 1e-10 {
                break;
            }
        }
        Ok(Logistic { features, beta: beta.iter().copied().collect(), iterations })
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        let e: f64 = self.features.expand(x).iter().zip(&self.beta).map(|(a, b)| a * b).sum();
        1.0 / (1.0 + (-e).exp())
    }
}
