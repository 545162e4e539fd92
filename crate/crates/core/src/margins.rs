//! Univariate margins: fitting, CDF with left limits, quantiles and densities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::optim::{nelder_mead, NelderMeadOptions};
use crate::numeric::special::{ln_norm_cdf, norm_cdf, norm_ln_pdf, norm_quantile, owen_t, SQRT_2_OVER_PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginKind {
    Normal,
    SkewNormal,
    EmpiricalContinuous,
    EmpiricalDiscrete,
}

impl MarginKind {
    pub fn is_discrete(self) -> bool {
        self == MarginKind::EmpiricalDiscrete
    }
}

impl std::str::FromStr for MarginKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "normal" | "gaussian" => MarginKind::Normal,
            "skew-normal" | "skewnormal" | "sn" => MarginKind::SkewNormal,
            "empirical-continuous" | "empirical" => MarginKind::EmpiricalContinuous,
            "empirical-discrete" | "discrete" | "ordinal" => MarginKind::EmpiricalDiscrete,
            _ => return Err(Error::Input(format!("unknown margin kind '{s}'"))),
        })
    }
}

/// Support points with their CDF values (empirical-continuous knots) or
/// probabilities (empirical-discrete atoms).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarginRepr", into = "MarginRepr")]
pub struct MarginModel {
    kind: MarginKind,
    params: Vec<f64>,
    support: Option<Support>,
    // cumulative probabilities of the discrete atoms
    cum: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MarginRepr {
    kind: MarginKind,
    params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    support: Option<Support>,
}

impl From<MarginModel> for MarginRepr {
    fn from(m: MarginModel) -> Self {
        MarginRepr { kind: m.kind, params: m.params, support: m.support }
    }
}

impl TryFrom<MarginRepr> for MarginModel {
    type Error = Error;
    fn try_from(r: MarginRepr) -> Result<Self> {
        match r.kind {
            MarginKind::Normal => MarginModel::normal(param(&r.params, 0)?, param(&r.params, 1)?),
            MarginKind::SkewNormal => {
                MarginModel::skew_normal(param(&r.params, 0)?, param(&r.params, 1)?, param(&r.params, 2)?)
            }
            MarginKind::EmpiricalContinuous => {
                let s = r.support.ok_or_else(|| Error::Schema("empirical margin without support".into()))?;
                MarginModel::from_knots(s.values, s.probs)
            }
            MarginKind::EmpiricalDiscrete => {
                let s = r.support.ok_or_else(|| Error::Schema("discrete margin without support".into()))?;
                MarginModel::discrete(s.values, s.probs)
            }
        }
    }
}

fn param(p: &[f64], i: usize) -> Result<f64> {
    p.get(i).copied().ok_or_else(|| Error::Schema(format!("margin parameter {i} missing")))
}

impl MarginModel {
    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && mu.is_finite() && sigma.is_finite()) {
            return Err(Error::Domain(format!("normal margin with mu={mu}, sigma={sigma}")));
        }
        Ok(Self { kind: MarginKind::Normal, params: vec![mu, sigma], support: None, cum: vec![] })
    }

    /// Skew-normal with location `xi`, scale `omega` and shape `alpha`.
    pub fn skew_normal(xi: f64, omega: f64, alpha: f64) -> Result<Self> {
        if !(omega > 0.0 && xi.is_finite() && omega.is_finite() && alpha.is_finite()) {
            return Err(Error::Domain(format!("skew-normal margin with xi={xi}, omega={omega}, alpha={alpha}")));
        }
        Ok(Self { kind: MarginKind::SkewNormal, params: vec![xi, omega, alpha], support: None, cum: vec![] })
    }

    /// Discrete margin from atoms and their probabilities.
    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::Input("discrete margin needs matching, nonempty atoms and probabilities".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) || probs.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Input("discrete atoms must increase and carry positive mass".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!("discrete probabilities sum to {total}")));
        }
        let mut cum = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cum.push(acc);
        }
        *cum.last_mut().unwrap() = 1.0;
        Ok(Self {
            kind: MarginKind::EmpiricalDiscrete,
            params: vec![],
            support: Some(Support { values, probs }),
            cum,
        })
    }

    /// Piecewise-linear continuous CDF through `(values[k], probs[k])`.
    pub fn from_knots(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || values.len() != probs.len() {
            return Err(Error::Input("empirical margin needs at least two knots".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) || probs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("empirical knots must be strictly increasing".into()));
        }
        if probs[0] <= 0.0 || *probs.last().unwrap() >= 1.0 {
            return Err(Error::Input("empirical knot probabilities must lie in (0, 1)".into()));
        }
        Ok(Self {
            kind: MarginKind::EmpiricalContinuous,
            params: vec![],
            support: Some(Support { values, probs }),
            cum: vec![],
        })
    }

    pub fn kind(&self) -> MarginKind {
        self.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn support(&self) -> Option<&Support> {
        self.support.as_ref()
    }

    pub fn is_discrete(&self) -> bool {
        self.kind.is_discrete()
    }

    fn knots(&self) -> (&[f64], &[f64]) {
        let s = self.support.as_ref().expect("empirical margin carries knots");
        (&s.values, &s.probs)
    }

    /// Lower and upper end of the linear extrapolation of an empirical CDF.
    fn empirical_ends(&self) -> (f64, f64) {
        let (x, p) = self.knots();
        let n = x.len();
        let lo = x[0] - p[0] * (x[1] - x[0]) / (p[1] - p[0]);
        let hi = x[n - 1] + (1.0 - p[n - 1]) * (x[n - 1] - x[n - 2]) / (p[n - 1] - p[n - 2]);
        (lo, hi)
    }

    /// P(Y <= y).
    pub fn cdf(&self, y: f64) -> f64 {
        match self.kind {
            MarginKind::Normal => norm_cdf((y - self.params[0]) / self.params[1]),
            MarginKind::SkewNormal => sn_cdf((y - self.params[0]) / self.params[1], self.params[2]),
            MarginKind::EmpiricalContinuous => {
                let (x, p) = self.knots();
                let (lo, hi) = self.empirical_ends();
                let n = x.len();
                if y <= lo {
                    0.0
                } else if y < x[0] {
                    p[0] * (y - lo) / (x[0] - lo)
                } else if y >= hi {
                    1.0
                } else if y >= x[n - 1] {
                    p[n - 1] + (1.0 - p[n - 1]) * (y - x[n - 1]) / (hi - x[n - 1])
                } else {
                    let k = x.partition_point(|&v| v <= y) - 1;
                    p[k] + (p[k + 1] - p[k]) * (y - x[k]) / (x[k + 1] - x[k])
                }
            }
            MarginKind::EmpiricalDiscrete => {
                let (x, _) = self.knots();
                let k = x.partition_point(|&v| v <= y);
                if k == 0 {
                    0.0
                } else {
                    self.cum[k - 1]
                }
            }
        }
    }

    /// P(Y < y).
    pub fn cdf_left(&self, y: f64) -> f64 {
        if !self.is_discrete() {
            return self.cdf(y);
        }
        let (x, _) = self.knots();
        let k = x.partition_point(|&v| v < y);
        if k == 0 {
            0.0
        } else {
            self.cum[k - 1]
        }
    }

    /// Probability integral transform (F(y), F(y-)).
    pub fn pit(&self, y: f64) -> (f64, f64) {
        (self.cdf(y), self.cdf_left(y))
    }

    /// Generalized inverse min{y : F(y) >= p}.
    pub fn quantile(&self, p: f64) -> f64 {
        match self.kind {
            MarginKind::Normal => self.params[0] + self.params[1] * norm_quantile(p),
            MarginKind::SkewNormal => self.params[0] + self.params[1] * sn_quantile(p, self.params[2]),
            MarginKind::EmpiricalContinuous => {
                let (x, q) = self.knots();
                let (lo, hi) = self.empirical_ends();
                let n = x.len();
                if p <= 0.0 {
                    lo
                } else if p >= 1.0 {
                    hi
                } else if p < q[0] {
                    lo + (x[0] - lo) * p / q[0]
                } else if p >= q[n - 1] {
                    x[n - 1] + (hi - x[n - 1]) * (p - q[n - 1]) / (1.0 - q[n - 1])
                } else {
                    let k = q.partition_point(|&v| v <= p) - 1;
                    x[k] + (x[k + 1] - x[k]) * (p - q[k]) / (q[k + 1] - q[k])
                }
            }
            MarginKind::EmpiricalDiscrete => {
                let (x, _) = self.knots();
                let k = self.cum.partition_point(|&c| c < p - 1e-15);
                x[k.min(x.len() - 1)]
            }
        }
    }

    /// Density for continuous kinds, probability mass for discrete ones.
    pub fn pdf(&self, y: f64) -> f64 {
        match self.kind {
            MarginKind::EmpiricalContinuous => {
                let (x, p) = self.knots();
                let (lo, hi) = self.empirical_ends();
                let n = x.len();
                if y <= lo || y >= hi {
                    0.0
                } else if y < x[0] {
                    p[0] / (x[0] - lo)
                } else if y >= x[n - 1] {
                    (1.0 - p[n - 1]) / (hi - x[n - 1])
                } else {
                    let k = x.partition_point(|&v| v <= y) - 1;
                    (p[k + 1] - p[k]) / (x[k + 1] - x[k])
                }
            }
            MarginKind::EmpiricalDiscrete => self.cdf(y) - self.cdf_left(y),
            _ => self.ln_pdf(y).exp(),
        }
    }

    pub fn ln_pdf(&self, y: f64) -> f64 {
        match self.kind {
            MarginKind::Normal => norm_ln_pdf((y - self.params[0]) / self.params[1]) - self.params[1].ln(),
            MarginKind::SkewNormal => {
                let (xi, om, al) = (self.params[0], self.params[1], self.params[2]);
                sn_ln_pdf((y - xi) / om, al) - om.ln()
            }
            _ => self.pdf(y).ln(),
        }
    }

    /// Mean of the distribution.
    pub fn mean(&self) -> f64 {
        match self.kind {
            MarginKind::Normal => self.params[0],
            MarginKind::SkewNormal => {
                let (xi, om, al) = (self.params[0], self.params[1], self.params[2]);
                xi + om * SQRT_2_OVER_PI * al / (1.0 + al * al).sqrt()
            }
            MarginKind::EmpiricalContinuous => {
                let (x, p) = self.knots();
                let (lo, hi) = self.empirical_ends();
                let mut pts = vec![(lo, 0.0)];
                pts.extend(x.iter().copied().zip(p.iter().copied()));
                pts.push((hi, 1.0));
                pts.windows(2).map(|w| 0.5 * (w[0].0 + w[1].0) * (w[1].1 - w[0].1)).sum()
            }
            MarginKind::EmpiricalDiscrete => {
                let s = self.support.as_ref().unwrap();
                s.values.iter().zip(&s.probs).map(|(v, p)| v * p).sum()
            }
        }
    }
}

fn sn_ln_pdf(z: f64, alpha: f64) -> f64 {
    std::f64::consts::LN_2 + norm_ln_pdf(z) + ln_norm_cdf(alpha * z)
}

/// Standard skew-normal CDF, Phi(z) - 2 T(z, alpha).
pub fn sn_cdf(z: f64, alpha: f64) -> f64 {
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    if z == f64::INFINITY {
        return 1.0;
    }
    (norm_cdf(z) - 2.0 * owen_t(z, alpha)).clamp(0.0, 1.0)
}

/// Standard skew-normal quantile by safeguarded Newton iteration.
pub fn sn_quantile(p: f64, alpha: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if alpha == 0.0 {
        return norm_quantile(p);
    }
    // the skew-normal lies between N(0,1) and the half-normal, which gives a bracket
    let z0 = norm_quantile(p);
    let zh = if alpha > 0.0 { norm_quantile(0.5 + 0.5 * p) } else { -norm_quantile(1.0 - 0.5 * p) };
    let (mut lo, mut hi) = if z0 < zh { (z0, zh) } else { (zh, z0) };
    lo -= 1e-9 * (1.0 + lo.abs());
    hi += 1e-9 * (1.0 + hi.abs());
    while sn_cdf(lo, alpha) > p {
        lo -= 1.0 + lo.abs();
    }
    while sn_cdf(hi, alpha) < p {
        hi += 1.0 + hi.abs();
    }
    let mut z = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = sn_cdf(z, alpha) - p;
        if f > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        let d = sn_ln_pdf(z, alpha).exp();
        let mut next = z - f / d;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - z).abs() <= 1e-14 * (1.0 + z.abs()) {
            return next;
        }
        z = next;
    }
    z
}

fn check_sample(sample: &[f64], min_n: usize) -> Result<()> {
    if sample.len() < min_n {
        return Err(Error::Input(format!("margin fit needs at least {min_n} observations, got {}", sample.len())));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("margin sample contains non-finite values".into()));
    }
    Ok(())
}

fn mean_sd(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let m = sample.iter().sum::<f64>() / n;
    let v = sample.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Fit a margin of the given kind to a sample.
pub fn fit_margin(kind: MarginKind, sample: &[f64]) -> Result<MarginModel> {
    match kind {
        MarginKind::Normal => {
            check_sample(sample, 2)?;
            let (m, s) = mean_sd(sample);
            if s <= 0.0 {
                return Err(Error::DegenerateData("zero-variance sample".into()));
            }
            MarginModel::normal(m, s)
        }
        MarginKind::SkewNormal => fit_skew_normal(sample),
        MarginKind::EmpiricalContinuous => {
            check_sample(sample, 10)?;
            let n = sample.len() as f64;
            let mut xs = sample.to_vec();
            xs.sort_by(f64::total_cmp);
            let mut values = Vec::new();
            let mut probs = Vec::new();
            let mut i = 0;
            while i < xs.len() {
                let mut j = i;
                while j + 1 < xs.len() && xs[j + 1] == xs[i] {
                    j += 1;
                }
                // average rank of the tied block, 1-based
                let rank = 0.5 * ((i + 1) + (j + 1)) as f64;
                values.push(xs[i]);
                probs.push(rank / (n + 1.0));
                i = j + 1;
            }
            if values.len() < 2 {
                return Err(Error::DegenerateData("constant sample".into()));
            }
            MarginModel::from_knots(values, probs)
        }
        MarginKind::EmpiricalDiscrete => {
            check_sample(sample, 10)?;
            let mut xs = sample.to_vec();
            xs.sort_by(f64::total_cmp);
            let n = xs.len() as f64;
            let mut values = Vec::new();
            let mut probs = Vec::new();
            for &x in &xs {
                if values.last() == Some(&x) {
                    *probs.last_mut().unwrap() += 1.0;
                } else {
                    values.push(x);
                    probs.push(1.0);
                }
            }
            if values.len() < 2 {
                return Err(Error::DegenerateData("constant sample".into()));
            }
            probs.iter_mut().for_each(|p| *p /= n);
            MarginModel::discrete(values, probs)
        }
    }
}

const SN_MAX_SKEW: f64 = 0.9952;

fn fit_skew_normal(sample: &[f64]) -> Result<MarginModel> {
    check_sample(sample, 10)?;
    let n = sample.len() as f64;
    let (m, s) = mean_sd(sample);
    if s <= 0.0 {
        return Err(Error::DegenerateData("zero-variance sample".into()));
    }
    let g1 = sample.iter().map(|x| ((x - m) / s).powi(3)).sum::<f64>() / n;
    let g = g1.clamp(-SN_MAX_SKEW, SN_MAX_SKEW);
    // method of moments
    let c = ((4.0 - std::f64::consts::PI) / 2.0).powf(2.0 / 3.0);
    let a = g.abs().powf(2.0 / 3.0);
    let delta = (std::f64::consts::FRAC_PI_2 * a / (a + c)).sqrt().copysign(g).clamp(-0.995, 0.995);
    let alpha0 = delta / (1.0 - delta * delta).sqrt();
    let omega0 = s / (1.0 - 2.0 * delta * delta / std::f64::consts::PI).sqrt();
    let xi0 = m - omega0 * delta * SQRT_2_OVER_PI;

    // standardized data keeps the simplex well scaled
    let z: Vec<f64> = sample.iter().map(|x| (x - m) / s).collect();
    let nll = |p: &[f64]| {
        let (xi, lom, al) = (p[0], p[1], p[2]);
        if al.abs() > 200.0 || lom.abs() > 20.0 {
            return f64::INFINITY;
        }
        let om = lom.exp();
        let mut acc = 0.0;
        for &zi in &z {
            acc += sn_ln_pdf((zi - xi) / om, al);
        }
        let v = -(acc - n * lom);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let opts = NelderMeadOptions { initial_step: 0.3, ..Default::default() };
    let starts = [[(xi0 - m) / s, (omega0 / s).ln(), alpha0], [0.0, 0.0, 0.0]];
    let mut best: Option<crate::numeric::optim::Minimum> = None;
    for st in starts {
        let r = nelder_mead(nll, &st, &opts);
        if best.as_ref().is_none_or(|b| r.fx < b.fx) {
            best = Some(r);
        }
    }
    let b = best.unwrap();
    let (xi, om, al) = (m + s * b.x[0], s * b.x[1].exp(), b.x[2]);
    if !b.converged || !b.fx.is_finite() {
        return Err(Error::Fit { msg: "skew-normal fit did not converge".into(), best: vec![xi, om, al], loglik: -b.fx });
    }
    MarginModel::skew_normal(xi, om, al)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn ks_uniform(mut u: Vec<f64>) -> f64 {
        u.sort_by(f64::total_cmp);
        let n = u.len() as f64;
        u.iter()
            .enumerate()
            .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
            .fold(0.0, f64::max)
    }

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn normal_fit_closed_form() {
        let m = fit_margin(MarginKind::Normal, &[-1.0, 0.0, 1.0]).unwrap();
        assert!(m.params()[0].abs() < 1e-15);
        assert!((m.params()[1] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn skew_normal_on_symmetric_data_matches_normal() {
        let mut x = normals(1000, 3);
        let mirrored: Vec<f64> = x.iter().map(|v| -v).collect();
        x.extend(mirrored);
        let sn = fit_margin(MarginKind::SkewNormal, &x).unwrap();
        let nm = fit_margin(MarginKind::Normal, &x).unwrap();
        let mode = nm.params()[0];
        assert!((sn.pdf(mode) - nm.pdf(mode)).abs() < 1e-3, "{:?}", sn.params());
    }

    #[test]
    fn skew_normal_recovers_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // Z = delta |U0| + sqrt(1 - delta^2) U1 is standard skew-normal
        let alpha: f64 = 4.0;
        let delta = alpha / (1.0 + alpha * alpha).sqrt();
        let x: Vec<f64> = (0..3000)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                2.0 + 3.0 * (delta * a.abs() + (1.0 - delta * delta).sqrt() * b)
            })
            .collect();
        let m = fit_margin(MarginKind::SkewNormal, &x).unwrap();
        let p = m.params();
        assert!((p[0] - 2.0).abs() < 0.2 && (p[1] - 3.0).abs() < 0.2 && (p[2] - 4.0).abs() < 1.5, "{p:?}");
        let u: Vec<f64> = x.iter().map(|&v| m.cdf(v)).collect();
        assert!(ks_uniform(u) < 1.628 / 3000f64.sqrt());
    }

    #[test]
    fn empirical_continuous_scores() {
        let m = fit_margin(MarginKind::EmpiricalContinuous, &[3.0, 1.0, 4.0, 2.0, 5.0, 9.0, 6.0, 7.0, 8.0, 10.0]).unwrap();
        for k in 1..=10 {
            assert!((m.cdf(k as f64) - k as f64 / 11.0).abs() < 1e-15);
        }
        // ties share the average rank
        let m = fit_margin(MarginKind::EmpiricalContinuous, &[1.0, 2.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]).unwrap();
        assert!((m.cdf(2.0) - 2.5 / 11.0).abs() < 1e-15);
        assert_eq!(m.cdf(-100.0), 0.0);
        assert_eq!(m.cdf(100.0), 1.0);
        for &p in &[0.01, 0.2, 0.5, 0.93, 0.999] {
            assert!((m.cdf(m.quantile(p)) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_n_plus_one_rescaling_on_four_points() {
        let m = MarginModel::from_knots(vec![1.0, 2.0, 3.0, 4.0], vec![0.2, 0.4, 0.6, 0.8]).unwrap();
        let u: Vec<f64> = [1.0, 2.0, 3.0, 4.0].iter().map(|&y| m.cdf(y)).collect();
        assert_eq!(u, vec![0.2, 0.4, 0.6, 0.8]);
        // density integrates to one over the extrapolated range
        let total = crate::numeric::quad::integrate(|y| m.pdf(y), -5.0, 10.0, 1e-12, 1e-12);
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pit_examples() {
        let n = MarginModel::normal(0.0, 1.0).unwrap();
        assert_eq!(n.pit(0.0), (0.5, 0.5));
        let d = MarginModel::discrete(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(d.pit(1.0), (1.0, 0.5));
        assert_eq!(d.pit(0.5), (0.5, 0.5));
        assert_eq!(d.pit(0.0), (0.5, 0.0));
    }

    #[test]
    fn quantile_examples() {
        let n = MarginModel::normal(0.0, 1.0).unwrap();
        assert!((n.quantile(0.975) - 1.959_964).abs() < 1e-6);
        let d = MarginModel::discrete(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(d.quantile(0.4), 0.0);
        assert_eq!(d.quantile(0.5), 0.0);
        assert_eq!(d.quantile(0.6), 1.0);
        let sn = MarginModel::skew_normal(1.0, 2.0, -3.0).unwrap();
        for i in 1..100 {
            let p = i as f64 / 100.0;
            assert!((sn.cdf(sn.quantile(p)) - p).abs() < 1e-8);
        }
        for &p in &[1e-9, 1e-5, 1.0 - 1e-7] {
            assert!((sn.cdf(sn.quantile(p)) / p - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn discrete_fit_masses() {
        let x = [0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0, 5.0];
        let m = fit_margin(MarginKind::EmpiricalDiscrete, &x).unwrap();
        let s = m.support().unwrap();
        assert_eq!(s.values, vec![0.0, 1.0, 2.0, 5.0]);
        let total: f64 = s.values.iter().map(|&v| {
            let (p, q) = m.pit(v);
            p - q
        }).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!((m.pdf(2.0) - 0.4).abs() < 1e-15);
        assert!(m.cdf_left(2.0) < m.cdf(2.0));
        assert_eq!(m.cdf_left(3.0), m.cdf(3.0));
    }

    #[test]
    fn degenerate_and_short_samples() {
        assert!(matches!(fit_margin(MarginKind::Normal, &[2.0; 20]), Err(Error::DegenerateData(_))));
        assert!(matches!(fit_margin(MarginKind::SkewNormal, &[1.0, 2.0]), Err(Error::Input(_))));
        assert!(fit_margin(MarginKind::EmpiricalDiscrete, &[1.0; 12]).is_err());
    }

    #[test]
    fn pit_uniformity_normal() {
        let x: Vec<f64> = normals(2000, 17).iter().map(|v| 3.0 + 2.0 * v).collect();
        let m = fit_margin(MarginKind::Normal, &x).unwrap();
        let u: Vec<f64> = x.iter().map(|&v| m.cdf(v)).collect();
        assert!(ks_uniform(u) < 1.628 / 2000f64.sqrt());
    }

    #[test]
    fn serde_round_trip() {
        for m in [
            MarginModel::normal(1.0, 2.0).unwrap(),
            MarginModel::skew_normal(0.5, 1.5, 2.0).unwrap(),
            MarginModel::discrete(vec![0.0, 1.0, 3.0], vec![0.2, 0.5, 0.3]).unwrap(),
            MarginModel::from_knots(vec![0.0, 1.0, 2.0], vec![0.25, 0.5, 0.75]).unwrap(),
        ] {
            let s = serde_json::to_string(&m).unwrap();
            let back: MarginModel = serde_json::from_str(&s).unwrap();
            assert_eq!(back, m);
        }
        let s = serde_json::to_string(&MarginModel::normal(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(s, r#"{"kind":"normal","params":[0.0,1.0]}"#);
    }

    proptest::proptest! {
        #[test]
        fn cdf_monotone_and_left_limits(seed in 0u64..1000, a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..30).map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (2.0 * z).round()
            }).collect();
            let d = fit_margin(MarginKind::EmpiricalDiscrete, &x);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if let Ok(d) = d {
                proptest::prop_assert!(d.cdf(lo) <= d.cdf(hi));
                proptest::prop_assert!(d.cdf_left(hi) <= d.cdf(hi));
                proptest::prop_assert!(d.cdf_left(hi) >= d.cdf(lo) || lo == hi);
            }
            let sn = MarginModel::skew_normal(0.0, 1.0, a).unwrap();
            proptest::prop_assert!(sn.cdf(lo) <= sn.cdf(hi) + 1e-15);
        }
    }
}
