//! Pseudo-observations for one vine edge, the mixed-margin edge likelihood and
//! maximum-likelihood / information-criterion family selection.

use serde::{Deserialize, Serialize};

use super::{clamp_u, Family, PairCopula, Reflection};
use crate::error::{Error, Result};
use crate::numeric::optim::{brent_min, brent_root, nelder_mead, NelderMeadOptions};
use crate::numeric::special::{debye1, norm_quantile, t_quantile};

/// Differences below this are treated as zero width and replaced by a derivative.
pub const DIFF_FLOOR: f64 = 1e-12;
const TINY: f64 = 1e-300;

/// Pseudo-observations of one edge. The first coordinate is the copula's `u`
/// argument, the second its `v` argument. For a discrete coordinate the
/// `*_minus` vector holds the left limits; for a continuous one it equals the
/// `*_plus` vector.
#[derive(Debug, Clone, Default)]
pub struct EdgeData {
    pub u_plus: Vec<f64>,
    pub u_minus: Vec<f64>,
    pub v_plus: Vec<f64>,
    pub v_minus: Vec<f64>,
    pub u_discrete: bool,
    pub v_discrete: bool,
}

impl EdgeData {
    pub fn continuous(u: Vec<f64>, v: Vec<f64>) -> Self {
        Self {
            u_minus: u.clone(),
            v_minus: v.clone(),
            u_plus: u,
            v_plus: v,
            u_discrete: false,
            v_discrete: false,
        }
    }

    pub fn len(&self) -> usize {
        self.u_plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_plus.is_empty()
    }

    pub fn is_continuous(&self) -> bool {
        !self.u_discrete && !self.v_discrete
    }

    fn mid_u(&self, i: usize) -> f64 {
        0.5 * (self.u_plus[i] + self.u_minus[i])
    }

    fn mid_v(&self, i: usize) -> f64 {
        0.5 * (self.v_plus[i] + self.v_minus[i])
    }

    /// True when either coordinate takes a single value.
    pub fn is_degenerate(&self) -> bool {
        let all_same = |a: &[f64], b: &[f64]| {
            let (x0, y0) = (a[0], b[0]);
            a.iter().zip(b).all(|(&x, &y)| (x - x0).abs() < 1e-14 && (y - y0).abs() < 1e-14)
        };
        self.is_empty() || all_same(&self.u_plus, &self.u_minus) || all_same(&self.v_plus, &self.v_minus)
    }

    /// Kendall's tau-b of the midpoint pseudo-observations.
    pub fn kendall_tau(&self) -> f64 {
        let n = self.len();
        let (u, v): (Vec<f64>, Vec<f64>) = (0..n).map(|i| (self.mid_u(i), self.mid_v(i))).unzip();
        kendall_tau_b(&u, &v)
    }
}

/// Kendall's tau-b by direct pair counting.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut conc, mut tx, mut ty) = (0i64, 0i64, 0i64);
    let mut total = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            total += 1;
            if dx == 0.0 {
                tx += 1;
            }
            if dy == 0.0 {
                ty += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                conc += if (dx > 0.0) == (dy > 0.0) { 1 } else { -1 };
            }
        }
    }
    let denom = (((total - tx) as f64) * ((total - ty) as f64)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        conc as f64 / denom
    }
}

/// log of the generalized copula density for one observation. Discrete
/// coordinates contribute finite differences divided by the width of the
/// jump, so that multiplying by the margin's mass gives the joint mass.
pub fn ln_tilde_c(c: &PairCopula, up: f64, um: f64, vp: f64, vm: f64, ud: bool, vd: bool) -> f64 {
    if c.is_independence() {
        return 0.0;
    }
    let du = up - um;
    let dv = vp - vm;
    let ud = ud && du >= DIFF_FLOOR;
    let vd = vd && dv >= DIFF_FLOOR;
    let val = match (ud, vd) {
        (false, false) => return c.ln_pdf(0.5 * (up + um), 0.5 * (vp + vm)),
        (true, false) => (c.h12(up, vp) - c.h12(um, vp)) / du,
        (false, true) => (c.h21(vp, up) - c.h21(vm, up)) / dv,
        (true, true) => (c.cdf(up, vp) - c.cdf(um, vp) - c.cdf(up, vm) + c.cdf(um, vm)) / (du * dv),
    };
    val.max(TINY).ln()
}

/// Edge log-likelihood: the sum of log tilde-c over observations.
pub fn loglik(c: &PairCopula, data: &EdgeData) -> f64 {
    if c.is_independence() {
        return 0.0;
    }
    (0..data.len())
        .map(|i| {
            ln_tilde_c(
                c,
                data.u_plus[i],
                data.u_minus[i],
                data.v_plus[i],
                data.v_minus[i],
                data.u_discrete,
                data.v_discrete,
            )
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Aic,
    Bic,
}

impl Criterion {
    pub fn value(self, loglik: f64, n_params: usize, n_obs: usize) -> f64 {
        match self {
            Criterion::Aic => -2.0 * loglik + 2.0 * n_params as f64,
            Criterion::Bic => -2.0 * loglik + (n_obs as f64).ln() * n_params as f64,
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            _ => Err(Error::Input(format!("unknown criterion '{s}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EdgeFit {
    pub copula: PairCopula,
    pub loglik: f64,
    pub n_obs: usize,
}

impl EdgeFit {
    pub fn aic(&self) -> f64 {
        Criterion::Aic.value(self.loglik, self.copula.n_params(), self.n_obs)
    }

    pub fn bic(&self) -> f64 {
        Criterion::Bic.value(self.loglik, self.copula.n_params(), self.n_obs)
    }

    pub fn criterion(&self, c: Criterion) -> f64 {
        c.value(self.loglik, self.copula.n_params(), self.n_obs)
    }
}

fn check_data(data: &EdgeData) -> Result<()> {
    if data.len() < 10 {
        return Err(Error::Input(format!("edge fit needs at least 10 observations, got {}", data.len())));
    }
    let n = data.len();
    if data.u_minus.len() != n || data.v_plus.len() != n || data.v_minus.len() != n {
        return Err(Error::Input("edge pseudo-observation vectors differ in length".into()));
    }
    if data.is_degenerate() {
        return Err(Error::DegenerateData("edge pseudo-observations are all tied".into()));
    }
    Ok(())
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn to_box(z: &[f64], b: &[(f64, f64)]) -> Vec<f64> {
    z.iter().zip(b).map(|(&z, &(lo, hi))| lo + (hi - lo) * sigmoid(z)).collect()
}

fn from_box(x: &[f64], b: &[(f64, f64)]) -> Vec<f64> {
    x.iter()
        .zip(b)
        .map(|(&x, &(lo, hi))| {
            let t = ((x - lo) / (hi - lo)).clamp(1e-6, 1.0 - 1e-6);
            (t / (1.0 - t)).ln()
        })
        .collect()
}

fn clamp_box(x: f64, (lo, hi): (f64, f64)) -> f64 {
    let pad = 1e-3 * (hi - lo);
    x.clamp(lo + pad, hi - pad)
}

fn joe_tau(d: f64) -> f64 {
    use statrs::function::gamma::digamma;
    if (d - 2.0).abs() < 1e-8 {
        // removable singularity: 1 - psi'(2)
        return 1.0 - (std::f64::consts::PI.powi(2) / 6.0 - 1.0);
    }
    1.0 + 2.0 / (2.0 - d) * (digamma(2.0) - digamma(2.0 / d + 1.0))
}

fn frank_tau(d: f64) -> f64 {
    1.0 - 4.0 / d + 4.0 * debye1(d) / d
}

fn invert_tau(tau_fn: impl Fn(f64) -> f64, tau: f64, (lo, hi): (f64, f64)) -> f64 {
    if tau <= tau_fn(lo) {
        return lo;
    }
    if tau >= tau_fn(hi) {
        return hi;
    }
    brent_root(|d| tau_fn(d) - tau, lo, hi, 1e-10, 200).unwrap_or(0.5 * (lo + hi))
}

/// Parameter for a one-parameter family matching Kendall's tau (tau >= 0 on
/// the unreflected scale).
pub fn param_from_tau(family: Family, tau: f64) -> Option<Vec<f64>> {
    let b = family.fit_bounds();
    let t = tau.clamp(-0.98, 0.98);
    let tp = t.clamp(1e-4, 0.98);
    Some(match family {
        Family::Independence => vec![],
        Family::Gaussian => vec![(std::f64::consts::FRAC_PI_2 * t).sin()],
        Family::StudentT => vec![(std::f64::consts::FRAC_PI_2 * t).sin(), 8.0],
        Family::Gumbel => vec![clamp_box(1.0 / (1.0 - tp), b[0])],
        Family::Mtcj => vec![clamp_box(2.0 * tp / (1.0 - tp), b[0])],
        Family::Frank => vec![clamp_box(invert_tau(frank_tau, tp, b[0]), b[0])],
        Family::Joe => vec![clamp_box(invert_tau(joe_tau, tp, (1.0 + 1e-6, 30.0)), b[0])],
        _ => return None,
    })
}

/// Candidate starting points for two-parameter Archimedean families, built
/// from the limiting one-parameter families with the same tau.
fn bb_starts(family: Family, tau: f64) -> Vec<Vec<f64>> {
    let t = tau.clamp(0.02, 0.95);
    let b = family.fit_bounds();
    let gumbel = 1.0 / (1.0 - t);
    let mtcj = 2.0 * t / (1.0 - t);
    let joe = invert_tau(joe_tau, t, (1.0 + 1e-6, 30.0));
    let raw = match family {
        Family::Bb1 => {
            // tau = 1 - 2 / (delta (theta + 2))
            let th_for = |d: f64| 2.0 / (d * (1.0 - t)) - 2.0;
            let d_for = |th: f64| 2.0 / ((1.0 - t) * (th + 2.0));
            vec![
                vec![0.1, d_for(0.1)],
                vec![mtcj.max(0.05), 1.05],
                vec![th_for(1.3).max(0.05), 1.3],
                vec![th_for(0.5 * (1.0 + gumbel)).max(0.05), 0.5 * (1.0 + gumbel)],
            ]
        }
        Family::Bb6 => vec![vec![1.05, gumbel], vec![joe, 1.05], vec![1.0 + 0.5 * (joe - 1.0), 1.0 + 0.5 * (gumbel - 1.0)]],
        Family::Bb7 => vec![vec![1.05, mtcj], vec![joe, 0.05], vec![1.0 + 0.5 * (joe - 1.0), 0.5 * mtcj]],
        Family::Bb8 => vec![vec![joe, 0.99], vec![1.5 * joe, 0.7], vec![2.5 * joe, 0.4]],
        _ => vec![],
    };
    raw.into_iter()
        .map(|p| p.iter().zip(&b).map(|(&x, &bb)| clamp_box(x, bb)).collect())
        .collect()
}

fn make(family: Family, reflection: Reflection, p: &[f64]) -> Option<PairCopula> {
    PairCopula::new(family, reflection, p).ok()
}

fn neg_ll(family: Family, reflection: Reflection, p: &[f64], data: &EdgeData) -> f64 {
    match make(family, reflection, p) {
        Some(c) => {
            let l = loglik(&c, data);
            if l.is_finite() {
                -l
            } else {
                f64::INFINITY
            }
        }
        None => f64::INFINITY,
    }
}

fn finish(family: Family, reflection: Reflection, p: Vec<f64>, nll: f64, converged: bool, n: usize) -> Result<EdgeFit> {
    if !nll.is_finite() || !converged {
        return Err(Error::Fit {
            msg: format!("{family}/{reflection}: optimizer did not converge"),
            best: p,
            loglik: -nll,
        });
    }
    let copula = PairCopula::new(family, reflection, &p)?;
    Ok(EdgeFit { copula, loglik: -nll, n_obs: n })
}

fn fit_one_param(family: Family, reflection: Reflection, data: &EdgeData, tau: f64) -> Result<EdgeFit> {
    let (lo, hi) = family.fit_bounds()[0];
    let n = data.len();
    let f = |x: f64| neg_ll(family, reflection, &[x], data);
    let mut best = brent_min(f, lo, hi, 1e-10, 200);
    // local refinement around the tau-inversion start guards against a second mode
    if let Some(start) = param_from_tau(family, tau) {
        let s = start[0];
        let w = 0.25 * (hi - lo).min(1.0 + s.abs());
        let local = brent_min(f, (s - w).max(lo), (s + w).min(hi), 1e-10, 200);
        if local.1 < best.1 {
            best = local;
        }
    }
    finish(family, reflection, vec![best.0], best.1, best.1.is_finite(), n)
}

/// Gaussian fit with cached normal scores.
fn fit_gaussian(data: &EdgeData) -> Result<EdgeFit> {
    let n = data.len();
    if !data.is_continuous() {
        return fit_one_param(Family::Gaussian, Reflection::None, data, data.kendall_tau());
    }
    let x: Vec<f64> = data.u_plus.iter().map(|&u| norm_quantile(clamp_u(u))).collect();
    let y: Vec<f64> = data.v_plus.iter().map(|&v| norm_quantile(clamp_u(v))).collect();
    let (sxx, syy, sxy) = x.iter().zip(&y).fold((0.0, 0.0, 0.0), |(a, b, c), (&xi, &yi)| (a + xi * xi, b + yi * yi, c + xi * yi));
    let nll = |r: f64| {
        let s2 = 1.0 - r * r;
        0.5 * n as f64 * s2.ln() + (r * r * (sxx + syy) - 2.0 * r * sxy) / (2.0 * s2)
    };
    let (lo, hi) = Family::Gaussian.fit_bounds()[0];
    let (r, v) = brent_min(nll, lo, hi, 1e-12, 200);
    finish(Family::Gaussian, Reflection::None, vec![r], v, v.is_finite(), n)
}

/// Student-t fit by profile likelihood: an outer search over ln(nu) with the
/// correlation maximised for each nu using t scores cached per nu.
fn fit_student_t(data: &EdgeData) -> Result<EdgeFit> {
    let n = data.len();
    let b = Family::StudentT.fit_bounds();
    if !data.is_continuous() {
        let tau = data.kendall_tau();
        let start = [(std::f64::consts::FRAC_PI_2 * tau).sin().clamp(-0.95, 0.95), 8.0];
        let z0 = from_box(&start, &b);
        let m = nelder_mead(|z| neg_ll(Family::StudentT, Reflection::None, &to_box(z, &b), data), &z0, &NelderMeadOptions::default());
        return finish(Family::StudentT, Reflection::None, to_box(&m.x, &b), m.fx, m.converged, n);
    }
    let (rlo, rhi) = b[0];
    let profile = |nu: f64| -> (f64, f64) {
        let x: Vec<f64> = data.u_plus.iter().map(|&u| t_quantile(clamp_u(u), nu)).collect();
        let y: Vec<f64> = data.v_plus.iter().map(|&v| t_quantile(clamp_u(v), nu)).collect();
        let f = |r: f64| {
            let k = super::elliptical::StudentT::new(r, nu);
            let s: f64 = x.iter().zip(&y).map(|(&a, &b)| k.ln_pdf_scores(a, b)).sum();
            if s.is_finite() {
                -s
            } else {
                f64::INFINITY
            }
        };
        brent_min(f, rlo, rhi, 1e-10, 200)
    };
    let (nlo, nhi) = b[1];
    let (lnu, best_nll) = brent_min(|l| profile(l.exp()).1, nlo.ln(), nhi.ln(), 1e-7, 100);
    let nu = lnu.exp();
    let (rho, _) = profile(nu);
    finish(Family::StudentT, Reflection::None, vec![rho, nu], best_nll, best_nll.is_finite(), n)
}

fn fit_two_param_arch(family: Family, reflection: Reflection, data: &EdgeData, tau: f64) -> Result<EdgeFit> {
    let n = data.len();
    let b = family.fit_bounds();
    let starts = bb_starts(family, tau);
    let obj = |z: &[f64]| neg_ll(family, reflection, &to_box(z, &b), data);
    let mut scored: Vec<(f64, Vec<f64>)> = starts
        .iter()
        .map(|s| {
            let z = from_box(s, &b);
            (obj(&z), z)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let opts = NelderMeadOptions { x_tol: 1e-6, f_tol: 1e-8, restarts: 1, initial_step: 0.5, ..Default::default() };
    let mut best = nelder_mead(obj, &scored[0].1, &opts);
    if scored.len() > 1 && scored[1].0.is_finite() {
        let alt = nelder_mead(obj, &scored[1].1, &opts);
        if alt.fx < best.fx {
            best = alt;
        }
    }
    finish(family, reflection, to_box(&best.x, &b), best.fx, best.converged, n)
}

/// Maximum-likelihood fit of one family with a fixed reflection.
pub fn fit_edge_mle(family: Family, reflection: Reflection, data: &EdgeData) -> Result<EdgeFit> {
    check_data(data)?;
    if !family.reflections().contains(&reflection) {
        return Err(Error::Domain(format!("{family} does not admit reflection {reflection}")));
    }
    // dependence on the unreflected scale
    let tau = data.kendall_tau();
    let base_tau = if reflection.is_flip() { -tau } else { tau };
    match family {
        Family::Independence => Ok(EdgeFit { copula: PairCopula::independence(), loglik: 0.0, n_obs: data.len() }),
        Family::Gaussian => fit_gaussian(data),
        Family::StudentT => fit_student_t(data),
        Family::Frank | Family::Gumbel | Family::Joe | Family::Mtcj => fit_one_param(family, reflection, data, base_tau),
        Family::Bb1 | Family::Bb6 | Family::Bb7 | Family::Bb8 => fit_two_param_arch(family, reflection, data, base_tau),
    }
}

/// Reflections tried for a family given the sign of the empirical tau.
pub fn candidate_reflections(family: Family, tau: f64) -> Vec<Reflection> {
    match family {
        Family::Independence | Family::Gaussian | Family::StudentT => vec![Reflection::None],
        // Frank is radially symmetric, so survival and the second flip add nothing
        Family::Frank => vec![if tau >= 0.0 { Reflection::None } else { Reflection::UFlip }],
        _ if tau >= 0.0 => vec![Reflection::None, Reflection::Survival],
        _ => vec![Reflection::UFlip, Reflection::VFlip],
    }
}

/// Fit every candidate family and keep the one with the smallest criterion.
/// Ties go to the family with fewer parameters. If every candidate fails the
/// edge falls back to independence.
pub fn select_family(data: &EdgeData, candidates: &[Family], criterion: Criterion) -> Result<EdgeFit> {
    check_data(data)?;
    let tau = data.kendall_tau();
    let mut fams: Vec<Family> = candidates.to_vec();
    fams.sort_by_key(|f| (f.n_params(), *f));
    fams.dedup();
    let mut best: Option<(f64, EdgeFit)> = None;
    for fam in fams {
        for refl in candidate_reflections(fam, tau) {
            let fit = match fit_edge_mle(fam, refl, data) {
                Ok(f) => f,
                Err(Error::Fit { .. }) | Err(Error::Domain(_)) => continue,
                Err(e) => return Err(e),
            };
            let score = fit.criterion(criterion);
            if !score.is_finite() {
                continue;
            }
            if best.as_ref().is_none_or(|(s, _)| score < *s) {
                best = Some((score, fit));
            }
        }
    }
    Ok(best.map(|(_, f)| f).unwrap_or(EdgeFit { copula: PairCopula::independence(), loglik: 0.0, n_obs: data.len() }))
}
