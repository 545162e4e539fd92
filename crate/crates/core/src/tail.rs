//! Asymptotic shape of conditional quantile functions in the joint tails.
//!
//! With standard normal margins, `-log C^{-1}(alpha | u) ~ k (-log u)^eta`
//! as u -> 0 translates into `F^{-1}(alpha | x) ~ -(2^{1-eta} k)^{1/2} |x|^eta`.
//! Upper tails are handled through `1 - C^{-1}(alpha | 1 - u)`.

use serde::{Deserialize, Serialize};

use crate::bicop::PairCopula;
use crate::error::{Error, Result};
use crate::numeric::special::norm_quantile;
use crate::prediction::PredictOptions;
use crate::vine::VineModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailSide {
    Lower,
    Upper,
}

impl std::str::FromStr for TailSide {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lower" => Ok(TailSide::Lower),
            "upper" => Ok(TailSide::Upper),
            _ => Err(Error::Input(format!("unknown tail side '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailCategory {
    StronglyLinear,
    WeaklyLinear,
    Sublinear,
    AsymptoticallyConstant,
}

impl TailCategory {
    pub fn name(self) -> &'static str {
        match self {
            TailCategory::StronglyLinear => "strongly-linear",
            TailCategory::WeaklyLinear => "weakly-linear",
            TailCategory::Sublinear => "sublinear",
            TailCategory::AsymptoticallyConstant => "asymptotically-constant",
        }
    }
}

/// Category thresholds for estimated exponents and coefficients.
pub const ETA_LINEAR: f64 = 0.98;
pub const ETA_CONSTANT: f64 = 0.02;
pub const K_STRONG: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailClass {
    pub category: TailCategory,
    /// exponent in [0, 1]
    pub eta: f64,
    /// coefficient at the given quantile level; None when eta = 0
    pub k_alpha: Option<f64>,
}

impl TailClass {
    /// Category from (possibly estimated) eta and k with the numeric thresholds.
    pub fn from_estimates(eta: f64, k_alpha: Option<f64>) -> Self {
        let eta = eta.clamp(0.0, 1.0);
        let category = if eta > ETA_LINEAR {
            if k_alpha.is_some_and(|k| k > K_STRONG) {
                TailCategory::StronglyLinear
            } else {
                TailCategory::WeaklyLinear
            }
        } else if eta < ETA_CONSTANT {
            TailCategory::AsymptoticallyConstant
        } else {
            TailCategory::Sublinear
        };
        let k_alpha = if category == TailCategory::AsymptoticallyConstant { None } else { k_alpha };
        TailClass { category, eta, k_alpha }
    }
}

/// Grid exponents: u = 10^-3, ..., 10^-8.
pub const GRID_DECADES: std::ops::RangeInclusive<i32> = 3..=8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericTail {
    pub class: TailClass,
    /// grid points that produced a finite tail quantile
    pub points_used: usize,
    pub warning: Option<String>,
}

/// `-log C^{-1}(alpha | u)` on the lower side, `-log(1 - C^{-1}(alpha | 1 - u))`
/// on the upper side.
fn tail_log_quantile(c: &PairCopula, side: TailSide, alpha: f64, u: f64) -> f64 {
    match side {
        TailSide::Lower => -c.q21(alpha, u).ln(),
        TailSide::Upper => -(1.0 - c.q21(alpha, 1.0 - u)).ln(),
    }
}

/// Estimate eta and k_alpha from conditional quantiles on the fixed grid.
///
/// Writing g(L) = -log C^{-1}(alpha | e^{-L}), the local slope of
/// log(dg/dL) against log L at the deepest grid points estimates eta - 1.
/// Differencing removes additive constants in g, which otherwise bias a
/// direct log-log fit on this grid. k_alpha = g'(L) / (eta L^{eta-1}).
pub fn classify_numeric(c: &PairCopula, side: TailSide, alpha: f64) -> Result<NumericTail> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("quantile level {alpha} outside (0, 1)")));
    }
    if c.tau() < 0.0 {
        return Err(Error::Domain(format!(
            "tail classification needs positive dependence (tau = {}); flip the copula first",
            c.tau()
        )));
    }
    let ln10 = std::f64::consts::LN_10;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut warning = None;
    for e in GRID_DECADES {
        let u = 10f64.powi(-e);
        let g = tail_log_quantile(c, side, alpha, u);
        if !g.is_finite() {
            warning = Some(format!("tail quantile underflowed at u = 1e-{e}; grid reduced to {} points", pts.len()));
            break;
        }
        pts.push((e as f64 * ln10, g));
    }
    if pts.len() < 3 {
        return Err(Error::Numeric(format!("only {} usable grid points for the tail fit", pts.len())));
    }
    // derivative at midpoints
    let d: Vec<(f64, f64)> = pts.windows(2).map(|w| (0.5 * (w[0].0 + w[1].0), (w[1].1 - w[0].1) / (w[1].0 - w[0].0))).collect();
    let (l1, d1) = d[d.len() - 2];
    let (l2, d2) = d[d.len() - 1];
    let scale = pts.iter().map(|p| p.1.abs()).fold(1.0, f64::max);
    let flat = 1e-12 * scale;
    let eta = if d2 <= flat || d1 <= flat {
        0.0
    } else {
        (1.0 + (d2 / d1).ln() / (l2 / l1).ln()).clamp(0.0, 1.0)
    };
    let k = if eta > 0.0 { Some(d2 / (eta * l2.powf(eta - 1.0))) } else { None };
    Ok(NumericTail { class: TailClass::from_estimates(eta, k), points_used: pts.len(), warning })
}

/// Turn a negatively dependent copula into a positively dependent one by
/// flipping the conditioned variable. Returns the copula, the quantile
/// level to use on it, and whether a flip happened. The conditional
/// quantile of the original at alpha is one minus the flipped copula's at
/// 1 - alpha, so the tail shape carries over with the direction reversed.
pub fn normalize_positive(c: &PairCopula, alpha: f64) -> Result<(PairCopula, f64, bool)> {
    if c.tau() < 0.0 {
        Ok((c.flip_v()?, 1.0 - alpha, true))
    } else {
        Ok((c.clone(), alpha, false))
    }
}

/// psi(s) ~ a1 s^q exp(-a2 s^r) as s -> infinity; governs the copula's lower tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionAtInfinity {
    pub a1: f64,
    pub a2: f64,
    pub q: f64,
    pub r: f64,
}

/// psi(s) = sum_{i<=k} (-1)^i h_i s^i + (-1)^{k+1} h_{k+1} s^M + o(s^M) as
/// s -> 0; governs the copula's upper tail. `h` holds h_0..h_{k+1}.
/// Generators smooth at zero are recorded with M = k + 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionAtZero {
    pub k: usize,
    pub m: f64,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchimedeanGenerator {
    pub family: String,
    pub at_infinity: ExpansionAtInfinity,
    pub at_zero: ExpansionAtZero,
}

impl ArchimedeanGenerator {
    /// Gamma Laplace transform (1 + s)^{-1/delta}.
    pub fn mtcj(delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::Domain(format!("MTCJ delta {delta} must be positive")));
        }
        let a = 1.0 / delta;
        Ok(Self {
            family: "mtcj".into(),
            at_infinity: ExpansionAtInfinity { a1: 1.0, a2: 0.0, q: -a, r: 0.0 },
            at_zero: ExpansionAtZero { k: 1, m: 2.0, h: vec![1.0, a, a * (a + 1.0) / 2.0] },
        })
    }

    /// Positive stable Laplace transform exp(-s^{1/delta}).
    pub fn gumbel(delta: f64) -> Result<Self> {
        if !(delta >= 1.0) {
            return Err(Error::Domain(format!("Gumbel delta {delta} must be at least 1")));
        }
        let r = 1.0 / delta;
        Ok(Self {
            family: "gumbel".into(),
            at_infinity: ExpansionAtInfinity { a1: 1.0, a2: 1.0, q: 0.0, r },
            at_zero: ExpansionAtZero { k: 0, m: r, h: vec![1.0, 1.0] },
        })
    }

    /// Sibuya Laplace transform 1 - (1 - e^{-s})^{1/delta}.
    pub fn joe(delta: f64) -> Result<Self> {
        if !(delta >= 1.0) {
            return Err(Error::Domain(format!("Joe delta {delta} must be at least 1")));
        }
        Ok(Self {
            family: "joe".into(),
            at_infinity: ExpansionAtInfinity { a1: 1.0 / delta, a2: 1.0, q: 0.0, r: 1.0 },
            at_zero: ExpansionAtZero { k: 0, m: 1.0 / delta, h: vec![1.0, 1.0] },
        })
    }

    /// Logarithmic series Laplace transform -log(1 - (1 - e^{-delta}) e^{-s}) / delta.
    pub fn frank(delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::Domain(format!("Frank delta {delta} must be positive")));
        }
        let em = (-delta).exp_m1().abs();
        Ok(Self {
            family: "frank".into(),
            at_infinity: ExpansionAtInfinity { a1: em / delta, a2: 1.0, q: 0.0, r: 1.0 },
            at_zero: ExpansionAtZero {
                k: 1,
                m: 2.0,
                h: vec![1.0, delta.exp_m1() / delta, ((2.0 * delta).exp() - delta.exp()) / (2.0 * delta)],
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.at_infinity;
        if !(t.a1 > 0.0) || !(t.a2 >= 0.0) || !(0.0..=1.0).contains(&t.r) {
            return Err(Error::Domain(format!("invalid expansion at infinity {t:?}")));
        }
        if t.r == 0.0 && (t.a2 != 0.0 || !(t.q < 0.0)) {
            return Err(Error::Domain("r = 0 needs a2 = 0 and q < 0".into()));
        }
        let z = &self.at_zero;
        if !(z.m > z.k as f64 && z.m <= z.k as f64 + 1.0) {
            return Err(Error::Domain(format!("M = {} outside (k, k + 1] for k = {}", z.m, z.k)));
        }
        if z.m < 1.0 && z.k != 0 {
            return Err(Error::Domain("0 < M < 1 needs k = 0".into()));
        }
        if z.h.len() != z.k + 2 || z.h[0] != 1.0 || z.h[1..].iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::Domain("expansion at zero needs h_0 = 1 and positive h_1..h_{k+1}".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchimedeanTail {
    /// asymptote of C_{V|U}(v | u)
    pub cdf_form: String,
    /// asymptote of C^{-1}_{V|U}(alpha | u)
    pub quantile_form: String,
    pub class: TailClass,
}

/// Case analysis of the conditional distribution and quantile asymptotes of
/// an Archimedean copula from its generator expansions.
pub fn classify_archimedean(g: &ArchimedeanGenerator, side: TailSide, alpha: f64) -> Result<ArchimedeanTail> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("quantile level {alpha} outside (0, 1)")));
    }
    g.validate()?;
    match side {
        TailSide::Lower => {
            let ExpansionAtInfinity { a1, a2, q, r } = g.at_infinity;
            if r == 0.0 {
                if !(q < 0.0) || a2 != 0.0 {
                    return Err(Error::Domain("r = 0 needs a2 = 0 and q < 0".into()));
                }
                let coef = (alpha.powf(1.0 / (q - 1.0)) - 1.0).powf(q);
                Ok(ArchimedeanTail {
                    cdf_form: format!("1 + ({}) psi^-1(v) (u / {a1})^({}) -> 1", q - 1.0, -1.0 / q),
                    quantile_form: format!("{coef} * u -> 0"),
                    class: TailClass { category: TailCategory::StronglyLinear, eta: 1.0, k_alpha: Some(1.0) },
                })
            } else if r < 1.0 {
                let k = (-alpha.ln() / r).powf(r);
                Ok(ArchimedeanTail {
                    cdf_form: format!("1 - {} psi^-1(v) (-log u)^({}) -> 1", a2.powf(1.0 / r) * r, 1.0 - 1.0 / r),
                    quantile_form: format!("exp[-{k} (-log u)^{}] -> 0", 1.0 - r),
                    class: TailClass { category: TailCategory::Sublinear, eta: 1.0 - r, k_alpha: Some(k) },
                })
            } else if r == 1.0 {
                Ok(constant_tail())
            } else {
                Err(Error::Domain(format!("r = {r} outside [0, 1]")))
            }
        }
        TailSide::Upper => {
            let ExpansionAtZero { k, m, ref h } = g.at_zero;
            if m == 1.0 {
                return Err(Error::Unsupported("M = 1 involves a slowly varying function and is not covered".into()));
            }
            if m < 1.0 {
                if k != 0 || h.len() < 2 {
                    return Err(Error::Domain("0 < M < 1 needs k = 0 and h_1".into()));
                }
                let coef = (alpha.powf(1.0 / (m - 1.0)) - 1.0).powf(m);
                Ok(ArchimedeanTail {
                    cdf_form: format!("-psi'(psi^-1(v)) / {} (1 - u)^({}) -> 0", h[1].powf(1.0 / m) * m, (1.0 - m) / m),
                    quantile_form: format!("1 - {coef} * (1 - u) -> 1"),
                    class: TailClass { category: TailCategory::StronglyLinear, eta: 1.0, k_alpha: Some(1.0) },
                })
            } else {
                Ok(constant_tail())
            }
        }
    }
}

fn constant_tail() -> ArchimedeanTail {
    ArchimedeanTail {
        cdf_form: "const in (0, 1)".into(),
        quantile_form: "const in (0, 1)".into(),
        class: TailClass { category: TailCategory::AsymptoticallyConstant, eta: 0.0, k_alpha: None },
    }
}

/// Conditional quantile asymptote with N(0, 1) margins:
/// y ~ coefficient * |x|^exponent, or y -> limit when the shape is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalAsymptote {
    /// signed: negative on the lower side
    pub coefficient: f64,
    pub exponent: f64,
    pub limit: Option<f64>,
}

/// Map a tail class to the normal-scale asymptote. For eta = 0 the limit
/// Phi^{-1}(C^{-1}(alpha | 0 or 1)) is evaluated at the clamped boundary.
pub fn quantile_to_normal_scale(tail: &TailClass, c: &PairCopula, alpha: f64, side: TailSide) -> NormalAsymptote {
    let sign = match side {
        TailSide::Lower => -1.0,
        TailSide::Upper => 1.0,
    };
    match tail.k_alpha {
        Some(k) if tail.eta > 0.0 => NormalAsymptote {
            coefficient: sign * (2f64.powf(1.0 - tail.eta) * k).sqrt(),
            exponent: tail.eta,
            limit: None,
        },
        _ => {
            let u = if side == TailSide::Lower { 0.0 } else { 1.0 };
            NormalAsymptote { coefficient: 0.0, exponent: 0.0, limit: Some(norm_quantile(c.q21(alpha, u))) }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    Constant,
    NonMonotone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileCurves {
    pub variable: String,
    pub grid: Vec<f64>,
    pub alphas: Vec<f64>,
    /// one curve per alpha, evaluated on the grid
    pub values: Vec<Vec<f64>>,
    pub verdicts: Vec<Monotonicity>,
    /// curves for increasing alpha never decrease at any grid point
    pub ordered: bool,
}

fn monotonicity(y: &[f64]) -> Monotonicity {
    let scale = y.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let (mut up, mut down) = (false, false);
    for w in y.windows(2) {
        let dlt = w[1] - w[0];
        up |= dlt > tol;
        down |= dlt < -tol;
    }
    match (up, down) {
        (true, false) => Monotonicity::Increasing,
        (false, true) => Monotonicity::Decreasing,
        (false, false) => Monotonicity::Constant,
        (true, true) => Monotonicity::NonMonotone,
    }
}

/// Conditional quantiles of the response as one predictor moves along
/// `grid`, the others held at their values in `base`.
pub fn quantile_curves(
    model: &VineModel,
    varying: usize,
    base: &[f64],
    alphas: &[f64],
    grid: &[f64],
    opts: &PredictOptions,
) -> Result<QuantileCurves> {
    let d = model.dim();
    let y = model.structure().order()[d - 1];
    if varying >= d || varying == y {
        return Err(Error::Input(format!("variable {varying} is not a predictor")));
    }
    if base.len() != d {
        return Err(Error::Input(format!("base row has {} values, model has {d}", base.len())));
    }
    let rows: Vec<Vec<f64>> = grid
        .iter()
        .map(|&x| {
            let mut r = base.to_vec();
            r[varying] = x;
            r
        })
        .collect();
    let cds = crate::prediction::conditionals(model, &rows)?;
    let mut values = Vec::with_capacity(alphas.len());
    for &a in alphas {
        values.push(cds.iter().map(|cd| cd.quantile(a, opts)).collect::<Result<Vec<f64>>>()?);
    }
    let verdicts = values.iter().map(|c| monotonicity(c)).collect();
    let mut idx: Vec<usize> = (0..alphas.len()).collect();
    idx.sort_by(|&i, &j| alphas[i].total_cmp(&alphas[j]));
    let ordered = idx.windows(2).all(|w| {
        values[w[0]].iter().zip(&values[w[1]]).all(|(lo, hi)| *lo <= *hi + 1e-9 * hi.abs().max(1.0))
    });
    Ok(QuantileCurves {
        variable: model.names()[varying].clone(),
        grid: grid.to_vec(),
        alphas: alphas.to_vec(),
        values,
        verdicts,
        ordered,
    })
}
