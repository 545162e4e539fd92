//! Bivariate copula families, reflections, h-functions and edge fitting.

mod archimedean;
mod elliptical;
pub mod fit;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::special::{debye1, log_add_exp, softplus};
use archimedean::{Generator, Outer};
use elliptical::{Gauss, StudentT};

/// Inputs to densities and h-functions are clamped to [U_EPS, 1 - U_EPS].
pub const U_EPS: f64 = 1e-15;

#[inline]
pub fn clamp_u(u: f64) -> f64 {
    u.clamp(U_EPS, 1.0 - U_EPS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Independence,
    Gaussian,
    StudentT,
    Frank,
    Gumbel,
    Joe,
    Mtcj,
    Bb1,
    Bb6,
    Bb7,
    Bb8,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::Independence,
        Family::Gaussian,
        Family::StudentT,
        Family::Frank,
        Family::Gumbel,
        Family::Joe,
        Family::Mtcj,
        Family::Bb1,
        Family::Bb6,
        Family::Bb7,
        Family::Bb8,
    ];

    pub fn n_params(self) -> usize {
        match self {
            Family::Independence => 0,
            Family::Gaussian | Family::Frank | Family::Gumbel | Family::Joe | Family::Mtcj => 1,
            Family::StudentT | Family::Bb1 | Family::Bb6 | Family::Bb7 | Family::Bb8 => 2,
        }
    }

    pub fn is_elliptical(self) -> bool {
        matches!(self, Family::Gaussian | Family::StudentT)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Independence => "independence",
            Family::Gaussian => "gaussian",
            Family::StudentT => "t",
            Family::Frank => "frank",
            Family::Gumbel => "gumbel",
            Family::Joe => "joe",
            Family::Mtcj => "mtcj",
            Family::Bb1 => "bb1",
            Family::Bb6 => "bb6",
            Family::Bb7 => "bb7",
            Family::Bb8 => "bb8",
        }
    }

    /// Whether `params` lie in the family's parameter domain.
    pub fn in_domain(self, p: &[f64]) -> bool {
        if p.len() != self.n_params() || p.iter().any(|x| !x.is_finite()) {
            return false;
        }
        match self {
            Family::Independence => true,
            Family::Gaussian => p[0].abs() < 1.0,
            Family::StudentT => p[0].abs() < 1.0 && p[1] > 2.0,
            Family::Frank | Family::Mtcj => p[0] > 0.0,
            Family::Gumbel | Family::Joe => p[0] > 1.0,
            Family::Bb1 => p[0] > 0.0 && p[1] > 1.0,
            Family::Bb6 => p[0] > 1.0 && p[1] > 1.0,
            Family::Bb7 => p[0] > 1.0 && p[1] > 0.0,
            Family::Bb8 => p[0] > 1.0 && p[1] > 0.0 && p[1] <= 1.0,
        }
    }

    /// Box used by maximum likelihood, (lower, upper) per parameter.
    pub fn fit_bounds(self) -> Vec<(f64, f64)> {
        match self {
            Family::Independence => vec![],
            Family::Gaussian => vec![(-0.999, 0.999)],
            Family::StudentT => vec![(-0.999, 0.999), (2.05, 50.0)],
            Family::Frank => vec![(1e-4, 35.0)],
            Family::Mtcj => vec![(1e-4, 28.0)],
            Family::Gumbel => vec![(1.0 + 1e-6, 17.0)],
            Family::Joe => vec![(1.0 + 1e-6, 30.0)],
            Family::Bb1 => vec![(1e-4, 7.0), (1.0 + 1e-6, 7.0)],
            Family::Bb6 => vec![(1.0 + 1e-6, 6.0), (1.0 + 1e-6, 8.0)],
            Family::Bb7 => vec![(1.0 + 1e-6, 6.0), (1e-4, 25.0)],
            Family::Bb8 => vec![(1.0 + 1e-6, 8.0), (1e-4, 1.0)],
        }
    }

    /// Reflections a family may carry. Elliptical families are reflection
    /// symmetric up to the sign of rho, so only `None` is admitted.
    pub fn reflections(self) -> &'static [Reflection] {
        match self {
            Family::Independence | Family::Gaussian | Family::StudentT => &[Reflection::None],
            _ => &Reflection::ALL,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let k = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        Ok(match k.as_str() {
            "independence" | "indep" | "i" => Family::Independence,
            "gaussian" | "normal" | "n" => Family::Gaussian,
            "t" | "student" | "student-t" | "studentt" => Family::StudentT,
            "frank" => Family::Frank,
            "gumbel" => Family::Gumbel,
            "joe" => Family::Joe,
            "mtcj" | "clayton" => Family::Mtcj,
            "bb1" => Family::Bb1,
            "bb6" => Family::Bb6,
            "bb7" => Family::Bb7,
            "bb8" => Family::Bb8,
            _ => return Err(Error::Input(format!("unknown copula family '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Reflection {
    None,
    /// C(u,v) = u + v - 1 + C0(1-u, 1-v)
    Survival,
    /// C(u,v) = v - C0(1-u, v)
    UFlip,
    /// C(u,v) = u - C0(u, 1-v)
    VFlip,
}

impl Reflection {
    pub const ALL: [Reflection; 4] = [Reflection::None, Reflection::Survival, Reflection::UFlip, Reflection::VFlip];

    pub fn name(self) -> &'static str {
        match self {
            Reflection::None => "none",
            Reflection::Survival => "survival",
            Reflection::UFlip => "u-flip",
            Reflection::VFlip => "v-flip",
        }
    }

    /// Whether the reflection reverses the sign of dependence.
    pub fn is_flip(self) -> bool {
        matches!(self, Reflection::UFlip | Reflection::VFlip)
    }

    /// The reflection obtained after additionally flipping the second coordinate.
    pub fn then_vflip(self) -> Reflection {
        match self {
            Reflection::None => Reflection::VFlip,
            Reflection::VFlip => Reflection::None,
            Reflection::UFlip => Reflection::Survival,
            Reflection::Survival => Reflection::UFlip,
        }
    }
}

impl fmt::Display for Reflection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Reflection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "none" | "" => Reflection::None,
            "survival" | "rot180" => Reflection::Survival,
            "u-flip" | "uflip" | "rot90" => Reflection::UFlip,
            "v-flip" | "vflip" | "rot270" => Reflection::VFlip,
            _ => return Err(Error::Input(format!("unknown reflection '{s}'"))),
        })
    }
}

/// Which conditional distribution an h-function returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// C_{2|1}(v | u) = ∂C/∂u
    TwoGivenOne,
    /// C_{1|2}(u | v) = ∂C/∂v
    OneGivenTwo,
}

#[derive(Debug, Clone, Copy)]
enum Kernel {
    Indep,
    Gauss(Gauss),
    T(StudentT),
    Arch(Generator),
}

/// A parametric bivariate copula with a reflection mode. Immutable.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PairCopulaRepr", into = "PairCopulaRepr")]
pub struct PairCopula {
    family: Family,
    reflection: Reflection,
    params: [f64; 2],
    kernel: Kernel,
}

impl PartialEq for PairCopula {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family && self.reflection == other.reflection && self.params() == other.params()
    }
}

#[derive(Serialize, Deserialize)]
struct PairCopulaRepr {
    family: String,
    reflection: String,
    params: Vec<f64>,
}

impl TryFrom<PairCopulaRepr> for PairCopula {
    type Error = Error;
    fn try_from(r: PairCopulaRepr) -> Result<Self> {
        PairCopula::new(r.family.parse()?, r.reflection.parse()?, &r.params)
    }
}

impl From<PairCopula> for PairCopulaRepr {
    fn from(c: PairCopula) -> Self {
        PairCopulaRepr {
            family: c.family.name().to_string(),
            reflection: c.reflection.name().to_string(),
            params: c.params().to_vec(),
        }
    }
}

impl PairCopula {
    pub fn new(family: Family, reflection: Reflection, params: &[f64]) -> Result<Self> {
        if !family.in_domain(params) {
            return Err(Error::Domain(format!("{family} with parameters {params:?}")));
        }
        if !family.reflections().contains(&reflection) {
            return Err(Error::Domain(format!("{family} does not admit reflection {reflection}")));
        }
        let mut p = [0.0; 2];
        p[..params.len()].copy_from_slice(params);
        let kernel = match family {
            Family::Independence => Kernel::Indep,
            Family::Gaussian => Kernel::Gauss(Gauss::new(p[0])),
            Family::StudentT => Kernel::T(StudentT::new(p[0], p[1])),
            Family::Frank => Kernel::Arch(Generator::frank(p[0])),
            Family::Gumbel => Kernel::Arch(Generator::Power { outer: Outer::Exp, delta: p[0] }),
            Family::Joe => Kernel::Arch(Generator::Plain(Outer::Sibuya { th: p[0] })),
            Family::Mtcj => Kernel::Arch(Generator::Plain(Outer::Gamma { th: p[0] })),
            Family::Bb1 => Kernel::Arch(Generator::Power { outer: Outer::Gamma { th: p[0] }, delta: p[1] }),
            Family::Bb6 => Kernel::Arch(Generator::Power { outer: Outer::Sibuya { th: p[0] }, delta: p[1] }),
            Family::Bb7 => Kernel::Arch(Generator::Bb7 { th: p[0], delta: p[1] }),
            Family::Bb8 => Kernel::Arch(Generator::bb8(p[0], p[1])),
        };
        Ok(Self { family, reflection, params: p, kernel })
    }

    pub fn independence() -> Self {
        Self::new(Family::Independence, Reflection::None, &[]).expect("independence is always valid")
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn reflection(&self) -> Reflection {
        self.reflection
    }

    pub fn params(&self) -> &[f64] {
        &self.params[..self.family.n_params()]
    }

    pub fn n_params(&self) -> usize {
        self.family.n_params()
    }

    pub fn is_independence(&self) -> bool {
        self.family == Family::Independence
    }

    // ---- unreflected, exchangeable kernel ----

    fn base_cdf(&self, u: f64, v: f64) -> f64 {
        match &self.kernel {
            Kernel::Indep => u * v,
            Kernel::Gauss(g) => g.cdf(u, v),
            Kernel::T(t) => t.cdf(u, v),
            Kernel::Arch(g) => g.psi(log_add_exp(g.ln_inv(u), g.ln_inv(v))),
        }
    }

    fn base_ln_pdf(&self, u: f64, v: f64) -> f64 {
        match &self.kernel {
            Kernel::Indep => 0.0,
            Kernel::Gauss(g) => g.ln_pdf(u, v),
            Kernel::T(t) => t.ln_pdf(u, v),
            Kernel::Arch(g) => {
                let (lu, lv) = (g.ln_inv(u), g.ln_inv(v));
                g.ln_d2(log_add_exp(lu, lv)) - g.ln_neg_d1(lu) - g.ln_neg_d1(lv)
            }
        }
    }

    /// P(A <= a | B = b) for the unreflected copula.
    fn base_h(&self, a: f64, b: f64) -> f64 {
        match &self.kernel {
            Kernel::Indep => a,
            Kernel::Gauss(g) => g.h(a, b),
            Kernel::T(t) => t.h(a, b),
            Kernel::Arch(g) => {
                let lb = g.ln_inv(b);
                let ls = log_add_exp(g.ln_inv(a), lb);
                (g.ln_neg_d1(ls) - g.ln_neg_d1(lb)).exp().min(1.0)
            }
        }
    }

    fn base_hinv(&self, alpha: f64, b: f64) -> f64 {
        match &self.kernel {
            Kernel::Indep => alpha,
            Kernel::Gauss(g) => g.hinv(alpha, b),
            Kernel::T(t) => t.hinv(alpha, b),
            Kernel::Arch(g) => match self.family {
                Family::Mtcj => {
                    let d = self.params[0];
                    let a = (-d / (1.0 + d) * alpha.ln()).exp_m1();
                    (-softplus(a.ln() - d * b.ln()) / d).exp()
                }
                Family::Frank => {
                    let d = self.params[0];
                    let (la, lc) = (alpha.ln(), (-alpha).ln_1p());
                    let num = log_add_exp(la - d, lc - d * b);
                    let den = log_add_exp(la, lc - d * b);
                    (den - num) / d
                }
                _ => arch_hinv(g, alpha, b),
            },
        }
    }

    // ---- public evaluation with reflections ----

    /// Copula CDF. Exact at the boundary of the unit square.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return v.min(1.0);
        }
        if v >= 1.0 {
            return u;
        }
        let c = match self.reflection {
            Reflection::None => self.base_cdf(u, v),
            Reflection::Survival => u + v - 1.0 + self.base_cdf(1.0 - u, 1.0 - v),
            Reflection::UFlip => v - self.base_cdf(1.0 - u, v),
            Reflection::VFlip => u - self.base_cdf(u, 1.0 - v),
        };
        c.clamp((u + v - 1.0).max(0.0), u.min(v))
    }

    pub fn ln_pdf(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp_u(u), clamp_u(v));
        match self.reflection {
            Reflection::None => self.base_ln_pdf(u, v),
            Reflection::Survival => self.base_ln_pdf(1.0 - u, 1.0 - v),
            Reflection::UFlip => self.base_ln_pdf(1.0 - u, v),
            Reflection::VFlip => self.base_ln_pdf(u, 1.0 - v),
        }
    }

    pub fn pdf(&self, u: f64, v: f64) -> f64 {
        self.ln_pdf(u, v).exp()
    }

    /// C_{2|1}(v | u).
    pub fn h21(&self, v: f64, u: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        if v >= 1.0 {
            return 1.0;
        }
        let u = clamp_u(u);
        let h = match self.reflection {
            Reflection::None => self.base_h(v, u),
            Reflection::Survival => 1.0 - self.base_h(1.0 - v, 1.0 - u),
            Reflection::UFlip => self.base_h(v, 1.0 - u),
            Reflection::VFlip => 1.0 - self.base_h(1.0 - v, u),
        };
        h.clamp(0.0, 1.0)
    }

    /// C_{1|2}(u | v).
    pub fn h12(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let v = clamp_u(v);
        let h = match self.reflection {
            Reflection::None => self.base_h(u, v),
            Reflection::Survival => 1.0 - self.base_h(1.0 - u, 1.0 - v),
            Reflection::UFlip => 1.0 - self.base_h(1.0 - u, v),
            Reflection::VFlip => self.base_h(u, 1.0 - v),
        };
        h.clamp(0.0, 1.0)
    }

    pub fn hfunc(&self, which: Conditioning, x: f64, given: f64) -> f64 {
        match which {
            Conditioning::TwoGivenOne => self.h21(x, given),
            Conditioning::OneGivenTwo => self.h12(x, given),
        }
    }

    /// Inverse of v -> C_{2|1}(v | u).
    pub fn q21(&self, alpha: f64, u: f64) -> f64 {
        if alpha <= 0.0 {
            return 0.0;
        }
        if alpha >= 1.0 {
            return 1.0;
        }
        let u = clamp_u(u);
        let v = match self.reflection {
            Reflection::None => self.base_hinv(alpha, u),
            Reflection::Survival => 1.0 - self.base_hinv(1.0 - alpha, 1.0 - u),
            Reflection::UFlip => self.base_hinv(alpha, 1.0 - u),
            Reflection::VFlip => 1.0 - self.base_hinv(1.0 - alpha, u),
        };
        v.clamp(0.0, 1.0)
    }

    /// Inverse of u -> C_{1|2}(u | v).
    pub fn q12(&self, alpha: f64, v: f64) -> f64 {
        if alpha <= 0.0 {
            return 0.0;
        }
        if alpha >= 1.0 {
            return 1.0;
        }
        let v = clamp_u(v);
        let u = match self.reflection {
            Reflection::None => self.base_hinv(alpha, v),
            Reflection::Survival => 1.0 - self.base_hinv(1.0 - alpha, 1.0 - v),
            Reflection::UFlip => 1.0 - self.base_hinv(1.0 - alpha, v),
            Reflection::VFlip => self.base_hinv(alpha, 1.0 - v),
        };
        u.clamp(0.0, 1.0)
    }

    pub fn qcond(&self, which: Conditioning, alpha: f64, given: f64) -> f64 {
        match which {
            Conditioning::TwoGivenOne => self.q21(alpha, given),
            Conditioning::OneGivenTwo => self.q12(alpha, given),
        }
    }

    /// Kendall's tau.
    pub fn tau(&self) -> f64 {
        let p = self.params;
        let base = match self.family {
            Family::Independence => 0.0,
            Family::Gaussian | Family::StudentT => 2.0 / std::f64::consts::PI * p[0].asin(),
            Family::Frank => 1.0 - 4.0 / p[0] + 4.0 * debye1(p[0]) / p[0],
            Family::Gumbel => 1.0 - 1.0 / p[0],
            Family::Mtcj => p[0] / (p[0] + 2.0),
            Family::Bb1 => 1.0 - 2.0 / (p[1] * (p[0] + 2.0)),
            Family::Joe | Family::Bb6 | Family::Bb7 | Family::Bb8 => match &self.kernel {
                Kernel::Arch(g) => g.tau_numeric(),
                _ => unreachable!(),
            },
        };
        if self.reflection.is_flip() {
            -base
        } else {
            base
        }
    }

    /// The copula of (U, 1 - V).
    pub fn flip_v(&self) -> Result<Self> {
        match self.family {
            Family::Independence => Ok(self.clone()),
            Family::Gaussian => PairCopula::new(self.family, Reflection::None, &[-self.params[0]]),
            Family::StudentT => PairCopula::new(self.family, Reflection::None, &[-self.params[0], self.params[1]]),
            _ => PairCopula::new(self.family, self.reflection.then_vflip(), self.params()),
        }
    }
}

/// Numerical inverse of the Archimedean h-function: solve
/// -psi'(s) = alpha (-psi'(t_b)) for s >= t_b on the log scale, then a = psi(s - t_b).
fn arch_hinv(g: &Generator, alpha: f64, b: f64) -> f64 {
    let lb = g.ln_inv(b);
    let target = alpha.ln() + g.ln_neg_d1(lb);
    let f = |ls: f64| g.ln_neg_d1(ls) - target;
    let mut lo = lb;
    let mut step = 1.0;
    let mut hi = lb + step;
    let mut fhi = f(hi);
    let mut guard = 0;
    while fhi > 0.0 && guard < 200 {
        lo = hi;
        step *= 2.0;
        hi = lb + step;
        fhi = f(hi);
        guard += 1;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx.is_nan() {
            x = 0.5 * (lo + hi);
            continue;
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = g.dln_neg_d1(x);
        let mut next = x - fx / d;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        let done = (next - x).abs() <= 1e-15 * x.abs().max(1.0) || (hi - lo) <= 1e-15 * x.abs().max(1.0);
        x = next;
        if done {
            break;
        }
    }
    // t_a = s - t_b
    let diff = lb - x;
    if diff >= 0.0 {
        return 1.0;
    }
    let lt = x + (-diff.exp()).ln_1p();
    g.psi(lt)
}

macro_rules! serde_by_name {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.name())
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
                String::deserialize(de)?.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_by_name!(Family);
serde_by_name!(Reflection);
