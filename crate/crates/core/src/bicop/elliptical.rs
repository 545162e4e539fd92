//! Gaussian and Student-t copula kernels.

use crate::numeric::quad;
use crate::numeric::special::{bvn_cdf, norm_cdf, norm_quantile, t_cdf, t_quantile};
use libm::lgamma;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Gauss {
    pub rho: f64,
    s: f64,
    ln_s: f64,
}

impl Gauss {
    pub fn new(rho: f64) -> Self {
        let s = ((1.0 - rho) * (1.0 + rho)).sqrt();
        Self { rho, s, ln_s: s.ln() }
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        bvn_cdf(norm_quantile(u), norm_quantile(v), self.rho)
    }

    /// Log density at normal scores (x, y).
    pub fn ln_pdf_scores(&self, x: f64, y: f64) -> f64 {
        let r = self.rho;
        -self.ln_s - (r * r * (x * x + y * y) - 2.0 * r * x * y) / (2.0 * self.s * self.s)
    }

    pub fn ln_pdf(&self, u: f64, v: f64) -> f64 {
        self.ln_pdf_scores(norm_quantile(u), norm_quantile(v))
    }

    /// P(A <= a | B = b).
    pub fn h(&self, a: f64, b: f64) -> f64 {
        norm_cdf((norm_quantile(a) - self.rho * norm_quantile(b)) / self.s)
    }

    pub fn hinv(&self, alpha: f64, b: f64) -> f64 {
        norm_cdf(self.rho * norm_quantile(b) + self.s * norm_quantile(alpha))
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct StudentT {
    pub rho: f64,
    pub nu: f64,
    s2: f64,
    lconst: f64,
}

impl StudentT {
    pub fn new(rho: f64, nu: f64) -> Self {
        let s2 = (1.0 - rho) * (1.0 + rho);
        let lconst = lgamma(0.5 * (nu + 2.0)) + lgamma(0.5 * nu) - 2.0 * lgamma(0.5 * (nu + 1.0)) - 0.5 * s2.ln();
        Self { rho, nu, s2, lconst }
    }

    /// Log density at t scores (x, y) = (T^{-1}(u), T^{-1}(v)).
    pub fn ln_pdf_scores(&self, x: f64, y: f64) -> f64 {
        let nu = self.nu;
        let q = (x * x + y * y - 2.0 * self.rho * x * y) / (nu * self.s2);
        self.lconst - 0.5 * (nu + 2.0) * q.ln_1p()
            + 0.5 * (nu + 1.0) * ((x * x / nu).ln_1p() + (y * y / nu).ln_1p())
    }

    pub fn ln_pdf(&self, u: f64, v: f64) -> f64 {
        self.ln_pdf_scores(t_quantile(u, self.nu), t_quantile(v, self.nu))
    }

    pub fn h_scores(&self, xa: f64, xb: f64) -> f64 {
        let nu = self.nu;
        let scale = ((nu + xb * xb) * self.s2 / (nu + 1.0)).sqrt();
        t_cdf((xa - self.rho * xb) / scale, nu + 1.0)
    }

    pub fn h(&self, a: f64, b: f64) -> f64 {
        self.h_scores(t_quantile(a, self.nu), t_quantile(b, self.nu))
    }

    pub fn hinv(&self, alpha: f64, b: f64) -> f64 {
        let nu = self.nu;
        let xb = t_quantile(b, nu);
        let scale = ((nu + xb * xb) * self.s2 / (nu + 1.0)).sqrt();
        t_cdf(self.rho * xb + scale * t_quantile(alpha, nu + 1.0), nu)
    }

    /// C(u, v) = ∫_0^u h(v | s) ds.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        let xv = t_quantile(v, self.nu);
        let f = |s: f64| {
            if s <= 0.0 {
                t_cdf(self.rho * ((self.nu + 1.0) / self.s2).sqrt(), self.nu + 1.0)
            } else {
                self.h_scores(xv, t_quantile(s, self.nu))
            }
        };
        quad::integrate(f, 0.0, u, 1e-14, 1e-12).clamp(0.0, u.min(v))
    }
}
