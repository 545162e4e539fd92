//! Archimedean generators evaluated on the log scale.
//!
//! Every generator works with `ls = ln s` so that very small and very large
//! arguments stay representable. With t = psi^{-1}, the copula is
//! C(u, v) = psi(t(u) + t(v)).

use crate::numeric::quad;
use crate::numeric::special::{ln_expm1, log_add_exp, softplus};

/// Inner generator families that can be composed with a power transform.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Outer {
    /// psi(x) = exp(-x)
    Exp,
    /// psi(x) = (1 + x)^{-1/theta}
    Gamma { th: f64 },
    /// psi(x) = 1 - (1 - exp(-x))^{1/theta}
    Sibuya { th: f64 },
}

impl Outer {
    fn psi(&self, x: f64, lx: f64) -> f64 {
        match *self {
            Outer::Exp => (-x).exp(),
            Outer::Gamma { th } => (-softplus(lx) / th).exp(),
            Outer::Sibuya { th } => -(ln_one_minus_exp_neg(x, lx) / th).exp_m1(),
        }
    }

    fn ln_neg_d1(&self, x: f64, lx: f64) -> f64 {
        match *self {
            Outer::Exp => -x,
            Outer::Gamma { th } => -th.ln() - (1.0 / th + 1.0) * softplus(lx),
            Outer::Sibuya { th } => -th.ln() + (1.0 / th - 1.0) * ln_one_minus_exp_neg(x, lx) - x,
        }
    }

    fn ln_d2(&self, x: f64, lx: f64) -> f64 {
        match *self {
            Outer::Exp => -x,
            Outer::Gamma { th } => {
                (1.0 / th).ln() + (1.0 / th + 1.0).ln() - (1.0 / th + 2.0) * softplus(lx)
            }
            Outer::Sibuya { th } => {
                -th.ln() - x + (1.0 / th - 2.0) * ln_one_minus_exp_neg(x, lx)
                    + (-(-x).exp() / th).ln_1p()
            }
        }
    }

    /// ln psi^{-1}(u)
    fn ln_inv(&self, u: f64) -> f64 {
        match *self {
            Outer::Exp => (-u.ln()).ln(),
            Outer::Gamma { th } => ln_expm1(-th * u.ln()),
            Outer::Sibuya { th } => {
                let q = (th * (-u).ln_1p()).exp();
                if q < 0.5 {
                    (-(-q).ln_1p()).ln()
                } else {
                    (-(-(th * (-u).ln_1p()).exp_m1()).ln()).ln()
                }
            }
        }
    }
}

/// ln(1 - exp(-x)) given x and ln x.
fn ln_one_minus_exp_neg(x: f64, lx: f64) -> f64 {
    if x < 1e-10 {
        lx - 0.5 * x
    } else {
        (-(-x).exp_m1()).ln()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Generator {
    /// psi applied directly to s.
    Plain(Outer),
    /// psi(s) = outer(s^{1/delta}), delta >= 1 (Gumbel, BB1, BB6).
    Power { outer: Outer, delta: f64 },
    Frank { delta: f64, ln_a: f64, a: f64 },
    /// psi(s) = sibuya_theta(ln(1 + s) / delta)
    Bb7 { th: f64, delta: f64 },
    /// psi(s) = [1 - (1 - eta e^{-s})^{1/theta}] / delta
    Bb8 { th: f64, delta: f64, eta: f64, base: f64 },
}

impl Generator {
    pub(crate) fn frank(delta: f64) -> Self {
        let a = -(-delta).exp_m1();
        Generator::Frank { delta, ln_a: a.ln(), a }
    }

    pub(crate) fn bb8(th: f64, delta: f64) -> Self {
        let base = (1.0 - delta).powf(th);
        Generator::Bb8 { th, delta, eta: 1.0 - base, base }
    }

    pub(crate) fn psi(&self, ls: f64) -> f64 {
        match *self {
            Generator::Plain(o) => o.psi(ls.exp(), ls),
            Generator::Power { outer, delta } => {
                let lx = ls / delta;
                outer.psi(lx.exp(), lx)
            }
            Generator::Frank { delta, .. } => -self.frank_ln1mz(ls) / delta,
            Generator::Bb7 { th, delta } => {
                let (x, lx) = bb7_x(ls, delta);
                Outer::Sibuya { th }.psi(x, lx)
            }
            Generator::Bb8 { th, delta, .. } => -(self.bb8_ln_g(ls) / th).exp_m1() / delta,
        }
    }

    /// ln(-psi'(s))
    pub(crate) fn ln_neg_d1(&self, ls: f64) -> f64 {
        match *self {
            Generator::Plain(o) => o.ln_neg_d1(ls.exp(), ls),
            Generator::Power { outer, delta } => {
                let lx = ls / delta;
                outer.ln_neg_d1(lx.exp(), lx) + lx - delta.ln() - ls
            }
            Generator::Frank { delta, ln_a, .. } => {
                -delta.ln() + (ln_a - ls.exp()) - self.frank_ln1mz(ls)
            }
            Generator::Bb7 { th, delta } => {
                let (x, lx) = bb7_x(ls, delta);
                Outer::Sibuya { th }.ln_neg_d1(x, lx) - delta.ln() - softplus(ls)
            }
            Generator::Bb8 { th, delta, eta, .. } => {
                let ln_y = eta.ln() - ls.exp();
                -delta.ln() - th.ln() + (1.0 / th - 1.0) * self.bb8_ln_g(ls) + ln_y
            }
        }
    }

    /// ln psi''(s)
    pub(crate) fn ln_d2(&self, ls: f64) -> f64 {
        match *self {
            Generator::Plain(o) => o.ln_d2(ls.exp(), ls),
            Generator::Power { outer, delta } => {
                let lx = ls / delta;
                let x = lx.exp();
                let ld = delta.ln();
                let second = if delta > 1.0 {
                    outer.ln_neg_d1(x, lx) + (1.0 - 1.0 / delta).ln()
                } else {
                    f64::NEG_INFINITY
                };
                lx - ld - 2.0 * ls + log_add_exp(outer.ln_d2(x, lx) + lx - ld, second)
            }
            Generator::Frank { delta, ln_a, .. } => {
                -delta.ln() + (ln_a - ls.exp()) - 2.0 * self.frank_ln1mz(ls)
            }
            Generator::Bb7 { th, delta } => {
                let (x, lx) = bb7_x(ls, delta);
                let o = Outer::Sibuya { th };
                let ln_tp = -delta.ln() - softplus(ls);
                2.0 * ln_tp + log_add_exp(o.ln_d2(x, lx), delta.ln() + o.ln_neg_d1(x, lx))
            }
            Generator::Bb8 { th, delta, eta, .. } => {
                let ln_y = eta.ln() - ls.exp();
                -delta.ln() - th.ln() + ln_y + (1.0 / th - 2.0) * self.bb8_ln_g(ls)
                    + (-ln_y.exp() / th).ln_1p()
            }
        }
    }

    /// ln psi^{-1}(u) for u in (0, 1).
    pub(crate) fn ln_inv(&self, u: f64) -> f64 {
        match *self {
            Generator::Plain(o) => o.ln_inv(u),
            Generator::Power { outer, delta } => delta * outer.ln_inv(u),
            Generator::Frank { delta, .. } => {
                // q = 1 - expm1(-delta u) / expm1(-delta)
                let q = (-delta * u).exp() * (-delta * (1.0 - u)).exp_m1() / (-delta).exp_m1();
                let s = if q < 0.5 {
                    -(-q).ln_1p()
                } else {
                    -((-delta * u).exp_m1() / (-delta).exp_m1()).ln()
                };
                s.ln()
            }
            Generator::Bb7 { th, delta } => {
                let lx = Outer::Sibuya { th }.ln_inv(u);
                let y = delta * lx.exp();
                if y < 1e-10 {
                    delta.ln() + lx + 0.5 * y
                } else {
                    ln_expm1(y)
                }
            }
            Generator::Bb8 { th, delta, eta, base } => {
                let r = if base > 0.0 { delta * (1.0 - u) / (1.0 - delta) } else { f64::INFINITY };
                let q = if r <= 1.0 {
                    base * (th * r.ln_1p()).exp_m1() / eta
                } else {
                    ((th * (-delta * u).ln_1p()).exp() - base) / eta
                };
                let s = if q > 0.5 {
                    eta.ln() - (-(th * (-delta * u).ln_1p()).exp_m1()).ln()
                } else {
                    -(-q).ln_1p()
                };
                s.ln()
            }
        }
    }

    /// d/d(ln s) of ln(-psi'(s)); always negative.
    pub(crate) fn dln_neg_d1(&self, ls: f64) -> f64 {
        -(ls + self.ln_d2(ls) - self.ln_neg_d1(ls)).exp()
    }

    fn frank_ln1mz(&self, ls: f64) -> f64 {
        if let Generator::Frank { delta, a, .. } = *self {
            // 1 - a e^{-s} = e^{-delta} - a (e^{-s} - 1)
            ((-delta).exp() - a * (-ls.exp()).exp_m1()).ln()
        } else {
            unreachable!()
        }
    }

    fn bb8_ln_g(&self, ls: f64) -> f64 {
        if let Generator::Bb8 { eta, base, .. } = *self {
            // 1 - eta e^{-s} = (1-delta)^theta - eta (e^{-s} - 1)
            (base - eta * (-ls.exp()).exp_m1()).ln()
        } else {
            unreachable!()
        }
    }

    /// Kendall's tau via 1 - 4 ∫ s psi'(s)^2 ds, integrated over y = ln s.
    pub(crate) fn tau_numeric(&self) -> f64 {
        let f = |y: f64| (2.0 * (y + self.ln_neg_d1(y))).exp();
        // locate the peak on a coarse grid, then walk out to where the integrand is negligible
        let (mut peak_y, mut peak) = (0.0, 0.0);
        let mut y = -200.0;
        while y <= 60.0 {
            let v = f(y);
            if v > peak {
                peak = v;
                peak_y = y;
            }
            y += 0.5;
        }
        let cutoff = peak * 1e-18;
        let mut lo = peak_y;
        while f(lo) > cutoff && lo > -5000.0 {
            lo -= 1.0;
        }
        let mut hi = peak_y;
        while f(hi) > cutoff && hi < 700.0 {
            hi += 1.0;
        }
        let mut total = 0.0;
        let mut a = lo;
        while a < hi {
            let b = (a + 1.0).min(hi);
            total += quad::integrate(f, a, b, 1e-16, 1e-12);
            a = b;
        }
        1.0 - 4.0 * total
    }
}

fn bb7_x(ls: f64, delta: f64) -> (f64, f64) {
    let l1p = softplus(ls);
    let ln_l1p = if ls < -30.0 { ls - 0.5 * ls.exp() } else { l1p.ln() };
    (l1p / delta, ln_l1p - delta.ln())
}
