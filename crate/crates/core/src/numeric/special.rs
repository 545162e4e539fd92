//! Normal and Student-t distribution functions, Owen's T and the bivariate normal CDF.

use statrs::function::beta::{beta_reg, inv_beta_reg};
use libm::{erfc, lgamma as ln_gamma};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::quad::GaussLegendre;
use std::sync::OnceLock;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn norm_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// log Phi(x), accurate far into the lower tail.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        norm_cdf(x).ln()
    } else {
        let z = 1.0 / (x * x);
        norm_ln_pdf(x) - (-x).ln() + (1.0 - z * (1.0 - z * (3.0 - 15.0 * z))).ln()
    }
}

/// Standard normal quantile (Wichura's AS241, about 1e-16 relative accuracy).
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r0 = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r0.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Log density of Student's t with `nu` degrees of freedom.
pub fn t_ln_pdf(x: f64, nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln()
        - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

/// Student-t CDF. Uses the form of the incomplete beta that keeps precision
/// both near the centre and in the tails.
pub fn t_cdf(x: f64, nu: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let x2 = x * x;
    if x2 < nu {
        let half = 0.5 * beta_reg(0.5, 0.5 * nu, x2 / (nu + x2));
        if x < 0.0 {
            0.5 - half
        } else {
            0.5 + half
        }
    } else {
        let tail = 0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + x2));
        if x < 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }
}

/// Student-t quantile: incomplete-beta inversion followed by a Newton polish
/// on the log CDF, which restores precision lost by the inversion near p = 1/2.
pub fn t_quantile(p: f64, nu: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    if p > 0.5 {
        return -t_quantile(1.0 - p, nu);
    }
    let y = inv_beta_reg(0.5 * nu, 0.5, 2.0 * p);
    let mut x = if y > 0.0 && y < 1.0 {
        -(nu * (1.0 / y - 1.0)).sqrt()
    } else {
        norm_quantile(p)
    };
    if !x.is_finite() || x >= 0.0 {
        x = norm_quantile(p);
    }
    let lp = p.ln();
    for _ in 0..20 {
        let f = t_cdf(x, nu);
        if f <= 0.0 {
            x *= 0.5;
            continue;
        }
        let step = (f.ln() - lp) * f / t_ln_pdf(x, nu).exp();
        let mut next = x - step;
        if next >= 0.0 {
            next = 0.5 * x;
        }
        let done = (next - x).abs() <= 1e-15 * (1.0 + x.abs());
        x = next;
        if done {
            break;
        }
    }
    x
}

fn gl20() -> &'static GaussLegendre {
    static R: OnceLock<GaussLegendre> = OnceLock::new();
    R.get_or_init(|| GaussLegendre::new(20))
}

fn owen_t_small(h: f64, a: f64) -> f64 {
    let hh = 0.5 * h * h;
    gl20().integrate(|t| (-hh * (1.0 + t * t)).exp() / (1.0 + t * t), 0.0, a) / (2.0 * PI)
}

/// Owen's T function T(h, a).
pub fn owen_t(h: f64, a: f64) -> f64 {
    let h = h.abs();
    let sign = if a < 0.0 { -1.0 } else { 1.0 };
    let a = a.abs();
    if a == 0.0 {
        return 0.0;
    }
    if a <= 1.0 {
        return sign * owen_t_small(h, a);
    }
    let ah = a * h;
    let (ph, pah) = (norm_cdf(h), norm_cdf(ah));
    sign * (0.5 * ph + 0.5 * pah - ph * pah - owen_t_small(ah, 1.0 / a))
}

/// Bivariate standard normal CDF P(X <= h, Y <= k) with correlation r
/// (Drezner-Wesolowsky as refined by Genz).
pub fn bvn_cdf(h: f64, k: f64, r: f64) -> f64 {
    bvn_upper(-h, -k, r)
}

/// P(X > h, Y > k).
fn bvn_upper(dh: f64, dk: f64, r: f64) -> f64 {
    if dh == f64::INFINITY || dk == f64::INFINITY {
        return 0.0;
    }
    if dh == f64::NEG_INFINITY {
        return if dk == f64::NEG_INFINITY { 1.0 } else { norm_cdf(-dk) };
    }
    if dk == f64::NEG_INFINITY {
        return norm_cdf(-dh);
    }
    static NODES: OnceLock<[(Vec<f64>, Vec<f64>); 3]> = OnceLock::new();
    let nodes = NODES.get_or_init(|| {
        let half = |n: usize| {
            let g = GaussLegendre::new(n);
            let (x, w): (Vec<f64>, Vec<f64>) = g
                .nodes()
                .iter()
                .zip(g.weights())
                .filter(|(x, _)| **x > 0.0)
                .map(|(x, w)| (*x, *w))
                .unzip();
            (x, w)
        };
        [half(6), half(12), half(20)]
    });
    let (x, w) = if r.abs() < 0.3 {
        &nodes[0]
    } else if r.abs() < 0.75 {
        &nodes[1]
    } else {
        &nodes[2]
    };
    let (h, mut k) = (dh, dk);
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = r.asin();
        for (xi, wi) in x.iter().zip(w) {
            for s in [-1.0, 1.0] {
                let sn = (asr * (1.0 + s * xi) * 0.5).sin();
                bvn += wi * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / (4.0 * PI) + norm_cdf(-h) * norm_cdf(-k);
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let as_ = (1.0 - r) * (1.0 + r);
            let mut a = as_.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            let asr = -0.5 * (bs / as_ + hk);
            if asr > -100.0 {
                bvn = a
                    * asr.exp()
                    * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
            }
            if hk > -100.0 {
                let b = bs.sqrt();
                let sp = (2.0 * PI).sqrt() * norm_cdf(-b / a);
                bvn -= (-0.5 * hk).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a *= 0.5;
            for (xi, wi) in x.iter().zip(w) {
                for s in [-1.0, 1.0] {
                    let xs = (a * (s * xi + 1.0)).powi(2);
                    let rs = (1.0 - xs).sqrt();
                    let asr = -0.5 * (bs / xs + hk);
                    if asr > -100.0 {
                        let sp = 1.0 + c * xs * (1.0 + d * xs);
                        let ep = (-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs;
                        bvn += a * wi * asr.exp() * (ep - sp);
                    }
                }
            }
            bvn = -bvn / (2.0 * PI);
        }
        if r > 0.0 {
            bvn += norm_cdf(-h.max(k));
        } else if h >= k {
            bvn = -bvn;
        } else {
            let l = if h < 0.0 {
                norm_cdf(k) - norm_cdf(h)
            } else {
                norm_cdf(-h) - norm_cdf(-k)
            };
            bvn = l - bvn;
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// Debye function of order one, D1(x) = x^{-1} ∫_0^x t/(e^t - 1) dt, for x > 0.
pub fn debye1(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let g = gl20();
    // split the range so the integrand stays smooth on each panel
    let panels = ((x / 4.0).ceil() as usize).max(1);
    let step = x / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let a = i as f64 * step;
        total += g.integrate(
            |t| if t == 0.0 { 1.0 } else { t / t.exp_m1() },
            a,
            a + step,
        );
    }
    total / x
}

/// log(exp(a) + exp(b)) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

/// log(1 + exp(x)).
pub fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// log(exp(x) - 1) for x > 0.
pub fn ln_expm1(x: f64) -> f64 {
    if x > 35.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// sqrt(2 / pi).
pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
