use super::*;
use crate::bicop::{Family, PairCopula, Reflection};
use crate::margins::MarginModel;
use crate::numeric::quad::integrate;
use crate::numeric::special::{norm_cdf, norm_pdf, norm_quantile};
use crate::vine::VineArray;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("v{i}")).collect()
}

fn pc(f: Family, r: Reflection, p: &[f64]) -> PairCopula {
    PairCopula::new(f, r, p).unwrap()
}

fn gauss(r: f64) -> PairCopula {
    pc(Family::Gaussian, Reflection::None, &[r])
}

fn indep() -> PairCopula {
    PairCopula::independence()
}

/// X1, X2 ~ N(0, 1), Y ~ N(1, 2^2); T1 = {X1-X2, X1-Y}, T2 = {X2-Y | X1}.
fn fig4_model() -> VineModel {
    let v = VineArray::from_columns(&[(0, vec![]), (1, vec![0]), (2, vec![0, 1])], 2).unwrap();
    let margins = vec![
        MarginModel::normal(0.0, 1.0).unwrap(),
        MarginModel::normal(0.0, 1.0).unwrap(),
        MarginModel::normal(1.0, 2.0).unwrap(),
    ];
    let edges = vec![vec![indep(), gauss(0.5), gauss(0.77)], vec![indep(), indep(), gauss(0.39)]];
    VineModel::new(names(3), margins, v, edges).unwrap()
}

/// Mean and sd of the standardized response given standardized predictors.
fn fig4_oracle(x1: f64, x2: f64) -> (f64, f64) {
    let (r12, r13) = (0.5f64, 0.77f64);
    let r23 = 0.39 * ((1.0 - r12 * r12) * (1.0 - r13 * r13)).sqrt() + r12 * r13;
    // beta = R_xx^{-1} r_xy
    let det = 1.0 - r12 * r12;
    let b1 = (r13 - r12 * r23) / det;
    let b2 = (r23 - r12 * r13) / det;
    let r2 = b1 * r13 + b2 * r23;
    (b1 * x1 + b2 * x2, (1.0 - r2).sqrt())
}

#[test]
fn independence_vine_ignores_predictors() {
    let v = VineArray::dvine(&[0, 1, 2], 2).unwrap();
    let m = VineModel::independence(names(3), vec![MarginModel::normal(0.0, 1.0).unwrap(); 3], v).unwrap();
    let opts = PredictOptions::default();
    for x in [[-2.0, 0.3], [0.0, 0.0], [1.5, -0.7]] {
        let cd = ConditionalDistribution::new(&m, &[x[0], x[1], f64::NAN]).unwrap();
        for u in [0.0, 0.1, 0.5, 0.93, 1.0] {
            assert_eq!(cd.cdf_u(u), u);
        }
        assert!((cd.quantile(0.9, &opts).unwrap() - norm_quantile(0.9)).abs() < 1e-9);
        assert!(cd.mean(&opts).unwrap().abs() < 1e-6);
    }
}

#[test]
fn gaussian_vine_matches_normal_conditioning() {
    let m = fig4_model();
    let opts = PredictOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..20 {
        let x1 = rng.random_range(-2.5..2.5);
        let x2 = rng.random_range(-2.5..2.5);
        let u: f64 = rng.random_range(0.001..0.999);
        let cd = ConditionalDistribution::new(&m, &[x1, x2, 0.0]).unwrap();
        let (mu, sd) = fig4_oracle(x1, x2);
        let want = norm_cdf((norm_quantile(u) - mu) / sd);
        assert!((cd.cdf_u(u) - want).abs() < 1e-8);
        let alpha: f64 = rng.random_range(0.01..0.99);
        let q = cd.quantile(alpha, &opts).unwrap();
        assert!((q - (1.0 + 2.0 * (mu + sd * norm_quantile(alpha)))).abs() < 1e-6, "{q}");
        let mean = cd.mean(&opts).unwrap();
        assert!((mean - (1.0 + 2.0 * mu)).abs() < 1e-5);
        let y = 1.0 + 2.0 * (mu + sd * rng.random_range(-2.0..2.0));
        let want_ld = norm_pdf(((y - 1.0) / 2.0 - mu) / sd).ln() - (2.0 * sd).ln();
        assert!((cd.ln_pdf(y) - want_ld).abs() < 1e-8);
    }
}

#[test]
fn quadrature_refinement_is_stable() {
    // Gaussian links with skewed predictors; non-Gaussian links leave an
    // endpoint singularity in the quantile function that 25 nodes resolve
    // only to about 1e-4
    let m = fig4_model();
    let v = VineArray::from_columns(&[(0, vec![]), (1, vec![0]), (2, vec![0, 1])], 2).unwrap();
    let edges = vec![vec![indep(), gauss(-0.3), gauss(0.6)], vec![indep(), indep(), gauss(0.45)]];
    let skewed_x = VineModel::new(
        names(3),
        vec![
            MarginModel::skew_normal(0.0, 1.0, 4.0).unwrap(),
            MarginModel::skew_normal(0.0, 2.0, -2.0).unwrap(),
            MarginModel::normal(0.0, 1.5).unwrap(),
        ],
        v,
        edges,
    )
    .unwrap();
    let o25 = PredictOptions::default();
    let o50 = PredictOptions { quad_nodes: 50, ..o25 };
    for model in [&m, &skewed_x] {
        for x in [[0.3, -0.2], [1.0, 1.0], [-1.5, 0.5]] {
            let cd = ConditionalDistribution::new(model, &[x[0], x[1], 0.0]).unwrap();
            let a = cd.mean(&o25).unwrap();
            let b = cd.mean(&o50).unwrap();
            assert!((a - b).abs() < 1e-5, "{a} {b}");
        }
    }
}

/// p(u | x) by integrating the joint density over the response.
fn brute_force_cdf(m: &VineModel, x: &[f64], u: f64) -> f64 {
    let d = m.dim();
    let y_var = m.structure().order()[d - 1];
    let ym = &m.margins()[y_var];
    let dens = |v: f64| {
        if v <= 0.0 || v >= 1.0 {
            return 0.0;
        }
        let y = ym.quantile(v);
        let mut row = x.to_vec();
        row[y_var] = y;
        // copula density in v: joint density over the response margin density
        (m.log_density(&row).unwrap() - ym.ln_pdf(y)).exp()
    };
    let num = integrate(dens, 0.0, u, 1e-12, 1e-10);
    let den = num + integrate(dens, u, 1.0, 1e-12, 1e-10);
    num / den
}

#[test]
fn recursion_matches_integration_for_non_gaussian_vines() {
    let v = VineArray::from_columns(&[(1, vec![]), (0, vec![1]), (2, vec![1, 0])], 2).unwrap();
    let edges = vec![
        vec![indep(), pc(Family::Bb1, Reflection::None, &[0.5, 1.4]), pc(Family::Joe, Reflection::VFlip, &[1.8])],
        vec![indep(), indep(), pc(Family::StudentT, Reflection::None, &[0.3, 5.0])],
    ];
    let m = VineModel::new(names(3), vec![MarginModel::normal(0.0, 1.0).unwrap(); 3], v, edges).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), 0.0];
        let u: f64 = rng.random_range(0.02..0.98);
        let cd = ConditionalDistribution::new(&m, &x).unwrap();
        let a = cd.cdf_u(u);
        let b = brute_force_cdf(&m, &x, u);
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }
}

fn binary_response_model(rho: f64, p0: f64, x_discrete: bool) -> VineModel {
    let v = VineArray::dvine(&[0, 1], 1).unwrap();
    let xm = if x_discrete {
        MarginModel::discrete(vec![0.0, 1.0], vec![0.4, 0.6]).unwrap()
    } else {
        MarginModel::normal(0.0, 1.0).unwrap()
    };
    let ym = MarginModel::discrete(vec![0.0, 1.0], vec![p0, 1.0 - p0]).unwrap();
    VineModel::new(names(2), vec![xm, ym], v, vec![vec![indep(), gauss(rho)]]).unwrap()
}

#[test]
fn binary_response_matches_latent_normal_oracle() {
    let (rho, p0) = (0.6, 0.35);
    let b = norm_quantile(p0);
    let m = binary_response_model(rho, p0, false);
    for x in [-1.5, -0.2, 0.0, 0.8, 2.1] {
        let cd = ConditionalDistribution::new(&m, &[x, 0.0]).unwrap();
        let pmf = cd.pmf().unwrap();
        let want0 = norm_cdf((b - rho * x) / (1.0 - rho * rho).sqrt());
        assert!((pmf[0] - want0).abs() < 1e-5);
        assert!((pmf[1] - (1.0 - want0)).abs() < 1e-5);
    }
    // binary predictor: rectangle probabilities by one-dimensional integration
    let m = binary_response_model(rho, p0, true);
    let a = norm_quantile(0.4);
    let rect = integrate(|z| norm_pdf(z) * norm_cdf((b - rho * z) / (1.0 - rho * rho).sqrt()), -40.0, a, 1e-14, 1e-12);
    let cd = ConditionalDistribution::new(&m, &[0.0, 0.0]).unwrap();
    let pmf = cd.pmf().unwrap();
    assert!((pmf[0] - rect / 0.4).abs() < 1e-5, "{} {}", pmf[0], rect / 0.4);
    let cd1 = ConditionalDistribution::new(&m, &[1.0, 0.0]).unwrap();
    assert!((cd1.pmf().unwrap()[0] - (p0 - rect) / 0.6).abs() < 1e-5);
    assert!((cd.ln_pdf(0.0) - pmf[0].ln()).abs() < 1e-12);
    assert_eq!(cd.mean(&PredictOptions::default()).unwrap(), pmf[1]);
}

#[test]
fn independent_binary_response_gives_marginal_proportions() {
    let v = VineArray::dvine(&[0, 1], 1).unwrap();
    let ym = MarginModel::discrete(vec![0.0, 1.0, 4.0], vec![0.2, 0.5, 0.3]).unwrap();
    let m = VineModel::independence(names(2), vec![MarginModel::normal(0.0, 1.0).unwrap(), ym], v).unwrap();
    let cd = ConditionalDistribution::new(&m, &[0.7, 0.0]).unwrap();
    let pmf = cd.pmf().unwrap();
    for (a, b) in pmf.iter().zip([0.2, 0.5, 0.3]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    let opts = PredictOptions::default();
    assert_eq!(cd.quantile(0.1, &opts).unwrap(), 0.0);
    assert_eq!(cd.quantile(0.6, &opts).unwrap(), 1.0);
    assert_eq!(cd.quantile(0.75, &opts).unwrap(), 4.0);
}

#[test]
fn response_must_be_last() {
    let m = fig4_model();
    assert!(check_response(&m, 2).is_ok());
    assert!(matches!(check_response(&m, 0), Err(Error::UnsupportedStructure(_))));
    assert!(matches!(ConditionalDistribution::new(&m, &[0.0]), Err(Error::Schema(_))));
    let cd = ConditionalDistribution::new(&m, &[0.0, 0.0, 0.0]).unwrap();
    assert!(matches!(cd.quantile(1.0, &PredictOptions::default()), Err(Error::Domain(_))));
}

#[test]
fn bayes_rule_cases() {
    let p = posterior_from_log_densities(&[-3.0, -3.0], &[0.3, 0.7]).unwrap();
    assert!((p.probs[0] - 0.3).abs() < 1e-15 && (p.probs[1] - 0.7).abs() < 1e-15);
    let p = posterior_from_log_densities(&[-1.0, 5.0], &[1.0, 0.0]).unwrap();
    assert_eq!(p.probs, vec![1.0, 0.0]);
    let p = posterior_from_log_densities(&[f64::NEG_INFINITY, f64::NEG_INFINITY], &[0.5, 0.5]).unwrap();
    assert!(p.underflow);
    assert_eq!(p.probs, vec![0.5, 0.5]);
    // a common factor on every density changes nothing
    let a = posterior_from_log_densities(&[-2.0, -4.5, -3.1], &[0.2, 0.5, 0.3]).unwrap();
    let b = posterior_from_log_densities(&[-802.0, -804.5, -803.1], &[0.2, 0.5, 0.3]).unwrap();
    for (x, y) in a.probs.iter().zip(&b.probs) {
        assert!((x - y).abs() < 1e-13);
    }
    assert!(posterior_from_log_densities(&[0.0], &[0.5]).is_err());
}

#[test]
fn bayes_matches_quadratic_discriminant() {
    let v = VineArray::dvine(&[0, 1], 1).unwrap();
    let class = |mu: [f64; 2], sd: [f64; 2], rho: f64| {
        let margins = vec![MarginModel::normal(mu[0], sd[0]).unwrap(), MarginModel::normal(mu[1], sd[1]).unwrap()];
        VineModel::new(names(2), margins, v.clone(), vec![vec![indep(), gauss(rho)]]).unwrap()
    };
    let params = [([0.0, 0.0], [1.0, 1.0], 0.3), ([1.0, -0.5], [1.5, 0.8], -0.4)];
    let models: Vec<VineModel> = params.iter().map(|&(m, s, r)| class(m, s, r)).collect();
    let priors = [0.35, 0.65];
    let bvn = |x: [f64; 2], (mu, sd, r): ([f64; 2], [f64; 2], f64)| {
        let z0 = (x[0] - mu[0]) / sd[0];
        let z1 = (x[1] - mu[1]) / sd[1];
        let q = (z0 * z0 - 2.0 * r * z0 * z1 + z1 * z1) / (1.0 - r * r);
        (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * sd[0] * sd[1] * (1.0 - r * r).sqrt())
    };
    for x in [[0.0, 0.0], [1.2, -0.3], [-1.0, 2.0], [3.0, -2.0]] {
        let post = bayes_classify(&models, &priors, &x).unwrap();
        let f: Vec<f64> = params.iter().zip(priors).map(|(&p, pr)| pr * bvn(x, p)).collect();
        let want = f[0] / (f[0] + f[1]);
        assert!((post.probs[0] - want).abs() < 1e-6);
    }
}

fn random_model(seed: u64) -> VineModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fams = [
        (Family::Gaussian, vec![0.6]),
        (Family::StudentT, vec![-0.4, 6.0]),
        (Family::Frank, vec![4.0]),
        (Family::Gumbel, vec![1.8]),
        (Family::Joe, vec![1.6]),
        (Family::Mtcj, vec![1.1]),
        (Family::Bb1, vec![0.4, 1.3]),
        (Family::Bb6, vec![1.3, 1.2]),
        (Family::Bb7, vec![1.4, 0.6]),
        (Family::Bb8, vec![2.5, 0.7]),
    ];
    let mut pick = || {
        let (f, p) = &fams[rng.random_range(0..fams.len())];
        let refl = f.reflections();
        let r = refl[rng.random_range(0..refl.len())];
        pc(*f, r, p)
    };
    let v = VineArray::from_columns(&[(2, vec![]), (0, vec![2]), (3, vec![2, 0]), (1, vec![0, 2, 3])], 3).unwrap();
    let edges = vec![
        vec![indep(), pick(), pick(), pick()],
        vec![indep(), indep(), pick(), pick()],
        vec![indep(), indep(), indep(), pick()],
    ];
    let margins = vec![
        MarginModel::normal(0.0, 1.0).unwrap(),
        MarginModel::skew_normal(0.5, 2.0, -2.0).unwrap(),
        MarginModel::discrete(vec![0.0, 1.0, 2.0], vec![0.3, 0.3, 0.4]).unwrap(),
        MarginModel::normal(1.0, 0.5).unwrap(),
    ];
    VineModel::new(names(4), margins, v, edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conditional_cdf_is_monotone(seed in 0u64..10_000, x0 in -2.5f64..2.5, x2 in 0u8..3, x3 in -1.0f64..3.0) {
        let m = random_model(seed);
        let cd = ConditionalDistribution::new(&m, &[x0, 0.0, x2 as f64, x3]).unwrap();
        prop_assert_eq!(cd.cdf_u(0.0), 0.0);
        prop_assert_eq!(cd.cdf_u(1.0), 1.0);
        let mut prev = 0.0;
        for k in 0..=100 {
            let p = cd.cdf_u(k as f64 / 100.0);
            prop_assert!(p >= prev - 1e-12, "{} < {} at {}", p, prev, k);
            prev = p;
        }
    }

    #[test]
    fn quantile_round_trip(seed in 0u64..10_000, x0 in -2.5f64..2.5, x2 in 0u8..3, alpha in 0.01f64..0.99) {
        let m = random_model(seed);
        let cd = ConditionalDistribution::new(&m, &[x0, 0.0, x2 as f64, 1.0]).unwrap();
        let u = cd.quantile_u(alpha, &PredictOptions::default()).unwrap();
        prop_assert!((cd.cdf_u(u) - alpha).abs() < 1e-7);
    }
}
