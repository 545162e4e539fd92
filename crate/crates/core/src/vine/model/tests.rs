use super::*;
use crate::bicop::{Family, Reflection};
use crate::numeric::quad::composite_nodes;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x{i}")).collect()
}

fn std_normals(d: usize) -> Vec<MarginModel> {
    vec![MarginModel::normal(0.0, 1.0).unwrap(); d]
}

fn gauss(r: f64) -> PairCopula {
    PairCopula::new(Family::Gaussian, Reflection::None, &[r]).unwrap()
}

/// Multivariate normal log density with unit variances.
fn mvn_ln_pdf(r: &DMatrix<f64>, x: &[f64]) -> f64 {
    let d = x.len();
    let ch = r.clone().cholesky().unwrap();
    let xv = DVector::from_column_slice(x);
    let z = ch.l().solve_lower_triangular(&xv).unwrap();
    let ln_det: f64 = ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    -0.5 * (d as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * ln_det - 0.5 * z.norm_squared()
}

/// Correlation matrix implied by partial correlations on a vine, built
/// level by level from the partial-correlation identity.
fn implied_correlation(v: &VineArray, partial: &[Vec<f64>]) -> DMatrix<f64> {
    let d = v.dim();
    let mut r = DMatrix::<f64>::identity(d, d);
    for l in 0..d - 1 {
        for j in (l + 1)..d {
            let a = v.partner(l, j);
            let b = v.order()[j];
            let s: Vec<usize> = (0..l).map(|k| v.partner(k, j)).collect();
            let rho = partial[l][j];
            let val = if s.is_empty() {
                rho
            } else {
                let k = s.len();
                let sss = DMatrix::from_fn(k, k, |x, y| r[(s[x], s[y])]);
                let ra = DVector::from_fn(k, |x, _| r[(a, s[x])]);
                let rb = DVector::from_fn(k, |x, _| r[(b, s[x])]);
                let inv = sss.try_inverse().unwrap();
                let qa = (ra.transpose() * &inv * &ra)[(0, 0)];
                let qb = (rb.transpose() * &inv * &rb)[(0, 0)];
                let qab = (ra.transpose() * &inv * &rb)[(0, 0)];
                rho * ((1.0 - qa) * (1.0 - qb)).sqrt() + qab
            };
            r[(a, b)] = val;
            r[(b, a)] = val;
        }
    }
    r
}

fn gaussian_vine(v: &VineArray, partial: &[Vec<f64>]) -> VineModel {
    let d = v.dim();
    let edges: Vec<Vec<PairCopula>> = (0..v.truncation())
        .map(|l| (0..d).map(|j| if j > l { gauss(partial[l][j]) } else { PairCopula::independence() }).collect())
        .collect();
    VineModel::new(names(d), std_normals(d), v.clone(), edges).unwrap()
}

#[test]
fn independence_density_factorizes() {
    let v = VineArray::dvine(&[0, 1, 2], 2).unwrap();
    let m = VineModel::independence(names(3), std_normals(3), v).unwrap();
    let ld = m.log_density(&[0.0, 0.0, 0.0]).unwrap();
    assert!((ld - (-2.756_815)).abs() < 1e-6);
    assert!((ld - 3.0 * crate::numeric::special::norm_ln_pdf(0.0)).abs() < 1e-14);
}

#[test]
fn trivariate_gaussian_vine_matches_normal_density() {
    // T1 = {12, 13}, T2 = {23|1}
    let v = VineArray::from_columns(&[(0, vec![]), (1, vec![0]), (2, vec![0, 1])], 2).unwrap();
    let mut partial = vec![vec![0.0; 3]; 2];
    partial[0][1] = 0.5;
    partial[0][2] = 0.5;
    partial[1][2] = 0.39;
    let m = gaussian_vine(&v, &partial);
    let r23 = 0.39 * (0.75f64 * 0.75).sqrt() + 0.25;
    let r = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.5, 0.5, 1.0, r23, 0.5, r23, 1.0]);
    assert!((implied_correlation(&v, &partial) - &r).abs().max() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.5..2.5)).collect();
        let a = m.log_density(&x).unwrap();
        let b = mvn_ln_pdf(&r, &x);
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn four_dim_gaussian_vines_match_normal_density() {
    let arrays = [
        VineArray::dvine(&[2, 0, 3, 1], 3).unwrap(),
        VineArray::from_columns(&[(3, vec![]), (1, vec![3]), (0, vec![3, 1]), (2, vec![1, 3, 0])], 3).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for v in arrays {
        let partial: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| rng.random_range(-0.7..0.7)).collect()).collect();
        let m = gaussian_vine(&v, &partial);
        let r = implied_correlation(&v, &partial);
        let g = m.gaussian_correlation().unwrap();
        assert!((0..4).all(|i| (0..4).all(|j| (g[i][j] - r[(i, j)]).abs() < 1e-14)));
        for _ in 0..10 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = m.log_density(&x).unwrap();
            let b = mvn_ln_pdf(&r, &x);
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}

#[test]
fn binary_mixed_bivariate_density_normalizes() {
    let v = VineArray::dvine(&[0, 1], 1).unwrap();
    let margins = vec![
        MarginModel::discrete(vec![0.0, 1.0], vec![0.3, 0.7]).unwrap(),
        MarginModel::normal(1.0, 2.0).unwrap(),
    ];
    for (fam, p) in [(Family::Gumbel, vec![2.0]), (Family::Frank, vec![4.0]), (Family::Mtcj, vec![1.5])] {
        let c = PairCopula::new(fam, Reflection::None, &p).unwrap();
        let m = VineModel::new(names(2), margins.clone(), v.clone(), vec![vec![PairCopula::independence(), c]]).unwrap();
        let nodes = composite_nodes(-15.0, 17.0, 2000, 10, None);
        let rows: Vec<Vec<f64>> = [0.0, 1.0].iter().flat_map(|&x| nodes.iter().map(move |&(y, _)| vec![x, y])).collect();
        let dens = m.log_densities(&rows).unwrap();
        let total: f64 = dens.iter().zip(nodes.iter().cycle()).map(|(ld, (_, w))| ld.exp() * w).sum();
        assert!((total - 1.0).abs() < 1e-4, "{fam}: {total}");
    }
}

#[test]
fn trivariate_mixed_density_normalizes() {
    // discrete variable in the middle of a D-vine so it conditions the top edge
    let v = VineArray::dvine(&[0, 1, 2], 2).unwrap();
    let margins = vec![
        MarginModel::normal(0.0, 1.0).unwrap(),
        MarginModel::discrete(vec![0.0, 1.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap(),
        MarginModel::normal(0.0, 1.0).unwrap(),
    ];
    let mut e0 = vec![PairCopula::independence(); 3];
    e0[1] = PairCopula::new(Family::Gumbel, Reflection::None, &[1.8]).unwrap();
    e0[2] = PairCopula::new(Family::Frank, Reflection::UFlip, &[3.0]).unwrap();
    let mut e1 = vec![PairCopula::independence(); 3];
    e1[2] = PairCopula::new(Family::Mtcj, Reflection::Survival, &[1.2]).unwrap();
    let m = VineModel::new(names(3), margins, v, vec![e0, e1]).unwrap();
    let nodes = composite_nodes(-9.0, 9.0, 240, 12, None);
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    for &k in &[0.0, 1.0, 2.0] {
        for &(x, wx) in &nodes {
            for &(z, wz) in &nodes {
                rows.push(vec![x, k, z]);
                weights.push(wx * wz);
            }
        }
    }
    let total: f64 = m.log_densities(&rows).unwrap().iter().zip(&weights).map(|(l, w)| l.exp() * w).sum();
    assert!((total - 1.0).abs() < 1e-4, "{total}");
}

#[test]
fn all_discrete_bivariate_mass_sums_to_one() {
    let v = VineArray::dvine(&[0, 1], 1).unwrap();
    let margins = vec![
        MarginModel::discrete(vec![0.0, 1.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap(),
        MarginModel::discrete(vec![0.0, 1.0], vec![0.6, 0.4]).unwrap(),
    ];
    let c = PairCopula::new(Family::Joe, Reflection::VFlip, &[2.5]).unwrap();
    let m = VineModel::new(names(2), margins, v, vec![vec![PairCopula::independence(), c]]).unwrap();
    let rows: Vec<Vec<f64>> = (0..3).flat_map(|a| (0..2).map(move |b| vec![a as f64, b as f64])).collect();
    let total: f64 = m.log_densities(&rows).unwrap().iter().map(|l| l.exp()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn out_of_support_is_negative_infinity() {
    let v = VineArray::dvine(&[0, 1], 1).unwrap();
    let margins = vec![MarginModel::discrete(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap(), MarginModel::normal(0.0, 1.0).unwrap()];
    let m = VineModel::independence(names(2), margins, v).unwrap();
    assert_eq!(m.log_density(&[0.5, 0.0]).unwrap(), f64::NEG_INFINITY);
    assert!(matches!(m.log_density(&[0.0]), Err(Error::Schema(_))));
}

#[test]
fn discrete_edge_steps_are_finite_differences() {
    let c = PairCopula::new(Family::Bb1, Reflection::None, &[0.6, 1.4]).unwrap();
    let s = (0.7, 0.4);
    let w = (0.55, 0.2);
    let v = edge_v(&c, s, w, true);
    assert!((v.0 - (c.cdf(0.7, 0.55) - c.cdf(0.4, 0.55)) / 0.3).abs() < 1e-15);
    assert!((v.1 - (c.cdf(0.7, 0.2) - c.cdf(0.4, 0.2)) / 0.3).abs() < 1e-15);
    let vp = edge_vprime(&c, s, w, true);
    assert!((vp.0 - (c.cdf(0.7, 0.55) - c.cdf(0.7, 0.2)) / 0.35).abs() < 1e-15);
    let vc = edge_v(&c, (0.7, 0.7), (0.3, 0.3), false);
    assert_eq!(vc, (c.h21(0.3, 0.7), c.h21(0.3, 0.7)));
    // zero-width jump falls back to the h-function at the midpoint
    let z = edge_v(&c, (0.5, 0.5), (0.3, 0.3), true);
    assert_eq!(z.0, c.h21(0.3, 0.5));
    assert_eq!(edge_v(&PairCopula::independence(), s, w, true), w);
    assert_eq!(edge_vprime(&PairCopula::independence(), s, w, true), s);
}
