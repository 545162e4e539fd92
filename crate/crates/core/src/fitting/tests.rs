use super::*;
use crate::bicop::Reflection;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("v{i}")).collect()
}

/// Rows from an equicorrelated normal vector with the last column
/// y = sum(beta * x) + sigma * eps.
fn linear_data(n: usize, p: usize, rho: f64, beta: &[f64], sigma: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let common: f64 = rng.sample(StandardNormal);
            let mut row: Vec<f64> = (0..p)
                .map(|_| {
                    let e: f64 = rng.sample(StandardNormal);
                    rho.sqrt() * common + (1.0 - rho).sqrt() * e
                })
                .collect();
            let eps: f64 = rng.sample(StandardNormal);
            let y = row.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>() + sigma * eps;
            row.push(y);
            row
        })
        .collect()
}

fn dataset(rows: Vec<Vec<f64>>) -> Dataset {
    let d = rows[0].len();
    let ds = Dataset::new(names(d), vec![ColumnKind::Continuous; d], rows).unwrap();
    let last = format!("v{}", d - 1);
    ds.with_response(&last).unwrap()
}

fn independence_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

fn all_edges(f: &FittedModel) -> Vec<PairCopula> {
    let m = &f.model;
    let d = m.dim();
    (0..m.truncation()).flat_map(|l| ((l + 1)..d).map(move |j| m.copula(l, j).clone())).collect()
}

#[test]
fn config_defaults_and_parsing() {
    let c = FitConfig::from_json(r#"{"structure":"dvine","candidates":["gaussian","clayton"],"criterion":"bic","seed":7}"#).unwrap();
    assert_eq!(c.structure, StructureMode::Dvine);
    assert_eq!(c.candidates, vec![Family::Gaussian, Family::Mtcj]);
    assert_eq!(c.criterion, Criterion::Bic);
    assert_eq!(c.seed, 7);
    assert!(FitConfig::from_json(r#"{"bogus":1}"#).is_err());
    let empty = FitConfig { candidates: vec![], ..Default::default() };
    assert!(empty.validate(3).is_err());
    let bad_trunc = FitConfig { truncation: Some(3), ..Default::default() };
    assert!(bad_trunc.validate(3).is_err());
    assert_eq!("gaussian-only".parse::<StructureMode>().unwrap(), StructureMode::Gaussian);
}

#[test]
fn gaussian_copula_data_selects_gaussian() {
    let mut hits = 0;
    let g = PairCopula::new(Family::Gaussian, Reflection::None, &[0.8]).unwrap();
    for rep in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep);
        let (u, v): (Vec<f64>, Vec<f64>) = (0..2000)
            .map(|_| {
                let a: f64 = rng.random();
                let w: f64 = rng.random();
                (a, g.q21(w, a))
            })
            .unzip();
        let data = EdgeData::continuous(u, v);
        let f = select_family(&data, &[Family::Gaussian, Family::Frank], Criterion::Aic).unwrap();
        if f.copula.family() == Family::Gaussian {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits}");
}

#[test]
fn independent_data_selects_independence_under_bic() {
    let ds = dataset(independence_rows(2000, 5, 11));
    let cfg = FitConfig { criterion: Criterion::Bic, ..Default::default() };
    let f = fit(&ds, &cfg).unwrap();
    for c in all_edges(&f) {
        assert!(c.is_independence(), "{c:?}");
    }
}

#[test]
fn response_is_a_leaf_and_last() {
    let ds = dataset(linear_data(400, 4, 0.5, &[1.0, 0.5, 0.2, 0.0], 1.0, 3));
    for mode in [StructureMode::Rvine, StructureMode::Dvine, StructureMode::Gaussian] {
        let cfg = FitConfig { structure: mode, ..Default::default() };
        let f = fit(&ds, &cfg).unwrap();
        let v = f.model.structure();
        assert_eq!(v.order()[4], 4);
        for l in 0..4 {
            for j in (l + 1)..4 {
                assert_ne!(v.order()[v.entry(l, j)], 4);
            }
        }
    }
}

#[test]
fn gaussian_mode_uses_gaussian_edges_only() {
    let ds = dataset(linear_data(500, 3, 0.5, &[1.0, 1.0, 1.0], 1.0, 5));
    let cfg = FitConfig { structure: StructureMode::Gaussian, ..Default::default() };
    let f = fit(&ds, &cfg).unwrap();
    for c in all_edges(&f) {
        assert_eq!(c.family(), Family::Gaussian);
    }
}

#[test]
fn reported_criteria_match_recomputed_loglik() {
    let ds = dataset(linear_data(500, 3, 0.5, &[1.0, 0.5, 0.0], 1.0, 9));
    let f = fit(&ds, &FitConfig::default()).unwrap();
    let ll = f.model.copula_loglik(ds.rows()).unwrap();
    let k = f.model.n_params() as f64;
    assert!((f.aic() - (-2.0 * ll + 2.0 * k)).abs() < 1e-9);
    assert!((f.bic() - (-2.0 * ll + 500f64.ln() * k)).abs() < 1e-9);
}

#[test]
fn fitting_is_deterministic() {
    let ds = dataset(linear_data(300, 3, 0.5, &[1.0, 0.5, 0.3], 1.0, 2));
    for mode in [StructureMode::Rvine, StructureMode::Dvine] {
        let cfg = FitConfig { structure: mode, ..Default::default() };
        let a = fit(&ds, &cfg).unwrap();
        let b = fit(&ds, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.copula_loglik.to_bits(), b.copula_loglik.to_bits());
    }
}

#[test]
fn richer_candidates_and_deeper_trees_do_not_lower_loglik() {
    let ds = dataset(linear_data(600, 3, 0.5, &[2.0, 1.0, 0.5], 1.0, 21));
    let full = fit(&ds, &FitConfig::default()).unwrap();
    let arr = full.model.structure().to_raw();
    let fixed = |cands: Vec<Family>, t: Option<usize>| FitConfig {
        structure: StructureMode::Fixed,
        array: Some(arr.clone()),
        candidates: cands,
        truncation: t,
        ..Default::default()
    };
    let gauss = fit(&ds, &fixed(vec![Family::Gaussian], None)).unwrap();
    assert!(full.copula_loglik >= gauss.copula_loglik, "{} < {}", full.copula_loglik, gauss.copula_loglik);
    let mut prev = f64::NEG_INFINITY;
    for t in 1..=3 {
        let f = fit(&ds, &fixed(Family::ALL.to_vec(), Some(t))).unwrap();
        assert!(f.copula_loglik >= prev);
        prev = f.copula_loglik;
    }
}

#[test]
fn fixed_array_is_kept() {
    let ds = dataset(linear_data(200, 2, 0.5, &[1.0, 1.0], 1.0, 4));
    let raw = vec![vec![2, 2, 1], vec![0, 1, 2], vec![0, 0, 3]];
    let cfg = FitConfig { structure: StructureMode::Fixed, array: Some(raw.clone()), ..Default::default() };
    let f = fit(&ds, &cfg).unwrap();
    assert_eq!(f.model.structure().to_raw(), raw);
    // a response that is not a leaf cannot be placed last
    let mid = vec![vec![1, 1, 3], vec![0, 3, 1], vec![0, 0, 2]];
    let cfg = FitConfig { structure: StructureMode::Fixed, array: Some(mid), ..Default::default() };
    assert!(matches!(fit(&ds, &cfg), Err(Error::UnsupportedStructure(_))));
}

#[test]
fn dvine_path_starts_at_the_strongest_predictor() {
    let ds = dataset(linear_data(500, 2, 0.2, &[0.3, 1.5], 1.0, 8));
    let cfg = FitConfig { structure: StructureMode::Dvine, ..Default::default() };
    let f = fit(&ds, &cfg).unwrap();
    let v = f.model.structure();
    assert_eq!(v.order()[v.entry(0, 2)], 1);
}

#[test]
fn single_predictor_modes_agree() {
    let ds = dataset(linear_data(300, 1, 0.0, &[1.0], 1.0, 6));
    let a = fit(&ds, &FitConfig::default()).unwrap();
    let b = fit(&ds, &FitConfig { structure: StructureMode::Dvine, ..Default::default() }).unwrap();
    assert_eq!(a.model.structure(), b.model.structure());
    assert_eq!(a.model, b.model);
}

#[test]
fn dvine_drops_irrelevant_predictors() {
    // v2 and v3 are noise
    let ds = dataset(linear_data(1000, 4, 0.0, &[2.0, 1.0, 0.0, 0.0], 1.0, 13));
    let cfg = FitConfig { structure: StructureMode::Dvine, criterion: Criterion::Bic, ..Default::default() };
    let f = fit(&ds, &cfg).unwrap();
    let v = f.model.structure();
    assert_eq!(v.order()[v.entry(0, 4)], 0);
    assert_eq!(v.order()[v.entry(1, 4)], 1);
    assert!(!f.model.copula(0, 4).is_independence());
    for l in 2..4 {
        assert!(f.model.copula(l, 4).is_independence());
    }
    assert!(f.warnings.iter().any(|w| w.contains("not selected")));
}

#[test]
fn mixed_data_with_an_ordinal_column() {
    let mut rows = linear_data(400, 2, 0.5, &[1.0, 1.0], 1.0, 17);
    for r in rows.iter_mut() {
        r[1] = if r[1] > 0.3 { 1.0 } else { 0.0 };
    }
    let ds = Dataset::new(names(3), vec![ColumnKind::Continuous, ColumnKind::Ordinal, ColumnKind::Continuous], rows)
        .unwrap()
        .with_response("v2")
        .unwrap();
    let f = fit(&ds, &FitConfig::default()).unwrap();
    assert!(f.model.margins()[1].is_discrete());
    let ll = f.model.copula_loglik(ds.rows()).unwrap();
    assert!((ll - f.copula_loglik).abs() < 1e-6 * ll.abs().max(1.0));
    assert!(ll > 50.0);
}

#[test]
fn tiny_samples_fall_back_to_independence() {
    let ds = dataset(linear_data(6, 2, 0.5, &[1.0, 1.0], 1.0, 1));
    let cfg = FitConfig { default_margin: MarginKind::Normal, ..Default::default() };
    let f = fit(&ds, &cfg).unwrap();
    assert!(all_edges(&f).iter().all(|c| c.is_independence()));
    assert!(!f.warnings.is_empty());
}

#[test]
fn predictor_structure_for_three_variables() {
    let mut r = vec![vec![1.0; 3]; 3];
    r[0][1] = 0.9;
    r[1][0] = 0.9;
    r[0][2] = 0.8;
    r[2][0] = 0.8;
    r[1][2] = 0.1;
    r[2][1] = 0.1;
    let v = learn_predictor_structure(&r, &[0, 1, 2], 2).unwrap();
    let e = v.edge_sets();
    assert_eq!(e[0], vec![Edge { pair: (0, 1), cond: vec![] }, Edge { pair: (0, 2), cond: vec![] }]);
}
