use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::data::{ColumnKind, Dataset};
use crate::error::Error;
use crate::evaluation::FeatureMap;
use crate::fitting::{fit, FitConfig, StructureMode};
use crate::prediction::{conditionals, PredictOptions};

fn no_kinds() -> BTreeMap<String, ColumnKind> {
    BTreeMap::new()
}

#[test]
fn csv_drops_incomplete_rows_and_infers_kinds() {
    let text = "a,b,y\n0.5,1,2.25\n,0,1.5\n1.5,NA,3\n2.5,2,4.75\n3.5,1,-1\n";
    let got = read_csv_from(text.as_bytes(), &no_kinds()).unwrap();
    assert_eq!(got.dataset.n_rows(), 3);
    assert_eq!(got.warnings, vec!["dropped 2 rows with missing values".to_string()]);
    assert_eq!(got.dataset.kinds(), &[ColumnKind::Continuous, ColumnKind::Ordinal, ColumnKind::Continuous]);
    let mut k = no_kinds();
    k.insert("b".into(), ColumnKind::Continuous);
    let got = read_csv_from(text.as_bytes(), &k).unwrap();
    assert_eq!(got.dataset.kinds()[1], ColumnKind::Continuous);
}

#[test]
fn csv_rejects_bad_cells_and_ragged_lines() {
    assert!(matches!(read_csv_from("a,b\n1,x\n".as_bytes(), &no_kinds()), Err(Error::Input(_))));
    assert!(read_csv_from("a,b\n1,2,3\n".as_bytes(), &no_kinds()).is_err());
    assert!(matches!(read_csv_from("a,b\n,\n".as_bytes(), &no_kinds()), Err(Error::DegenerateData(_))));
}

proptest! {
    #[test]
    fn csv_round_trip_is_exact(vals in proptest::collection::vec(-1e12f64..1e12, 1..40), scale in -30i32..30) {
        let rows: Vec<Vec<f64>> = vals.iter().map(|v| vec![v * 10f64.powi(scale), *v]).collect();
        let ds = Dataset::new(vec!["p".into(), "q".into()], vec![ColumnKind::Continuous; 2], rows.clone()).unwrap();
        let mut buf = Vec::new();
        write_table_to(&mut buf, ds.names(), ds.rows()).unwrap();
        let mut k = no_kinds();
        k.insert("p".into(), ColumnKind::Continuous);
        k.insert("q".into(), ColumnKind::Continuous);
        let back = read_csv_from(buf.as_slice(), &k).unwrap().dataset;
        prop_assert_eq!(back.rows(), &rows[..]);
    }
}

#[test]
fn split_mix_matches_reference_stream() {
    // first two outputs of SplitMix64 seeded with 0
    assert_eq!(child_seed(0, 0), 0xe220_a839_7b1d_cdaf);
    assert_eq!(child_seed(0, 1), 0x6e78_9e6a_a1b9_65f4);
    assert_ne!(child_seed(7, 3), child_seed(8, 3));
}

#[test]
fn case_one_variance_matches_quadratic_form() {
    // Var(b'X) + s^2 with unit variances and correlation 1/2
    let oracle = |b: &[f64], s: f64| {
        let mut v = s * s;
        for i in 0..b.len() {
            for j in 0..b.len() {
                v += b[i] * b[j] * if i == j { 1.0 } else { 0.5 };
            }
        }
        v
    };
    assert_eq!(oracle(&[10.0, 5.0], 10.0), 275.0);
    for (p, b, s) in [(2, vec![10.0, 5.0], 10.0), (4, vec![5.0; 4], 20.0)] {
        let ds = simulate(&SimSpec { case: SimCase::LinearHomo, p, n: 10_000, seed: 3 }).unwrap();
        let y = ds.column(p);
        let m = y.iter().sum::<f64>() / y.len() as f64;
        let var = y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (y.len() - 1) as f64;
        let truth = oracle(&b, s);
        assert!((var - truth).abs() < 0.055 * truth, "p={p}: {var} vs {truth}");
        if p == 2 {
            assert!((260.0..=290.0).contains(&var));
        }
    }
}

#[test]
fn predictor_correlation_is_one_half() {
    let ds = simulate(&SimSpec { case: SimCase::NonlinearHetero, p: 4, n: 20_000, seed: 5 }).unwrap();
    let c = crate::fitting::correlation_matrix(&(0..4).map(|j| ds.column(j)).collect::<Vec<_>>());
    for i in 0..4 {
        for j in 0..i {
            assert!((c[i][j] - 0.5).abs() < 0.02, "{}", c[i][j]);
        }
    }
}

#[test]
fn heteroscedastic_spread_grows_with_u_sum() {
    let ds = simulate(&SimSpec { case: SimCase::LinearHetero, p: 2, n: 10_000, seed: 9 }).unwrap();
    let u: Vec<f64> = ds.rows().iter().map(|r| crate::numeric::special::norm_cdf(r[0]) + crate::numeric::special::norm_cdf(r[1])).collect();
    let a: Vec<f64> = ds.rows().iter().map(|r| (r[2] - 10.0 * r[0] - 5.0 * r[1]).abs()).collect();
    let c = crate::fitting::correlation_matrix(&[u, a]);
    assert!(c[0][1] > 0.2, "{}", c[0][1]);
}

#[test]
fn case_formulas_at_a_point() {
    let x = [0.3, -1.1];
    let u: Vec<f64> = x.iter().map(|v| crate::numeric::special::norm_cdf(*v)).collect();
    let (m, s) = true_conditional(SimCase::NonlinearHetero, &x);
    assert_eq!(m, u[0] * (1.8 * u[1]).exp());
    assert_eq!(s, 0.5 * (u[0] + u[1]));
    let x4 = [0.3, -1.1, 0.2, 2.0];
    let u4: Vec<f64> = x4.iter().map(|v| crate::numeric::special::norm_cdf(*v)).collect();
    let (m, s) = true_conditional(SimCase::NonlinearHetero, &x4);
    assert!((m - u4[0] * u4[1] * (1.8 * u4[2] * u4[3]).exp()).abs() < 1e-15);
    assert!((s - 0.5 * u4.iter().sum::<f64>()).abs() < 1e-15);
    assert_eq!(true_conditional(SimCase::LinearHetero, &x4).1, 10.0 * u4.iter().sum::<f64>());
    assert_eq!(true_conditional(SimCase::LinearHomo, &x4), (5.0 * x4.iter().sum::<f64>(), 20.0));
}

#[test]
fn simulation_and_split_are_deterministic() {
    let spec = SimSpec { case: SimCase::LinearHetero, p: 4, n: 200, seed: 11 };
    assert_eq!(simulate(&spec).unwrap(), simulate(&spec).unwrap());
    let (a, b) = simulation_split(SimCase::NonlinearHetero, 2, 2000, 4).unwrap();
    assert_eq!((a.n_rows(), b.n_rows()), (1000, 1000));
    assert_eq!(simulation_split(SimCase::NonlinearHetero, 2, 2000, 4).unwrap().0, a);
    assert!(simulate(&SimSpec { p: 3, ..spec }).is_err());
    assert_eq!("2".parse::<SimCase>().unwrap(), SimCase::LinearHetero);
}

#[test]
fn folds_are_balanced() {
    let f = fold_assignment(23, 5, 1).unwrap();
    let counts: Vec<usize> = (0..5).map(|k| f.iter().filter(|&&x| x == k).count()).collect();
    assert!(counts.iter().all(|&c| c == 4 || c == 5));
    assert!(fold_assignment(5, 1, 0).is_err());
    assert!(fold_assignment(5, 6, 0).is_err());
}

fn small_fit(structure: StructureMode) -> (crate::fitting::FittedModel, Dataset) {
    let ds = simulate(&SimSpec { case: SimCase::NonlinearHetero, p: 2, n: 300, seed: 21 }).unwrap();
    let cfg = FitConfig { structure, ..simulation_config(SimCase::NonlinearHetero, 2, 1) };
    (fit(&ds, &cfg).unwrap(), ds)
}

#[test]
fn model_json_round_trip_predicts_identically() {
    let (fm, ds) = small_fit(StructureMode::Rvine);
    let back = model_from_json(&model_to_json(&fm).unwrap()).unwrap();
    assert_eq!(back, fm);
    let probe = &ds.rows()[..40];
    let opts = PredictOptions::default();
    let a = conditionals(&fm.model, probe).unwrap();
    let b = conditionals(&back.model, probe).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.mean(&opts).unwrap(), y.mean(&opts).unwrap());
        assert_eq!(x.quantile(0.1, &opts).unwrap(), y.quantile(0.1, &opts).unwrap());
    }
    assert_eq!(fm.model.log_densities(probe).unwrap(), back.model.log_densities(probe).unwrap());
}

#[test]
fn model_json_is_validated() {
    let (fm, _) = small_fit(StructureMode::Gaussian);
    let doc = ModelDoc::from_fitted(&fm);
    assert_eq!(doc.edges.len(), 3);
    assert_eq!(doc.response.as_deref(), Some("y"));

    let mut bad = doc.clone();
    bad.schema_version = 2;
    assert!(matches!(bad.into_fitted(), Err(Error::Schema(_))));

    let mut bad = doc.clone();
    bad.edges.pop();
    assert!(matches!(bad.into_fitted(), Err(Error::Schema(_))));

    let mut bad = doc.clone();
    bad.response = Some("x1".into());
    assert!(matches!(bad.into_fitted(), Err(Error::UnsupportedStructure(_))));

    let mut bad = doc.clone();
    bad.edges[0].family = "clayton".into();
    bad.edges[0].params = vec![-1.0];
    assert!(bad.into_fitted().is_err());

    assert!(matches!(model_from_json("{\"schema_version\": 1}"), Err(Error::Schema(_))));
}

#[test]
fn align_rows_matches_by_name() {
    let (fm, ds) = small_fit(StructureMode::Gaussian);
    let shuffled = ds.select_columns(&[2, 1, 0]);
    assert_eq!(align_rows(&fm.model, &shuffled, fm.response).unwrap(), ds.rows());
    let no_y = ds.select_columns(&[0, 1]);
    let rows = align_rows(&fm.model, &no_y, fm.response).unwrap();
    assert_eq!(rows[0], vec![ds.rows()[0][0], ds.rows()[0][1], 0.0]);
    assert!(matches!(align_rows(&fm.model, &ds.select_columns(&[1, 2]), fm.response), Err(Error::Schema(_))));
}

#[test]
fn fingerprint_detects_identical_data() {
    let (_, ds) = small_fit(StructureMode::Gaussian);
    assert_eq!(fingerprint(&ds), fingerprint(&ds.clone()));
    assert_ne!(fingerprint(&ds), fingerprint(&ds.subset(&(0..299).collect::<Vec<_>>())));
}

#[test]
fn gaussian_fit_recovers_known_correlations() {
    // normal-scores correlations of (x1, x2, y) for the homoscedastic case
    let ds = simulate(&SimSpec { case: SimCase::LinearHomo, p: 2, n: 1000, seed: 2 }).unwrap();
    let cfg = FitConfig { structure: StructureMode::Gaussian, ..simulation_config(SimCase::LinearHomo, 2, 1) };
    let fm = fit(&ds, &cfg).unwrap();
    let mut rho: Vec<f64> = (0..2).flat_map(|l| (l + 1..3).map(move |j| (l, j))).map(|(l, j)| fm.model.copula(l, j).params()[0]).collect();
    rho.sort_by(|a, b| b.total_cmp(a));
    for (r, t) in rho.iter().zip([0.77, 0.5, 0.39]) {
        assert!((r - t).abs() < 0.05, "{rho:?}");
    }
}

#[test]
fn parse_abalone_filters_males_and_outliers() {
    let text = "Sex,Length,Diameter,Height,Whole,Shucked,Viscera,Shell,Rings\n\
M,0.455,0.365,0.095,0.514,0.2245,0.101,0.15,15\n\
F,0.53,0.42,0.135,0.677,0.2565,0.1415,0.21,9\n\
M,0.35,0.265,0.09,0.2255,0.0995,0.0485,0.07,7\n\
M,0.455,0.355,0.515,0.4,0.1,0.1,0.1,8\n\
I,0.33,0.255,0.08,0.205,0.0895,0.0395,0.055,7\n";
    let ds = parse_abalone(text).unwrap();
    assert_eq!(ds.n_rows(), 2);
    assert_eq!(ds.names()[7], "rings");
    assert_eq!(ds.response(), Some(7));
    assert_eq!(ds.rows()[1][7], 7.0);
    assert!(parse_abalone("M,1,2\n").is_err());
}

#[test]
fn leave_one_out_crossval_runs() {
    let ds = simulate(&SimSpec { case: SimCase::LinearHomo, p: 2, n: 12, seed: 8 }).unwrap();
    let methods = vec![
        Method::Vine {
            name: "gauss".into(),
            config: FitConfig { structure: StructureMode::Gaussian, ..simulation_config(SimCase::LinearHomo, 2, 1) },
        },
        Method::Ols { name: "linear".into(), features: FeatureMap::Linear },
    ];
    let res = crossval(&ds, &methods, 12, 1, 3).unwrap();
    assert_eq!(res.replicates[0].len(), 1);
    let rep = res.report("linear").unwrap();
    assert!(rep.get("RMSE").unwrap().se.is_none());
    assert_eq!(crossval(&ds, &methods, 12, 1, 3).unwrap(), res);
}

#[test]
fn classification_crossval_runs() {
    let mut ds = simulate(&SimSpec { case: SimCase::LinearHomo, p: 2, n: 120, seed: 8 }).unwrap();
    // integer response with a handful of levels
    let rows: Vec<Vec<f64>> = ds.rows().iter().map(|r| vec![r[0], r[1], (r[2] / 10.0).round().clamp(-3.0, 3.0)]).collect();
    ds = Dataset::new(ds.names().to_vec(), vec![ColumnKind::Continuous; 3], rows).unwrap().with_response("y").unwrap();
    let cl = vec![
        Classifier::Vine {
            name: "vine".into(),
            config: FitConfig { structure: StructureMode::Gaussian, ..simulation_config(SimCase::LinearHomo, 2, 1) },
        },
        Classifier::Logistic { name: "logistic".into(), features: FeatureMap::Linear },
    ];
    let out = crossval_auc(&ds, &cl, 0.0, 4, 2, 5).unwrap();
    for s in &out {
        assert_eq!(s.per_repeat.len(), 2);
        assert!(s.mean > 0.75 && s.mean <= 1.0, "{s:?}");
    }
}
