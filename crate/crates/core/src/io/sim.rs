use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::numeric::special::norm_cdf;

/// SplitMix64 output for `master + (stream + 1) * gamma`. Every stochastic
/// step takes its seed from the master seed through this map.
pub fn child_seed(master: u64, stream: u64) -> u64 {
    let mut z = master.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimCase {
    LinearHomo,
    LinearHetero,
    NonlinearHetero,
}

impl SimCase {
    pub const ALL: [SimCase; 3] = [SimCase::LinearHomo, SimCase::LinearHetero, SimCase::NonlinearHetero];

    pub fn name(self) -> &'static str {
        match self {
            SimCase::LinearHomo => "linear-homo",
            SimCase::LinearHetero => "linear-hetero",
            SimCase::NonlinearHetero => "nonlinear-hetero",
        }
    }
}

impl FromStr for SimCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "linear-homo" | "1" => SimCase::LinearHomo,
            "linear-hetero" | "2" => SimCase::LinearHetero,
            "nonlinear-hetero" | "3" => SimCase::NonlinearHetero,
            _ => return Err(Error::Input(format!("unknown simulation case '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSpec {
    pub case: SimCase,
    /// number of predictors, 2 or 4
    pub p: usize,
    pub n: usize,
    pub seed: u64,
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p != 2 && self.p != 4 {
            return Err(Error::Input(format!("p must be 2 or 4, got {}", self.p)));
        }
        if self.n == 0 {
            return Err(Error::Input("n must be positive".into()));
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        (1..=self.p).map(|i| format!("x{i}")).chain(["y".to_string()]).collect()
    }
}

/// Mean and standard deviation of the normal law of Y given X = x.
pub fn true_conditional(case: SimCase, x: &[f64]) -> (f64, f64) {
    let u: Vec<f64> = x.iter().map(|&v| norm_cdf(v)).collect();
    let su: f64 = u.iter().sum();
    let p = x.len();
    let linear = if p == 2 { 10.0 * x[0] + 5.0 * x[1] } else { 5.0 * x.iter().sum::<f64>() };
    match case {
        SimCase::LinearHomo => (linear, if p == 2 { 10.0 } else { 20.0 }),
        SimCase::LinearHetero => (linear, 10.0 * su),
        SimCase::NonlinearHetero => {
            let m = if p == 2 { u[0] * (1.8 * u[1]).exp() } else { u[0] * u[1] * (1.8 * u[2] * u[3]).exp() };
            (m, 0.5 * su)
        }
    }
}

/// Draw n rows (x1..xp, y) with X equicorrelated normal (correlation 0.5).
pub fn simulate(spec: &SimSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut r = rng(spec.seed);
    let h = 0.5f64.sqrt();
    let mut rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let z0: f64 = StandardNormal.sample(&mut r);
        let mut row: Vec<f64> = (0..spec.p)
            .map(|_| {
                let zi: f64 = StandardNormal.sample(&mut r);
                h * z0 + h * zi
            })
            .collect();
        let eps: f64 = StandardNormal.sample(&mut r);
        let (m, s) = true_conditional(spec.case, &row);
        row.push(m + s * eps);
        rows.push(row);
    }
    Dataset::new(spec.names(), vec![ColumnKind::Continuous; spec.p + 1], rows)?.with_response("y")
}

/// Random partition into a training set of `n_train` rows and the rest.
pub fn train_test_split(ds: &Dataset, n_train: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if n_train == 0 || n_train >= ds.n_rows() {
        return Err(Error::Input(format!("training size {n_train} must lie in [1, {})", ds.n_rows())));
    }
    let mut idx: Vec<usize> = (0..ds.n_rows()).collect();
    idx.shuffle(&mut rng(seed));
    let (a, b) = idx.split_at(n_train);
    Ok((ds.subset(a), ds.subset(b)))
}

/// Fold labels for k-fold cross validation: a shuffled balanced assignment.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 || folds > n {
        return Err(Error::Input(format!("folds must lie in [2, {n}], got {folds}")));
    }
    let mut labels: Vec<usize> = (0..n).map(|i| i % folds).collect();
    labels.shuffle(&mut rng(seed));
    Ok(labels)
}
