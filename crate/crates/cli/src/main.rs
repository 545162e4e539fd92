//! `vinereg`: fit, predict, simulate, score, cross-validate and inspect
//! vine copula regression models.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use vinereg::bicop::fit::Criterion;
use vinereg::data::{ColumnKind, Dataset};
use vinereg::error::{Error, Result};
use vinereg::evaluation::{ibs_window, FeatureMap, Ols, ScoreReport};
use vinereg::fitting::{fit, FitConfig, StructureMode};
use vinereg::io::{
    align_rows, crossval, crossval_auc, fingerprint, load_abalone, load_model, load_model_doc, read_csv, save_model_doc,
    score_ols, score_vine, simulate, train_test_split, write_table, child_seed, Classifier, ExperimentResult, Method,
    ModelDoc, SimCase, SimSpec,
};
use vinereg::margins::MarginKind;
use vinereg::prediction::{conditionals, PredictOptions};
use vinereg::tail::{classify_numeric, quantile_curves, TailSide};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "vinereg", version, about = "Vine copula regression and classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a vine model to a CSV and write it as JSON
    Fit(FitArgs),
    /// Conditional means, quantiles and class probabilities for new rows
    Predict(PredictArgs),
    /// Draw a simulation design and write train/test CSVs
    Simulate(SimulateArgs),
    /// Score fitted models on test data
    Score(ScoreArgs),
    /// Repeated k-fold cross validation
    Crossval(CrossvalArgs),
    /// Conditional quantile curves and tail classification of the response links
    Tailcheck(TailcheckArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CriterionArg {
    Aic,
    Bic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StructureArg {
    Rvine,
    Dvine,
    Gaussian,
    Fixed,
}

/// Settings shared by the commands that fit models.
#[derive(Args, Debug)]
struct FitOptions {
    /// JSON fit configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// response column (defaults to the last column)
    #[arg(long)]
    response: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    truncation: Option<usize>,
    #[arg(long, value_enum)]
    criterion: Option<CriterionArg>,
    #[arg(long, value_enum)]
    structure: Option<StructureArg>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// output model JSON
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    fit: FitOptions,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// comma-separated quantile levels
    #[arg(long, value_parser = parse_alphas, value_delimiter = ',', default_value = "0.025,0.975")]
    alphas: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// linear-homo, linear-hetero or nonlinear-hetero (or 1, 2, 3)
    #[arg(long)]
    case: String,
    /// number of predictors, 2 or 4
    #[arg(long, default_value_t = 2)]
    p: usize,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// output directory for train.csv and test.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BaselineArg {
    Linear,
    Quadratic,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// fitted model JSON; repeat for several models
    #[arg(long = "model")]
    models: Vec<PathBuf>,
    /// test CSV; repeat for several replicates
    #[arg(long = "data", required = true)]
    data: Vec<PathBuf>,
    /// least-squares baselines fitted on --train
    #[arg(long = "baseline", value_enum)]
    baselines: Vec<BaselineArg>,
    /// training CSV for the baselines and the QS/IBS window
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CrossvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// read --data as the raw UCI abalone file (male subset, outliers removed)
    #[arg(long)]
    abalone: bool,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// classify "response > threshold" and report AUC instead of regression scores
    #[arg(long)]
    classify_above: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    fit: FitOptions,
}

#[derive(Args, Debug)]
struct TailcheckArgs {
    #[arg(long)]
    model: PathBuf,
    /// predictor to vary
    #[arg(long)]
    variable: String,
    #[arg(long, value_parser = parse_alphas, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8")]
    alphas: Vec<f64>,
    /// curves CSV (x, alpha, quantile)
    #[arg(long)]
    out: PathBuf,
    /// classification JSON (defaults to the curves path with a .json extension)
    #[arg(long)]
    json: Option<PathBuf>,
}

fn parse_alphas(s: &str) -> std::result::Result<f64, String> {
    let a: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(format!("quantile level {a} outside (0, 1)"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Run(e)) => {
            let code = if e.is_data_error() { EXIT_DATA } else { EXIT_NUMERIC };
            eprintln!("{}", json!({ "error": kind_name(&e), "message": e.to_string() }));
            ExitCode::from(code)
        }
    }
}

fn kind_name(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Fit { .. } => "fit",
        Error::DegenerateData(_) => "degenerate-data",
        Error::Structure(_) => "structure",
        Error::UnsupportedStructure(_) => "unsupported-structure",
        Error::Unsupported(_) => "unsupported",
        Error::Numeric(_) => "numeric",
        Error::Input(_) => "input",
        Error::Schema(_) => "schema",
        Error::Rank(_) => "rank",
        Error::UndefinedAuc(_) => "undefined-auc",
        Error::Io(_) => "io",
        Error::Csv(_) => "csv",
        Error::Json(_) => "json",
    }
}

enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Score(a) => cmd_score(a),
        Command::Crossval(a) => cmd_crossval(a),
        Command::Tailcheck(a) => cmd_tailcheck(a),
    }
}

fn warn_all(ws: &[String]) {
    for w in ws {
        eprintln!("warning: {w}");
    }
}

impl FitOptions {
    fn config(&self) -> CliResult<FitConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let s = std::fs::read_to_string(p)
                    .map_err(|e| Error::Input(format!("cannot read config {}: {e}", p.display())))?;
                FitConfig::from_json(&s).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?
            }
            None => FitConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(t) = self.truncation {
            c.truncation = Some(t);
        }
        if let Some(k) = self.criterion {
            c.criterion = match k {
                CriterionArg::Aic => Criterion::Aic,
                CriterionArg::Bic => Criterion::Bic,
            };
        }
        if let Some(s) = self.structure {
            c.structure = match s {
                StructureArg::Rvine => StructureMode::Rvine,
                StructureArg::Dvine => StructureMode::Dvine,
                StructureArg::Gaussian => StructureMode::Gaussian,
                StructureArg::Fixed => StructureMode::Fixed,
            };
        }
        if c.structure == StructureMode::Fixed && c.array.is_none() {
            return Err(CliError::Usage("--structure fixed needs an \"array\" in the config".into()));
        }
        Ok(c)
    }

    /// Read a CSV; columns with a discrete margin in the config are ordinal.
    fn dataset(&self, path: &Path, config: &FitConfig) -> CliResult<Dataset> {
        let kinds: BTreeMap<String, ColumnKind> = config
            .margins
            .iter()
            .filter(|(_, k)| k.is_discrete())
            .map(|(n, _)| (n.clone(), ColumnKind::Ordinal))
            .collect();
        let csv = read_csv(path, &kinds)?;
        warn_all(&csv.warnings);
        self.with_response(csv.dataset)
    }

    fn with_response(&self, ds: Dataset) -> CliResult<Dataset> {
        let name = match &self.response {
            Some(r) => r.clone(),
            None => ds.names()[ds.n_cols() - 1].clone(),
        };
        Ok(ds.with_response(&name)?)
    }
}

fn cmd_fit(a: FitArgs) -> CliResult<()> {
    let config = a.fit.config()?;
    let ds = a.fit.dataset(&a.data, &config)?;
    let fm = fit(&ds, &config)?;
    warn_all(&fm.warnings);
    let mut doc = ModelDoc::from_fitted(&fm);
    doc.metadata.training_fingerprint = Some(fingerprint(&ds));
    save_model_doc(&a.out, &doc)?;
    println!(
        "{}",
        json!({ "loglik": fm.copula_loglik, "aic": fm.aic(), "bic": fm.bic(), "n_params": fm.model.n_params(), "model": a.out })
    );
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> CliResult<()> {
    let fm = load_model(&a.model)?;
    let y = fm.response.ok_or_else(|| Error::Schema("model has no response variable".into()))?;
    let csv = read_csv(&a.data, &BTreeMap::new())?;
    warn_all(&csv.warnings);
    let rows = align_rows(&fm.model, &csv.dataset, Some(y))?;
    let opts = PredictOptions::default();
    let cds = conditionals(&fm.model, &rows)?;
    let margin = &fm.model.margins()[y];
    let mut header = vec!["mean".to_string()];
    header.extend(a.alphas.iter().map(|al| format!("q{al}")));
    let support = margin.support().filter(|_| margin.is_discrete()).map(|s| s.values.clone());
    if let Some(s) = &support {
        header.extend(s.iter().map(|v| format!("p{}", v + 0.0)));
    }
    let mut out = Vec::with_capacity(cds.len());
    for cd in &cds {
        let mut r = vec![cd.mean(&opts)?];
        for &al in &a.alphas {
            r.push(cd.quantile(al, &opts)?);
        }
        if support.is_some() {
            r.extend(cd.pmf()?);
        }
        out.push(r);
    }
    write_table(&a.out, &header, &out)?;
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<()> {
    let case: SimCase = a.case.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
    let spec = SimSpec { case, p: a.p, n: a.n, seed: child_seed(a.seed, 0) };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if a.n < 2 {
        return Err(CliError::Usage("n must be at least 2 to split".into()));
    }
    let ds = simulate(&spec)?;
    let (train, test) = train_test_split(&ds, a.n / 2, child_seed(a.seed, 1))?;
    std::fs::create_dir_all(&a.out).map_err(Error::from)?;
    vinereg::io::write_csv(&a.out.join("train.csv"), &train)?;
    vinereg::io::write_csv(&a.out.join("test.csv"), &test)?;
    Ok(())
}

fn write_reports(path: &Path, reports: &[ScoreReport]) -> Result<()> {
    let mut w = String::from("model,metric,mean,se,replicates\n");
    for r in reports {
        for m in &r.metrics {
            let se = m.se.map(|s| s.to_string()).unwrap_or_default();
            w.push_str(&format!("{},{},{},{},{}\n", r.model, m.metric, m.mean, se, r.replicates));
        }
    }
    std::fs::write(path, w)?;
    Ok(())
}

fn cmd_score(a: ScoreArgs) -> CliResult<()> {
    if a.models.is_empty() && a.baselines.is_empty() {
        return Err(CliError::Usage("give at least one --model or --baseline".into()));
    }
    if !a.baselines.is_empty() && a.train.is_none() {
        return Err(CliError::Usage("--baseline needs --train".into()));
    }
    let mut tests = Vec::new();
    for p in &a.data {
        let csv = read_csv(p, &BTreeMap::new())?;
        warn_all(&csv.warnings);
        tests.push(csv.dataset);
    }
    let train = match &a.train {
        Some(p) => Some(read_csv(p, &BTreeMap::new())?.dataset),
        None => None,
    };
    let mut reports = Vec::new();
    for mp in &a.models {
        let doc = load_model_doc(mp)?;
        let fp = doc.metadata.training_fingerprint.clone();
        let fm = doc.into_fitted()?;
        let y = fm.response.ok_or_else(|| Error::Schema("model has no response variable".into()))?;
        let yname = fm.model.names()[y].clone();
        let mut sets = Vec::new();
        for (t, path) in tests.iter().zip(&a.data) {
            if fp.as_deref() == Some(fingerprint(t).as_str()) {
                eprintln!("warning: {} is scored on its own training data {}", mp.display(), path.display());
            }
            let wsrc = train.as_ref().unwrap_or(t);
            let window = ibs_window(&wsrc.column(wsrc.index_of(&yname)?))?;
            let (s, w) = score_vine(&fm, t, window)?;
            warn_all(&w);
            sets.push(s);
        }
        let name = mp.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        reports.push(ScoreReport::from_replicates(&name, &sets)?);
    }
    if let Some(train) = &train {
        let yname = train.names()[train.n_cols() - 1].clone();
        let train = train.clone().with_response(&yname)?;
        let preds = train.predictors();
        let x: Vec<Vec<f64>> = train.rows().iter().map(|r| preds.iter().map(|&j| r[j]).collect()).collect();
        let window = ibs_window(&train.column(train.n_cols() - 1))?;
        for b in &a.baselines {
            let (name, fmap) = match b {
                BaselineArg::Linear => ("linear", FeatureMap::Linear),
                BaselineArg::Quadratic => ("quadratic", FeatureMap::Quadratic),
            };
            let ols = Ols::fit(&x, &train.column(train.n_cols() - 1), fmap)?;
            let mut sets = Vec::new();
            for t in &tests {
                let cols: Vec<usize> = train.names().iter().map(|n| t.index_of(n)).collect::<Result<_>>()?;
                let tt = t.select_columns(&cols).with_response(&yname)?;
                sets.push(score_ols(&ols, &tt, window)?);
            }
            reports.push(ScoreReport::from_replicates(name, &sets)?);
        }
    }
    write_reports(&a.out, &reports)?;
    Ok(())
}

fn cmd_crossval(a: CrossvalArgs) -> CliResult<()> {
    if a.folds < 2 {
        return Err(CliError::Usage(format!("--folds must be at least 2, got {}", a.folds)));
    }
    if a.repeats < 1 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let mut config = a.fit.config()?;
    let ds = if a.abalone {
        if a.fit.config.is_none() {
            config.default_margin = MarginKind::SkewNormal;
        }
        let ds = load_abalone(&a.data)?;
        if a.classify_above.is_some() {
            config.margins.entry("rings".into()).or_insert(MarginKind::EmpiricalDiscrete);
        }
        ds
    } else {
        a.fit.dataset(&a.data, &config)?
    };
    if a.folds > ds.n_rows() {
        return Err(CliError::Usage(format!("--folds {} exceeds the {} rows", a.folds, ds.n_rows())));
    }
    let seed = config.seed;
    match a.classify_above {
        Some(t) => {
            let yname = ds.names()[ds.response().expect("response set")].clone();
            config.margins.entry(yname).or_insert(MarginKind::EmpiricalDiscrete);
            let cl = vec![
                Classifier::Vine { name: "vine".into(), config },
                Classifier::Logistic { name: "logistic".into(), features: FeatureMap::Linear },
            ];
            let res = crossval_auc(&ds, &cl, t, a.folds, a.repeats, seed)?;
            let mut w = String::from("model,metric,mean,se,replicates\n");
            for s in &res {
                let se = s.se.map(|v| v.to_string()).unwrap_or_default();
                w.push_str(&format!("{},AUC,{},{},{}\n", s.method, s.mean, se, s.per_repeat.len()));
            }
            std::fs::write(&a.out, w).map_err(Error::from)?;
        }
        None => {
            let methods = vec![
                Method::Vine { name: "vine".into(), config },
                Method::Ols { name: "linear".into(), features: FeatureMap::Linear },
            ];
            let res: ExperimentResult = crossval(&ds, &methods, a.folds, a.repeats, seed)?;
            warn_all(&res.warnings);
            write_reports(&a.out, &res.reports()?)?;
        }
    }
    Ok(())
}

/// Normal-score grid from the 0.1% to the 99.9% margin quantile.
const TAIL_GRID_Z: f64 = 3.09;
const TAIL_GRID_POINTS: usize = 41;

fn cmd_tailcheck(a: TailcheckArgs) -> CliResult<()> {
    let fm = load_model(&a.model)?;
    let m = &fm.model;
    let d = m.dim();
    let y = m.structure().order()[d - 1];
    let v = m
        .names()
        .iter()
        .position(|n| *n == a.variable)
        .ok_or_else(|| Error::Schema(format!("model has no variable {}", a.variable)))?;
    if v == y {
        return Err(CliError::Usage(format!("{} is the response; choose a predictor", a.variable)));
    }
    let base: Vec<f64> = m.margins().iter().map(|mm| mm.quantile(0.5)).collect();
    let mut grid: Vec<f64> = (0..TAIL_GRID_POINTS)
        .map(|i| {
            let z = -TAIL_GRID_Z + 2.0 * TAIL_GRID_Z * i as f64 / (TAIL_GRID_POINTS - 1) as f64;
            m.margins()[v].quantile(vinereg::numeric::special::norm_cdf(z))
        })
        .collect();
    grid.dedup();
    let curves = quantile_curves(m, v, &base, &a.alphas, &grid, &PredictOptions::default())?;
    let mut rows = Vec::new();
    for (k, al) in curves.alphas.iter().enumerate() {
        for (x, q) in curves.grid.iter().zip(&curves.values[k]) {
            rows.push(vec![*x, *al, *q]);
        }
    }
    write_table(&a.out, &["x".into(), "alpha".into(), "quantile".into()], &rows)?;

    let mut links = Vec::new();
    for l in 0..m.truncation() {
        let partner = m.structure().partner(l, d - 1);
        let c = m.copula(l, d - 1);
        for &al in &a.alphas {
            for side in [TailSide::Lower, TailSide::Upper] {
                let entry = match classify_numeric(c, side, al) {
                    Ok(t) => json!({
                        "tree": l + 1, "partner": m.names()[partner], "family": c.family().name(),
                        "reflection": c.reflection().name(), "alpha": al, "side": side,
                        "category": t.class.category, "eta": t.class.eta, "k_alpha": t.class.k_alpha,
                        "warning": t.warning,
                    }),
                    Err(e) => json!({
                        "tree": l + 1, "partner": m.names()[partner], "family": c.family().name(),
                        "reflection": c.reflection().name(), "alpha": al, "side": side, "error": e.to_string(),
                    }),
                };
                links.push(entry);
            }
        }
    }
    let verdicts: Vec<_> = curves.alphas.iter().zip(&curves.verdicts).map(|(al, v)| json!({ "alpha": al, "monotonicity": v })).collect();
    let report = json!({
        "variable": a.variable,
        "response": m.names()[y],
        "verdicts": verdicts,
        "ordered": curves.ordered,
        "links": links,
    });
    let jpath = a.json.clone().unwrap_or_else(|| a.out.with_extension("json"));
    std::fs::write(&jpath, serde_json::to_string_pretty(&report).map_err(Error::from)?).map_err(Error::from)?;
    Ok(())
}
