//! `oobforest` command-line tool: fit a forest and score features, explain
//! predictions, or run one of the simulation studies.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use oobforest::experiments::{
    noisy_methods, null_power_methods, run_noisy, run_null_power, run_null_split_bias, run_titanic,
    split_bias_output, Metadata, Method, NoisyConfig, Scorer, SplitBiasConfig, StroblCase, StroblConfig,
    StudyOutput, TitanicConfig,
};
use oobforest::explain::{AttributionKind, CoverSource, Selection};
use oobforest::forest::derived_rng;
use oobforest::{load_csv, load_titanic, read_header, Dataset, Error, Forest, ForestParams, Sampling};

/// Local accuracy tolerance used by `explain --verify`.
const VERIFY_TOL: f64 = 1e-9;

#[derive(Parser, Debug)]
#[command(name = "oobforest", version, about = "Random forests with out-of-bag debiased feature importance")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "OOBFOREST_OUT", default_value = ".")]
    out: PathBuf,
    /// Worker threads for the library (0 = all cores).
    #[arg(long, global = true, env = "OOBFOREST_JOBS", default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a forest and write one importance report per method.
    Importance(ImportanceArgs),
    /// Fit a forest and write per-sample CFC or SHAP attributions.
    Explain(ExplainArgs),
    /// Run a simulation study.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Label column. Without it the file is read as the Titanic passenger
    /// list (features PassengerId, Age, Sex, Pclass; label Survived).
    #[arg(long)]
    label: Option<String>,
    /// Comma-separated feature columns (default: every non-label column).
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,
}

#[derive(Args, Debug)]
struct ForestArgs {
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Features tried per split (default: floor(sqrt(p))).
    #[arg(long)]
    mtry: Option<usize>,
    #[arg(long, default_value_t = 1)]
    min_leaf: u64,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Grow trees on subsamples of this fraction instead of bootstrap samples.
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct ImportanceArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    forest: ForestArgs,
    /// Comma-separated methods: mdi, mdi_oob, mda[:n], pg:<alpha>:<lambda>[:corrected],
    /// cfc|shap|wshap[:<cover>[:<selection>]], mdi_cfc:<subset>[:cov|y1].
    #[arg(long, value_delimiter = ',', required = true)]
    methods: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Kind {
    Cfc,
    Shap,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum CoverArg {
    Inbag,
    Oob,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SelectionArg {
    All,
    Inbag,
    Oob,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    forest: ForestArgs,
    #[arg(long, value_enum, default_value_t = Kind::Shap)]
    kind: Kind,
    /// Node values used by the attributions.
    #[arg(long, value_enum, default_value_t = CoverArg::Inbag)]
    cover: CoverArg,
    /// Trees averaged for the global score.
    #[arg(long, value_enum, default_value_t = SelectionArg::All)]
    selection: SelectionArg,
    /// Global score weights each SHAP value by the sample's label (SHAP only).
    #[arg(long)]
    weighted: bool,
    /// Check that base value plus row sum reproduces every prediction.
    #[arg(long)]
    verify: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Study {
    Null,
    Power,
    Noisy,
    Splitbias,
    Titanic,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(value_enum)]
    study: Study,
    /// Repetitions (default: 100, or 100000 for splitbias).
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Parent OOB node sizes for splitbias.
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 50, 200])]
    sizes: Vec<usize>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    mtry: Option<usize>,
    /// Rows per simulated dataset (null, power, noisy).
    #[arg(long)]
    n: Option<usize>,
    /// Keep one relevant set (1-based feature numbers) in every noisy repetition.
    #[arg(long, value_delimiter = ',')]
    fixed_relevant: Vec<usize>,
    /// Passenger file for the titanic study.
    #[arg(long, default_value = "data/titanic.csv")]
    data: PathBuf,
    /// Number of forest seeds averaged in the titanic study.
    #[arg(long, default_value_t = 10)]
    n_seeds: u64,
    /// Titanic study: also rerun with the PassengerId column shuffled.
    #[arg(long)]
    shuffle_id: bool,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidParameter(_) | Error::WrongKind { .. } | Error::TooManyFeatures { .. } => {
                Failure::Usage(msg)
            }
            Error::InsufficientOob { .. } | Error::EmptyCover { .. } | Error::EmptySelection(_) | Error::Numeric(_) => {
                Failure::Numeric(msg)
            }
            _ => Failure::Data(msg),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

/// Files written so far; removed again unless the command succeeds.
struct Outputs {
    paths: Vec<PathBuf>,
    done: bool,
}

impl Outputs {
    fn new() -> Self {
        Outputs { paths: Vec::new(), done: false }
    }

    fn create(&mut self, path: PathBuf) -> CliResult<BufWriter<fs::File>> {
        let file = fs::File::create(&path).map_err(|e| io_failure(&path, e))?;
        self.paths.push(path);
        Ok(BufWriter::new(file))
    }

    fn finish(mut self) {
        self.done = true;
        for p in &self.paths {
            println!("{}", p.display());
        }
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.done {
            for p in &self.paths {
                let _ = fs::remove_file(p);
            }
        }
    }
}

fn load(args: &DataArgs) -> CliResult<Dataset> {
    let (data, summary) = match &args.label {
        None if args.features.is_empty() => load_titanic(&args.data)?,
        None => return Err(Failure::Usage("--features requires --label".into())),
        Some(label) => {
            let features: Vec<String> = if args.features.is_empty() {
                read_header(&args.data)?.into_iter().filter(|c| c != label).collect()
            } else {
                args.features.clone()
            };
            let refs: Vec<&str> = features.iter().map(String::as_str).collect();
            load_csv(&args.data, label, &refs)?
        }
    };
    if summary.rows_dropped > 0 {
        eprintln!(
            "{}: kept {} of {} rows (missing values dropped)",
            args.data.display(),
            data.n(),
            summary.rows_read
        );
    }
    Ok(data)
}

fn forest_params(args: &ForestArgs, p: usize) -> CliResult<ForestParams> {
    let mtry = args.mtry.unwrap_or_else(|| ((p as f64).sqrt().floor() as usize).max(1));
    let mut params = ForestParams::new(args.trees, mtry, args.seed)
        .with_min_leaf(args.min_leaf)
        .with_max_depth(args.max_depth);
    if let Some(fraction) = args.subsample {
        params = params.with_sampling(Sampling::Subsample { fraction });
    }
    params.validate(p)?;
    Ok(params)
}

fn run_config(command: &str, data: &DataArgs, params: &ForestParams, extra: Value) -> Value {
    json!({
        "command": command,
        "data": data.data.display().to_string(),
        "label": data.label,
        "features": data.features,
        "forest": params,
        "options": extra,
    })
}

fn slug(method: &str) -> String {
    method.replace(':', "-")
}

fn cmd_importance(args: &ImportanceArgs, out: &Path) -> CliResult<()> {
    // validate every method before touching the data
    let methods = args
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<Result<Vec<_>, _>>()?;
    let data = load(&args.data)?;
    let params = forest_params(&args.forest, data.p())?;
    let config = run_config(
        "importance",
        &args.data,
        &params,
        json!({ "methods": methods.iter().map(|m| m.to_string()).collect::<Vec<_>>(), "format": format!("{:?}", args.format).to_lowercase() }),
    );
    let meta = Metadata::new("importance", params.seed, config);
    let forest = Forest::fit(&data, &params)?;
    let mut scorer = Scorer::new(&forest, &data);
    let mut rng = derived_rng(params.seed, u64::MAX);
    let mut outputs = Outputs::new();
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    for method in &methods {
        let report = scorer.score(method, &mut rng)?;
        let stem = format!("importance_{}_{}", slug(&report.method), params.seed);
        match args.format {
            Format::Csv => {
                let path = out.join(format!("{stem}.csv"));
                let mut w = outputs.create(path.clone())?;
                meta.write_comment_header(&mut w).map_err(|e| io_failure(&path, e))?;
                report.write_csv(&mut w)?;
                w.flush().map_err(|e| io_failure(&path, e))?;
            }
            Format::Json => {
                let path = out.join(format!("{stem}.json"));
                let mut w = outputs.create(path.clone())?;
                let doc = json!({ "meta": meta, "report": report });
                serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| Failure::Data(e.to_string()))?;
                w.flush().map_err(|e| io_failure(&path, e))?;
            }
        }
    }
    outputs.finish();
    Ok(())
}

fn cmd_explain(args: &ExplainArgs, out: &Path) -> CliResult<()> {
    if args.weighted && matches!(args.kind, Kind::Cfc) {
        return Err(Failure::Usage("--weighted applies to --kind shap only".into()));
    }
    let (kind, kind_name) = match args.kind {
        Kind::Cfc => (AttributionKind::Cfc, "cfc"),
        Kind::Shap if args.weighted => (AttributionKind::Shap, "wshap"),
        Kind::Shap => (AttributionKind::Shap, "shap"),
    };
    let cover = match args.cover {
        CoverArg::Inbag => CoverSource::Inbag,
        CoverArg::Oob => CoverSource::Oob,
    };
    let selection = match args.selection {
        SelectionArg::All => Selection::All,
        SelectionArg::Inbag => Selection::Inbag,
        SelectionArg::Oob => Selection::Oob,
    };
    let method: Method = format!("{kind_name}:{}:{}", cover.name(), format!("{selection:?}").to_lowercase()).parse()?;

    let data = load(&args.data)?;
    let params = forest_params(&args.forest, data.p())?;
    let config = run_config(
        "explain",
        &args.data,
        &params,
        json!({ "method": method.to_string(), "verify": args.verify }),
    );
    let meta = Metadata::new("explain", params.seed, config);
    let forest = Forest::fit(&data, &params)?;
    let mut scorer = Scorer::new(&forest, &data);
    let report = scorer.score(&method, &mut derived_rng(params.seed, u64::MAX))?;
    let attr = scorer.attribution(kind, cover)?;

    let mut outputs = Outputs::new();
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let stem = format!("{}_{}_{}", kind.name(), cover.name(), params.seed);
    let path = out.join(format!("attributions_{stem}.csv"));
    let mut w = outputs.create(path.clone())?;
    meta.write_comment_header(&mut w).map_err(|e| io_failure(&path, e))?;
    attr.write_csv(&mut w)?;
    w.flush().map_err(|e| io_failure(&path, e))?;

    let path = out.join(format!("importance_{}_{}.csv", slug(&report.method), params.seed));
    let mut w = outputs.create(path.clone())?;
    meta.write_comment_header(&mut w).map_err(|e| io_failure(&path, e))?;
    report.write_csv(&mut w)?;
    w.flush().map_err(|e| io_failure(&path, e))?;

    if args.verify {
        let path = out.join(format!("predictions_{stem}.csv"));
        let mut w = outputs.create(path.clone())?;
        meta.write_comment_header(&mut w).map_err(|e| io_failure(&path, e))?;
        let write_err = |e| io_failure(&path, e);
        writeln!(w, "sample_id,forest_proba,prediction,base_plus_sum").map_err(write_err)?;
        let m = attr.means(Selection::All);
        let mut worst: f64 = 0.0;
        for i in 0..data.n() {
            let proba = forest.predict_proba(data.row(i))[1];
            let recon = m.base[i] + attr.row(i, Selection::All).iter().sum::<f64>();
            // with the inbag cover the cover-based prediction is the forest's
            if cover == CoverSource::Inbag {
                worst = worst.max((proba - m.prediction[i]).abs());
            }
            writeln!(w, "{i},{proba:e},{:e},{recon:e}", m.prediction[i]).map_err(write_err)?;
        }
        w.flush().map_err(write_err)?;
        for sel in [Selection::All, Selection::Inbag, Selection::Oob] {
            worst = worst.max(attr.local_accuracy_error(sel));
        }
        eprintln!("local accuracy: max |base + sum - prediction| = {worst:.3e}");
        if !(worst <= VERIFY_TOL) {
            return Err(Failure::Numeric(format!(
                "local accuracy violated: {worst:.3e} > {VERIFY_TOL:e}"
            )));
        }
    }
    outputs.finish();
    Ok(())
}

fn study_forest(trees: Option<usize>, mtry: Option<usize>, base: &ForestParams) -> ForestParams {
    let mut p = base.clone();
    if let Some(t) = trees {
        p.n_trees = t;
    }
    if let Some(m) = mtry {
        p.mtry = m;
    }
    p
}

fn write_study(output: &StudyOutput, out: &Path) -> CliResult<()> {
    let (csv, json) = output.write_to(out)?;
    println!("{}", csv.display());
    println!("{}", json.display());
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, out: &Path) -> CliResult<()> {
    let reps = args.reps;
    let output = match args.study {
        Study::Null | Study::Power => {
            let case = if args.study == Study::Null { StroblCase::Null } else { StroblCase::Power };
            let mut cfg = StroblConfig::new(case, reps.unwrap_or(100));
            cfg.forest = study_forest(args.trees, args.mtry, &cfg.forest);
            if let Some(n) = args.n {
                cfg.n = n;
            }
            let res = run_null_power(&cfg, &null_power_methods(), args.seed)?;
            for m in &res.methods {
                let medians: Vec<String> = (0..res.features.len())
                    .map(|k| {
                        let s = res.summary(m, k).expect("known method");
                        format!("{} {:.4}", res.features[k], s.median)
                    })
                    .collect();
                eprintln!("{m}: median {}", medians.join(" "));
            }
            let study = if case == StroblCase::Null { "null" } else { "power" };
            res.to_output(study, &cfg, args.seed)
        }
        Study::Noisy => {
            let mut cfg = NoisyConfig::new(reps.unwrap_or(100));
            cfg.forest = study_forest(args.trees, args.mtry, &cfg.forest);
            if let Some(n) = args.n {
                cfg.n = n;
            }
            if !args.fixed_relevant.is_empty() {
                if args.fixed_relevant.contains(&0) {
                    return Err(Failure::Usage("--fixed-relevant takes 1-based feature numbers".into()));
                }
                cfg.fixed_relevant = Some(args.fixed_relevant.iter().map(|j| j - 1).collect());
            }
            let res = run_noisy(&cfg, &noisy_methods(), args.seed)?;
            for (m, auc) in res.ranking() {
                let se = res.mean_auc(&m).expect("known method").1;
                eprintln!("{m:<22} AUC {auc:.3} ± {se:.3}");
            }
            res.to_output(&cfg, args.seed)
        }
        Study::Splitbias => {
            let cfg = SplitBiasConfig::new(args.sizes.clone(), reps.unwrap_or(100_000));
            let rows = run_null_split_bias(&cfg, &mut derived_rng(args.seed, 0))?;
            for r in &rows {
                eprintln!(
                    "N={:<5} target {:.6}  uncorrected {:.6} ± {:.6}  corrected {:+.6} ± {:.6}",
                    r.node_size, r.target, r.uncorrected_mean, r.uncorrected_se, r.corrected_mean, r.corrected_se
                );
            }
            split_bias_output(&cfg, &rows, args.seed)
        }
        Study::Titanic => {
            let mut cfg = TitanicConfig::new();
            if let Some(t) = args.trees {
                cfg.n_trees = t;
            }
            if let Some(m) = args.mtry {
                cfg.mtry = m;
            }
            cfg.seeds = (args.seed..args.seed + args.n_seeds).collect();
            cfg.shuffle_id = args.shuffle_id;
            let res = run_titanic(&args.data, &cfg)?;
            for a in &res.averages {
                let parts: Vec<String> =
                    a.feature_names.iter().zip(&a.mean).map(|(f, v)| format!("{f} {v:.4}")).collect();
                eprintln!("{:<20} {}", a.method, parts.join(" "));
            }
            res.to_output(&cfg, args.seed)
        }
    };
    write_study(&output, out)
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Importance(a) => cmd_importance(a, &cli.out),
        Command::Explain(a) => cmd_explain(a, &cli.out),
        Command::Simulate(a) => cmd_simulate(a, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("oobforest: {f}");
            ExitCode::from(f.code())
        }
    }
}
