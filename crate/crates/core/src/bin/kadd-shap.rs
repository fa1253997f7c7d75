use std::io::{self, BufReader};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kadd_shap::coalition::coalitions_up_to;
use kadd_shap::dataset::Dataset;
use kadd_shap::experiment::{convergence_experiment, load_model, ExperimentConfig};
use kadd_shap::explainer::{
    explain_exact, explain_kadd, explain_kernel_shap, sample_coalitions, BackgroundSet,
    ExplainOptions, SolverOptions, DEFAULT_K,
};
use kadd_shap::game::{
    build_transform_matrix, game_to_interactions, interactions_to_game, shapley_exact,
    InteractionVector,
};
use kadd_shap::protocol::{conformance_check, serve, serve_tcp, ClientOptions, RemoteModel};
use kadd_shap::report::{emit_reports, ReportSet, RunManifest};
use kadd_shap::wls::DEFAULT_RANK_TOL;
use kadd_shap::{Error, ExplanationResult, Game, Method, Result};

#[derive(Parser)]
#[command(name = "kadd-shap", version, about = "Shapley value explanations for black-box models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate SHAP values of one instance from a sampled coalition budget.
    Explain(ExplainArgs),
    /// Exact SHAP values and interaction indices (evaluates all 2^m coalitions).
    Exact(ExactArgs),
    /// Estimator error against exact SHAP values over a budget sweep.
    Converge(ConvergeArgs),
    /// Convert between game payoffs and interaction indices.
    Transform(TransformArgs),
    /// Check that an external model server follows the wire protocol.
    ServeCheck(ServeCheckArgs),
    /// Serve a built-in model over the wire protocol.
    Serve(ServeArgs),
}

#[derive(Args)]
struct Common {
    /// JSON configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// linear | synthetic[:<terms>] | exec:<command> | tcp:<host:port>
    #[arg(long)]
    model: Option<String>,
    /// Numeric CSV with a header row.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Target column of the dataset.
    #[arg(long)]
    target: Option<String>,
    /// Replace the target with 1 when it exceeds this value, else 0.
    #[arg(long)]
    binarize_above: Option<f64>,
    /// Width of generated uniform data when no dataset is given.
    #[arg(long)]
    features: Option<usize>,
    /// Base seed for sampling, background draws and the data split.
    #[arg(long)]
    seed: Option<u64>,
    /// Background rows averaged per expected prediction.
    #[arg(long)]
    background_size: Option<usize>,
    /// Weight standing in for the unbounded kernel weight of the empty and full coalitions.
    #[arg(long)]
    big_weight: Option<f64>,
    /// Composite instances per model call.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Directory for CSV reports and the run manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seconds to wait for each reply from an external model.
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        self.config_over(None)
    }

    fn config_over(&self, base: Option<ExperimentConfig>) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, base) {
            (_, Some(cfg)) => cfg,
            (Some(path), None) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                ExperimentConfig::from_json(&text)?
            }
            (None, None) => ExperimentConfig::default(),
        };
        if let Some(v) = &self.model {
            cfg.model = v.clone();
        }
        if let Some(v) = &self.dataset {
            cfg.dataset = Some(v.clone());
        }
        if let Some(v) = &self.target {
            cfg.target = Some(v.clone());
        }
        if self.binarize_above.is_some() {
            cfg.binarize_above = self.binarize_above;
        }
        if self.features.is_some() {
            cfg.features = self.features;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
            cfg.seeds.clear();
        }
        if let Some(v) = self.background_size {
            cfg.background_size = v;
        }
        if let Some(v) = self.big_weight {
            cfg.big_weight = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if cfg.dataset.is_none() && cfg.features.is_none() {
            return Err(Error::Config("pass --dataset or --features".into()));
        }
        Ok(cfg)
    }

    fn client(&self) -> ClientOptions {
        ClientOptions {
            timeout: Duration::from_secs_f64(self.timeout),
            record_transcript: false,
        }
    }
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    common: Common,
    /// Position in the test split, or a JSON array of feature values.
    #[arg(long)]
    instance: Option<String>,
    /// kadd or kernel.
    #[arg(long, value_enum)]
    method: Option<Estimator>,
    /// Additivity order of the kadd estimator.
    #[arg(long)]
    k: Option<usize>,
    /// Number of distinct coalitions to evaluate.
    #[arg(long)]
    budget: Option<usize>,
    /// Keep only the largest attributions in the report.
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Estimator {
    Kadd,
    Kernel,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    instance: Option<String>,
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    common: Common,
    /// Re-run the configuration stored in a manifest.
    #[arg(long, conflicts_with = "config")]
    manifest: Option<PathBuf>,
    /// Comma-separated budgets.
    #[arg(long, value_delimiter = ',')]
    budget: Vec<usize>,
    /// Comma-separated methods, e.g. kernel,kadd(2),kadd(3).
    #[arg(long, value_delimiter = ',')]
    methods: Vec<Method>,
    #[arg(long)]
    simulations: Option<usize>,
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long, value_enum)]
    direction: Direction,
    /// Number of players.
    #[arg(long)]
    m: usize,
    /// Truncation order (defaults to m).
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated values in cardinal-lexicographic order.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Vec<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    /// Payoffs of all 2^m coalitions to interaction indices up to order k.
    ToInteractions,
    /// Interaction indices up to order k to payoffs of all coalitions.
    ToGame,
    /// Print the truncated transform matrix over the whole power set.
    Matrix,
}

#[derive(Args)]
struct ServeCheckArgs {
    /// exec:<command> or tcp:<host:port>
    #[arg(long)]
    model: String,
    #[arg(long)]
    features: usize,
    #[arg(long, default_value_t = 1000)]
    batches: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    common: Common,
    /// stdio or tcp:<host:port>
    #[arg(long, default_value = "stdio")]
    listen: String,
    #[arg(long, default_value_t = 4096)]
    batch_cap: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Explain(a) => run_explain(a),
        Command::Exact(a) => run_exact(a),
        Command::Converge(a) => run_converge(a),
        Command::Transform(a) => run_transform(a),
        Command::ServeCheck(a) => run_serve_check(a),
        Command::Serve(a) => run_serve(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

struct Prepared {
    cfg: ExperimentConfig,
    data: Dataset,
    model: Box<dyn kadd_shap::BlackBoxModel>,
    instance: Vec<f64>,
    instance_label: String,
    background: BackgroundSet,
}

fn prepare(common: &Common, instance: Option<&str>) -> Result<Prepared> {
    let mut cfg = common.config()?;
    let data = cfg.load_dataset()?;
    let model = load_model(&cfg.model, &data, &common.client())?;
    let (instance, instance_label) = match instance {
        Some(s) if s.trim_start().starts_with('[') => {
            let x: Vec<f64> = serde_json::from_str(s)
                .map_err(|e| Error::Config(format!("instance is not a JSON array: {e}")))?;
            (x, s.to_string())
        }
        other => {
            let pos = match other {
                Some(s) => s
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad instance '{s}'")))?,
                None => cfg.instances.first().copied().unwrap_or(0),
            };
            cfg.instances = vec![pos];
            let row = *data
                .test
                .get(pos)
                .ok_or_else(|| Error::Config(format!("test instance {pos} out of range")))?;
            (data.features[row].clone(), format!("test[{pos}]"))
        }
    };
    let train = data.train_features();
    let q = cfg.background_size.min(train.len());
    let background = BackgroundSet::new(train, q, cfg.seed)?;
    Ok(Prepared {
        cfg,
        data,
        model,
        instance,
        instance_label,
        background,
    })
}

fn options(cfg: &ExperimentConfig) -> ExplainOptions {
    ExplainOptions {
        solver: SolverOptions {
            big_weight: cfg.big_weight,
            rank_tol: DEFAULT_RANK_TOL,
        },
        batch_size: cfg.batch_size,
    }
}

fn print_explanation(p: &Prepared, r: &ExplanationResult) {
    println!("method      {}", r.method);
    println!("instance    {}", p.instance_label);
    println!("model       {}", p.model.id());
    println!("budget      {} coalitions, {} model calls", r.budget, r.model_calls);
    println!("phi0        {}", r.phi0);
    println!("prediction  {}", r.prediction);
    println!("gap         {:e}", r.efficiency_gap);
    if let Some(w) = r.rank_warning {
        println!(
            "warning     rank {} < {} parameters; minimum-norm solution returned",
            w.rank, w.parameters
        );
    }
    println!();
    for (j, v) in r.shap_values.iter().enumerate() {
        let name = p.data.feature_names.get(j).map_or("?", String::as_str);
        println!("  {name:<24} {v:>14.6e}");
    }
}

fn finish(p: &Prepared, r: &ExplanationResult, command: &str, top_k: Option<usize>, out: Option<&Path>) -> Result<ExitCode> {
    print_explanation(p, r);
    if let Some(dir) = out {
        let mut manifest = RunManifest::new(command, &p.model.id(), &p.data.id);
        manifest.seeds = vec![p.cfg.seed];
        manifest.budgets = vec![r.budget];
        manifest.methods = vec![r.method.to_string()];
        let mut cfg = p.cfg.clone();
        cfg.methods = vec![r.method];
        cfg.budgets = vec![r.budget];
        manifest.config = serde_json::to_value(&cfg).expect("config serializes");
        let reports = ReportSet {
            explanation: Some(r),
            feature_names: &p.data.feature_names,
            top_k,
            convergence: None,
        };
        for path in emit_reports(dir, &reports, manifest)? {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run_explain(a: ExplainArgs) -> Result<ExitCode> {
    let p = prepare(&a.common, a.instance.as_deref())?;
    let m = p.model.num_features();
    let method = match a.method.unwrap_or(Estimator::Kadd) {
        Estimator::Kernel => Method::Kernel,
        Estimator::Kadd => {
            let from_cfg = p.cfg.methods.iter().find_map(|me| match me {
                Method::KAdditive(k) => Some(*k),
                _ => None,
            });
            Method::KAdditive(a.k.or(from_cfg).unwrap_or(DEFAULT_K).min(m))
        }
    };
    let budget = a
        .budget
        .or_else(|| p.cfg.budgets.first().copied())
        .ok_or_else(|| Error::Config("pass --budget".into()))?;
    let sample = sample_coalitions(m, budget, p.cfg.seed)?;
    let opts = options(&p.cfg);
    let result = match method {
        Method::Kernel => explain_kernel_shap(p.model.as_ref(), &p.instance, &sample, &p.background, &opts)?,
        Method::KAdditive(k) => explain_kadd(p.model.as_ref(), &p.instance, &sample, &p.background, k, &opts)?,
        Method::Exact => unreachable!(),
    };
    finish(&p, &result, "explain", a.top_k, a.common.out.as_deref())
}

fn run_exact(a: ExactArgs) -> Result<ExitCode> {
    let p = prepare(&a.common, a.instance.as_deref())?;
    let result = explain_exact(p.model.as_ref(), &p.instance, &p.background, &options(&p.cfg))?;
    finish(&p, &result, "exact", a.top_k, a.common.out.as_deref())
}

fn run_converge(a: ConvergeArgs) -> Result<ExitCode> {
    let common = a.common;
    let base = match &a.manifest {
        Some(path) => Some(RunManifest::load(path)?.experiment_config()?),
        None => None,
    };
    let mut cfg = common.config_over(base)?;
    if !a.budget.is_empty() {
        cfg.budgets = a.budget;
    }
    if !a.methods.is_empty() {
        cfg.methods = a.methods;
    }
    if let Some(s) = a.simulations {
        cfg.simulations = s;
        cfg.seeds.clear();
    }
    let data = cfg.load_dataset()?;
    let model = load_model(&cfg.model, &data, &common.client())?;
    let report = convergence_experiment(&cfg, model.as_ref(), &data)?;
    print!("{}", kadd_shap::report::convergence_table(&report));
    if let Some(dir) = &common.out {
        let mut manifest = RunManifest::new("converge", &report.model_id, &report.dataset_id);
        manifest.seeds = report.seeds.clone();
        manifest.budgets = report.budgets.clone();
        manifest.methods = report.methods.iter().map(Method::to_string).collect();
        manifest.config = serde_json::to_value(&cfg).expect("config serializes");
        let reports = ReportSet {
            convergence: Some(&report),
            ..Default::default()
        };
        for path in emit_reports(dir, &reports, manifest)? {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run_transform(a: TransformArgs) -> Result<ExitCode> {
    let k = a.k.unwrap_or(a.m);
    let out = match a.direction {
        Direction::ToInteractions => {
            let game = Game::from_cardinal_lex(a.m, &a.values)?;
            let iv = game_to_interactions(&game, k)?;
            serde_json::json!({
                "shapley": shapley_exact(&game)?,
                "interactions": labelled(&iv.coalitions(), iv.values()),
            })
        }
        Direction::ToGame => {
            let iv = InteractionVector::new(a.m, k, a.values.clone())?;
            let game = interactions_to_game(&iv)?;
            let order = coalitions_up_to(a.m, a.m)?;
            serde_json::json!({ "game": labelled(&order, &game.to_cardinal_lex()?) })
        }
        Direction::Matrix => {
            let rows = coalitions_up_to(a.m, a.m)?;
            let t = build_transform_matrix(&rows, a.m, k)?;
            let matrix: Vec<Vec<String>> = (0..t.nrows())
                .map(|r| (0..t.ncols()).map(|c| t.exact_entry(r, c).to_string()).collect())
                .collect();
            serde_json::json!({
                "rows": rows.iter().map(ToString::to_string).collect::<Vec<_>>(),
                "columns": t.columns().iter().map(ToString::to_string).collect::<Vec<_>>(),
                "matrix": matrix,
            })
        }
    };
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(ExitCode::SUCCESS)
}

fn labelled(coalitions: &[kadd_shap::Coalition], values: &[f64]) -> Vec<serde_json::Value> {
    coalitions
        .iter()
        .zip(values)
        .map(|(c, v)| serde_json::json!({ "coalition": c.to_string(), "value": v }))
        .collect()
}

fn run_serve_check(a: ServeCheckArgs) -> Result<ExitCode> {
    let client = ClientOptions {
        timeout: Duration::from_secs_f64(a.timeout),
        record_transcript: false,
    };
    let remote = kadd_shap::protocol::remote_model_client(&a.model, a.features, &client)
        .map_err(|source| Error::ModelTransport { batch: 0, source })?;
    let report = conformance_check(&remote, a.batches, a.seed);
    let _ = RemoteModel::shutdown(remote);
    println!(
        "{} batches, {} instances, {} violations",
        report.batches,
        report.instances,
        report.violations.len()
    );
    for v in &report.violations {
        println!("  {v}");
    }
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn run_serve(a: ServeArgs) -> Result<ExitCode> {
    let cfg = a.common.config()?;
    let data = cfg.load_dataset()?;
    let model = load_model(&cfg.model, &data, &a.common.client())?;
    if a.listen == "stdio" {
        let stdin = io::stdin();
        serve(model.as_ref(), BufReader::new(stdin.lock()), io::stdout().lock(), a.batch_cap)
            .map_err(|e| Error::Io { path: "<stdio>".into(), source: e })?;
    } else if let Some(addr) = a.listen.strip_prefix("tcp:") {
        let listener = TcpListener::bind(addr).map_err(|e| Error::Io { path: addr.into(), source: e })?;
        eprintln!("listening on {}", listener.local_addr().map_or(addr.to_string(), |a| a.to_string()));
        serve_tcp(model.as_ref(), listener, a.batch_cap, None)
            .map_err(|e| Error::Io { path: addr.into(), source: e })?;
    } else {
        return Err(Error::Config(format!("unknown listen mode '{}'", a.listen)));
    }
    Ok(ExitCode::SUCCESS)
}
