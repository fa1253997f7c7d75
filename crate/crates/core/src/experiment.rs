//! Convergence experiments: estimator error against exact SHAP values as a
//! function of the coalition budget, summarized by percentiles over
//! independently seeded simulations.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalition::{check_dense, DENSE_CAP};
use crate::dataset::{load_csv_dataset, Dataset};
use crate::error::{Error, Result};
use crate::explainer::{
    build_dense_value_function, exact_shapley_from_values, precompute_solver, sample_coalitions,
    BackgroundSet, MarginalExpectation, Method, PrecomputedSolver, SolverOptions,
    DEFAULT_BATCH_SIZE, DEFAULT_BIG_WEIGHT,
};
use crate::model::{
    builtin_linear_model, parse_terms, synthetic_interaction_model, BlackBoxModel,
};
use crate::protocol::{remote_model_client, ClientOptions};
use crate::wls::DEFAULT_RANK_TOL;

/// Everything needed to reproduce a convergence run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `linear`, `synthetic:<terms>`, `exec:<command>` or `tcp:<host:port>`.
    pub model: String,
    /// CSV file; when absent, uniform synthetic data of width `features`.
    pub dataset: Option<PathBuf>,
    pub target: Option<String>,
    pub binarize_above: Option<f64>,
    pub features: Option<usize>,
    pub rows: usize,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub methods: Vec<Method>,
    pub budgets: Vec<usize>,
    pub simulations: usize,
    /// Simulation `r` uses seed `seed + r` unless `seeds` is non-empty.
    pub seed: u64,
    /// Explicit per-simulation seeds; overrides `simulations` and `seed`.
    pub seeds: Vec<u64>,
    pub percentiles: Vec<f64>,
    pub background_size: usize,
    /// Positions in the test split; empty means every test row.
    pub instances: Vec<usize>,
    pub big_weight: f64,
    pub batch_size: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: "linear".into(),
            dataset: None,
            target: None,
            binarize_above: None,
            features: None,
            rows: 200,
            train_fraction: 0.8,
            split_seed: 0,
            methods: vec![Method::Kernel, Method::KAdditive(2), Method::KAdditive(3)],
            budgets: Vec::new(),
            simulations: 101,
            seed: 0,
            seeds: Vec::new(),
            percentiles: vec![0.1, 0.5, 0.9],
            background_size: 50,
            instances: vec![0],
            big_weight: DEFAULT_BIG_WEIGHT,
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn simulation_seeds(&self) -> Vec<u64> {
        if !self.seeds.is_empty() {
            return self.seeds.clone();
        }
        (0..self.simulations as u64)
            .map(|r| self.seed.wrapping_add(r))
            .collect()
    }

    /// Loads the CSV, or generates uniform data when no dataset is given.
    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            Some(path) => {
                let target = self
                    .target
                    .as_deref()
                    .ok_or_else(|| Error::Config("a dataset needs a target column".into()))?;
                load_csv_dataset(path, target, self.train_fraction, self.split_seed, self.binarize_above)
            }
            None => {
                let m = self.features.ok_or_else(|| {
                    Error::Config("either a dataset or a feature count is required".into())
                })?;
                Dataset::synthetic_uniform(m, self.rows, self.train_fraction, self.split_seed)
            }
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        if m > DENSE_CAP {
            return Err(Error::Config(format!(
                "exact reference values need m ≤ {DENSE_CAP}, got {m}"
            )));
        }
        if self.methods.is_empty() || self.budgets.is_empty() {
            return Err(Error::Config("methods and budgets must be non-empty".into()));
        }
        if let Some(bad) = self.methods.iter().find(|&&me| {
            matches!(me, Method::Exact) || matches!(me, Method::KAdditive(k) if k > m)
        }) {
            return Err(Error::Config(format!("method {bad} cannot be benchmarked at m = {m}")));
        }
        let max = 1usize << m;
        if let Some(b) = self.budgets.iter().find(|&&b| b < 2 || b > max) {
            return Err(Error::Config(format!("budget {b} outside [2, {max}]")));
        }
        if let Some(p) = self.percentiles.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::Config(format!("percentile {p} outside (0, 1)")));
        }
        if self.simulations == 0 && self.seeds.is_empty() {
            return Err(Error::Config("at least one simulation is required".into()));
        }
        if self.background_size == 0 {
            return Err(Error::Config("background size must be positive".into()));
        }
        Ok(())
    }
}

/// Resolves a model reference against a dataset.
pub fn load_model(
    reference: &str,
    data: &Dataset,
    client: &ClientOptions,
) -> Result<Box<dyn BlackBoxModel>> {
    let m = data.num_features();
    if reference == "linear" {
        return Ok(Box::new(builtin_linear_model(
            &data.train_features(),
            &data.train_targets(),
        )?));
    }
    if reference == "synthetic" {
        return Ok(Box::new(default_synthetic_model(m)?));
    }
    if let Some(terms) = reference.strip_prefix("synthetic:") {
        return Ok(Box::new(synthetic_interaction_model(m, parse_terms(terms)?)?));
    }
    if reference.starts_with("exec:") || reference.starts_with("tcp:") {
        let remote = remote_model_client(reference, m, client)
            .map_err(|source| Error::ModelTransport { batch: 0, source })?;
        return Ok(Box::new(remote));
    }
    Err(Error::Config(format!("unknown model reference '{reference}'")))
}

/// Main effects on every feature, products of neighbouring pairs and one
/// third-order term.
pub fn default_synthetic_model(m: usize) -> Result<crate::model::SyntheticModel> {
    use crate::model::Term;
    let mut terms: Vec<Term> = (0..m)
        .map(|j| Term {
            coefficient: 1.0 / (j + 1) as f64,
            features: vec![j],
        })
        .collect();
    terms.extend((1..m).map(|j| Term {
        coefficient: if j % 2 == 0 { 0.5 } else { -0.5 },
        features: vec![j - 1, j],
    }));
    if m >= 3 {
        terms.push(Term {
            coefficient: 1.0,
            features: vec![0, 1, 2],
        });
    }
    synthetic_interaction_model(m, terms)
}

/// `Σ_j (exact_j − estimate_j)²`.
pub fn squared_error(estimate: &[f64], exact: &[f64]) -> Result<f64> {
    if estimate.len() != exact.len() {
        return Err(Error::Argument(format!(
            "vector lengths differ: {} vs {}",
            estimate.len(),
            exact.len()
        )));
    }
    Ok(exact.iter().zip(estimate).map(|(a, b)| (a - b).powi(2)).sum())
}

/// Nearest-rank percentile: the `⌈p·n⌉`-th smallest value.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty sequence");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub method: Method,
    pub budget: usize,
    pub percentile: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub model_id: String,
    pub dataset_id: String,
    pub num_features: usize,
    pub methods: Vec<Method>,
    pub budgets: Vec<usize>,
    pub percentiles: Vec<f64>,
    pub seeds: Vec<u64>,
    pub instances: Vec<usize>,
    /// Method-major, then budget, then percentile.
    pub rows: Vec<ConvergenceRow>,
    /// Instance-averaged squared error per (method, budget) cell and
    /// simulation, cells in the same order as `rows`.
    pub simulation_errors: Vec<Vec<f64>>,
}

impl ConvergenceReport {
    pub fn value(&self, method: Method, budget: usize, p: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.budget == budget && r.percentile == p)
            .map(|r| r.value)
    }
}

/// Loads data and model from `cfg` and runs the experiment.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let data = cfg.load_dataset()?;
    let model = load_model(&cfg.model, &data, &ClientOptions::default())?;
    convergence_experiment(cfg, model.as_ref(), &data)
}

/// For each simulation seed: draws the background subsample and one coalition
/// sample per budget, then averages the squared error of every method over the
/// chosen test instances. Percentiles are taken over simulations.
pub fn convergence_experiment(
    cfg: &ExperimentConfig,
    model: &dyn BlackBoxModel,
    data: &Dataset,
) -> Result<ConvergenceReport> {
    let m = model.num_features();
    if data.num_features() != m {
        return Err(Error::Config(format!(
            "dataset has {} features, model expects {m}",
            data.num_features()
        )));
    }
    check_dense(m)?;
    cfg.validate(m)?;
    let instance_positions: Vec<usize> = if cfg.instances.is_empty() {
        (0..data.test.len()).collect()
    } else {
        cfg.instances.clone()
    };
    if instance_positions.is_empty() {
        return Err(Error::Config("the test split is empty".into()));
    }
    let instances = instance_positions
        .iter()
        .map(|&p| {
            data.test
                .get(p)
                .map(|&row| data.features[row].clone())
                .ok_or_else(|| Error::Config(format!("test instance {p} out of range")))
        })
        .collect::<Result<Vec<_>>>()?;
    let train = data.train_features();
    if cfg.background_size > train.len() {
        return Err(Error::Config(format!(
            "background size {} exceeds the {} training rows",
            cfg.background_size,
            train.len()
        )));
    }
    let background = BackgroundSet::new(train, cfg.background_size, cfg.seed)?;
    let solver_options = SolverOptions {
        big_weight: cfg.big_weight,
        rank_tol: DEFAULT_RANK_TOL,
    };
    let seeds = cfg.simulation_seeds();

    let per_sim: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&seed| {
            simulate(cfg, model, &instances, &background.with_seed(seed), seed, solver_options)
        })
        .collect::<Result<_>>()?;

    let cells = cfg.methods.len() * cfg.budgets.len();
    let simulation_errors: Vec<Vec<f64>> = (0..cells)
        .map(|c| per_sim.iter().map(|sim| sim[c]).collect())
        .collect();
    let mut rows = Vec::with_capacity(cells * cfg.percentiles.len());
    for (mi, &method) in cfg.methods.iter().enumerate() {
        for (bi, &budget) in cfg.budgets.iter().enumerate() {
            let errors = &simulation_errors[mi * cfg.budgets.len() + bi];
            for &p in &cfg.percentiles {
                rows.push(ConvergenceRow {
                    method,
                    budget,
                    percentile: p,
                    value: percentile(errors, p),
                });
            }
        }
    }
    Ok(ConvergenceReport {
        model_id: model.id(),
        dataset_id: data.id.clone(),
        num_features: m,
        methods: cfg.methods.clone(),
        budgets: cfg.budgets.clone(),
        percentiles: cfg.percentiles.clone(),
        seeds,
        instances: instance_positions,
        rows,
        simulation_errors,
    })
}

/// Seed of the coalition sample for one budget within a simulation.
fn sample_seed(simulation_seed: u64, budget: usize) -> u64 {
    simulation_seed ^ (budget as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn simulate(
    cfg: &ExperimentConfig,
    model: &dyn BlackBoxModel,
    instances: &[Vec<f64>],
    background: &BackgroundSet,
    seed: u64,
    options: SolverOptions,
) -> Result<Vec<f64>> {
    let m = model.num_features();
    let mut solvers: Vec<PrecomputedSolver> = Vec::with_capacity(cfg.methods.len() * cfg.budgets.len());
    let samples = cfg
        .budgets
        .iter()
        .map(|&b| sample_coalitions(m, b, sample_seed(seed, b)))
        .collect::<Result<Vec<_>>>()?;
    for &method in &cfg.methods {
        for sample in &samples {
            solvers.push(precompute_solver(sample, method, options)?);
        }
    }
    let mut totals = vec![0.0; solvers.len()];
    for x in instances {
        let source = MarginalExpectation::new(model, x, background)?.with_batch_size(cfg.batch_size);
        let dense = build_dense_value_function(&source)?;
        let exact = exact_shapley_from_values(&dense)?;
        for (total, solver) in totals.iter_mut().zip(&solvers) {
            let estimate = solver.explain(&dense)?;
            *total += squared_error(&estimate.shap_values, &exact)?;
        }
    }
    Ok(totals.into_iter().map(|t| t / instances.len() as f64).collect())
}
