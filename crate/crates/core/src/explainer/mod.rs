//! Model-agnostic local explanations.
//!
//! An explanation has two stages. A [`ValueSource`] turns the model, the
//! instance of interest and a background set into expected predictions
//! `f̂_x*(A)` for a set of coalitions ([`ValueFunctionEstimate`]). An estimator
//! then turns those values into SHAP values:
//!
//! * exact: the Shapley value of the induced game `υ(A) = f̂(A) − φ0`, which
//!   needs every coalition;
//! * Kernel SHAP: weighted least squares of `f̂(A)` on `[1, 1_A]` with the
//!   Shapley kernel;
//! * k-additive: weighted least squares of `f̂(A) − φ0` on the truncated
//!   interaction-to-game transform, returning interaction indices up to
//!   order `k` as well.
//!
//! The sampled estimators factor their design once per coalition sample
//! ([`PrecomputedSolver`]) so several instances can reuse it.

mod estimators;
mod sampling;
mod value;

pub use estimators::{
    exact_from_values, exact_shapley_from_values, precompute_solver, ExplanationResult, Method,
    PrecomputedSolver, RankWarning, SolverOptions,
};
pub use sampling::{
    kernel_weight, kernel_weight_with, sample_coalitions, CoalitionSample, DEFAULT_BIG_WEIGHT,
};
pub use value::{
    build_dense_value_function, build_value_function, expected_prediction, BackgroundSet,
    LinearValueFunction, MarginalExpectation, ValueFunctionEstimate, ValueSource,
    DEFAULT_BATCH_SIZE,
};

use crate::error::Result;
use crate::model::BlackBoxModel;

/// Default additivity order for the k-additive estimator.
pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplainOptions {
    pub solver: SolverOptions,
    pub batch_size: usize,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        ExplainOptions {
            solver: SolverOptions::default(),
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }
}

/// Exact SHAP values and all interaction indices; evaluates `2^m` coalitions.
pub fn explain_exact(
    model: &dyn BlackBoxModel,
    instance: &[f64],
    background: &BackgroundSet,
    options: &ExplainOptions,
) -> Result<ExplanationResult> {
    let source =
        MarginalExpectation::new(model, instance, background)?.with_batch_size(options.batch_size);
    exact_from_values(&build_dense_value_function(&source)?)
}

fn explain_sampled(
    model: &dyn BlackBoxModel,
    instance: &[f64],
    sample: &CoalitionSample,
    background: &BackgroundSet,
    method: Method,
    options: &ExplainOptions,
) -> Result<ExplanationResult> {
    let solver = precompute_solver(sample, method, options.solver)?;
    let source =
        MarginalExpectation::new(model, instance, background)?.with_batch_size(options.batch_size);
    let vfe = build_value_function(&source, sample.coalitions())?;
    solver.explain(&vfe)
}

pub fn explain_kernel_shap(
    model: &dyn BlackBoxModel,
    instance: &[f64],
    sample: &CoalitionSample,
    background: &BackgroundSet,
    options: &ExplainOptions,
) -> Result<ExplanationResult> {
    explain_sampled(model, instance, sample, background, Method::Kernel, options)
}

pub fn explain_kadd(
    model: &dyn BlackBoxModel,
    instance: &[f64],
    sample: &CoalitionSample,
    background: &BackgroundSet,
    k: usize,
    options: &ExplainOptions,
) -> Result<ExplanationResult> {
    explain_sampled(model, instance, sample, background, Method::KAdditive(k), options)
}
