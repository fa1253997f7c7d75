//! Exact SHAP, Kernel SHAP and k-additive Choquet estimators.

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::game::{build_transform_matrix, game_to_interactions, shapley_exact, InteractionVector};
use crate::wls::{Matrix, WlsFactorization, DEFAULT_RANK_TOL};

use super::sampling::{kernel_weight_with, CoalitionSample, DEFAULT_BIG_WEIGHT};
use super::value::ValueFunctionEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Exact,
    Kernel,
    KAdditive(usize),
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Exact => f.write_str("exact"),
            Method::Kernel => f.write_str("kernel"),
            Method::KAdditive(k) => write!(f, "kadd({k})"),
        }
    }
}

impl serde::Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    /// Accepts `exact`, `kernel`, `kadd(3)`, `kadd3` and `kadd:3`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "exact" => return Ok(Method::Exact),
            "kernel" | "kernelshap" | "kernel_shap" => return Ok(Method::Kernel),
            _ => {}
        }
        let k = s
            .strip_prefix("kadd")
            .map(|rest| rest.trim_start_matches([':', '(']).trim_end_matches(')'))
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|&k| k >= 1)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))?;
        Ok(Method::KAdditive(k))
    }
}

/// Reported when the system has fewer independent rows than parameters;
/// the returned parameters are then the minimum-norm solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankWarning {
    pub rank: usize,
    pub parameters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationResult {
    pub method: Method,
    pub phi0: f64,
    pub shap_values: Vec<f64>,
    /// Present for the exact and k-additive methods.
    pub interactions: Option<InteractionVector>,
    /// `f(x*)` as evaluated for the grand coalition.
    pub prediction: f64,
    /// `|φ0 + Σ φ_j − f(x*)|`.
    pub efficiency_gap: f64,
    pub budget: usize,
    pub seed: Option<u64>,
    pub model_calls: u64,
    pub rank_warning: Option<RankWarning>,
}

impl ExplanationResult {
    fn new(
        method: Method,
        phi0: f64,
        shap_values: Vec<f64>,
        interactions: Option<InteractionVector>,
        vfe: &ValueFunctionEstimate,
        seed: Option<u64>,
        rank_warning: Option<RankWarning>,
    ) -> Result<Self> {
        let prediction = vfe
            .prediction()
            .ok_or_else(|| Error::Argument("the grand coalition was not evaluated".into()))?;
        let efficiency_gap = (phi0 + shap_values.iter().sum::<f64>() - prediction).abs();
        Ok(ExplanationResult {
            method,
            phi0,
            shap_values,
            interactions,
            prediction,
            efficiency_gap,
            budget: vfe.coalitions().len(),
            seed,
            model_calls: vfe.model_calls(),
            rank_warning,
        })
    }

    /// Whether `φ0 + Σφ_j` reproduces the prediction to `tol · max(1, |f(x*)|)`.
    pub fn is_locally_accurate(&self, tol: f64) -> bool {
        self.efficiency_gap < tol * self.prediction.abs().max(1.0)
    }
}

/// Exact SHAP values from a value function over every coalition.
///
/// Interactions are populated for every order up to `m`.
pub fn exact_from_values(vfe: &ValueFunctionEstimate) -> Result<ExplanationResult> {
    let game = vfe.induced_game()?;
    if !game.is_dense() {
        return Err(Error::Argument(
            "exact SHAP needs the value of every coalition".into(),
        ));
    }
    let phi = shapley_exact(&game)?;
    let interactions = game_to_interactions(&game, game.num_players())?;
    ExplanationResult::new(Method::Exact, vfe.phi0(), phi, Some(interactions), vfe, None, None)
}

/// Exact SHAP values only, skipping the interaction indices.
pub fn exact_shapley_from_values(vfe: &ValueFunctionEstimate) -> Result<Vec<f64>> {
    shapley_exact(&vfe.induced_game()?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub big_weight: f64,
    pub rank_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            big_weight: DEFAULT_BIG_WEIGHT,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

/// Instance-independent part of a Kernel SHAP or k-additive solve for a
/// fixed coalition sample. Explaining an instance only needs its value
/// function over the same coalitions.
#[derive(Debug, Clone)]
pub struct PrecomputedSolver {
    method: Method,
    m: usize,
    coalitions: Vec<Coalition>,
    seed: Option<u64>,
    factor: WlsFactorization,
}

/// Factors the design for `method` (`Kernel` or `KAdditive(k)`) over `sample`.
pub fn precompute_solver(
    sample: &CoalitionSample,
    method: Method,
    options: SolverOptions,
) -> Result<PrecomputedSolver> {
    let m = sample.num_attributes();
    let rows = sample.coalitions();
    if !(options.big_weight > 0.0 && options.big_weight.is_finite()) {
        return Err(Error::Argument(format!("big weight {} must be positive", options.big_weight)));
    }
    let (design, weights): (Matrix, Vec<f64>) = match method {
        Method::Kernel => {
            let mut design = Matrix::zeros(rows.len(), m + 1);
            for (r, a) in rows.iter().enumerate() {
                design.set(r, 0, 1.0);
                for j in a.members() {
                    design.set(r, j + 1, 1.0);
                }
            }
            let weights = rows
                .iter()
                .map(|a| kernel_weight_with(m, a.cardinality(), options.big_weight))
                .collect();
            (design, weights)
        }
        Method::KAdditive(k) => {
            if k == 0 || k > m {
                return Err(Error::Argument(format!("additivity order k = {k} must lie in 1..={m}")));
            }
            let t = build_transform_matrix(rows, m, k)?;
            let design = Matrix::from_row_major(t.nrows(), t.ncols(), t.as_slice().to_vec())?;
            let weights = rows
                .iter()
                .map(|a| {
                    if a.is_empty() || a.is_full() {
                        options.big_weight
                    } else {
                        1.0
                    }
                })
                .collect();
            (design, weights)
        }
        Method::Exact => {
            return Err(Error::Argument("exact SHAP has no sampled solver".into()));
        }
    };
    let factor = WlsFactorization::new(&design, &weights, options.rank_tol)?;
    Ok(PrecomputedSolver {
        method,
        m,
        coalitions: rows.to_vec(),
        seed: sample.seed(),
        factor,
    })
}

impl PrecomputedSolver {
    pub fn method(&self) -> Method {
        self.method
    }

    pub fn rank(&self) -> usize {
        self.factor.rank()
    }

    pub fn parameter_count(&self) -> usize {
        self.factor.ncols()
    }

    pub fn coalitions(&self) -> &[Coalition] {
        &self.coalitions
    }

    /// `S`, mapping the evaluation vector (targets in sample order) to the
    /// parameters.
    pub fn operator(&self) -> Matrix {
        self.factor.solution_operator()
    }

    fn rank_warning(&self) -> Option<RankWarning> {
        (self.factor.rank() < self.factor.ncols()).then_some(RankWarning {
            rank: self.factor.rank(),
            parameters: self.factor.ncols(),
        })
    }

    /// Solves for one instance. `vfe` must hold values for exactly this
    /// solver's coalitions, in the same order.
    pub fn explain(&self, vfe: &ValueFunctionEstimate) -> Result<ExplanationResult> {
        if vfe.num_features() != self.m {
            return Err(Error::Argument("value function width differs from the sample".into()));
        }
        let aligned;
        let vfe = if vfe.coalitions() == self.coalitions.as_slice() {
            vfe
        } else {
            aligned = vfe.restrict(&self.coalitions)?;
            &aligned
        };
        match self.method {
            Method::Kernel => {
                let sol = self.factor.solve(vfe.values())?;
                let phi0 = sol.params[0];
                let phi = sol.params[1..].to_vec();
                ExplanationResult::new(
                    Method::Kernel,
                    phi0,
                    phi,
                    None,
                    vfe,
                    self.seed,
                    self.rank_warning(),
                )
            }
            Method::KAdditive(k) => {
                let targets = vfe.induced_values();
                let sol = self.factor.solve(&targets)?;
                let interactions = InteractionVector::new(self.m, k, sol.params)?;
                ExplanationResult::new(
                    self.method,
                    vfe.phi0(),
                    interactions.shapley_values(),
                    Some(interactions),
                    vfe,
                    self.seed,
                    self.rank_warning(),
                )
            }
            Method::Exact => unreachable!("rejected at construction"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_parsing() {
        assert_eq!("kernel".parse::<Method>().unwrap(), Method::Kernel);
        assert_eq!("kadd(3)".parse::<Method>().unwrap(), Method::KAdditive(3));
        assert_eq!("kadd2".parse::<Method>().unwrap(), Method::KAdditive(2));
        assert_eq!("KADD:4".parse::<Method>().unwrap(), Method::KAdditive(4));
        assert!("kadd0".parse::<Method>().is_err());
        assert!("lime".parse::<Method>().is_err());
        assert_eq!(Method::KAdditive(3).to_string(), "kadd(3)");
    }
}
