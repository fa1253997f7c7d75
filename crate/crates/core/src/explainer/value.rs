//! Expected model predictions over coalitions under feature independence.

use std::collections::HashMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coalition::{check_dense, coalitions_up_to, Coalition};
use crate::error::{Error, Result};
use crate::game::Game;
use crate::model::{BlackBoxModel, LinearModel};

/// Default number of composite instances per `predict_batch` call.
pub const DEFAULT_BATCH_SIZE: usize = 1024;

/// Training rows used to fill in absent features.
#[derive(Debug, Clone)]
pub struct BackgroundSet {
    samples: Vec<Vec<f64>>,
    q: usize,
    seed: u64,
}

impl BackgroundSet {
    pub fn new(samples: Vec<Vec<f64>>, q: usize, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Argument("background set is empty".into()));
        }
        let m = samples[0].len();
        if samples.iter().any(|r| r.len() != m) {
            return Err(Error::Argument("background rows have different widths".into()));
        }
        if q == 0 || q > samples.len() {
            return Err(Error::Argument(format!(
                "background subsample size {q} must lie in 1..={}",
                samples.len()
            )));
        }
        Ok(BackgroundSet { samples, q, seed })
    }

    /// Uses every row.
    pub fn all(samples: Vec<Vec<f64>>) -> Result<Self> {
        let q = samples.len();
        BackgroundSet::new(samples, q, 0)
    }

    pub fn num_features(&self) -> usize {
        self.samples[0].len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn subsample_size(&self) -> usize {
        self.q
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        BackgroundSet {
            seed,
            ..self.clone()
        }
    }

    /// The `q` rows drawn for one explanation, ascending by original index.
    pub fn subsample(&self) -> Vec<&[f64]> {
        if self.q == self.samples.len() {
            return self.samples.iter().map(Vec::as_slice).collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut idx = index::sample(&mut rng, self.samples.len(), self.q).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| self.samples[i].as_slice()).collect()
    }

    /// Per-feature mean of the subsample.
    pub fn mean(&self) -> Vec<f64> {
        let rows = self.subsample();
        let m = self.num_features();
        let mut mean = vec![0.0; m];
        for r in &rows {
            for (acc, v) in mean.iter_mut().zip(r.iter()) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= rows.len() as f64);
        mean
    }
}

/// Source of `f̂_x*(A)` values for an instance of interest.
pub trait ValueSource: Sync {
    fn num_features(&self) -> usize;

    /// Returns one value per coalition plus the number of model evaluations spent.
    fn evaluate(&self, coalitions: &[Coalition]) -> Result<(Vec<f64>, u64)>;
}

/// `f̂_x*(A) = (1/q) Σ_l f(x*_A, x_{l,Ā})` over a fixed background subsample.
pub struct MarginalExpectation<'a> {
    model: &'a dyn BlackBoxModel,
    instance: Vec<f64>,
    background: Vec<&'a [f64]>,
    batch_size: usize,
}

impl<'a> MarginalExpectation<'a> {
    pub fn new(
        model: &'a dyn BlackBoxModel,
        instance: &[f64],
        background: &'a BackgroundSet,
    ) -> Result<Self> {
        let m = model.num_features();
        if instance.len() != m {
            return Err(Error::Argument(format!(
                "instance has {} features, model expects {m}",
                instance.len()
            )));
        }
        if background.num_features() != m {
            return Err(Error::Argument(format!(
                "background has {} features, model expects {m}",
                background.num_features()
            )));
        }
        if let Some(v) = instance.iter().find(|v| !v.is_finite()) {
            return Err(Error::NumericInput(format!("instance value {v}")));
        }
        Ok(MarginalExpectation {
            model,
            instance: instance.to_vec(),
            background: background.subsample(),
            batch_size: DEFAULT_BATCH_SIZE,
        })
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }
}

struct BatchRunner<'m> {
    model: &'m dyn BlackBoxModel,
    batch_size: usize,
    pending: Vec<Vec<f64>>,
    owners: Vec<usize>,
    sums: Vec<f64>,
    batch_id: usize,
    calls: u64,
}

impl BatchRunner<'_> {
    fn push(&mut self, owner: usize, row: Vec<f64>) -> Result<()> {
        self.pending.push(row);
        self.owners.push(owner);
        if self.pending.len() >= self.batch_size {
            self.flush()?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let batch = self.batch_id;
        self.batch_id += 1;
        let preds = self
            .model
            .predict_batch(&self.pending)
            .map_err(|source| Error::ModelTransport { batch, source })?;
        if preds.len() != self.pending.len() {
            return Err(Error::ModelTransport {
                batch,
                source: crate::protocol::TransportError::CountMismatch {
                    expected: self.pending.len(),
                    got: preds.len(),
                },
            });
        }
        if preds.iter().any(|p| !p.is_finite()) {
            return Err(Error::ModelTransport {
                batch,
                source: crate::protocol::TransportError::NonFinite("prediction values"),
            });
        }
        self.calls += preds.len() as u64;
        for (owner, p) in self.owners.iter().zip(preds) {
            self.sums[*owner] += p;
        }
        self.pending.clear();
        self.owners.clear();
        Ok(())
    }
}

impl ValueSource for MarginalExpectation<'_> {
    fn num_features(&self) -> usize {
        self.instance.len()
    }

    fn evaluate(&self, coalitions: &[Coalition]) -> Result<(Vec<f64>, u64)> {
        let m = self.instance.len();
        let mut runner = BatchRunner {
            model: self.model,
            batch_size: self.batch_size,
            pending: Vec::with_capacity(self.batch_size),
            owners: Vec::with_capacity(self.batch_size),
            sums: vec![0.0; coalitions.len()],
            batch_id: 0,
            calls: 0,
        };
        let mut divisors = Vec::with_capacity(coalitions.len());
        for (i, a) in coalitions.iter().enumerate() {
            if a.num_attributes() != m {
                return Err(Error::Argument(format!("coalition {a:?} is not over {m} features")));
            }
            if a.is_full() {
                runner.push(i, self.instance.clone())?;
                divisors.push(1.0);
                continue;
            }
            for bg in &self.background {
                let row = (0..m)
                    .map(|j| if a.contains(j) { self.instance[j] } else { bg[j] })
                    .collect();
                runner.push(i, row)?;
            }
            divisors.push(self.background.len() as f64);
        }
        runner.flush()?;
        let values = runner.sums.iter().zip(divisors).map(|(s, d)| s / d).collect();
        Ok((values, runner.calls))
    }
}

/// `f̂_x*(A)` for a single coalition.
pub fn expected_prediction(
    model: &dyn BlackBoxModel,
    instance: &[f64],
    coalition: &Coalition,
    background: &BackgroundSet,
) -> Result<f64> {
    let source = MarginalExpectation::new(model, instance, background)?;
    Ok(source.evaluate(std::slice::from_ref(coalition))?.0[0])
}

/// Closed-form value function of a linear model:
/// `f̂(A) = b + Σ_{j∈A} β_j x*_j + Σ_{j∉A} β_j x̄_j`.
#[derive(Debug, Clone)]
pub struct LinearValueFunction {
    model: LinearModel,
    instance: Vec<f64>,
    background_mean: Vec<f64>,
}

impl LinearValueFunction {
    pub fn new(model: LinearModel, instance: &[f64], background_mean: &[f64]) -> Result<Self> {
        let m = model.coefficients.len();
        if instance.len() != m || background_mean.len() != m {
            return Err(Error::Argument("instance/mean width differs from model".into()));
        }
        Ok(LinearValueFunction {
            model,
            instance: instance.to_vec(),
            background_mean: background_mean.to_vec(),
        })
    }

    pub fn value(&self, a: &Coalition) -> f64 {
        self.model.intercept
            + self
                .model
                .coefficients
                .iter()
                .enumerate()
                .map(|(j, b)| {
                    b * if a.contains(j) {
                        self.instance[j]
                    } else {
                        self.background_mean[j]
                    }
                })
                .sum::<f64>()
    }
}

impl ValueSource for LinearValueFunction {
    fn num_features(&self) -> usize {
        self.instance.len()
    }

    fn evaluate(&self, coalitions: &[Coalition]) -> Result<(Vec<f64>, u64)> {
        Ok((coalitions.iter().map(|a| self.value(a)).collect(), 0))
    }
}

/// Expected predictions `f̂_x*(A)` for a set of coalitions, plus `φ0 = f̂(∅)`.
#[derive(Debug, Clone)]
pub struct ValueFunctionEstimate {
    m: usize,
    phi0: f64,
    coalitions: Vec<Coalition>,
    values: Vec<f64>,
    index: HashMap<u64, usize>,
    model_calls: u64,
}

impl ValueFunctionEstimate {
    pub fn from_parts(
        m: usize,
        coalitions: Vec<Coalition>,
        values: Vec<f64>,
        model_calls: u64,
    ) -> Result<Self> {
        if coalitions.len() != values.len() {
            return Err(Error::Argument("coalition and value counts differ".into()));
        }
        let index: HashMap<u64, usize> = coalitions
            .iter()
            .enumerate()
            .map(|(i, c)| (c.bits(), i))
            .collect();
        if index.len() != coalitions.len() {
            return Err(Error::Argument("duplicate coalitions in value function".into()));
        }
        let phi0 = index
            .get(&0)
            .map(|&i| values[i])
            .ok_or_else(|| Error::Argument("value function lacks the empty coalition".into()))?;
        Ok(ValueFunctionEstimate {
            m,
            phi0,
            coalitions,
            values,
            index,
            model_calls,
        })
    }

    pub fn num_features(&self) -> usize {
        self.m
    }

    /// `φ0 = f̂(∅)`, the mean background prediction.
    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    pub fn coalitions(&self) -> &[Coalition] {
        &self.coalitions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn model_calls(&self) -> u64 {
        self.model_calls
    }

    pub fn get(&self, a: &Coalition) -> Option<f64> {
        self.index.get(&a.bits()).map(|&i| self.values[i])
    }

    /// `f(x*) = f̂(M)` when the grand coalition was evaluated.
    pub fn prediction(&self) -> Option<f64> {
        self.get(&Coalition::full(self.m))
    }

    /// `υ(A) = f̂(A) − φ0` over the evaluated coalitions.
    pub fn induced_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v - self.phi0).collect()
    }

    /// The induced game; dense when every coalition was evaluated.
    pub fn induced_game(&self) -> Result<Game> {
        if self.m <= crate::coalition::DENSE_CAP && self.values.len() == 1usize << self.m {
            Game::from_fn(self.m, |a| self.values[self.index[&a.bits()]] - self.phi0)
        } else {
            Ok(Game::sparse(
                self.m,
                self.coalitions
                    .iter()
                    .zip(&self.values)
                    .map(|(c, v)| (*c, v - self.phi0)),
            ))
        }
    }

    /// The entries for `coalitions`, in that order. Fails if any is missing.
    pub fn restrict(&self, coalitions: &[Coalition]) -> Result<Self> {
        let values = coalitions
            .iter()
            .map(|c| {
                self.get(c)
                    .ok_or_else(|| Error::Argument(format!("coalition {c} was not evaluated")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = ValueFunctionEstimate::from_parts(self.m, coalitions.to_vec(), values, 0)?;
        out.phi0 = self.phi0;
        Ok(out)
    }
}

/// Evaluates `source` over `coalitions` (the empty coalition is added at the
/// end if absent).
pub fn build_value_function(
    source: &dyn ValueSource,
    coalitions: &[Coalition],
) -> Result<ValueFunctionEstimate> {
    let m = source.num_features();
    let mut all = coalitions.to_vec();
    if !all.iter().any(Coalition::is_empty) {
        all.push(Coalition::empty(m));
    }
    let (values, calls) = source.evaluate(&all)?;
    ValueFunctionEstimate::from_parts(m, all, values, calls)
}

/// Evaluates every coalition (`2^m` of them).
pub fn build_dense_value_function(source: &dyn ValueSource) -> Result<ValueFunctionEstimate> {
    let m = source.num_features();
    check_dense(m)?;
    build_value_function(source, &coalitions_up_to(m, m)?)
}
