//! The black-box model interface and the two built-in models.

use std::fmt;

use crate::error::{Error, Result};
use crate::protocol::TransportError;
use crate::wls::{solve_weighted_ls, Matrix, WlsProblem, DEFAULT_RANK_TOL};

/// Anything that maps a batch of instances to real predictions
/// (a regression value or the probability of the positive class).
///
/// Implementations must be deterministic: the same batch yields the same
/// outputs.
pub trait BlackBoxModel: Send + Sync {
    fn num_features(&self) -> usize;

    fn predict_batch(&self, instances: &[Vec<f64>]) -> Result<Vec<f64>, TransportError>;

    /// Short identifier recorded in run manifests.
    fn id(&self) -> String;
}

impl<T: BlackBoxModel + ?Sized> BlackBoxModel for Box<T> {
    fn num_features(&self) -> usize {
        (**self).num_features()
    }

    fn predict_batch(&self, instances: &[Vec<f64>]) -> Result<Vec<f64>, TransportError> {
        (**self).predict_batch(instances)
    }

    fn id(&self) -> String {
        (**self).id()
    }
}

fn check_width(m: usize, instances: &[Vec<f64>]) -> Result<(), TransportError> {
    match instances.iter().find(|x| x.len() != m) {
        Some(x) => Err(TransportError::Model(format!(
            "instance has {} features, model expects {m}",
            x.len()
        ))),
        None => Ok(()),
    }
}

/// `f(x) = intercept + Σ β_j x_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }
}

impl BlackBoxModel for LinearModel {
    fn num_features(&self) -> usize {
        self.coefficients.len()
    }

    fn predict_batch(&self, instances: &[Vec<f64>]) -> Result<Vec<f64>, TransportError> {
        check_width(self.coefficients.len(), instances)?;
        Ok(instances.iter().map(|x| self.predict_one(x)).collect())
    }

    fn id(&self) -> String {
        format!("linear(m={})", self.coefficients.len())
    }
}

/// Ordinary least-squares fit with an intercept.
pub fn builtin_linear_model(features: &[Vec<f64>], targets: &[f64]) -> Result<LinearModel> {
    let m = features.first().map_or(0, Vec::len);
    if m == 0 {
        return Err(Error::Fit("no training features".into()));
    }
    if features.len() != targets.len() {
        return Err(Error::Fit(format!(
            "{} training rows but {} targets",
            features.len(),
            targets.len()
        )));
    }
    if features.len() < m + 1 {
        return Err(Error::Fit(format!(
            "{} training rows cannot determine {} parameters",
            features.len(),
            m + 1
        )));
    }
    let design: Vec<Vec<f64>> = features
        .iter()
        .map(|x| std::iter::once(1.0).chain(x.iter().copied()).collect())
        .collect();
    let problem = WlsProblem::new(
        Matrix::from_rows(&design)?,
        vec![1.0; targets.len()],
        targets.to_vec(),
    )?;
    let sol = solve_weighted_ls(&problem, DEFAULT_RANK_TOL)?;
    if sol.is_rank_deficient() {
        return Err(Error::Fit(format!(
            "singular design: rank {} < {} parameters",
            sol.rank,
            m + 1
        )));
    }
    Ok(LinearModel {
        intercept: sol.params[0],
        coefficients: sol.params[1..].to_vec(),
    })
}

/// A monomial `c · Π_{j∈features} x_j` (0-based features).
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coefficient: f64,
    pub features: Vec<usize>,
}

/// `f(x) = Σ_t c_t Π_{j∈t} x_j`, used as a ground truth with planted
/// interactions.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticModel {
    m: usize,
    terms: Vec<Term>,
}

impl SyntheticModel {
    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn max_degree(&self) -> usize {
        self.terms.iter().map(|t| t.features.len()).max().unwrap_or(0)
    }

    pub fn predict_one(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient * t.features.iter().map(|&j| x[j]).product::<f64>())
            .sum()
    }
}

impl BlackBoxModel for SyntheticModel {
    fn num_features(&self) -> usize {
        self.m
    }

    fn predict_batch(&self, instances: &[Vec<f64>]) -> Result<Vec<f64>, TransportError> {
        check_width(self.m, instances)?;
        Ok(instances.iter().map(|x| self.predict_one(x)).collect())
    }

    fn id(&self) -> String {
        format!("synthetic(m={}; {self})", self.m)
    }
}

impl fmt::Display for SyntheticModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let magnitude = t.coefficient.abs();
            match (i, t.coefficient.is_sign_negative()) {
                (0, false) => write!(f, "{magnitude}")?,
                (0, true) => write!(f, "-{magnitude}")?,
                (_, false) => write!(f, " + {magnitude}")?,
                (_, true) => write!(f, " - {magnitude}")?,
            }
            for j in &t.features {
                write!(f, "*x{}", j + 1)?;
            }
        }
        Ok(())
    }
}

pub fn synthetic_interaction_model(m: usize, terms: Vec<Term>) -> Result<SyntheticModel> {
    if m == 0 {
        return Err(Error::Argument("synthetic model needs at least one feature".into()));
    }
    for t in &terms {
        if t.features.len() > m {
            return Err(Error::Argument(format!(
                "term of degree {} exceeds m = {m}",
                t.features.len()
            )));
        }
        if let Some(j) = t.features.iter().find(|&&j| j >= m) {
            return Err(Error::Argument(format!("feature index {j} out of range for m = {m}")));
        }
        if !t.coefficient.is_finite() {
            return Err(Error::NumericInput(format!("term coefficient {}", t.coefficient)));
        }
    }
    Ok(SyntheticModel { m, terms })
}

/// Parses terms written like `2*x1 + 1.5*x1*x2 - 0.7*x2*x3*x5` (1-based
/// feature labels; a bare number is a constant term).
pub fn parse_terms(spec: &str) -> Result<Vec<Term>> {
    let mut terms = Vec::new();
    // split on +/- that are not exponent signs
    let mut pieces = Vec::new();
    let mut current = String::new();
    let mut prev = ' ';
    for ch in spec.chars() {
        if (ch == '+' || ch == '-') && !matches!(prev, 'e' | 'E') {
            pieces.push(std::mem::take(&mut current));
            if ch == '-' {
                current.push('-');
            }
        } else {
            current.push(ch);
        }
        if !ch.is_whitespace() {
            prev = ch;
        }
    }
    pieces.push(current);
    for raw in &pieces {
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let mut coefficient = 1.0;
        let mut features = Vec::new();
        let (sign, body) = match raw.strip_prefix('-') {
            Some(rest) => (-1.0, rest.trim()),
            None => (1.0, raw),
        };
        for factor in body.split('*').map(str::trim) {
            if let Some(label) = factor.strip_prefix('x') {
                let j: usize = label
                    .parse()
                    .map_err(|_| Error::Argument(format!("bad feature label '{factor}'")))?;
                if j == 0 {
                    return Err(Error::Argument("feature labels are 1-based".into()));
                }
                features.push(j - 1);
            } else {
                let c: f64 = factor
                    .parse()
                    .map_err(|_| Error::Argument(format!("bad coefficient '{factor}'")))?;
                coefficient *= c;
            }
        }
        terms.push(Term {
            coefficient: sign * coefficient,
            features,
        });
    }
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_recovers_slope() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, ((i * 7) % 5) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0]).collect();
        let model = builtin_linear_model(&x, &y).unwrap();
        assert!((model.coefficients[0] - 2.0).abs() < 1e-9);
        assert!(model.coefficients[1].abs() < 1e-9);
        assert!(model.intercept.abs() < 1e-9);
    }

    #[test]
    fn constant_target_has_zero_slopes() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let model = builtin_linear_model(&x, &[4.0; 6]).unwrap();
        assert!(model.coefficients.iter().all(|b| b.abs() < 1e-12));
        assert!((model.intercept - 4.0).abs() < 1e-12);
    }

    #[test]
    fn singular_design_fails() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..6).map(f64::from).collect();
        assert!(matches!(builtin_linear_model(&x, &y), Err(Error::Fit(_))));
        assert!(matches!(builtin_linear_model(&x[..2], &y[..2]), Err(Error::Fit(_))));
    }

    #[test]
    fn synthetic_model_evaluates_monomials() {
        let terms = parse_terms("2*x1 + 1.5*x1*x2 - 0.5*x3").unwrap();
        let model = synthetic_interaction_model(3, terms).unwrap();
        let y = model.predict_batch(&[vec![1.0, 2.0, 4.0]]).unwrap();
        assert_eq!(y, [2.0 + 3.0 - 2.0]);
        assert_eq!(model.max_degree(), 2);
        assert_eq!(model.to_string(), "2*x1 + 1.5*x1*x2 - 0.5*x3");
        let reparsed = parse_terms(&model.to_string()).unwrap();
        assert_eq!(reparsed, model.terms());

        let empty = synthetic_interaction_model(2, vec![]).unwrap();
        assert_eq!(empty.predict_batch(&[vec![3.0, 4.0]]).unwrap(), [0.0]);
    }

    #[test]
    fn synthetic_model_validation() {
        let bad = vec![Term {
            coefficient: 1.0,
            features: vec![0, 3],
        }];
        assert!(synthetic_interaction_model(3, bad).is_err());
        assert!(parse_terms("2*y1").is_err());
        assert!(parse_terms("x0").is_err());
        assert_eq!(parse_terms("3").unwrap()[0].features, Vec::<usize>::new());
        let tiny = parse_terms("1e-3*x1 - 2E+1*x2*x3").unwrap();
        assert_eq!(tiny[0].coefficient, 1e-3);
        assert_eq!(tiny[1].coefficient, -20.0);
        assert_eq!(tiny[1].features, [1, 2]);
    }

    #[test]
    fn width_mismatch_is_reported() {
        let model = LinearModel {
            intercept: 0.0,
            coefficients: vec![1.0, 1.0],
        };
        assert!(model.predict_batch(&[vec![1.0]]).is_err());
    }
}
