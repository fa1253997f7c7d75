//! Shapley-value explanations of black-box models through k-additive Choquet
//! integrals.
//!
//! The crate is layered:
//!
//! * [`coalition`]: bit-set coalitions and their canonical enumeration order;
//! * [`game`]: set functions, Shapley values, interaction indices and the
//!   interaction/game transforms;
//! * [`choquet`]: the discrete Choquet integral;
//! * [`wls`]: weighted least squares with rank-revealing QR;
//! * [`explainer`]: value functions, coalition sampling and the estimators;
//! * [`model`] and [`protocol`]: in-process models and the line-delimited
//!   JSON prediction protocol for out-of-process ones;
//! * [`dataset`], [`experiment`] and [`report`]: the convergence harness.
//!
//! ```
//! use kadd_shap::explainer::{
//!     explain_exact, explain_kadd, sample_coalitions, BackgroundSet, ExplainOptions,
//! };
//! use kadd_shap::model::{parse_terms, synthetic_interaction_model};
//!
//! let model = synthetic_interaction_model(4, parse_terms("x1 + 2*x2*x3 - x4")?)?;
//! let background = BackgroundSet::all(vec![vec![0.0; 4], vec![1.0, 0.5, 0.5, 1.0]])?;
//! let x = [1.0, 1.0, 2.0, 0.0];
//! let opts = ExplainOptions::default();
//!
//! let exact = explain_exact(&model, &x, &background, &opts)?;
//! let sample = sample_coalitions(4, 12, 7)?;
//! let approx = explain_kadd(&model, &x, &sample, &background, 2, &opts)?;
//! for (a, b) in approx.shap_values.iter().zip(&exact.shap_values) {
//!     assert!((a - b).abs() < 1e-6);
//! }
//! # Ok::<(), kadd_shap::Error>(())
//! ```

pub mod choquet;
pub mod coalition;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod explainer;
pub mod game;
pub mod model;
pub mod protocol;
pub mod report;
pub mod wls;

pub use coalition::{Coalition, PowerSetOrder};
pub use error::{Error, Result};
pub use explainer::{ExplanationResult, Method};
pub use game::{Game, InteractionVector};
pub use model::BlackBoxModel;
