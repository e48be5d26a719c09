//! The four benchmark tasks: data generation, program wiring, and training
//! loops connecting neural heads to the reasoner or the constraint layer.

pub mod digits;
pub mod math;
pub mod mnist_sum;
pub mod ner;
pub mod shapes;

use crate::constraints::ConstraintError;
use crate::logic::LogicError;
use crate::neural::NeuralError;
use crate::oracle::OracleError;
use crate::reasoner::ReasonerError;
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("bad IDX payload: wrong magic 0x{0:08x}")]
    BadMagic(u32),
    #[error("bad IDX payload: truncated (need {need} bytes, have {have})")]
    TruncatedPayload { need: usize, have: usize },
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Reasoner(#[from] ReasonerError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// How neural outputs and symbolic knowledge are coupled during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interplay {
    /// Differentiable reasoning over a logic program.
    #[default]
    Reasoner,
    /// Product t-norm surrogate loss.
    SoftConstraint,
    /// Score-function sampling loss.
    Sampling,
    /// Soft constraints weighted by Lagrange multipliers.
    PrimalDual,
}

/// Knobs shared by all tasks; each task reads the subset it needs.
#[derive(Debug, Clone)]
pub struct TaskConfig {
    pub seed: u64,
    pub epochs: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub top_k: Option<usize>,
    pub interplay: Interplay,
    /// Dataset directory (Shapes) or IDX file pair (MNIST), when not using
    /// in-memory synthetic generation.
    pub data_dir: Option<PathBuf>,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            seed: 0,
            epochs: 3,
            train_count: 1000,
            test_count: 500,
            learning_rate: 0.01,
            batch_size: 16,
            top_k: None,
            interplay: Interplay::Reasoner,
            data_dir: None,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<(), TaskError> {
        if self.epochs == 0 || self.train_count == 0 || self.test_count == 0 || self.batch_size == 0 {
            return Err(TaskError::Config("counts and epochs must be positive".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(TaskError::Config("learning rate must be positive".into()));
        }
        if self.top_k == Some(0) {
            return Err(TaskError::Config("semiring k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Flat name → value metric map; every task returns one.
pub type Metrics = BTreeMap<String, f64>;

/// Binary NLL on a Bernoulli probability: loss and d loss / d p.
pub(crate) fn bernoulli_nll(p: f64, label: bool) -> (f64, f64) {
    let p = p.clamp(0.0, 1.0);
    if label {
        let q = p.max(1e-12);
        (-q.ln(), -1.0 / q)
    } else {
        let q = (1.0 - p).max(1e-12);
        (-q.ln(), 1.0 / q)
    }
}
