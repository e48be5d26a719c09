//! nesy-core: a self-contained neurosymbolic toolkit.
//!
//! The crate couples a probabilistic Datalog dialect ([`logic`]) with
//! pluggable differentiable provenance semirings ([`provenance`]), a
//! bottom-up reasoner ([`reasoner`]), an exhaustive possible-world reference
//! implementation ([`oracle`]), a minimal feedforward network stack with
//! reverse-mode gradients ([`neural`]), first-order constraint losses and
//! constrained decoding ([`constraints`]), and the four benchmark tasks that
//! exercise them end to end ([`tasks`]).

pub mod constraints;
pub mod logic;
pub mod neural;
pub mod oracle;
pub mod provenance;
pub mod reasoner;
pub mod tasks;

/// Default-precision tensor.
pub type Tensor64 = neural::Tensor<f64>;
/// Default-precision network.
pub type Network64 = neural::Network<f64>;
/// Default-precision optimizer.
pub type Optimizer64 = neural::Optimizer<f64>;

