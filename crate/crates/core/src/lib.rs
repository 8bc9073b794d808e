//! Group recommendation by submodular consensus maximization.
//!
//! A size-k bundle of items is chosen for a group of users by maximizing a
//! consensus score over an item-affinity graph: each member contributes
//! their observed ratings, saturated by how much affinity the bundle
//! already carries toward those items, and weighted by how close the
//! member is to the rest of the group. With concave saturation functions
//! the score is monotone submodular, so an accelerated greedy solves it
//! with the classic `1 - 1/e` guarantee.
//!
//! Modules:
//! - [`model`]: ids, the sparse ratings matrix, feature matrices, groups
//! - [`factorization`]: non-negative alternating least squares features
//! - [`affinity`]: RBF item affinity, cosine user affinity
//! - [`consensus`]: the group consensus score and its marginal gains
//! - [`optimizer`]: lazy greedy, eager greedy, exhaustive verification
//! - [`baselines`]: score aggregation and scalarization baselines
//! - [`evaluation`]: holdout protocol, group formation, DCG and PSR
//! - [`synthetic`]: fixtures and planted datasets for tests and demos
//!
//! ```
//! use saga_core::consensus::{GscoreState, SaturationSpec};
//! use saga_core::model::ItemId;
//! use saga_core::optimizer::saga;
//!
//! // two members, one observed item each, four candidate items
//! let observed = vec![
//!     vec![(ItemId(0), 5.0)],
//!     vec![(ItemId(1), 4.0)],
//! ];
//! let affinity = [
//!     vec![1.0, 0.1, 0.9, 0.8, 0.1, 0.1],
//!     vec![0.1, 1.0, 0.1, 0.1, 0.9, 0.7],
//! ];
//! let mut state = GscoreState::build(6, &observed, &[1.0, 1.0], |i| {
//!     affinity[i.0].clone()
//! })
//! .unwrap();
//!
//! let result = saga(&mut state, &SaturationSpec::concave(), 2).unwrap();
//! // one relevant item per member instead of two for the same member
//! assert_eq!(result.selected, vec![ItemId(2), ItemId(4)]);
//! ```

pub mod affinity;
pub mod baselines;
pub mod consensus;
mod error;
pub mod evaluation;
pub mod factorization;
mod linalg;
pub mod model;
pub mod optimizer;
pub mod seed;
pub mod synthetic;

pub use error::{Error, Result};
