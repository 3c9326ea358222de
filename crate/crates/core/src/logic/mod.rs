//! Unification, the belief base, and rule-based query answering.

mod belief;
mod query;
mod unify;

pub use belief::{BeliefBase, BeliefError, DEFAULT_DEPTH_BOUND};
pub use query::Solutions;
pub use unify::{rename_literal, rename_term, unify, unify_literals, Substitution};

use crate::lang::Literal;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("resolution depth exceeded {bound} while proving `{goal}`")]
    DepthExceeded { bound: usize, goal: Literal },
    #[error("negated literal `{0}` is not ground when evaluated")]
    FloundedNegation(Literal),
}
