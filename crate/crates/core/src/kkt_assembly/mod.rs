//! Stacked KKT operators, the Schur complement `Δ` and its two-level
//! splitting.
//!
//! Sign convention: the multipliers solve `Δ δ̃ = ω̃`, after which
//! `x̃ = -Q̃⁻¹ Ãᵀ δ̃` and `ũ = -R̃⁻¹ B̃ᵀ δ̃`.

mod closed_form;
mod grid_op;
mod schur;
mod splitting;
mod stacked;

pub use closed_form::{closed_form_blocks, ClosedFormBlocks};
pub use grid_op::{node_block, stored_entries, GridBlockMat};
pub use schur::{build_schur, SchurOperator, DEFAULT_DENSE_GUARD};
pub use splitting::{build_splitting, PairCoupling, SplitOperator};
pub use stacked::{build_stacked, StackedSystem};

pub(crate) use schur::check_guard;
