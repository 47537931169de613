//! Reverse-mode differentiation over a recorded tape.
//!
//! Forward operations append nodes to a [`Tape`]; [`Tape::backward`] replays
//! them in reverse and returns a [`Gradients`] store covering every node.
//! Node inputs always precede the node itself, so the tape order is a
//! topological order and the graph cannot contain cycles.

mod gradcheck;
mod tape;

pub use gradcheck::{gradient_check, relative_error, GradCheckReport, Objective, Probe};
pub use tape::{conv_output_size, Gradients, Mode, Tape, Var};
