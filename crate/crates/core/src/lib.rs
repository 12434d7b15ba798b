//! Transient coupled conduction–radiation in a semitransparent slab, an LSTM
//! surrogate trained on the solver output, and metrics comparing the two.

pub mod conduction;
pub mod error;
pub mod evaluation;
pub mod grid;
pub mod io;
pub mod material;
pub mod radiation;
pub mod simulation;
pub mod surrogate;

pub use error::{Error, Result};
pub use grid::Grid1D;
pub use material::MaterialModel;
