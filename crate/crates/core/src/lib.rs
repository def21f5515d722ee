//! Differential-form perturbation engine.

pub mod forms;
pub mod kernel;
pub mod solver;
pub mod driver;
pub mod transform;
pub mod validate;
