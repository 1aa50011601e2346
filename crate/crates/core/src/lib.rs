//! Measured Rényi divergences of bipartite quantum states.

pub mod error;
pub mod linops;

pub use error::{Error, Result};
pub mod classical;
pub mod states;
pub mod povm;
pub mod maxdiv;
pub mod optim;
pub mod report;
pub mod measured;
pub mod varprog;
pub mod closedform;
pub mod exponents;
pub mod acceptance;
