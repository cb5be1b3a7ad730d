//! Benchmark environments.

pub mod agv;
pub mod taxi;

pub use agv::{Agv, AgvAction, AgvEnv, AgvLayout, AgvRoot, AgvState, RootOption};
pub use taxi::{Taxi, TaxiLayout, TaxiState};
