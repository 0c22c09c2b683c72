//! Adaptive grid-synchronization for a grid-following three-phase converter
//! on a weak, uncertain grid.
//!
//! The grid voltage behind the grid impedance is never measured. A
//! parameter-estimation-based observer ([`gpebo`]) turns the measured PCC
//! currents and voltages into a linear regression whose unknowns are the
//! grid frequency and the initial scaled grid voltage; a least-squares
//! estimator with forgetting ([`lsff`]) solves it online, and the PLL
//! ([`pll`]) locks onto the reconstructed grid voltage instead of the PCC
//! voltage. [`engine`] closes the loop with the current controller
//! ([`ctrl`]) around an averaged circuit model ([`plant`]).

pub mod config;
pub mod ctrl;
pub mod engine;
pub mod frames;
pub mod gpebo;
pub mod lsff;
pub mod plant;
pub mod pll;

pub use config::{ConfigError, SimConfig};
pub use engine::{run_scenario, EngineError, RunOutput, RunSummary, Scenario, Trace};
