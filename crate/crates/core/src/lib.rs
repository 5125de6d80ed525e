//! Twin-field QKD over asymmetric channels: photon statistics, a Monte Carlo
//! emulator, decoy-state yield bounds, key rates and intensity optimization.

pub mod decoy;
pub mod error;
pub mod keyrate;
pub mod model;
pub mod optics;
pub mod sim;
pub mod strategy;

pub use error::{Error, Result};
pub use keyrate::{analytic_report, KeyRateReport, Objective};
pub use model::{ChannelParams, IntensitySet, ProtocolConfig};
pub use sim::{simulate_run, tallies_to_observations, ObservedStats, TallyMatrix};
pub use strategy::{optimize_intensities, scan_losses, Strategy};
