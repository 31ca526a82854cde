//! Cooperative localization of wireless sensor nodes from received signal
//! strength (RSS) measurements.
//!
//! The crate contains the network model, a log-normal shadowing measurement
//! simulator, the maximum-likelihood cost, a multi-population differential
//! evolution optimizer (one population per target node, linked through a
//! sharing matrix of current estimates), a Levenberg-Marquardt reference
//! estimator started from the true positions, and a Monte-Carlo experiment
//! engine.
//!
//! ```
//! use rand::SeedableRng;
//! use rand_chacha::ChaCha8Rng;
//! use rss_coloc::{
//!     generate_measurements, reference_anchors, Aoi, DeConfig, LocalizationProblem,
//!     MultiPopulationDe, NetworkTopology, PathLossParams, Position,
//! };
//!
//! let aoi = Aoi::square(100.0);
//! let targets = vec![Position::new(20.0, 30.0), Position::new(60.0, 70.0)];
//! let topology = NetworkTopology::build(reference_anchors(), targets, 60.0, aoi).unwrap();
//! let params = PathLossParams::new(40.0, 3.0, 1.0);
//! let mut rng = ChaCha8Rng::seed_from_u64(1);
//! let measurements = generate_measurements(&topology, &params, &mut rng).unwrap();
//! let problem = LocalizationProblem::new(&topology, &measurements);
//! let solution = MultiPopulationDe::new(DeConfig::default()).run(&problem).unwrap();
//! assert_eq!(solution.best.len(), 2);
//! ```

pub mod baseline;
pub mod config;
pub mod cost;
mod error;
pub mod eval;
pub mod exec;
pub mod mpde;
pub mod network;
pub mod rss_sim;
pub mod seeding;

pub use baseline::{refine_from_truth, RefinerConfig};
pub use cost::{global_cost, per_target_cost, LocalizationProblem, SharingMatrix};
pub use error::{Error, Result};
pub use eval::{nrmse, Algorithm, ExperimentReport, Scenario, SweepAxis};
pub use exec::Execution;
pub use mpde::{DeConfig, Finalize, MultiPopulationDe, PopulationState, Solution};
pub use network::{
    grid_anchors, is_directly_connected, reference_anchors, Aoi, NetworkTopology, Node, Position,
};
pub use rss_sim::{generate_measurements, path_loss, MeasurementSet, Observation, PathLossParams};
