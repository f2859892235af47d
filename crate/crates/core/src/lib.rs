//! Noncooperative routing and charging game for electric vehicles.
//!
//! Each vehicle picks a route, a charging station on that route and a signed
//! amount of energy to charge or discharge. Its cost combines road latency,
//! queueing at the station, the risk of a depleted battery and a marginal
//! energy price that rewards balancing the station's ground load. The game is
//! an exact potential game, so best-response dynamics converge.
//!
//! Modules, bottom-up:
//!
//! - [`model`]: network, stations, fleet, actions and occupancy.
//! - [`costs`]: latency, pricing, per-vehicle cost, potential, social cost.
//! - [`equilibrium`]: best responses, dynamics, Nash checks, exact enumeration.
//! - [`analysis`]: social optimum, price of anarchy/stability, load balance.
//! - [`stochastic`]: random ground loads and fleet sizing.
//! - [`prospect`]: prospect-theoretic costs and dynamics.
//! - [`experiment`]: sweep orchestration and result files used by the CLI.

pub mod analysis;
pub mod costs;
pub mod equilibrium;
pub mod error;
pub mod experiment;
pub mod model;
pub mod numeric;
pub mod prospect;
pub mod stochastic;

pub use error::{Error, Result};
pub use model::{Action, Profile, Scenario};
