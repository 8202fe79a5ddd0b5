//! Adversarial harness for the Safe-House custody simulator: scenario
//! replay with deterministic reports, an exhaustive adversary search over
//! the loss bound, and a log-replay attacker.

pub mod bundled;
pub mod oracle;
pub mod replay;
pub mod runner;
pub mod scenario;

pub use oracle::{adversary_loss_oracle, OracleResult};
pub use replay::{mine_plaintexts, replay_attacker, ReplayReport};
pub use runner::{run_scenario, EventOutcome, Report, Totals};
pub use scenario::{Scenario, ScenarioEvent, SimError};
