//! Logical contextuality of n-cycle scenarios and the extended
//! Wigner's-friend argument built on it.
//!
//! * [`scenario`]: scenarios, behaviors, supports, global assignments,
//!   contextuality verdicts and implication chains.
//! * [`ncycle`]: the unified, odd and even n-cycle behaviors and the outcome
//!   relabelings between them.
//! * [`quantum`]: projective realizations, joint Born statistics and the
//!   qutrit five-cycle construction.
//! * [`search`]: seeded numerical search for realizations of a support
//!   target.
//! * [`ewf`]: unitary simulation of the friends' measurements, undos and the
//!   counterfactual reordering, and the resulting paradox report.
//! * [`oracles`]: independent brute-force cross-checks.
//! * [`verify`]: the end-to-end verification suite.

pub mod error;
pub mod ewf;
pub mod format;
pub mod linalg;
pub mod ncycle;
pub mod oracles;
pub mod quantum;
pub mod scenario;
pub mod search;
pub mod verify;

pub use error::{Error, Result};
pub use ewf::{paradox_report, ParadoxReport, Tolerances};
pub use ncycle::{cycle_behavior, CycleBehavior, CycleKind};
pub use quantum::{kcbs_realization, QuantumRealization};
pub use scenario::{Behavior, PossibilisticBehavior, Scenario};
