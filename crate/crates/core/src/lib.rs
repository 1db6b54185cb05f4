//! Classical simulation of a device-independent, multi-level authorization
//! scheme built on the CHSH game.
//!
//! Each authorization level corresponds to a partially entangled two-qubit
//! state; the user proves possession of the right amount of entanglement by
//! playing N CHSH rounds against the authorizer under a commit–reveal
//! regime, and the observed win count is matched against per-level
//! acceptance intervals sized by a Chernoff bound.
//!
//! Module map:
//! - [`qsim`]: exact two-qubit states, projective measurements, Born
//!   sampling, concurrence.
//! - [`chsh`]: the game itself — win predicate, optimal strategies, win
//!   probabilities, the classical 3/4 ceiling.
//! - [`planner`]: level tables and (N, epsilon) parameter planning.
//! - [`resource`]: the entanglement source (Distributor) handing out
//!   single-use pair batches.
//! - [`protocol`]: wire messages, commitments, and the User/Authorizer
//!   state machines.
//! - [`transport`]: length-prefixed JSON frames over TCP, plus an
//!   in-process loopback.
//! - [`authdb`]: the leveled record store unlocked by a granted verdict.

pub mod authdb;
pub mod chsh;
pub mod planner;
pub mod protocol;
pub mod qsim;
pub mod resource;
pub mod seed;
pub mod transport;

pub use chsh::{ClassicalStrategy, QuantumStrategy, QuestionPair, CLASSICAL_BOUND, TSIRELSON};
pub use planner::{LevelTable, PlanMode, ProtocolParams};
pub use protocol::{Message, SessionOutcome, Transcript};
pub use qsim::{MeasurementSetting, Party, TwoQubitPureState};
pub use resource::{Distributor, EntanglementService, SharedDistributor};
