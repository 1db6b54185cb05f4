//! Library surface of the `qauth` binary: the simulation engine and the
//! wire-backed distributor client, shared with the integration tests.

pub mod remote;
pub mod sim;
