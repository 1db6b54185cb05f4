//! The Distributor's entanglement source.
//!
//! A classical simulation cannot hand out genuinely entangled halves, so the
//! Distributor is the hidden quantum backend: both parties query it, and it
//! enforces the Born rule with two-phase sampling. The first measurement on a
//! pair is answered from that party's marginal (which is independent of the
//! partner's setting, so nothing about the partner leaks through the
//! interface); the second is answered from the conditional distribution given
//! the recorded first outcome. The induced joint law equals the Born-rule
//! joint distribution exactly.

use crate::planner::LevelTable;
use crate::qsim::{
    conditional_distribution, make_partially_entangled, marginal_distribution, sample_bit,
    MeasurementSetting, Party, TwoQubitPureState,
};
use crate::seed;
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ResourceError {
    #[error("unknown level {0}")]
    UnknownLevel(u32),
    #[error("batch must contain at least one pair")]
    EmptyBatch,
    #[error("pair index {0} out of range")]
    UnknownPair(u64),
    #[error("{party:?}'s half of pair {pair} was already measured")]
    AlreadyMeasured { pair: u64, party: Party },
    #[error("pair {0} is fully consumed")]
    Consumed(u64),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {0} already provisioned")]
    AlreadyProvisioned(String),
    #[error("entanglement service failure: {0}")]
    Service(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PairStatus {
    Fresh,
    HalfMeasured {
        party: Party,
        setting: MeasurementSetting,
        outcome: u8,
    },
    Consumed,
}

/// Counts of pair states within a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchAudit {
    pub fresh: u64,
    pub half_measured: u64,
    pub consumed: u64,
}

/// A session's batch of simulated entangled pairs, all at the same theta.
#[derive(Debug, Clone)]
pub struct PairBatch {
    session_id: String,
    level: u32,
    theta: f64,
    state: TwoQubitPureState,
    pairs: Vec<PairStatus>,
    seed: [u8; 32],
    // A session measures with at most two settings per party, so the
    // handful of distinct distributions is memoized: per-measurement state
    // algebra would otherwise dominate large batches.
    marginal_cache: Vec<(MarginalKey, [f64; 2])>,
    conditional_cache: Vec<(ConditionalKey, [f64; 2])>,
}

/// Cache key: (measuring party, setting angle bits).
type MarginalKey = (Party, u64);
/// Cache key: (setting bits, fixed party's setting bits, fixed party, its outcome).
type ConditionalKey = (u64, u64, Party, u8);

impl PairBatch {
    /// Provision `count` fresh pairs at the Schmidt angle of `level_k`.
    /// Deterministic under `seed`.
    pub fn provision(
        session_id: &str,
        level_k: u32,
        count: u64,
        table: &LevelTable,
        seed: [u8; 32],
    ) -> Result<Self, ResourceError> {
        let level = table
            .level(level_k)
            .map_err(|_| ResourceError::UnknownLevel(level_k))?;
        Self::provision_theta(session_id, level_k, level.theta, count, seed)
    }

    /// Provision a batch at an arbitrary Schmidt angle, outside the level
    /// table. Used by the adversary harness to model under-resourced users
    /// (theta = 0 is a fully classical, separable batch). `level_tag` is
    /// recorded for auditing only.
    pub fn provision_theta(
        session_id: &str,
        level_tag: u32,
        theta: f64,
        count: u64,
        seed: [u8; 32],
    ) -> Result<Self, ResourceError> {
        if count < 1 {
            return Err(ResourceError::EmptyBatch);
        }
        let state = make_partially_entangled(theta)
            .map_err(|e| ResourceError::Service(e.to_string()))?;
        Ok(Self {
            session_id: session_id.to_string(),
            level: level_tag,
            theta,
            state,
            pairs: vec![PairStatus::Fresh; count as usize],
            seed,
            marginal_cache: Vec::new(),
            conditional_cache: Vec::new(),
        })
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn len(&self) -> u64 {
        self.pairs.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Measure one half of one pair. Each half can be measured at most once.
    pub fn measure_half(
        &mut self,
        pair_index: u64,
        party: Party,
        setting: MeasurementSetting,
    ) -> Result<u8, ResourceError> {
        let status = *self
            .pairs
            .get(pair_index as usize)
            .ok_or(ResourceError::UnknownPair(pair_index))?;
        match status {
            PairStatus::Consumed => Err(ResourceError::Consumed(pair_index)),
            PairStatus::Fresh => {
                let marginal = self.marginal_for(party, setting);
                let outcome = sample_bit(&marginal, self.randomness(pair_index, 0));
                self.pairs[pair_index as usize] = PairStatus::HalfMeasured {
                    party,
                    setting,
                    outcome,
                };
                Ok(outcome)
            }
            PairStatus::HalfMeasured {
                party: first_party,
                setting: first_setting,
                outcome: first_outcome,
            } => {
                if first_party == party {
                    return Err(ResourceError::AlreadyMeasured {
                        pair: pair_index,
                        party,
                    });
                }
                let (setting_a, setting_b) = match first_party {
                    Party::A => (first_setting, setting),
                    Party::B => (setting, first_setting),
                };
                let cond =
                    self.conditional_for(setting_a, setting_b, first_party, first_outcome)?;
                let outcome = sample_bit(&cond, self.randomness(pair_index, 1));
                self.pairs[pair_index as usize] = PairStatus::Consumed;
                Ok(outcome)
            }
        }
    }

    fn marginal_for(&mut self, party: Party, setting: MeasurementSetting) -> [f64; 2] {
        let key = (party, setting.angle().to_bits());
        if let Some((_, m)) = self.marginal_cache.iter().find(|(k, _)| *k == key) {
            return *m;
        }
        let m = marginal_distribution(&self.state, party, setting);
        self.marginal_cache.push((key, m));
        m
    }

    fn conditional_for(
        &mut self,
        setting_a: MeasurementSetting,
        setting_b: MeasurementSetting,
        fixed_party: Party,
        fixed_outcome: u8,
    ) -> Result<[f64; 2], ResourceError> {
        let key = (
            setting_a.angle().to_bits(),
            setting_b.angle().to_bits(),
            fixed_party,
            fixed_outcome,
        );
        if let Some((_, c)) = self.conditional_cache.iter().find(|(k, _)| *k == key) {
            return Ok(*c);
        }
        let c = conditional_distribution(&self.state, setting_a, setting_b, fixed_party, fixed_outcome)
            .map_err(|e| ResourceError::Service(e.to_string()))?;
        self.conditional_cache.push((key, c));
        Ok(c)
    }

    pub fn audit(&self) -> BatchAudit {
        let mut audit = BatchAudit {
            fresh: 0,
            half_measured: 0,
            consumed: 0,
        };
        for p in &self.pairs {
            match p {
                PairStatus::Fresh => audit.fresh += 1,
                PairStatus::HalfMeasured { .. } => audit.half_measured += 1,
                PairStatus::Consumed => audit.consumed += 1,
            }
        }
        audit
    }

    /// Uniform [0,1) randomness for a (pair, phase) slot, derived from the
    /// batch seed so outcomes depend only on the per-pair request order,
    /// never on interleaving across pairs.
    fn randomness(&self, pair_index: u64, phase: u8) -> f64 {
        let mut h = Sha256::new();
        h.update(self.seed);
        h.update(pair_index.to_le_bytes());
        h.update([phase]);
        let digest = h.finalize();
        let raw = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        // 53 bits of mantissa; in [0, 1).
        (raw >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Access to the entanglement source, in-process or over the wire.
pub trait EntanglementService {
    fn provision(&mut self, session_id: &str, level: u32, count: u64) -> Result<(), ResourceError>;

    /// Off-table provisioning for the adversary harness; wire-backed
    /// implementations do not support it.
    fn provision_theta(
        &mut self,
        session_id: &str,
        theta: f64,
        count: u64,
    ) -> Result<(), ResourceError> {
        let _ = (session_id, theta, count);
        Err(ResourceError::Service(
            "raw-theta provisioning is only available in-process".into(),
        ))
    }

    fn measure(
        &mut self,
        session_id: &str,
        pair_index: u64,
        party: Party,
        setting: MeasurementSetting,
    ) -> Result<u8, ResourceError>;
}

/// The Distributor: serves per-session batches keyed by session id.
#[derive(Debug)]
pub struct Distributor {
    table: LevelTable,
    master_seed: u64,
    batches: HashMap<String, PairBatch>,
}

impl Distributor {
    pub fn new(table: LevelTable, master_seed: u64) -> Self {
        Self {
            table,
            master_seed,
            batches: HashMap::new(),
        }
    }

    pub fn batch(&self, session_id: &str) -> Option<&PairBatch> {
        self.batches.get(session_id)
    }
}

impl EntanglementService for Distributor {
    fn provision(&mut self, session_id: &str, level: u32, count: u64) -> Result<(), ResourceError> {
        if self.batches.contains_key(session_id) {
            return Err(ResourceError::AlreadyProvisioned(session_id.to_string()));
        }
        let batch_seed = seed::derive_seed(self.master_seed, &["batch", session_id]);
        let batch = PairBatch::provision(session_id, level, count, &self.table, batch_seed)?;
        self.batches.insert(session_id.to_string(), batch);
        Ok(())
    }

    fn provision_theta(
        &mut self,
        session_id: &str,
        theta: f64,
        count: u64,
    ) -> Result<(), ResourceError> {
        if self.batches.contains_key(session_id) {
            return Err(ResourceError::AlreadyProvisioned(session_id.to_string()));
        }
        let batch_seed = seed::derive_seed(self.master_seed, &["batch", session_id]);
        let batch = PairBatch::provision_theta(session_id, 0, theta, count, batch_seed)?;
        self.batches.insert(session_id.to_string(), batch);
        Ok(())
    }

    fn measure(
        &mut self,
        session_id: &str,
        pair_index: u64,
        party: Party,
        setting: MeasurementSetting,
    ) -> Result<u8, ResourceError> {
        self.batches
            .get_mut(session_id)
            .ok_or_else(|| ResourceError::UnknownSession(session_id.to_string()))?
            .measure_half(pair_index, party, setting)
    }
}

/// Shareable in-process handle; sessions running concurrently serialize on
/// the inner lock.
#[derive(Debug, Clone)]
pub struct SharedDistributor(pub Arc<Mutex<Distributor>>);

impl SharedDistributor {
    pub fn new(table: LevelTable, master_seed: u64) -> Self {
        Self(Arc::new(Mutex::new(Distributor::new(table, master_seed))))
    }
}

impl EntanglementService for SharedDistributor {
    fn provision(&mut self, session_id: &str, level: u32, count: u64) -> Result<(), ResourceError> {
        self.0
            .lock()
            .expect("distributor lock")
            .provision(session_id, level, count)
    }

    fn provision_theta(
        &mut self,
        session_id: &str,
        theta: f64,
        count: u64,
    ) -> Result<(), ResourceError> {
        self.0
            .lock()
            .expect("distributor lock")
            .provision_theta(session_id, theta, count)
    }

    fn measure(
        &mut self,
        session_id: &str,
        pair_index: u64,
        party: Party,
        setting: MeasurementSetting,
    ) -> Result<u8, ResourceError> {
        self.0
            .lock()
            .expect("distributor lock")
            .measure(session_id, pair_index, party, setting)
    }
}
