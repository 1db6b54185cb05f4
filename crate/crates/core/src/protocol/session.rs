//! User and Authorizer state machines for the N-round CHSH authorization
//! session, plus transcript verification and an in-process session runner.
//!
//! Per round, the ordering is user-driven: the user commits, the authorizer
//! commits, the user reveals, the authorizer reveals. Neither side releases
//! its reveal for a round before holding the peer's commit for that round,
//! which stands in for the simultaneous announcement the security argument
//! needs. A batched mode (commit all N, then reveal all N) is available
//! behind an option for throughput; per-round is the default.

use crate::chsh::{is_win, optimal_strategy, ClassicalStrategy, QuestionPair};
use crate::planner::{acceptance_interval, LevelTable, PlanError, ProtocolParams};
use crate::protocol::commit::{commit, gen_salt, verify_reveal, CommitDigest, Role, Salt};
use crate::protocol::message::{Message, RevealItem};
use crate::qsim::{MeasurementSetting, Party};
use crate::resource::{EntanglementService, ResourceError};
use crate::seed;
use crate::transport::{Channel, TransportError};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::VecDeque;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Resource(#[from] ResourceError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("invalid transcript: {0}")]
    Validation(String),
    #[error("session stalled without reaching a verdict")]
    Stalled,
}

/// Terminal result of a session, from either side's point of view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionOutcome {
    Granted { level: u32 },
    Aborted { reason: String },
}

impl SessionOutcome {
    pub fn is_granted(&self) -> bool {
        matches!(self, SessionOutcome::Granted { .. })
    }
}

/// One played round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameRecord {
    pub s: u8,
    pub t: u8,
    pub a: u8,
    pub b: u8,
    pub won: bool,
}

/// Both parties' commitment digests for one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitPair {
    #[serde(with = "crate::protocol::hexfmt")]
    pub user: CommitDigest,
    #[serde(with = "crate::protocol::hexfmt")]
    pub authorizer: CommitDigest,
}

/// The full session record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: String,
    pub user_id: String,
    pub requested_level: u32,
    pub params: ProtocolParams,
    pub rounds: Vec<GameRecord>,
    pub commits: Vec<CommitPair>,
}

impl Transcript {
    pub fn wins(&self) -> u64 {
        self.rounds.iter().filter(|r| r.won).count() as u64
    }
}

/// Hex SHA-256 over the canonical JSON encoding of the parameters; pinned in
/// `SessionAccept` so both sides abort early on a parameter mismatch.
pub fn params_digest(params: &ProtocolParams) -> String {
    let json = serde_json::to_vec(params).expect("params serialize");
    hex::encode(Sha256::digest(&json))
}

#[derive(Debug, Clone)]
pub struct SessionOptions {
    /// Commit/reveal all N rounds in two messages instead of per round.
    pub batched: bool,
    /// Wire-mode receive timeout per expected message.
    pub timeout: Duration,
    /// Variant: when the win count lands in a different level's interval
    /// than requested, grant that level instead of aborting.
    pub grant_matching_level: bool,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            batched: false,
            timeout: Duration::from_secs(30),
            grant_matching_level: false,
        }
    }
}

/// What the user's batch actually contains, independently of the level it
/// requests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResourceSpec {
    /// Pairs at the table angle for this level.
    Level(u32),
    /// Pairs at an arbitrary angle (0 = separable, no entanglement).
    Theta(f64),
}

/// How the user produces its per-round answers.
#[derive(Debug, Clone, PartialEq)]
pub enum UserBehavior {
    /// Measure with the optimal strategy for the requested level.
    Honest,
    /// Never measure; answer from deterministic tables.
    Classical(ClassicalStrategy),
    /// Never measure; answer uniformly at random.
    Fabricate,
    /// Measure, but with these settings for t = 0, 1.
    CustomAngles([MeasurementSetting; 2]),
}

#[derive(Clone, Copy)]
struct PendingRound {
    question: u8,
    answer: u8,
    salt: Salt,
}

enum UserPhase {
    Idle,
    Requested,
    AwaitPeerCommit(u64),
    AwaitPeerReveal(u64),
    AwaitPeerBatchCommit,
    AwaitPeerBatchReveal,
    AwaitVerdict,
    Done,
}

/// The User side of the protocol.
pub struct UserSession<S: EntanglementService> {
    user_id: String,
    requested_level: u32,
    resource: ResourceSpec,
    behavior: UserBehavior,
    params: ProtocolParams,
    options: SessionOptions,
    service: S,
    rng: ChaCha12Rng,
    settings: [MeasurementSetting; 2],
    session_id: Option<String>,
    phase: UserPhase,
    pending: Option<PendingRound>,
    batch_pending: Vec<PendingRound>,
    my_commits: Vec<CommitDigest>,
    peer_commits: Vec<CommitDigest>,
    rounds: Vec<GameRecord>,
    outcome: Option<SessionOutcome>,
}

impl<S: EntanglementService> UserSession<S> {
    #[allow(clippy::too_many_arguments)] // one parameter per protocol input
    pub fn new(
        user_id: &str,
        requested_level: u32,
        resource: ResourceSpec,
        behavior: UserBehavior,
        params: ProtocolParams,
        table: LevelTable,
        options: SessionOptions,
        service: S,
        master_seed: u64,
    ) -> Result<Self, ProtocolError> {
        let theta = table.level(requested_level)?.theta;
        let settings = match &behavior {
            UserBehavior::CustomAngles(s) => *s,
            _ => optimal_strategy(theta)
                .map_err(|e| ProtocolError::Validation(e.to_string()))?
                .bob,
        };
        Ok(Self {
            user_id: user_id.to_string(),
            requested_level,
            resource,
            behavior,
            params,
            options,
            service,
            rng: seed::derive_rng(master_seed, &["user", user_id]),
            settings,
            session_id: None,
            phase: UserPhase::Idle,
            pending: None,
            batch_pending: Vec::new(),
            my_commits: Vec::new(),
            peer_commits: Vec::new(),
            rounds: Vec::new(),
            outcome: None,
        })
    }

    pub fn outcome(&self) -> Option<&SessionOutcome> {
        self.outcome.as_ref()
    }

    pub fn session_id(&self) -> Option<&str> {
        self.session_id.as_deref()
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            session_id: self.session_id.clone().unwrap_or_default(),
            user_id: self.user_id.clone(),
            requested_level: self.requested_level,
            params: self.params,
            rounds: self.rounds.clone(),
            commits: self
                .my_commits
                .iter()
                .zip(&self.peer_commits)
                .map(|(u, a)| CommitPair {
                    user: *u,
                    authorizer: *a,
                })
                .collect(),
        }
    }

    /// Step 1: request authorization.
    pub fn start(&mut self) -> Vec<Message> {
        self.phase = UserPhase::Requested;
        vec![Message::AuthRequest {
            user_id: self.user_id.clone(),
            requested_level: self.requested_level,
        }]
    }

    /// Locally abort (wire driver calls this on timeout).
    pub fn force_abort(&mut self, reason: &str) -> Vec<Message> {
        self.fail(reason)
    }

    fn fail(&mut self, reason: &str) -> Vec<Message> {
        self.outcome = Some(SessionOutcome::Aborted {
            reason: reason.to_string(),
        });
        self.phase = UserPhase::Done;
        vec![Message::Abort {
            reason: reason.to_string(),
        }]
    }

    fn peer_aborted(&mut self, reason: &str) -> Vec<Message> {
        self.outcome = Some(SessionOutcome::Aborted {
            reason: format!("peer aborted: {reason}"),
        });
        self.phase = UserPhase::Done;
        vec![]
    }

    fn answer(&mut self, round: u64, question: u8) -> Result<u8, ResourceError> {
        match &self.behavior {
            UserBehavior::Honest | UserBehavior::CustomAngles(_) => {
                let sid = self.session_id.clone().expect("session id set");
                self.service.measure(
                    &sid,
                    round,
                    Party::B,
                    self.settings[question as usize],
                )
            }
            UserBehavior::Classical(tables) => Ok(tables.bob_table[question as usize]),
            UserBehavior::Fabricate => Ok(self.rng.gen_range(0..2u8)),
        }
    }

    fn prepare_round(&mut self, round: u64) -> Result<(PendingRound, CommitDigest), ResourceError> {
        let question = self.rng.gen_range(0..2u8);
        let answer = self.answer(round, question)?;
        let salt = gen_salt(&mut self.rng);
        let digest = commit(round, Role::User, question, answer, &salt);
        Ok((
            PendingRound {
                question,
                answer,
                salt,
            },
            digest,
        ))
    }

    fn begin_round(&mut self, round: u64) -> Vec<Message> {
        match self.prepare_round(round) {
            Ok((pending, digest)) => {
                self.pending = Some(pending);
                self.my_commits.push(digest);
                self.phase = UserPhase::AwaitPeerCommit(round);
                vec![Message::RoundCommit { round, digest }]
            }
            Err(e) => self.fail(&format!("resource failure: {e}")),
        }
    }

    fn provision(&mut self) -> Result<(), ResourceError> {
        let sid = self.session_id.clone().expect("session id set");
        let n = self.params.n;
        match self.resource {
            ResourceSpec::Level(k) => self.service.provision(&sid, k, n),
            ResourceSpec::Theta(theta) => self.service.provision_theta(&sid, theta, n),
        }
    }

    pub fn handle(&mut self, msg: &Message) -> Vec<Message> {
        if let Message::Abort { reason } = msg {
            return self.peer_aborted(reason);
        }
        match (&self.phase, msg) {
            (
                UserPhase::Requested,
                Message::SessionAccept {
                    session_id,
                    params_digest: digest,
                },
            ) => {
                if *digest != params_digest(&self.params) {
                    return self.fail("params-mismatch");
                }
                self.session_id = Some(session_id.clone());
                if let Err(e) = self.provision() {
                    return self.fail(&format!("resource failure: {e}"));
                }
                if self.options.batched {
                    let mut digests = Vec::with_capacity(self.params.n as usize);
                    for round in 0..self.params.n {
                        match self.prepare_round(round) {
                            Ok((pending, digest)) => {
                                self.batch_pending.push(pending);
                                digests.push(digest);
                            }
                            Err(e) => return self.fail(&format!("resource failure: {e}")),
                        }
                    }
                    self.my_commits = digests.clone();
                    self.phase = UserPhase::AwaitPeerBatchCommit;
                    vec![Message::BatchCommit { digests }]
                } else {
                    self.begin_round(0)
                }
            }
            (UserPhase::AwaitPeerCommit(r), Message::RoundCommit { round, digest })
                if round == r =>
            {
                let round = *round;
                self.peer_commits.push(*digest);
                let pending = self.pending.as_ref().expect("pending round");
                let reveal = Message::RoundReveal {
                    round,
                    question: pending.question,
                    answer: pending.answer,
                    salt: pending.salt,
                };
                self.phase = UserPhase::AwaitPeerReveal(round);
                vec![reveal]
            }
            (
                UserPhase::AwaitPeerReveal(r),
                Message::RoundReveal {
                    round,
                    question,
                    answer,
                    salt,
                },
            ) if round == r => {
                let round = *round;
                let peer_digest = &self.peer_commits[round as usize];
                if !verify_reveal(round, Role::Authorizer, *question, *answer, salt, peer_digest) {
                    return self.fail("commitment-mismatch");
                }
                let pending = self.pending.take().expect("pending round");
                let q = QuestionPair {
                    s: *question,
                    t: pending.question,
                };
                self.rounds.push(GameRecord {
                    s: *question,
                    t: pending.question,
                    a: *answer,
                    b: pending.answer,
                    won: is_win(q, *answer, pending.answer),
                });
                if round + 1 < self.params.n {
                    self.begin_round(round + 1)
                } else {
                    self.phase = UserPhase::AwaitVerdict;
                    vec![]
                }
            }
            (UserPhase::AwaitPeerBatchCommit, Message::BatchCommit { digests }) => {
                if digests.len() as u64 != self.params.n {
                    return self.fail("bad-batch-size");
                }
                self.peer_commits = digests.clone();
                let reveals = self
                    .batch_pending
                    .iter()
                    .enumerate()
                    .map(|(i, p)| RevealItem {
                        round: i as u64,
                        question: p.question,
                        answer: p.answer,
                        salt: p.salt,
                    })
                    .collect();
                self.phase = UserPhase::AwaitPeerBatchReveal;
                vec![Message::BatchReveal { reveals }]
            }
            (UserPhase::AwaitPeerBatchReveal, Message::BatchReveal { reveals }) => {
                if reveals.len() as u64 != self.params.n {
                    return self.fail("bad-batch-size");
                }
                for (i, item) in reveals.iter().enumerate() {
                    if item.round != i as u64
                        || !verify_reveal(
                            item.round,
                            Role::Authorizer,
                            item.question,
                            item.answer,
                            &item.salt,
                            &self.peer_commits[i],
                        )
                    {
                        return self.fail("commitment-mismatch");
                    }
                    let mine = &self.batch_pending[i];
                    let q = QuestionPair {
                        s: item.question,
                        t: mine.question,
                    };
                    self.rounds.push(GameRecord {
                        s: item.question,
                        t: mine.question,
                        a: item.answer,
                        b: mine.answer,
                        won: is_win(q, item.answer, mine.answer),
                    });
                }
                self.phase = UserPhase::AwaitVerdict;
                vec![]
            }
            (
                UserPhase::AwaitVerdict,
                Message::Verdict {
                    granted_level,
                    abort_reason,
                },
            ) => {
                self.phase = UserPhase::Done;
                self.outcome = Some(match (granted_level, abort_reason) {
                    // Completeness: the user knows its own level, so any
                    // verdict other than "granted exactly k" is flagged.
                    (Some(k), _) if *k == self.requested_level => {
                        SessionOutcome::Granted { level: *k }
                    }
                    (Some(k), _) => SessionOutcome::Aborted {
                        reason: format!(
                            "authorizer-misbehavior: granted level {k}, requested {}",
                            self.requested_level
                        ),
                    },
                    (None, Some(reason)) => SessionOutcome::Aborted {
                        reason: format!("authorizer verdict: {reason}"),
                    },
                    (None, None) => SessionOutcome::Aborted {
                        reason: "malformed verdict".to_string(),
                    },
                });
                vec![]
            }
            _ => self.fail("out-of-phase"),
        }
    }
}

enum AuthPhase {
    AwaitRequest,
    AwaitUserCommit(u64),
    AwaitUserReveal(u64),
    AwaitUserBatchCommit,
    AwaitUserBatchReveal,
    Done,
}

/// The Authorizer side of the protocol.
pub struct AuthorizerSession<S: EntanglementService> {
    params: ProtocolParams,
    table: LevelTable,
    options: SessionOptions,
    service: S,
    master_seed: u64,
    rng: ChaCha12Rng,
    session_id: String,
    user_id: String,
    requested_level: u32,
    settings: [MeasurementSetting; 2],
    phase: AuthPhase,
    pending: Option<PendingRound>,
    batch_pending: Vec<PendingRound>,
    my_commits: Vec<CommitDigest>,
    peer_commits: Vec<CommitDigest>,
    rounds: Vec<GameRecord>,
    outcome: Option<SessionOutcome>,
}

impl<S: EntanglementService> AuthorizerSession<S> {
    pub fn new(
        params: ProtocolParams,
        table: LevelTable,
        options: SessionOptions,
        service: S,
        master_seed: u64,
    ) -> Self {
        Self {
            params,
            table,
            options,
            service,
            master_seed,
            rng: seed::derive_rng(master_seed, &["authorizer", "unbound"]),
            session_id: String::new(),
            user_id: String::new(),
            requested_level: 0,
            settings: [MeasurementSetting::new(0.0); 2],
            phase: AuthPhase::AwaitRequest,
            pending: None,
            batch_pending: Vec::new(),
            my_commits: Vec::new(),
            peer_commits: Vec::new(),
            rounds: Vec::new(),
            outcome: None,
        }
    }

    pub fn outcome(&self) -> Option<&SessionOutcome> {
        self.outcome.as_ref()
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            session_id: self.session_id.clone(),
            user_id: self.user_id.clone(),
            requested_level: self.requested_level,
            params: self.params,
            rounds: self.rounds.clone(),
            commits: self
                .peer_commits
                .iter()
                .zip(&self.my_commits)
                .map(|(u, a)| CommitPair {
                    user: *u,
                    authorizer: *a,
                })
                .collect(),
        }
    }

    pub fn force_abort(&mut self, reason: &str) -> Vec<Message> {
        self.fail(reason)
    }

    fn fail(&mut self, reason: &str) -> Vec<Message> {
        self.outcome = Some(SessionOutcome::Aborted {
            reason: reason.to_string(),
        });
        self.phase = AuthPhase::Done;
        vec![Message::Abort {
            reason: reason.to_string(),
        }]
    }

    fn peer_aborted(&mut self, reason: &str) -> Vec<Message> {
        self.outcome = Some(SessionOutcome::Aborted {
            reason: format!("peer aborted: {reason}"),
        });
        self.phase = AuthPhase::Done;
        vec![]
    }

    fn prepare_round(&mut self, round: u64) -> Result<(PendingRound, CommitDigest), ResourceError> {
        let question = self.rng.gen_range(0..2u8);
        let answer = self.service.measure(
            &self.session_id.clone(),
            round,
            Party::A,
            self.settings[question as usize],
        )?;
        let salt = gen_salt(&mut self.rng);
        let digest = commit(round, Role::Authorizer, question, answer, &salt);
        Ok((
            PendingRound {
                question,
                answer,
                salt,
            },
            digest,
        ))
    }

    fn record_round(&mut self, round: u64, t: u8, b: u8) {
        let pending = self.pending.take().expect("pending round");
        let q = QuestionPair {
            s: pending.question,
            t,
        };
        let _ = round;
        self.rounds.push(GameRecord {
            s: pending.question,
            t,
            a: pending.answer,
            b,
            won: is_win(q, pending.answer, b),
        });
    }

    fn final_verdict(&mut self) -> Vec<Message> {
        let wins = self.rounds.iter().filter(|r| r.won).count() as u64;
        let outcome = verdict_for_wins(
            wins,
            self.requested_level,
            &self.params,
            &self.table,
            self.options.grant_matching_level,
        );
        self.phase = AuthPhase::Done;
        self.outcome = Some(outcome.clone());
        let msg = match outcome {
            SessionOutcome::Granted { level } => Message::Verdict {
                granted_level: Some(level),
                abort_reason: None,
            },
            SessionOutcome::Aborted { reason } => Message::Verdict {
                granted_level: None,
                abort_reason: Some(reason),
            },
        };
        vec![msg]
    }

    pub fn handle(&mut self, msg: &Message) -> Vec<Message> {
        if let Message::Abort { reason } = msg {
            return self.peer_aborted(reason);
        }
        match (&self.phase, msg) {
            (
                AuthPhase::AwaitRequest,
                Message::AuthRequest {
                    user_id,
                    requested_level,
                },
            ) => {
                if self.table.level(*requested_level).is_err() {
                    return self.fail("unknown-level");
                }
                self.user_id = user_id.clone();
                self.requested_level = *requested_level;
                self.session_id = seed::derive_id(self.master_seed, &["session", user_id]);
                self.rng =
                    seed::derive_rng(self.master_seed, &["authorizer", &self.session_id]);
                let theta = self
                    .table
                    .level(*requested_level)
                    .expect("validated")
                    .theta;
                self.settings = optimal_strategy(theta).expect("theta in range").alice;
                self.phase = if self.options.batched {
                    AuthPhase::AwaitUserBatchCommit
                } else {
                    AuthPhase::AwaitUserCommit(0)
                };
                vec![Message::SessionAccept {
                    session_id: self.session_id.clone(),
                    params_digest: params_digest(&self.params),
                }]
            }
            (AuthPhase::AwaitUserCommit(r), Message::RoundCommit { round, digest })
                if round == r =>
            {
                let round = *round;
                self.peer_commits.push(*digest);
                match self.prepare_round(round) {
                    Ok((pending, my_digest)) => {
                        self.pending = Some(pending);
                        self.my_commits.push(my_digest);
                        self.phase = AuthPhase::AwaitUserReveal(round);
                        vec![Message::RoundCommit {
                            round,
                            digest: my_digest,
                        }]
                    }
                    Err(e) => self.fail(&format!("resource failure: {e}")),
                }
            }
            (
                AuthPhase::AwaitUserReveal(r),
                Message::RoundReveal {
                    round,
                    question,
                    answer,
                    salt,
                },
            ) if round == r => {
                let round = *round;
                let peer_digest = &self.peer_commits[round as usize];
                if !verify_reveal(round, Role::User, *question, *answer, salt, peer_digest) {
                    return self.fail("commitment-mismatch");
                }
                let pending = self.pending.as_ref().expect("pending round");
                let my_reveal = Message::RoundReveal {
                    round,
                    question: pending.question,
                    answer: pending.answer,
                    salt: pending.salt,
                };
                self.record_round(round, *question, *answer);
                let mut out = vec![my_reveal];
                if round + 1 < self.params.n {
                    self.phase = AuthPhase::AwaitUserCommit(round + 1);
                } else {
                    out.extend(self.final_verdict());
                }
                out
            }
            (AuthPhase::AwaitUserBatchCommit, Message::BatchCommit { digests }) => {
                if digests.len() as u64 != self.params.n {
                    return self.fail("bad-batch-size");
                }
                self.peer_commits = digests.clone();
                let mut my_digests = Vec::with_capacity(self.params.n as usize);
                for round in 0..self.params.n {
                    match self.prepare_round(round) {
                        Ok((pending, digest)) => {
                            self.batch_pending.push(pending);
                            my_digests.push(digest);
                        }
                        Err(e) => return self.fail(&format!("resource failure: {e}")),
                    }
                }
                self.my_commits = my_digests.clone();
                self.phase = AuthPhase::AwaitUserBatchReveal;
                vec![Message::BatchCommit {
                    digests: my_digests,
                }]
            }
            (AuthPhase::AwaitUserBatchReveal, Message::BatchReveal { reveals }) => {
                if reveals.len() as u64 != self.params.n {
                    return self.fail("bad-batch-size");
                }
                for (i, item) in reveals.iter().enumerate() {
                    if item.round != i as u64
                        || !verify_reveal(
                            item.round,
                            Role::User,
                            item.question,
                            item.answer,
                            &item.salt,
                            &self.peer_commits[i],
                        )
                    {
                        return self.fail("commitment-mismatch");
                    }
                    let mine = &self.batch_pending[i];
                    let q = QuestionPair {
                        s: mine.question,
                        t: item.question,
                    };
                    self.rounds.push(GameRecord {
                        s: mine.question,
                        t: item.question,
                        a: mine.answer,
                        b: item.answer,
                        won: is_win(q, mine.answer, item.answer),
                    });
                }
                let my_reveals = Message::BatchReveal {
                    reveals: self
                        .batch_pending
                        .iter()
                        .enumerate()
                        .map(|(i, p)| RevealItem {
                            round: i as u64,
                            question: p.question,
                            answer: p.answer,
                            salt: p.salt,
                        })
                        .collect(),
                };
                let mut out = vec![my_reveals];
                out.extend(self.final_verdict());
                out
            }
            _ => self.fail("out-of-phase"),
        }
    }
}

/// Step 5's comparison: accepted for the requested level iff the win count
/// lies inside that level's acceptance interval.
pub fn verdict_for_wins(
    wins: u64,
    requested_level: u32,
    params: &ProtocolParams,
    table: &LevelTable,
    grant_matching_level: bool,
) -> SessionOutcome {
    let (lo, hi) = acceptance_interval(requested_level, params, table).expect("valid level");
    let w = wins as i64;
    if lo <= w && w <= hi {
        return SessionOutcome::Granted {
            level: requested_level,
        };
    }
    if grant_matching_level {
        // Variant behavior: grant the highest level whose interval matches.
        for k in (1..=table.ell()).rev() {
            let (lo, hi) = acceptance_interval(k, params, table).expect("valid level");
            if lo <= w && w <= hi {
                return SessionOutcome::Granted { level: k };
            }
        }
    }
    SessionOutcome::Aborted {
        reason: format!("level-mismatch: {wins} wins outside [{lo}, {hi}]"),
    }
}

/// Pure re-check of a stored transcript; reproduces the live verdict.
pub fn verify_transcript(
    transcript: &Transcript,
    params: &ProtocolParams,
    table: &LevelTable,
) -> Result<SessionOutcome, ProtocolError> {
    if transcript.rounds.len() as u64 != params.n {
        return Err(ProtocolError::Validation(format!(
            "expected {} rounds, found {}",
            params.n,
            transcript.rounds.len()
        )));
    }
    if table.level(transcript.requested_level).is_err() {
        return Err(ProtocolError::Validation(format!(
            "requested level {} not in table",
            transcript.requested_level
        )));
    }
    for (i, r) in transcript.rounds.iter().enumerate() {
        if r.s > 1 || r.t > 1 || r.a > 1 || r.b > 1 {
            return Err(ProtocolError::Validation(format!("round {i}: non-bit value")));
        }
        if r.won != is_win(QuestionPair { s: r.s, t: r.t }, r.a, r.b) {
            return Err(ProtocolError::Validation(format!(
                "round {i}: won flag inconsistent with winning condition"
            )));
        }
    }
    Ok(verdict_for_wins(
        transcript.wins(),
        transcript.requested_level,
        params,
        table,
        false,
    ))
}

/// Result of one complete in-process session.
#[derive(Debug, Clone)]
pub struct SessionReport {
    /// The Authorizer's verdict.
    pub verdict: SessionOutcome,
    /// The User side's view (flags authorizer misbehavior).
    pub user_outcome: SessionOutcome,
    pub transcript: Transcript,
    pub wins: u64,
}

/// Per-session configuration for the simulator.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub user_id: String,
    pub requested_level: u32,
    pub resource: ResourceSpec,
    pub behavior: UserBehavior,
    pub options: SessionOptions,
}

/// Drive a full session between both state machines over a loopback
/// transport; deterministic under `master_seed`.
pub fn run_session<S: EntanglementService + Clone>(
    params: &ProtocolParams,
    table: &LevelTable,
    cfg: &SessionConfig,
    service: S,
    master_seed: u64,
) -> Result<SessionReport, ProtocolError> {
    let mut user = UserSession::new(
        &cfg.user_id,
        cfg.requested_level,
        cfg.resource,
        cfg.behavior.clone(),
        *params,
        table.clone(),
        cfg.options.clone(),
        service.clone(),
        master_seed,
    )?;
    let mut authorizer = AuthorizerSession::new(
        *params,
        table.clone(),
        cfg.options.clone(),
        service,
        master_seed,
    );

    // In-process pump with the FIFO semantics of the loopback transport but
    // no channel or serialization overhead: sessions are hundreds of
    // thousands of messages, and the statistical experiments run thousands
    // of sessions.
    let mut to_auth: VecDeque<Message> = user.start().into();
    let mut to_user: VecDeque<Message> = VecDeque::new();
    loop {
        let mut progressed = false;
        while let Some(msg) = to_auth.pop_front() {
            progressed = true;
            to_user.extend(authorizer.handle(&msg));
        }
        while let Some(msg) = to_user.pop_front() {
            progressed = true;
            to_auth.extend(user.handle(&msg));
        }
        if authorizer.outcome().is_some() && user.outcome().is_some() {
            break;
        }
        if !progressed {
            return Err(ProtocolError::Stalled);
        }
    }

    let transcript = authorizer.transcript();
    let wins = transcript.wins();
    Ok(SessionReport {
        verdict: authorizer.outcome().cloned().expect("authorizer done"),
        user_outcome: user.outcome().cloned().expect("user done"),
        transcript,
        wins,
    })
}

/// Wire driver for the User role: runs the session over `chan` until a
/// terminal outcome, aborting on receive timeout.
pub fn drive_user<S: EntanglementService, C: Channel>(
    session: &mut UserSession<S>,
    chan: &mut C,
) -> Result<SessionOutcome, ProtocolError> {
    let timeout = session.options.timeout;
    for msg in session.start() {
        chan.send(&msg)?;
    }
    while session.outcome().is_none() {
        match chan.recv(timeout) {
            Ok(msg) => {
                for out in session.handle(&msg) {
                    chan.send(&out)?;
                }
            }
            Err(TransportError::Timeout(_)) => {
                for out in session.force_abort("timeout") {
                    let _ = chan.send(&out);
                }
            }
            Err(e) => {
                session.force_abort(&format!("transport: {e}"));
                return Err(e.into());
            }
        }
    }
    Ok(session.outcome().cloned().expect("outcome set"))
}

/// Wire driver for the Authorizer role.
pub fn drive_authorizer<S: EntanglementService, C: Channel>(
    session: &mut AuthorizerSession<S>,
    chan: &mut C,
) -> Result<SessionOutcome, ProtocolError> {
    let timeout = session.options.timeout;
    while session.outcome().is_none() {
        match chan.recv(timeout) {
            Ok(msg) => {
                for out in session.handle(&msg) {
                    chan.send(&out)?;
                }
            }
            Err(TransportError::Timeout(_)) => {
                for out in session.force_abort("timeout") {
                    let _ = chan.send(&out);
                }
            }
            Err(e) => {
                session.force_abort(&format!("transport: {e}"));
                return Err(e.into());
            }
        }
    }
    Ok(session.outcome().cloned().expect("outcome set"))
}
