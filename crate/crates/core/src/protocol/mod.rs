//! Commit–reveal CHSH authorization protocol: message schema, commitments,
//! and the two session state machines.

pub mod commit;
pub(crate) mod hexfmt;
pub mod message;
pub mod session;

pub use commit::{commit, gen_salt, verify_reveal, CommitDigest, Role, Salt, SALT_BYTES};
pub use message::{Message, QueryStatus, RevealItem};
pub use session::{
    drive_authorizer, drive_user, params_digest, run_session, verdict_for_wins, verify_transcript,
    AuthorizerSession, CommitPair, GameRecord, ProtocolError, ResourceSpec, SessionConfig,
    SessionOptions, SessionOutcome, SessionReport, Transcript, UserBehavior, UserSession,
};
