//! Wire message schema.
//!
//! Messages serialize as JSON objects with a `type` tag and lowercase
//! snake_case fields; digests and salts are hex-encoded.

use crate::protocol::commit::{CommitDigest, Salt};
use crate::qsim::Party;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    /// Step 1: the User requests authorization to some level.
    AuthRequest {
        user_id: String,
        requested_level: u32,
    },
    /// The Authorizer opens the session; `params_digest` pins the protocol
    /// parameters both sides must agree on.
    SessionAccept {
        session_id: String,
        params_digest: String,
    },
    /// Per-round commitment to `(question, answer)` under a private salt.
    RoundCommit {
        round: u64,
        #[serde(with = "crate::protocol::hexfmt")]
        digest: CommitDigest,
    },
    /// Per-round opening of the commitment.
    RoundReveal {
        round: u64,
        question: u8,
        answer: u8,
        #[serde(with = "crate::protocol::hexfmt")]
        salt: Salt,
    },
    /// Batched variant: all N round digests at once.
    BatchCommit {
        #[serde(with = "crate::protocol::hexfmt::digest_vec")]
        digests: Vec<CommitDigest>,
    },
    /// Batched variant: all N openings at once.
    BatchReveal { reveals: Vec<RevealItem> },
    /// Final outcome; exactly one of the fields is set.
    Verdict {
        granted_level: Option<u32>,
        abort_reason: Option<String>,
    },
    /// Unrecoverable protocol violation or failure.
    Abort { reason: String },

    /// Entanglement-source interface: provision a session's batch.
    ProvisionRequest {
        session_id: String,
        level: u32,
        count: u64,
    },
    ProvisionAck { session_id: String },
    /// Entanglement-source interface: measure one half of one pair.
    MeasureRequest {
        session_id: String,
        pair_index: u64,
        party: Party,
        /// Polar angle of the measurement direction, radians. Carried as a
        /// decimal string: serde's internally-tagged enum buffering can
        /// drop the last ulp of a raw f64 field, and the measurement angle
        /// must survive the wire bit-exactly for runs to be reproducible.
        #[serde(with = "f64_as_string")]
        setting: f64,
    },
    MeasureReply { outcome: u8 },

    /// Database access after a granted verdict.
    QueryRequest {
        session_id: String,
        record_id: String,
    },
    QueryReply {
        record_id: String,
        status: QueryStatus,
        /// Base64 payload, present iff status is `ok`.
        payload: Option<String>,
    },
}

mod f64_as_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        // Display prints the shortest decimal that parses back exactly.
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevealItem {
    pub round: u64,
    pub question: u8,
    pub answer: u8,
    /// 128-bit salt; hex-encoded on the wire.
    #[serde(with = "crate::protocol::hexfmt")]
    pub salt: Salt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStatus {
    Ok,
    Denied,
    NotFound,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tagged_snake_case_encoding() {
        let msg = Message::AuthRequest {
            user_id: "alice".into(),
            requested_level: 2,
        };
        let json = serde_json::to_string(&msg).unwrap();
        assert_eq!(
            json,
            r#"{"type":"auth_request","user_id":"alice","requested_level":2}"#
        );

        let msg = Message::RoundReveal {
            round: 3,
            question: 1,
            answer: 0,
            salt: [0xaa; 16],
        };
        let json = serde_json::to_string(&msg).unwrap();
        assert!(json.starts_with(r#"{"type":"round_reveal","round":3"#));
        assert!(json.contains(&format!("\"salt\":\"{}\"", "aa".repeat(16))));
        let back: Message = serde_json::from_str(&json).unwrap();
        assert_eq!(back, msg);

        let msg = Message::MeasureRequest {
            session_id: "s".into(),
            pair_index: 0,
            party: crate::qsim::Party::A,
            setting: 0.5,
        };
        let json = serde_json::to_string(&msg).unwrap();
        assert!(json.contains(r#""party":"a""#));
    }

    #[test]
    fn verdict_roundtrip() {
        let v = Message::Verdict {
            granted_level: Some(2),
            abort_reason: None,
        };
        let back: Message = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(v, back);
    }
}
