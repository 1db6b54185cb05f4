//! The leveled record store behind the authorizer.
//!
//! Records live in an NDJSON file, one object per line:
//! `{"id": "...", "level": k, "data": "<base64>"}`. A grant at level k opens
//! every record tagged k or below (access is cumulative), and nothing above.

use crate::protocol::message::QueryStatus;
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DbError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("line {line}: record level {level} outside 1..={max}")]
    LevelOutOfRange { line: usize, level: u32, max: u32 },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("no grant for session {0:?}")]
    UnknownSession(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub level: u32,
    /// Base64-encoded payload, stored as-is.
    pub data: String,
}

/// A session's clearance after a granted verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessGrant {
    pub session_id: String,
    pub user_id: String,
    pub level: u32,
}

/// One answered query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryOutcome {
    pub record_id: String,
    pub status: QueryStatus,
    pub payload: Option<String>,
}

/// In-memory view of the record store plus the active grants.
#[derive(Debug, Default)]
pub struct AuthDb {
    records: HashMap<String, Record>,
    order: Vec<String>,
    grants: HashMap<String, AccessGrant>,
    level_count: u32,
}

impl AuthDb {
    /// Parse an NDJSON record file; every record level must lie in
    /// `1..=level_count`. Blank lines are ignored.
    pub fn load(path: &Path, level_count: u32) -> Result<Self, DbError> {
        let text = fs::read_to_string(path)?;
        Self::from_ndjson(&text, level_count)
    }

    pub fn from_ndjson(text: &str, level_count: u32) -> Result<Self, DbError> {
        let mut db = Self {
            level_count,
            ..Self::default()
        };
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(line)
                .map_err(|e| DbError::Parse(i + 1, e.to_string()))?;
            if record.level < 1 || record.level > level_count {
                return Err(DbError::LevelOutOfRange {
                    line: i + 1,
                    level: record.level,
                    max: level_count,
                });
            }
            BASE64
                .decode(&record.data)
                .map_err(|e| DbError::Parse(i + 1, format!("data is not base64: {e}")))?;
            if db.records.contains_key(&record.id) {
                return Err(DbError::DuplicateId(record.id));
            }
            db.order.push(record.id.clone());
            db.records.insert(record.id.clone(), record);
        }
        Ok(db)
    }

    pub fn level_count(&self) -> u32 {
        self.level_count
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record ids in file order.
    pub fn record_ids(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    pub fn record(&self, id: &str) -> Option<&Record> {
        self.records.get(id)
    }

    /// Register a session's clearance; replaces any previous grant for the
    /// same session.
    pub fn issue_grant(&mut self, grant: AccessGrant) {
        self.grants.insert(grant.session_id.clone(), grant);
    }

    pub fn grant(&self, session_id: &str) -> Option<&AccessGrant> {
        self.grants.get(session_id)
    }

    /// Answer a query under the session's grant. Payload is released iff the
    /// record's tag is at most the granted level.
    pub fn query(&self, session_id: &str, record_id: &str) -> Result<QueryOutcome, DbError> {
        let grant = self
            .grants
            .get(session_id)
            .ok_or_else(|| DbError::UnknownSession(session_id.to_string()))?;
        Ok(match self.records.get(record_id) {
            None => QueryOutcome {
                record_id: record_id.to_string(),
                status: QueryStatus::NotFound,
                payload: None,
            },
            Some(record) if record.level <= grant.level => QueryOutcome {
                record_id: record_id.to_string(),
                status: QueryStatus::Ok,
                payload: Some(record.data.clone()),
            },
            Some(_) => QueryOutcome {
                record_id: record_id.to_string(),
                status: QueryStatus::Denied,
                payload: None,
            },
        })
    }
}

/// Deterministic demo fixture: `count` records per level, ids `rec-k-j`,
/// payloads decoding to `level k secret j`.
pub fn demo_ndjson(level_count: u32, per_level: u32) -> String {
    let mut out = String::new();
    for k in 1..=level_count {
        for j in 0..per_level {
            let record = Record {
                id: format!("rec-{k}-{j}"),
                level: k,
                data: BASE64.encode(format!("level {k} secret {j}")),
            };
            out.push_str(&serde_json::to_string(&record).expect("record serialize"));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn demo_db(ell: u32) -> AuthDb {
        AuthDb::from_ndjson(&demo_ndjson(ell, 2), ell).unwrap()
    }

    fn grant(db: &mut AuthDb, sid: &str, level: u32) {
        db.issue_grant(AccessGrant {
            session_id: sid.into(),
            user_id: "u".into(),
            level,
        });
    }

    #[test]
    fn load_and_lookup() {
        let db = demo_db(3);
        assert_eq!(db.len(), 6);
        assert_eq!(db.record("rec-2-1").unwrap().level, 2);
        assert!(db.record("rec-9-0").is_none());
    }

    #[test]
    fn cumulative_access_below_and_at_grant() {
        let mut db = demo_db(3);
        grant(&mut db, "s1", 2);
        let ok = db.query("s1", "rec-1-0").unwrap();
        assert_eq!(ok.status, QueryStatus::Ok);
        assert_eq!(
            BASE64.decode(ok.payload.unwrap()).unwrap(),
            b"level 1 secret 0"
        );
        assert_eq!(db.query("s1", "rec-2-0").unwrap().status, QueryStatus::Ok);
        let denied = db.query("s1", "rec-3-0").unwrap();
        assert_eq!(denied.status, QueryStatus::Denied);
        assert!(denied.payload.is_none());
        assert_eq!(
            db.query("s1", "nope").unwrap().status,
            QueryStatus::NotFound
        );
    }

    #[test]
    fn no_grant_no_answer() {
        let db = demo_db(2);
        assert!(matches!(
            db.query("unknown", "rec-1-0"),
            Err(DbError::UnknownSession(_))
        ));
    }

    #[test]
    fn malformed_input_rejected() {
        assert!(matches!(
            AuthDb::from_ndjson("not json\n", 2),
            Err(DbError::Parse(1, _))
        ));
        assert!(matches!(
            AuthDb::from_ndjson(r#"{"id":"a","level":3,"data":""}"#, 2),
            Err(DbError::LevelOutOfRange { level: 3, .. })
        ));
        assert!(matches!(
            AuthDb::from_ndjson(r#"{"id":"a","level":1,"data":"%%%"}"#, 2),
            Err(DbError::Parse(1, _))
        ));
        let dup = r#"{"id":"a","level":1,"data":""}
{"id":"a","level":2,"data":""}"#;
        assert!(matches!(
            AuthDb::from_ndjson(dup, 2),
            Err(DbError::DuplicateId(_))
        ));
    }

    #[test]
    fn blank_lines_ignored() {
        let text = format!("\n{}\n\n", demo_ndjson(1, 1).trim_end());
        let db = AuthDb::from_ndjson(&text, 1).unwrap();
        assert_eq!(db.len(), 1);
    }

    proptest! {
        /// Access is exactly `record.level <= granted.level`, for every
        /// record/grant combination.
        #[test]
        fn access_is_exactly_leveled(ell in 1u32..6, granted in 1u32..6) {
            prop_assume!(granted <= ell);
            let mut db = demo_db(ell);
            grant(&mut db, "s", granted);
            for id in db.record_ids().map(String::from).collect::<Vec<_>>() {
                let level = db.record(&id).unwrap().level;
                let out = db.query("s", &id).unwrap();
                if level <= granted {
                    prop_assert_eq!(out.status, QueryStatus::Ok);
                    prop_assert!(out.payload.is_some());
                } else {
                    prop_assert_eq!(out.status, QueryStatus::Denied);
                    prop_assert!(out.payload.is_none());
                }
            }
        }
    }
}
