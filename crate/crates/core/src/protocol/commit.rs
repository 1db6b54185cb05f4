//! Salted hash commitments over per-round (question, answer) pairs.
//!
//! Simultaneous announcement is not enforceable over an asynchronous
//! channel; committing before either side reveals gives the equivalent
//! guarantee: a party cannot wait for the peer's values and then adjust its
//! own.
//!
//! Digests and salts are raw byte arrays in memory (sessions handle one of
//! these per round, so allocation and hex round-trips matter); they appear
//! hex-encoded only in the JSON wire encoding.

use sha2::{Digest, Sha256};

pub const SALT_BYTES: usize = 16;
pub const DIGEST_BYTES: usize = 32;

pub type Salt = [u8; SALT_BYTES];
pub type CommitDigest = [u8; DIGEST_BYTES];

/// Which side of the protocol produced a commitment. Bound into the digest
/// so the two parties' round-r commitments never collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    User,
    Authorizer,
}

impl Role {
    fn tag(self) -> u8 {
        match self {
            Role::User => b'U',
            Role::Authorizer => b'A',
        }
    }
}

/// `SHA-256(round_be64 || role || question || answer || salt)`.
pub fn commit(round: u64, role: Role, question: u8, answer: u8, salt: &Salt) -> CommitDigest {
    let mut h = Sha256::new();
    h.update(round.to_be_bytes());
    h.update([role.tag(), question, answer]);
    h.update(salt);
    h.finalize().into()
}

/// Check a revealed (question, answer, salt) triple against a digest.
pub fn verify_reveal(
    round: u64,
    role: Role,
    question: u8,
    answer: u8,
    salt: &Salt,
    digest: &CommitDigest,
) -> bool {
    commit(round, role, question, answer, salt) == *digest
}

pub fn gen_salt<R: rand::RngCore>(rng: &mut R) -> Salt {
    let mut salt = [0u8; SALT_BYTES];
    rng.fill_bytes(&mut salt);
    salt
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn commit_reveal_roundtrip() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let salt = gen_salt(&mut rng);
        let digest = commit(7, Role::User, 1, 0, &salt);
        assert!(verify_reveal(7, Role::User, 1, 0, &salt, &digest));
    }

    #[test]
    fn binding_on_flipped_inputs() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let salt = gen_salt(&mut rng);
        let digest = commit(3, Role::Authorizer, 0, 0, &salt);
        assert!(!verify_reveal(3, Role::Authorizer, 0, 1, &salt, &digest));
        assert!(!verify_reveal(3, Role::Authorizer, 1, 0, &salt, &digest));
        assert!(!verify_reveal(4, Role::Authorizer, 0, 0, &salt, &digest));
        assert!(!verify_reveal(3, Role::User, 0, 0, &salt, &digest));
        let mut other_salt = salt;
        other_salt[0] ^= 1;
        assert!(!verify_reveal(3, Role::Authorizer, 0, 0, &other_salt, &digest));
    }

    #[test]
    fn salting_separates_equal_values() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let s1 = gen_salt(&mut rng);
        let s2 = gen_salt(&mut rng);
        assert_ne!(commit(0, Role::User, 0, 0, &s1), commit(0, Role::User, 0, 0, &s2));
    }
}
