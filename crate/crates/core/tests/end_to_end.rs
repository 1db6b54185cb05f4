//! Cross-module integration: sampled statistics against exact predictions,
//! full sessions at published parameters, and wire-format round-trips.

use proptest::prelude::*;
use qauth_core::chsh::{omega_of_theta, optimal_strategy, ClassicalStrategy};
use qauth_core::planner::{build_level_table, plan_params, PlanMode};
use qauth_core::protocol::{
    run_session, verify_transcript, Message, ResourceSpec, SessionConfig, SessionOptions,
    SessionOutcome, UserBehavior,
};
use qauth_core::qsim::Party;
use qauth_core::resource::SharedDistributor;
use qauth_core::transport::{decode_payload, encode_frame};
use qauth_core::EntanglementService;

fn config(level: u32, behavior: UserBehavior, resource: ResourceSpec) -> SessionConfig {
    SessionConfig {
        user_id: "it-user".into(),
        requested_level: level,
        resource,
        behavior,
        options: SessionOptions::default(),
    }
}

/// Sampled win rate of the honest strategy against the exact omega, across
/// levels, at 1e5 rounds with a 4-sigma acceptance band.
#[test]
fn sampled_win_rate_matches_omega() {
    let table = build_level_table(3).unwrap();
    let n = 100_000u64;
    for level in &table.levels {
        let mut service = SharedDistributor::new(table.clone(), 7_000 + level.index as u64);
        let sid = format!("stat-{}", level.index);
        service.provision(&sid, level.index, n).unwrap();
        let strat = optimal_strategy(level.theta).unwrap();
        let mut rng_s = 0x9e3779b97f4a7c15u64;
        let mut wins = 0u64;
        for pair in 0..n {
            // Cheap deterministic question bits (splitmix-style).
            rng_s = rng_s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let s = ((rng_s >> 62) & 1) as u8;
            let t = ((rng_s >> 61) & 1) as u8;
            let a = service
                .measure(&sid, pair, Party::A, strat.alice[s as usize])
                .unwrap();
            let b = service
                .measure(&sid, pair, Party::B, strat.bob[t as usize])
                .unwrap();
            if (s & t) == (a ^ b) {
                wins += 1;
            }
        }
        let omega = omega_of_theta(level.theta).unwrap();
        let sigma = (omega * (1.0 - omega) / n as f64).sqrt();
        let rate = wins as f64 / n as f64;
        assert!(
            (rate - omega).abs() < 4.0 * sigma,
            "level {}: rate {rate} vs omega {omega} (sigma {sigma})",
            level.index
        );
    }
}

/// A full honest session at the published lambda = 128, ell = 2 parameters
/// is granted, and its transcript re-verifies offline.
#[test]
fn honest_session_at_published_parameters() {
    let table = build_level_table(2).unwrap();
    let params = plan_params(128, 2, PlanMode::Paper, &table).unwrap();
    assert_eq!(params.n, 4096);
    for level in [1u32, 2] {
        let report = run_session(
            &params,
            &table,
            &config(level, UserBehavior::Honest, ResourceSpec::Level(level)),
            SharedDistributor::new(table.clone(), 500 + level as u64),
            500 + level as u64,
        )
        .unwrap();
        assert_eq!(
            report.verdict,
            SessionOutcome::Granted { level },
            "level {level}: {} wins",
            report.wins
        );
        assert_eq!(
            verify_transcript(&report.transcript, &params, &table).unwrap(),
            report.verdict
        );
    }
}

/// A classical no-entanglement cheater (separable pairs, constant answers)
/// wins at 3/4 and is rejected under strict planning.
#[test]
fn classical_cheater_rejected_under_strict_params() {
    let table = build_level_table(2).unwrap();
    let params = plan_params(40, 2, PlanMode::Strict, &table).unwrap();
    let tables = ClassicalStrategy {
        alice_table: [0, 0],
        bob_table: [0, 0],
    };
    let report = run_session(
        &params,
        &table,
        &config(
            2,
            UserBehavior::Classical(tables),
            ResourceSpec::Theta(0.0),
        ),
        SharedDistributor::new(table.clone(), 9001),
        9001,
    )
    .unwrap();
    // Empirical rate hugs 3/4; the strict window for level 2 excludes it.
    let rate = report.wins as f64 / params.n as f64;
    let sigma = (0.75f64 * 0.25 / params.n as f64).sqrt();
    assert!((rate - 0.75).abs() < 4.0 * sigma, "rate {rate}");
    assert!(
        matches!(report.verdict, SessionOutcome::Aborted { .. }),
        "cheater granted with {} wins",
        report.wins
    );
}

/// A user holding level-1 pairs but requesting level 2 cannot reach the
/// level-2 window under strict planning.
#[test]
fn cross_level_cheater_rejected_under_strict_params() {
    let table = build_level_table(2).unwrap();
    let params = plan_params(40, 2, PlanMode::Strict, &table).unwrap();
    let report = run_session(
        &params,
        &table,
        &config(2, UserBehavior::Honest, ResourceSpec::Level(1)),
        SharedDistributor::new(table.clone(), 314),
        314,
    )
    .unwrap();
    assert!(
        matches!(report.verdict, SessionOutcome::Aborted { .. }),
        "cross-level user granted with {} wins of {}",
        report.wins,
        params.n
    );
}

proptest! {
    /// Every message survives the frame encoding.
    #[test]
    fn frame_roundtrip(msg in arb_message()) {
        let frame = encode_frame(&msg).unwrap();
        let len = u32::from_be_bytes(frame[..4].try_into().unwrap()) as usize;
        prop_assert_eq!(len, frame.len() - 4);
        prop_assert_eq!(decode_payload(&frame[4..]).unwrap(), msg);
    }
}

fn arb_message() -> impl Strategy<Value = Message> {
    prop_oneof![
        ("[a-z]{1,12}", 0u32..9).prop_map(|(user_id, requested_level)| {
            Message::AuthRequest {
                user_id,
                requested_level,
            }
        }),
        (any::<u64>(), any::<[u8; 32]>()).prop_map(|(round, digest)| {
            Message::RoundCommit { round, digest }
        }),
        (any::<u64>(), 0u8..2, 0u8..2, any::<[u8; 16]>()).prop_map(
            |(round, question, answer, salt)| Message::RoundReveal {
                round,
                question,
                answer,
                salt,
            }
        ),
        (proptest::option::of(0u32..9), proptest::option::of(".{0,40}")).prop_map(
            |(granted_level, abort_reason)| Message::Verdict {
                granted_level,
                abort_reason,
            }
        ),
        ".{0,60}".prop_map(|reason| Message::Abort { reason }),
        ("[a-z]{1,8}", any::<u64>(), prop_oneof![Just(Party::A), Just(Party::B)], -3.0f64..3.0)
            .prop_map(|(session_id, pair_index, party, setting)| Message::MeasureRequest {
                session_id,
                pair_index,
                party,
                setting,
            }),
    ]
}
