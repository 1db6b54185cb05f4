//! CHSH game logic: winning predicate, optimal strategies, classical
//! enumeration, and exact win-probability evaluation.

use crate::qsim::{
    joint_distribution, make_partially_entangled, MeasurementSetting, TwoQubitPureState,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChshError {
    #[error("concurrence {0} outside [0, 1]")]
    ConcurrenceOutOfRange(f64),
    #[error("theta {0} outside [0, pi/4]")]
    ThetaOutOfRange(f64),
}

/// Best classical (local deterministic / shared-randomness) win rate.
pub const CLASSICAL_BOUND: f64 = 0.75;

/// Best quantum win rate, `cos^2(pi/8)`, reached by a maximally entangled
/// pair.
pub const TSIRELSON: f64 = 0.8535533905932737;

/// One round's pair of uniformly sampled questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionPair {
    pub s: u8,
    pub t: u8,
}

/// Measurement settings per question for both players.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumStrategy {
    /// Alice's setting for s = 0 and s = 1.
    pub alice: [MeasurementSetting; 2],
    /// Bob's setting for t = 0 and t = 1.
    pub bob: [MeasurementSetting; 2],
}

/// Deterministic answer tables; 16 such strategies exist in total.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassicalStrategy {
    pub alice_table: [u8; 2],
    pub bob_table: [u8; 2],
}

/// CHSH winning condition: `s AND t == a XOR b`.
pub fn is_win(q: QuestionPair, a: u8, b: u8) -> bool {
    (q.s & q.t) == (a ^ b)
}

/// Optimal CHSH win probability as a function of concurrence:
/// `1/2 + sqrt(1 + C^2)/4`.
pub fn omega_of_concurrence(c: f64) -> Result<f64, ChshError> {
    if !(0.0..=1.0).contains(&c) {
        return Err(ChshError::ConcurrenceOutOfRange(c));
    }
    Ok(0.5 + 0.25 * (1.0 + c * c).sqrt())
}

/// Optimal CHSH win probability for the Schmidt-form state at `theta`:
/// `1/2 + sqrt(1 + sin^2(2 theta))/4`.
pub fn omega_of_theta(theta: f64) -> Result<f64, ChshError> {
    if !(0.0..=FRAC_PI_4 + 1e-12).contains(&theta) {
        return Err(ChshError::ThetaOutOfRange(theta));
    }
    let s = (2.0 * theta).sin();
    Ok(0.5 + 0.25 * (1.0 + s * s).sqrt())
}

/// The measurement settings achieving `omega_of_theta(theta)` on the state
/// `|psi_theta>`: Alice measures Z for s=0 and X for s=1; Bob measures at
/// `+beta` for t=0 and `-beta` for t=1 with `tan(beta) = sin(2 theta)`.
pub fn optimal_strategy(theta: f64) -> Result<QuantumStrategy, ChshError> {
    if !(0.0..=FRAC_PI_4 + 1e-12).contains(&theta) {
        return Err(ChshError::ThetaOutOfRange(theta));
    }
    let beta = (2.0 * theta).sin().atan();
    Ok(QuantumStrategy {
        alice: [MeasurementSetting::new(0.0), MeasurementSetting::new(FRAC_PI_2)],
        bob: [MeasurementSetting::new(beta), MeasurementSetting::new(-beta)],
    })
}

/// Exact win probability of a quantum strategy on a given state, averaged
/// over the four uniform question pairs.
pub fn win_probability(state: &TwoQubitPureState, strat: &QuantumStrategy) -> f64 {
    let mut total = 0.0;
    for s in 0..2u8 {
        for t in 0..2u8 {
            let dist = joint_distribution(state, strat.alice[s as usize], strat.bob[t as usize]);
            for a in 0..2u8 {
                for b in 0..2u8 {
                    if is_win(QuestionPair { s, t }, a, b) {
                        total += dist.prob(a, b);
                    }
                }
            }
        }
    }
    total / 4.0
}

/// Exact win probability of a deterministic classical strategy.
pub fn classical_win_probability(strat: &ClassicalStrategy) -> f64 {
    let mut wins = 0u32;
    for s in 0..2u8 {
        for t in 0..2u8 {
            let a = strat.alice_table[s as usize];
            let b = strat.bob_table[t as usize];
            if is_win(QuestionPair { s, t }, a, b) {
                wins += 1;
            }
        }
    }
    wins as f64 / 4.0
}

/// All 16 deterministic classical strategies.
pub fn all_classical_strategies() -> Vec<ClassicalStrategy> {
    let mut out = Vec::with_capacity(16);
    for bits in 0..16u8 {
        out.push(ClassicalStrategy {
            alice_table: [bits & 1, (bits >> 1) & 1],
            bob_table: [(bits >> 2) & 1, (bits >> 3) & 1],
        });
    }
    out
}

/// Brute-force maximum over all deterministic classical strategies.
/// The value is exactly 3/4, the classical Bell bound.
pub fn classical_maximum() -> (ClassicalStrategy, f64) {
    all_classical_strategies()
        .into_iter()
        .map(|s| (s, classical_win_probability(&s)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("16 strategies")
}

/// Convenience: the exact win probability an honest player pair achieves
/// playing the level-`theta` optimal strategy on the level-`theta` state.
pub fn honest_win_probability(theta: f64) -> Result<f64, ChshError> {
    let state = make_partially_entangled(theta).map_err(|_| ChshError::ThetaOutOfRange(theta))?;
    Ok(win_probability(&state, &optimal_strategy(theta)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{bell_phi_plus, concurrence_pure};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::FRAC_PI_8;

    const TSIRELSON: f64 = 0.8535533905932737; // cos^2(pi/8)

    #[test]
    fn win_predicate() {
        assert!(is_win(QuestionPair { s: 0, t: 0 }, 0, 0));
        assert!(is_win(QuestionPair { s: 1, t: 1 }, 0, 1));
        assert!(!is_win(QuestionPair { s: 1, t: 1 }, 0, 0));
    }

    #[test]
    fn omega_values() {
        assert!((omega_of_concurrence(1.0).unwrap() - TSIRELSON).abs() < 1e-12);
        assert!((omega_of_concurrence(1.0).unwrap() - FRAC_PI_8.cos().powi(2)).abs() < 1e-12);
        assert!((omega_of_concurrence(0.0).unwrap() - 0.75).abs() < 1e-12);
        assert!((omega_of_concurrence(0.5).unwrap() - 0.7795084971874737).abs() < 1e-12);
        assert!(omega_of_concurrence(1.5).is_err());
        assert!(omega_of_concurrence(-0.1).is_err());
    }

    #[test]
    fn omega_theta_values() {
        assert!((omega_of_theta(FRAC_PI_4).unwrap() - TSIRELSON).abs() < 1e-12);
        assert!((omega_of_theta(0.0).unwrap() - 0.75).abs() < 1e-12);
        // sin(pi/6) = 0.5 so this equals omega_of_concurrence(0.5)
        assert!((omega_of_theta(std::f64::consts::PI / 12.0).unwrap() - 0.7795084971874737).abs()
            < 1e-12);
        assert!(omega_of_theta(1.0).is_err());
    }

    #[test]
    fn omega_consistency_grid() {
        for i in 0..50 {
            let theta = FRAC_PI_4 * i as f64 / 49.0;
            let via_theta = omega_of_theta(theta).unwrap();
            let via_c = omega_of_concurrence((2.0 * theta).sin()).unwrap();
            assert!((via_theta - via_c).abs() < 1e-12);
        }
    }

    #[test]
    fn omega_strictly_increasing_in_concurrence() {
        let mut prev = omega_of_concurrence(0.0).unwrap();
        for i in 1..=100 {
            let w = omega_of_concurrence(i as f64 / 100.0).unwrap();
            assert!(w > prev);
            prev = w;
        }
    }

    #[test]
    fn optimal_strategy_achieves_omega() {
        for theta in [FRAC_PI_4, FRAC_PI_8, 0.1, 0.0] {
            let state = make_partially_entangled(theta).unwrap();
            let strat = optimal_strategy(theta).unwrap();
            let w = win_probability(&state, &strat);
            assert!(
                (w - omega_of_theta(theta).unwrap()).abs() < 1e-9,
                "theta={theta}: {w}"
            );
        }
        // Bob's angles for the Bell pair are +-pi/4; for theta=0 they collapse.
        let s = optimal_strategy(FRAC_PI_4).unwrap();
        assert!((s.bob[0].angle() - FRAC_PI_4).abs() < 1e-12);
        assert!((s.bob[1].angle() + FRAC_PI_4).abs() < 1e-12);
        let s0 = optimal_strategy(0.0).unwrap();
        assert!(s0.bob[0].angle().abs() < 1e-12);
        assert!(s0.bob[1].angle().abs() < 1e-12);
        // theta = pi/8: beta = atan(sin(pi/4))
        let s8 = optimal_strategy(FRAC_PI_8).unwrap();
        assert!((s8.bob[0].angle() - 0.6154797086703874).abs() < 1e-9);
        assert!((honest_win_probability(FRAC_PI_8).unwrap() - 0.8061862178478972).abs() < 1e-9);
    }

    #[test]
    fn separable_state_cannot_beat_classical_bound() {
        let prod = make_partially_entangled(0.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..50 {
            let strat = QuantumStrategy {
                alice: [
                    MeasurementSetting::new(rng.gen_range(-3.2..3.2)),
                    MeasurementSetting::new(rng.gen_range(-3.2..3.2)),
                ],
                bob: [
                    MeasurementSetting::new(rng.gen_range(-3.2..3.2)),
                    MeasurementSetting::new(rng.gen_range(-3.2..3.2)),
                ],
            };
            assert!(win_probability(&prod, &strat) <= 0.75 + 1e-9);
        }
    }

    #[test]
    fn tsirelson_reached_on_bell_pair() {
        let w = win_probability(&bell_phi_plus(), &optimal_strategy(FRAC_PI_4).unwrap());
        assert!((w - TSIRELSON).abs() < 1e-12);
    }

    #[test]
    fn cross_level_ceiling() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..100 {
            let actual = rng.gen_range(0.0..FRAC_PI_4);
            let target = rng.gen_range(0.0..FRAC_PI_4);
            let state = make_partially_entangled(actual).unwrap();
            let w = win_probability(&state, &optimal_strategy(target).unwrap());
            assert!(
                w <= omega_of_theta(actual).unwrap() + 1e-9,
                "actual={actual} target={target} w={w}"
            );
            let c = concurrence_pure(&state).unwrap();
            assert!(w <= omega_of_concurrence(c).unwrap() + 1e-9);
        }
        // A weaker state played with the Bell-optimal strategy stays below
        // its own ceiling.
        let weak = make_partially_entangled(std::f64::consts::PI / 12.0).unwrap();
        let w = win_probability(&weak, &optimal_strategy(FRAC_PI_4).unwrap());
        assert!(w <= 0.7795084971874737 + 1e-12);
    }

    #[test]
    fn classical_examples() {
        let const0 = ClassicalStrategy {
            alice_table: [0, 0],
            bob_table: [0, 0],
        };
        assert!((classical_win_probability(&const0) - 0.75).abs() < 1e-15);

        // Echoing the question loses three of the four question pairs.
        let echo = ClassicalStrategy {
            alice_table: [0, 1],
            bob_table: [0, 1],
        };
        assert!((classical_win_probability(&echo) - 0.25).abs() < 1e-15);

        // Every deterministic strategy wins exactly 1 or 3 of the 4 cases.
        let mixed = ClassicalStrategy {
            alice_table: [0, 0],
            bob_table: [0, 1],
        };
        assert!((classical_win_probability(&mixed) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn classical_maximum_is_three_quarters() {
        let (best, value) = classical_maximum();
        assert_eq!(value, 0.75);
        assert_eq!(classical_win_probability(&best), 0.75);
        // No deterministic strategy reaches the PR-box value, and every
        // optimum loses exactly one question pair.
        for strat in all_classical_strategies() {
            let w = classical_win_probability(&strat);
            assert!(w < 1.0);
            if w == 0.75 {
                let losses = (0..4)
                    .filter(|i| {
                        let (s, t) = ((i / 2) as u8, (i % 2) as u8);
                        !is_win(
                            QuestionPair { s, t },
                            strat.alice_table[s as usize],
                            strat.bob_table[t as usize],
                        )
                    })
                    .count();
                assert_eq!(losses, 1);
            }
        }
    }
}
