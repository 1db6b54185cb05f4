//! Level-table construction and Chernoff-bound parameter planning.
//!
//! Two planning modes exist. `paper` instantiates `c = 1/(2*ell)`,
//! `N = 2*lambda/c^2`, `epsilon = c*mu` with `mu = (3/4)N`, which reproduces
//! the published parameter table bit-exactly but yields acceptance intervals
//! that overlap for adjacent levels under even concurrence splitting.
//! `strict` instead derives `epsilon` from half the smallest win-probability
//! gap between adjacent levels (including the classical bound 3/4) and
//! searches for the smallest `N` that still meets the security target, which
//! guarantees non-overlapping intervals.

use crate::chsh::omega_of_concurrence;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("level count must be >= 1, got {0}")]
    BadLevelCount(u32),
    #[error("security parameter must be >= 1, got {0}")]
    BadLambda(u32),
    #[error("level index {0} out of range 1..={1}")]
    BadLevelIndex(u32, u32),
    #[error("table has {table} levels but params were planned for {params}")]
    TableMismatch { table: u32, params: u32 },
    #[error("strict planning infeasible: adjacent win-probability gap {0:e} <= 0")]
    InfeasibleGap(f64),
    #[error("strict planning did not converge")]
    NoConvergence,
}

/// One authorization level: concurrence, Schmidt angle, and optimal win
/// probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    /// 1-based level index.
    pub index: u32,
    pub concurrence: f64,
    pub theta: f64,
    pub omega: f64,
}

/// The ordered authorization hierarchy `{C_i, theta_i, omega_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTable {
    pub levels: Vec<Level>,
}

impl LevelTable {
    pub fn ell(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn level(&self, k: u32) -> Result<&Level, PlanError> {
        if k < 1 || k > self.ell() {
            return Err(PlanError::BadLevelIndex(k, self.ell()));
        }
        Ok(&self.levels[(k - 1) as usize])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    Paper,
    Strict,
}

/// Protocol parameters derived from the security parameter and level count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Security exponent: acceptance of an out-of-spec win rate happens with
    /// probability at most 2^-lambda.
    pub lambda: u32,
    /// Number of authorization levels.
    pub ell: u32,
    /// Relative deviation in the Chernoff bound.
    pub c: f64,
    /// Rounds per session.
    pub n: u64,
    /// Reference mean (3/4)*n used to size epsilon.
    pub mu: f64,
    /// Absolute acceptance half-width, in wins.
    pub epsilon: u64,
    pub mode: PlanMode,
}

/// Evenly split concurrence levels `C_i = i/ell`, `theta_i = arcsin(C_i)/2`,
/// `omega_i = 1/2 + sqrt(1 + C_i^2)/4`. There is no level with `C = 0`; a
/// zero level would be classically forgeable.
pub fn build_level_table(ell: u32) -> Result<LevelTable, PlanError> {
    if ell < 1 {
        return Err(PlanError::BadLevelCount(ell));
    }
    let levels = (1..=ell)
        .map(|i| {
            let c = i as f64 / ell as f64;
            Level {
                index: i,
                concurrence: c,
                theta: c.asin() / 2.0,
                omega: omega_of_concurrence(c).expect("C in [0,1]"),
            }
        })
        .collect();
    Ok(LevelTable { levels })
}

/// The Chernoff tail bound `2^(-c^2 N / 2)` on
/// `Pr[|sum X_i - mu| >= c*mu]` for N independent Bernoulli trials.
pub fn chernoff_tail(c: f64, n: u64) -> f64 {
    (-(c * c * n as f64) / 2.0).exp2()
}

/// Derive protocol parameters for security `2^-lambda` over `ell` levels.
pub fn plan_params(
    lambda: u32,
    ell: u32,
    mode: PlanMode,
    table: &LevelTable,
) -> Result<ProtocolParams, PlanError> {
    if lambda < 1 {
        return Err(PlanError::BadLambda(lambda));
    }
    if ell < 1 {
        return Err(PlanError::BadLevelCount(ell));
    }
    if table.ell() != ell {
        return Err(PlanError::TableMismatch {
            table: table.ell(),
            params: ell,
        });
    }
    match mode {
        PlanMode::Paper => {
            // c = 1/(2 ell) and N = 2 lambda / c^2 = 8 lambda ell^2, all in
            // exact integer arithmetic; epsilon = floor(c * (3/4) N).
            let n = 8 * lambda as u64 * (ell as u64) * (ell as u64);
            let epsilon = 3 * n / (8 * ell as u64);
            Ok(ProtocolParams {
                lambda,
                ell,
                c: 1.0 / (2.0 * ell as f64),
                n,
                mu: 0.75 * n as f64,
                epsilon,
                mode,
            })
        }
        PlanMode::Strict => {
            let gap = min_adjacent_gap(table);
            if gap <= 0.0 {
                return Err(PlanError::InfeasibleGap(gap));
            }
            // epsilon(N) = floor(N g / 2), c(N) = epsilon / (0.75 N); find
            // the smallest N with c^2 N / 2 >= lambda. c(N) <= 2g/3, so the
            // search starts just below 2 lambda / (2g/3)^2 and walks up.
            let c_limit = 2.0 * gap / 3.0;
            let start = ((2.0 * lambda as f64 / (c_limit * c_limit)).floor() as u64)
                .saturating_sub(4)
                .max(1);
            for n in start..start + 10_000_000 {
                let epsilon = (n as f64 * gap / 2.0).floor() as u64;
                if epsilon == 0 {
                    continue;
                }
                let mu = 0.75 * n as f64;
                let c = epsilon as f64 / mu;
                if c * c * n as f64 / 2.0 >= lambda as f64 {
                    return Ok(ProtocolParams {
                        lambda,
                        ell,
                        c,
                        n,
                        mu,
                        epsilon,
                        mode,
                    });
                }
            }
            Err(PlanError::NoConvergence)
        }
    }
}

/// Smallest gap between adjacent win probabilities in `{3/4} ∪ {omega_i}`.
fn min_adjacent_gap(table: &LevelTable) -> f64 {
    let mut prev = 0.75;
    let mut gap = f64::INFINITY;
    for level in &table.levels {
        gap = gap.min(level.omega - prev);
        prev = level.omega;
    }
    gap
}

/// The inclusive win-count window for level `k`, centered on that level's
/// own expected wins: `(round(N * omega_k) - eps, round(N * omega_k) + eps)`.
/// A win count W is accepted for level k iff `lo <= W <= hi`.
/// Rounding of the center is round-half-to-even.
pub fn acceptance_interval(
    level_k: u32,
    params: &ProtocolParams,
    table: &LevelTable,
) -> Result<(i64, i64), PlanError> {
    let level = table.level(level_k)?;
    let center = (params.n as f64 * level.omega).round_ties_even() as i64;
    Ok((center - params.epsilon as i64, center + params.epsilon as i64))
}

/// Disjointness report for one adjacent level pair.
#[derive(Debug, Clone, Serialize)]
pub struct PairOverlap {
    pub lower_level: u32,
    pub upper_level: u32,
    pub lower_interval: (i64, i64),
    pub upper_interval: (i64, i64),
    /// `upper.lo - lower.hi`; positive means disjoint.
    pub margin: i64,
    pub disjoint: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassicalExclusion {
    pub level: u32,
    pub interval: (i64, i64),
    /// Expected win count of the best classical strategy, round(0.75 N).
    pub classical_expectation: i64,
    pub excluded: bool,
}

/// Post-hoc check that the planned acceptance intervals separate the levels.
#[derive(Debug, Clone, Serialize)]
pub struct OverlapReport {
    pub pairs: Vec<PairOverlap>,
    pub classical: Vec<ClassicalExclusion>,
    pub pass: bool,
}

pub fn check_no_overlap(params: &ProtocolParams, table: &LevelTable) -> OverlapReport {
    let intervals: Vec<(i64, i64)> = (1..=table.ell())
        .map(|k| acceptance_interval(k, params, table).expect("k in range"))
        .collect();

    let pairs: Vec<PairOverlap> = intervals
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let margin = w[1].0 - w[0].1;
            PairOverlap {
                lower_level: i as u32 + 1,
                upper_level: i as u32 + 2,
                lower_interval: w[0],
                upper_interval: w[1],
                margin,
                disjoint: margin > 0,
            }
        })
        .collect();

    let classical_expectation = (0.75 * params.n as f64).round_ties_even() as i64;
    let classical: Vec<ClassicalExclusion> = intervals
        .iter()
        .enumerate()
        .map(|(i, &(lo, hi))| ClassicalExclusion {
            level: i as u32 + 1,
            interval: (lo, hi),
            classical_expectation,
            excluded: classical_expectation < lo || classical_expectation > hi,
        })
        .collect();

    let pass = pairs.iter().all(|p| p.disjoint) && classical.iter().all(|c| c.excluded);
    OverlapReport {
        pairs,
        classical,
        pass,
    }
}

/// CSV rendering of a level table, one row per level:
/// `level,C,theta,omega,lo,hi`. The interval columns are empty when no
/// params are supplied.
pub fn level_table_csv(table: &LevelTable, params: Option<&ProtocolParams>) -> String {
    let mut out = String::from("level,C,theta,omega,lo,hi\n");
    for level in &table.levels {
        let (lo, hi) = match params {
            Some(p) => {
                let (lo, hi) =
                    acceptance_interval(level.index, p, table).expect("index from table");
                (lo.to_string(), hi.to_string())
            }
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            level.index, level.concurrence, level.theta, level.omega, lo, hi
        ));
    }
    out
}
