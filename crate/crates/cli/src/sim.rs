//! Repeated-session simulation engine and its CSV/summary outputs.

use qauth_core::chsh::ClassicalStrategy;
use qauth_core::planner::{build_level_table, plan_params, LevelTable, PlanMode, ProtocolParams};
use qauth_core::protocol::{
    run_session, ResourceSpec, SessionConfig, SessionOptions, SessionReport, UserBehavior,
};
use qauth_core::resource::SharedDistributor;
use serde::Serialize;

/// Which kind of user plays the M sessions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adversary {
    /// Honest user at the requested level.
    None,
    /// No entanglement at all: separable pairs, constant answer tables.
    Classical,
    /// Honest play, but holding pairs of this (lower) true level.
    CrossLevel(u32),
    /// Holds correct pairs but never measures; answers are coin flips.
    Fabricate,
}

impl Adversary {
    pub fn parse(text: &str) -> Result<Self, String> {
        match text {
            "none" | "honest" => Ok(Adversary::None),
            "classical" => Ok(Adversary::Classical),
            "fabricate" => Ok(Adversary::Fabricate),
            other => match other.strip_prefix("cross-level:") {
                Some(k) => k
                    .parse()
                    .map(Adversary::CrossLevel)
                    .map_err(|_| format!("bad cross-level index in {other:?}")),
                None => Err(format!(
                    "unknown adversary {other:?}; expected none, classical, cross-level:K, or fabricate"
                )),
            },
        }
    }

    /// The level of entanglement the user actually holds; 0 means none.
    pub fn true_level(&self, requested: u32) -> u32 {
        match self {
            Adversary::None | Adversary::Fabricate => requested,
            Adversary::Classical => 0,
            Adversary::CrossLevel(k) => *k,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub lambda: u32,
    pub ell: u32,
    pub mode: PlanMode,
    pub requested_level: u32,
    pub runs: u64,
    pub seed: u64,
    pub adversary: Adversary,
    pub batched: bool,
    pub grant_matching_level: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRow {
    pub run: u64,
    pub true_level: u32,
    pub requested_level: u32,
    pub wins: u64,
    pub verdict: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub runs: u64,
    pub accepted: u64,
    pub acceptance_fraction: f64,
    pub mean_wins: f64,
    pub std_wins: f64,
}

pub struct ExperimentOutput {
    pub params: ProtocolParams,
    pub rows: Vec<RunRow>,
    pub summary: Summary,
    /// Report of the first run, for transcript export.
    pub first: Option<SessionReport>,
}

/// The master seed covers run 0 directly, so a single wire-mode session
/// started with the same seed reproduces run 0 byte for byte; later runs
/// increment the counter.
pub fn run_seed(master: u64, run: u64) -> u64 {
    master.wrapping_add(run)
}

pub fn experiment_config(exp: &Experiment) -> Result<(ProtocolParams, LevelTable), String> {
    let table = build_level_table(exp.ell).map_err(|e| e.to_string())?;
    let params = plan_params(exp.lambda, exp.ell, exp.mode, &table).map_err(|e| e.to_string())?;
    if exp.requested_level < 1 || exp.requested_level > exp.ell {
        return Err(format!(
            "requested level {} outside 1..={}",
            exp.requested_level, exp.ell
        ));
    }
    if let Adversary::CrossLevel(k) = exp.adversary {
        if k >= exp.requested_level {
            return Err(format!(
                "cross-level true level {k} must be below the requested level {}",
                exp.requested_level
            ));
        }
        if k < 1 {
            return Err("cross-level true level must be >= 1".into());
        }
    }
    Ok((params, table))
}

fn session_config(exp: &Experiment, run: u64) -> SessionConfig {
    let (behavior, resource) = match exp.adversary {
        Adversary::None => (
            UserBehavior::Honest,
            ResourceSpec::Level(exp.requested_level),
        ),
        Adversary::Classical => (
            // The best deterministic tables win exactly 3/4 in expectation.
            UserBehavior::Classical(ClassicalStrategy {
                alice_table: [0, 0],
                bob_table: [0, 0],
            }),
            ResourceSpec::Theta(0.0),
        ),
        Adversary::CrossLevel(k) => (UserBehavior::Honest, ResourceSpec::Level(k)),
        Adversary::Fabricate => (
            UserBehavior::Fabricate,
            ResourceSpec::Level(exp.requested_level),
        ),
    };
    SessionConfig {
        user_id: format!("sim-{run}"),
        requested_level: exp.requested_level,
        resource,
        behavior,
        options: SessionOptions {
            batched: exp.batched,
            grant_matching_level: exp.grant_matching_level,
            ..Default::default()
        },
    }
}

pub fn run_experiment(exp: &Experiment) -> Result<ExperimentOutput, String> {
    let (params, table) = experiment_config(exp)?;
    let true_level = exp.adversary.true_level(exp.requested_level);
    let mut rows = Vec::with_capacity(exp.runs as usize);
    let mut first = None;
    for run in 0..exp.runs {
        let seed = run_seed(exp.seed, run);
        let cfg = session_config(exp, run);
        let service = SharedDistributor::new(table.clone(), seed);
        let report = run_session(&params, &table, &cfg, service, seed)
            .map_err(|e| format!("run {run}: {e}"))?;
        rows.push(RunRow {
            run,
            true_level,
            requested_level: exp.requested_level,
            wins: report.wins,
            verdict: if report.verdict.is_granted() {
                "granted"
            } else {
                "rejected"
            },
        });
        if run == 0 {
            first = Some(report);
        }
    }
    let summary = summarize(&rows);
    Ok(ExperimentOutput {
        params,
        rows,
        summary,
        first,
    })
}

pub fn summarize(rows: &[RunRow]) -> Summary {
    let runs = rows.len() as u64;
    let accepted = rows.iter().filter(|r| r.verdict == "granted").count() as u64;
    let mean = if runs == 0 {
        0.0
    } else {
        rows.iter().map(|r| r.wins as f64).sum::<f64>() / runs as f64
    };
    let var = if runs < 2 {
        0.0
    } else {
        rows.iter()
            .map(|r| (r.wins as f64 - mean).powi(2))
            .sum::<f64>()
            / (runs as f64 - 1.0)
    };
    Summary {
        runs,
        accepted,
        acceptance_fraction: if runs == 0 {
            0.0
        } else {
            accepted as f64 / runs as f64
        },
        mean_wins: mean,
        std_wins: var.sqrt(),
    }
}

pub const CSV_HEADER: &str = "run,true_level,requested_level,wins,verdict";

pub fn rows_to_csv(rows: &[RunRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.run, r.true_level, r.requested_level, r.wins, r.verdict
        ));
    }
    out
}

pub fn rows_from_csv(text: &str) -> Result<Vec<RunRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(format!("bad CSV header: {other:?}")),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 5 {
                return Err(format!("bad CSV row: {line:?}"));
            }
            let num = |s: &str| s.parse::<u64>().map_err(|e| format!("{line:?}: {e}"));
            Ok(RunRow {
                run: num(parts[0])?,
                true_level: num(parts[1])? as u32,
                requested_level: num(parts[2])? as u32,
                wins: num(parts[3])?,
                verdict: match parts[4] {
                    "granted" => "granted",
                    "rejected" => "rejected",
                    other => return Err(format!("bad verdict {other:?}")),
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adversary_parsing() {
        assert_eq!(Adversary::parse("none").unwrap(), Adversary::None);
        assert_eq!(
            Adversary::parse("classical").unwrap(),
            Adversary::Classical
        );
        assert_eq!(
            Adversary::parse("cross-level:1").unwrap(),
            Adversary::CrossLevel(1)
        );
        assert_eq!(
            Adversary::parse("fabricate").unwrap(),
            Adversary::Fabricate
        );
        assert!(Adversary::parse("quantum").is_err());
        assert!(Adversary::parse("cross-level:x").is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let rows = vec![
            RunRow {
                run: 0,
                true_level: 2,
                requested_level: 2,
                wins: 3500,
                verdict: "granted",
            },
            RunRow {
                run: 1,
                true_level: 0,
                requested_level: 2,
                wins: 3100,
                verdict: "rejected",
            },
        ];
        let text = rows_to_csv(&rows);
        assert!(text.starts_with("run,true_level,requested_level,wins,verdict\n"));
        let back = rows_from_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].wins, 3100);
        assert_eq!(back[1].verdict, "rejected");
    }

    #[test]
    fn config_validation() {
        let mut exp = Experiment {
            lambda: 8,
            ell: 2,
            mode: PlanMode::Paper,
            requested_level: 3,
            runs: 1,
            seed: 0,
            adversary: Adversary::None,
            batched: false,
            grant_matching_level: false,
        };
        assert!(experiment_config(&exp).is_err());
        exp.requested_level = 2;
        assert!(experiment_config(&exp).is_ok());
        exp.adversary = Adversary::CrossLevel(2);
        assert!(experiment_config(&exp).is_err());
        exp.adversary = Adversary::CrossLevel(1);
        assert!(experiment_config(&exp).is_ok());
    }

    #[test]
    fn identical_seeds_identical_rows() {
        let exp = Experiment {
            lambda: 2,
            ell: 2,
            mode: PlanMode::Paper,
            requested_level: 1,
            runs: 2,
            seed: 77,
            adversary: Adversary::None,
            batched: false,
            grant_matching_level: false,
        };
        let a = run_experiment(&exp).unwrap();
        let b = run_experiment(&exp).unwrap();
        assert_eq!(rows_to_csv(&a.rows), rows_to_csv(&b.rows));
    }
}
