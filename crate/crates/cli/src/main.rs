//! `qauth`: operator front end for the CHSH-game authorization simulator.
//!
//! Exit codes: 0 success, 1 usage error, 2 protocol abort or runtime
//! failure, 3 planning failure.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use qauth_core::authdb::{demo_ndjson, AccessGrant, AuthDb};
use qauth_core::planner::{
    build_level_table, check_no_overlap, level_table_csv, plan_params, LevelTable, OverlapReport,
    PlanMode, ProtocolParams,
};
use qauth_core::protocol::{
    drive_authorizer, drive_user, AuthorizerSession, Message, QueryStatus, ResourceSpec,
    SessionOptions, SessionOutcome, Transcript, UserBehavior, UserSession,
};
use qauth_core::qsim::MeasurementSetting;
use qauth_core::resource::{EntanglementService, SharedDistributor};
use qauth_core::transport::{Channel, TcpEndpoint};
use qauth_cli::remote::RemoteDistributor;
use qauth_cli::sim::{self, Adversary, Experiment};
use serde::Serialize;
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

#[derive(Parser)]
#[command(name = "qauth", version, about = "CHSH-game authorization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Published parameter schedule (N = 8*lambda*ell^2).
    Paper,
    /// Smallest N whose acceptance intervals are pairwise disjoint.
    Strict,
}

impl From<ModeArg> for PlanMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Paper => PlanMode::Paper,
            ModeArg::Strict => PlanMode::Strict,
        }
    }
}

/// Parameter-planning inputs shared by several subcommands.
#[derive(Args)]
struct PlanArgs {
    /// Security exponent lambda.
    #[arg(long, default_value_t = 128)]
    lambda: u32,
    /// Number of authorization levels.
    #[arg(long, default_value_t = 2)]
    ell: u32,
    #[arg(long, value_enum, default_value_t = ModeArg::Paper)]
    mode: ModeArg,
}

#[derive(Subcommand)]
enum Command {
    /// Plan protocol parameters and report acceptance-interval separation.
    Plan {
        #[command(flatten)]
        plan: PlanArgs,
        /// Emit machine-readable JSON instead of text.
        #[arg(long)]
        json: bool,
        /// Also write the level table as CSV to this path.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Print the authorization level table.
    Table {
        #[command(flatten)]
        plan: PlanArgs,
        /// Include acceptance intervals from the planned parameters.
        #[arg(long)]
        intervals: bool,
        #[arg(long)]
        json: bool,
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Run repeated sessions in-process and summarize the verdicts.
    Simulate {
        #[command(flatten)]
        plan: PlanArgs,
        /// Requested authorization level.
        #[arg(long, default_value_t = 1)]
        level: u32,
        /// Number of independent sessions.
        #[arg(long, default_value_t = 1)]
        runs: u64,
        /// Master seed; run i uses seed + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// none | classical | cross-level:K | fabricate.
        #[arg(long, default_value = "none")]
        adversary: String,
        /// Exchange commitments in two batch messages instead of per round.
        #[arg(long)]
        batched: bool,
        /// Grant whichever level's interval the win count lands in.
        #[arg(long)]
        grant_matching_level: bool,
        #[arg(long)]
        json: bool,
        /// Write per-run rows as CSV to this path.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
        /// Write the first run's transcript as JSON to this path.
        #[arg(long, value_name = "PATH")]
        transcript: Option<PathBuf>,
    },
    /// Run the Authorizer: accept sessions over TCP and answer queries.
    Serve {
        #[command(flatten)]
        plan: PlanArgs,
        /// Address to listen on; port 0 picks a free port (printed).
        #[arg(long, default_value = "127.0.0.1:0")]
        listen: String,
        /// Address of a running distributor process.
        #[arg(long, value_name = "ADDR")]
        distributor: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Record store (NDJSON); a demo store is generated when omitted.
        #[arg(long, value_name = "PATH")]
        db: Option<PathBuf>,
        /// Exit after this many sessions.
        #[arg(long, default_value_t = 1)]
        max_sessions: u32,
        /// Per-message receive timeout in seconds.
        #[arg(long, default_value_t = 30)]
        timeout_secs: u64,
        #[arg(long)]
        grant_matching_level: bool,
        /// Write each session's transcript as JSON to this path.
        #[arg(long, value_name = "PATH")]
        transcript: Option<PathBuf>,
    },
    /// Run the Distributor: serve entangled-pair batches over TCP.
    Distribute {
        /// Number of authorization levels in the served table.
        #[arg(long, default_value_t = 2)]
        ell: u32,
        #[arg(long, default_value = "127.0.0.1:0")]
        listen: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Exit after this many client connections have closed.
        #[arg(long, default_value_t = 2)]
        max_conns: u32,
        #[arg(long, default_value_t = 30)]
        timeout_secs: u64,
    },
    /// Run a User client against a served Authorizer.
    User {
        #[command(flatten)]
        plan: PlanArgs,
        /// Authorizer address.
        #[arg(long, value_name = "ADDR")]
        connect: String,
        /// Distributor address.
        #[arg(long, value_name = "ADDR")]
        distributor: String,
        #[arg(long, default_value_t = 1)]
        level: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "cli-user")]
        user_id: String,
        #[arg(long)]
        batched: bool,
        #[arg(long, default_value_t = 30)]
        timeout_secs: u64,
        /// Record ids to query after a granted verdict (repeatable).
        #[arg(long = "query", value_name = "RECORD_ID")]
        queries: Vec<String>,
        #[arg(long)]
        json: bool,
        /// Write the user-side transcript as JSON to this path.
        #[arg(long, value_name = "PATH")]
        transcript: Option<PathBuf>,
    },
    /// Inspect a record store locally under an assumed granted level.
    Query {
        /// Record id to look up.
        #[arg(long, value_name = "RECORD_ID")]
        record: String,
        /// Clearance level to evaluate the query under.
        #[arg(long)]
        granted_level: u32,
        /// Record store (NDJSON); a demo store is generated when omitted.
        #[arg(long, value_name = "PATH")]
        db: Option<PathBuf>,
        /// Number of levels in the store.
        #[arg(long, default_value_t = 2)]
        ell: u32,
        #[arg(long)]
        json: bool,
    },
    /// Summarize a per-run CSV produced by `simulate`.
    Stats {
        /// CSV file with columns run,true_level,requested_level,wins,verdict.
        #[arg(long, value_name = "PATH")]
        csv: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

enum CliError {
    Usage(String),
    Abort(String),
    Plan(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Abort(_) => 2,
            CliError::Plan(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Abort(m) | CliError::Plan(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Abort(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Plan { plan, json, csv } => cmd_plan(&plan, json, csv.as_deref()),
        Command::Table {
            plan,
            intervals,
            json,
            csv,
        } => cmd_table(&plan, intervals, json, csv.as_deref()),
        Command::Simulate {
            plan,
            level,
            runs,
            seed,
            adversary,
            batched,
            grant_matching_level,
            json,
            csv,
            transcript,
        } => {
            let adversary = Adversary::parse(&adversary).map_err(CliError::Usage)?;
            let exp = Experiment {
                lambda: plan.lambda,
                ell: plan.ell,
                mode: plan.mode.into(),
                requested_level: level,
                runs,
                seed,
                adversary,
                batched,
                grant_matching_level,
            };
            cmd_simulate(&exp, json, csv.as_deref(), transcript.as_deref())
        }
        Command::Serve {
            plan,
            listen,
            distributor,
            seed,
            db,
            max_sessions,
            timeout_secs,
            grant_matching_level,
            transcript,
        } => cmd_serve(ServeConfig {
            plan,
            listen,
            distributor,
            seed,
            db,
            max_sessions,
            timeout: Duration::from_secs(timeout_secs),
            grant_matching_level,
            transcript,
        }),
        Command::Distribute {
            ell,
            listen,
            seed,
            max_conns,
            timeout_secs,
        } => cmd_distribute(ell, &listen, seed, max_conns, Duration::from_secs(timeout_secs)),
        Command::User {
            plan,
            connect,
            distributor,
            level,
            seed,
            user_id,
            batched,
            timeout_secs,
            queries,
            json,
            transcript,
        } => cmd_user(UserConfig {
            plan,
            connect,
            distributor,
            level,
            seed,
            user_id,
            batched,
            timeout: Duration::from_secs(timeout_secs),
            queries,
            json,
            transcript,
        }),
        Command::Query {
            record,
            granted_level,
            db,
            ell,
            json,
        } => cmd_query(&record, granted_level, db.as_deref(), ell, json),
        Command::Stats { csv, json } => cmd_stats(&csv, json),
    }
}

fn planned(plan: &PlanArgs) -> Result<(ProtocolParams, LevelTable), CliError> {
    let table = build_level_table(plan.ell).map_err(|e| CliError::Plan(e.to_string()))?;
    let params = plan_params(plan.lambda, plan.ell, plan.mode.into(), &table)
        .map_err(|e| CliError::Plan(e.to_string()))?;
    Ok((params, table))
}

fn write_file(path: &std::path::Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)?;
    Ok(())
}

fn write_transcript(path: &std::path::Path, transcript: &Transcript) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(transcript).expect("transcript serialize");
    write_file(path, &json)
}

#[derive(Serialize)]
struct PlanOutput {
    params: ProtocolParams,
    table: LevelTable,
    overlap: OverlapReport,
}

fn cmd_plan(plan: &PlanArgs, json: bool, csv: Option<&std::path::Path>) -> Result<(), CliError> {
    let (params, table) = planned(plan)?;
    let overlap = check_no_overlap(&params, &table);
    if let Some(path) = csv {
        write_file(path, &level_table_csv(&table, Some(&params)))?;
    }
    let out = PlanOutput {
        params,
        table,
        overlap,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&out).expect("serialize"));
    } else {
        println!(
            "params: lambda={} ell={} mode={} N={} epsilon={} c={:.6}",
            out.params.lambda,
            out.params.ell,
            match out.params.mode {
                PlanMode::Paper => "paper",
                PlanMode::Strict => "strict",
            },
            out.params.n,
            out.params.epsilon,
            out.params.c
        );
        print!("{}", level_table_csv(&out.table, Some(&out.params)));
        for pair in &out.overlap.pairs {
            println!(
                "levels {}-{}: [{}, {}] vs [{}, {}] margin {} ({})",
                pair.lower_level,
                pair.upper_level,
                pair.lower_interval.0,
                pair.lower_interval.1,
                pair.upper_interval.0,
                pair.upper_interval.1,
                pair.margin,
                if pair.disjoint { "disjoint" } else { "OVERLAP" }
            );
        }
        for c in &out.overlap.classical {
            println!(
                "level {}: classical expectation {} is {} [{}, {}]",
                c.level,
                c.classical_expectation,
                if c.excluded { "outside" } else { "INSIDE" },
                c.interval.0,
                c.interval.1
            );
        }
        println!("separation: {}", if out.overlap.pass { "ok" } else { "FAILED" });
    }
    // In strict mode disjoint intervals are the whole point of the plan;
    // paper mode merely reports the defect.
    if matches!(out.params.mode, PlanMode::Strict) && !out.overlap.pass {
        return Err(CliError::Plan(
            "strict-mode plan failed the separation check".into(),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct TableOutput {
    table: LevelTable,
    params: Option<ProtocolParams>,
}

fn cmd_table(
    plan: &PlanArgs,
    intervals: bool,
    json: bool,
    csv: Option<&std::path::Path>,
) -> Result<(), CliError> {
    let table = build_level_table(plan.ell).map_err(|e| CliError::Plan(e.to_string()))?;
    let params = if intervals { Some(planned(plan)?.0) } else { None };
    let text = level_table_csv(&table, params.as_ref());
    if let Some(path) = csv {
        write_file(path, &text)?;
    }
    if json {
        let out = TableOutput { table, params };
        println!("{}", serde_json::to_string_pretty(&out).expect("serialize"));
    } else {
        print!("{text}");
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateOutput {
    params: ProtocolParams,
    summary: sim::Summary,
}

fn cmd_simulate(
    exp: &Experiment,
    json: bool,
    csv: Option<&std::path::Path>,
    transcript: Option<&std::path::Path>,
) -> Result<(), CliError> {
    sim::experiment_config(exp).map_err(CliError::Usage)?;
    let out = sim::run_experiment(exp).map_err(CliError::Abort)?;
    if let Some(path) = csv {
        write_file(path, &sim::rows_to_csv(&out.rows))?;
    }
    if let Some(path) = transcript {
        let first = out
            .first
            .as_ref()
            .ok_or_else(|| CliError::Usage("no runs; nothing to export".into()))?;
        write_transcript(path, &first.transcript)?;
    }
    if json {
        let view = SimulateOutput {
            params: out.params,
            summary: out.summary,
        };
        println!("{}", serde_json::to_string_pretty(&view).expect("serialize"));
    } else {
        println!(
            "ran {} sessions at lambda={} N={} epsilon={} (requested level {})",
            out.summary.runs, out.params.lambda, out.params.n, out.params.epsilon, exp.requested_level
        );
        println!(
            "accepted {}/{} (fraction {:.4}); wins mean {:.1} std {:.1}",
            out.summary.accepted,
            out.summary.runs,
            out.summary.acceptance_fraction,
            out.summary.mean_wins,
            out.summary.std_wins
        );
    }
    Ok(())
}

struct ServeConfig {
    plan: PlanArgs,
    listen: String,
    distributor: String,
    seed: u64,
    db: Option<PathBuf>,
    max_sessions: u32,
    timeout: Duration,
    grant_matching_level: bool,
    transcript: Option<PathBuf>,
}

fn load_db(path: Option<&std::path::Path>, ell: u32) -> Result<AuthDb, CliError> {
    match path {
        Some(p) => AuthDb::load(p, ell).map_err(|e| CliError::Usage(e.to_string())),
        None => AuthDb::from_ndjson(&demo_ndjson(ell, 2), ell)
            .map_err(|e| CliError::Usage(e.to_string())),
    }
}

fn cmd_serve(cfg: ServeConfig) -> Result<(), CliError> {
    let (params, table) = planned(&cfg.plan)?;
    let mut db = load_db(cfg.db.as_deref(), cfg.plan.ell)?;
    let listener = TcpListener::bind(&cfg.listen)?;
    // Announce the bound address first so callers using port 0 can connect.
    println!("listening on {}", listener.local_addr()?);

    for _ in 0..cfg.max_sessions {
        let (stream, peer) = listener.accept()?;
        let mut chan = TcpEndpoint::from_stream(stream);
        let service = RemoteDistributor::connect(&cfg.distributor, cfg.timeout)
            .map_err(|e| CliError::Abort(format!("distributor: {e}")))?;
        let options = SessionOptions {
            timeout: cfg.timeout,
            grant_matching_level: cfg.grant_matching_level,
            ..Default::default()
        };
        let mut auth = AuthorizerSession::new(params, table.clone(), options, service, cfg.seed);
        let outcome = drive_authorizer(&mut auth, &mut chan)
            .map_err(|e| CliError::Abort(e.to_string()))?;
        let transcript = auth.transcript();
        match &outcome {
            SessionOutcome::Granted { level } => {
                println!(
                    "session {} ({}): granted level {level}",
                    transcript.session_id, peer
                );
                db.issue_grant(AccessGrant {
                    session_id: transcript.session_id.clone(),
                    user_id: transcript.user_id.clone(),
                    level: *level,
                });
            }
            SessionOutcome::Aborted { reason } => {
                println!("session {} ({peer}): aborted: {reason}", transcript.session_id);
            }
        }
        if let Some(path) = &cfg.transcript {
            write_transcript(path, &transcript)?;
        }
        // Keep the connection open for queries until the client hangs up.
        if outcome.is_granted() {
            serve_queries(&mut chan, &db, cfg.timeout);
        }
    }
    Ok(())
}

fn serve_queries(chan: &mut TcpEndpoint, db: &AuthDb, timeout: Duration) {
    while let Ok(Message::QueryRequest {
        session_id,
        record_id,
    }) = chan.recv(timeout)
    {
        let reply = match db.query(&session_id, &record_id) {
            Ok(out) => Message::QueryReply {
                record_id: out.record_id,
                status: out.status,
                payload: out.payload,
            },
            Err(e) => Message::Abort {
                reason: e.to_string(),
            },
        };
        if chan.send(&reply).is_err() {
            break;
        }
    }
}

fn cmd_distribute(
    ell: u32,
    listen: &str,
    seed: u64,
    max_conns: u32,
    timeout: Duration,
) -> Result<(), CliError> {
    let table = build_level_table(ell).map_err(|e| CliError::Plan(e.to_string()))?;
    let service = SharedDistributor::new(table, seed);
    let listener = TcpListener::bind(listen)?;
    println!("listening on {}", listener.local_addr()?);

    // The User and the Authorizer of one session hold separate connections
    // and their measurement requests interleave, so each connection gets its
    // own thread over the shared batch store.
    let mut workers = Vec::new();
    for _ in 0..max_conns {
        let (stream, _) = listener.accept()?;
        let chan = TcpEndpoint::from_stream(stream);
        let service = service.clone();
        workers.push(std::thread::spawn(move || {
            distribute_conn(chan, service, timeout)
        }));
    }
    for w in workers {
        let _ = w.join();
    }
    Ok(())
}

fn distribute_conn(mut chan: TcpEndpoint, mut service: SharedDistributor, timeout: Duration) {
    loop {
        let reply = match chan.recv(timeout) {
            Ok(Message::ProvisionRequest {
                session_id,
                level,
                count,
            }) => match service.provision(&session_id, level, count) {
                Ok(()) => Message::ProvisionAck { session_id },
                Err(e) => Message::Abort {
                    reason: e.to_string(),
                },
            },
            Ok(Message::MeasureRequest {
                session_id,
                pair_index,
                party,
                setting,
            }) => match service.measure(
                &session_id,
                pair_index,
                party,
                MeasurementSetting::new(setting),
            ) {
                Ok(outcome) => Message::MeasureReply { outcome },
                Err(e) => Message::Abort {
                    reason: e.to_string(),
                },
            },
            Ok(other) => Message::Abort {
                reason: format!("unexpected message for distributor: {other:?}"),
            },
            Err(_) => break,
        };
        if chan.send(&reply).is_err() {
            break;
        }
    }
}

struct UserConfig {
    plan: PlanArgs,
    connect: String,
    distributor: String,
    level: u32,
    seed: u64,
    user_id: String,
    batched: bool,
    timeout: Duration,
    queries: Vec<String>,
    json: bool,
    transcript: Option<PathBuf>,
}

#[derive(Serialize)]
struct QueryView {
    record_id: String,
    status: QueryStatus,
    /// Decoded payload text, present iff status is `ok`.
    payload: Option<String>,
}

#[derive(Serialize)]
struct UserOutput {
    outcome: SessionOutcome,
    queries: Vec<QueryView>,
}

fn cmd_user(cfg: UserConfig) -> Result<(), CliError> {
    let (params, table) = planned(&cfg.plan)?;
    let service = RemoteDistributor::connect(&cfg.distributor, cfg.timeout)
        .map_err(|e| CliError::Abort(format!("distributor: {e}")))?;
    let options = SessionOptions {
        batched: cfg.batched,
        timeout: cfg.timeout,
        ..Default::default()
    };
    let mut session = UserSession::new(
        &cfg.user_id,
        cfg.level,
        ResourceSpec::Level(cfg.level),
        UserBehavior::Honest,
        params,
        table,
        options,
        service,
        cfg.seed,
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut chan =
        TcpEndpoint::connect(&cfg.connect).map_err(|e| CliError::Abort(e.to_string()))?;
    let outcome =
        drive_user(&mut session, &mut chan).map_err(|e| CliError::Abort(e.to_string()))?;

    if let Some(path) = &cfg.transcript {
        write_transcript(path, &session.transcript())?;
    }

    let mut queries = Vec::new();
    if outcome.is_granted() {
        let session_id = session.session_id().unwrap_or_default().to_string();
        for record_id in &cfg.queries {
            chan.send(&Message::QueryRequest {
                session_id: session_id.clone(),
                record_id: record_id.clone(),
            })
            .map_err(|e| CliError::Abort(e.to_string()))?;
            match chan.recv(cfg.timeout) {
                Ok(Message::QueryReply {
                    record_id,
                    status,
                    payload,
                }) => {
                    let payload = payload.map(|p| decode_payload(&p));
                    queries.push(QueryView {
                        record_id,
                        status,
                        payload,
                    });
                }
                Ok(other) => {
                    return Err(CliError::Abort(format!("unexpected query reply: {other:?}")))
                }
                Err(e) => return Err(CliError::Abort(e.to_string())),
            }
        }
    }

    let out = UserOutput {
        outcome: outcome.clone(),
        queries,
    };
    if cfg.json {
        println!("{}", serde_json::to_string_pretty(&out).expect("serialize"));
    } else {
        match &out.outcome {
            SessionOutcome::Granted { level } => println!("granted level {level}"),
            SessionOutcome::Aborted { reason } => println!("aborted: {reason}"),
        }
        for q in &out.queries {
            match (&q.status, &q.payload) {
                (QueryStatus::Ok, Some(p)) => println!("{}: ok: {p}", q.record_id),
                (status, _) => println!("{}: {status:?}", q.record_id),
            }
        }
    }
    match out.outcome {
        SessionOutcome::Granted { .. } => Ok(()),
        SessionOutcome::Aborted { reason } => Err(CliError::Abort(reason)),
    }
}

fn decode_payload(b64: &str) -> String {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    match STANDARD.decode(b64) {
        Ok(bytes) => String::from_utf8_lossy(&bytes).into_owned(),
        Err(_) => b64.to_string(),
    }
}

fn cmd_query(
    record: &str,
    granted_level: u32,
    db_path: Option<&std::path::Path>,
    ell: u32,
    json: bool,
) -> Result<(), CliError> {
    let mut db = load_db(db_path, ell)?;
    if granted_level < 1 || granted_level > ell {
        return Err(CliError::Usage(format!(
            "granted level {granted_level} outside 1..={ell}"
        )));
    }
    // Synthetic grant: this command inspects the store under an assumed
    // clearance, without a protocol run.
    db.issue_grant(AccessGrant {
        session_id: "local".into(),
        user_id: "local".into(),
        level: granted_level,
    });
    let out = db
        .query("local", record)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let view = QueryView {
        record_id: out.record_id,
        status: out.status,
        payload: out.payload.map(|p| decode_payload(&p)),
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&view).expect("serialize"));
    } else {
        match (&view.status, &view.payload) {
            (QueryStatus::Ok, Some(p)) => println!("{}: ok: {p}", view.record_id),
            (status, _) => println!("{}: {status:?}", view.record_id),
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct StatsOutput {
    overall: sim::Summary,
    by_requested_level: Vec<(u32, sim::Summary)>,
}

fn cmd_stats(path: &std::path::Path, json: bool) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(e.to_string()))?;
    let rows = sim::rows_from_csv(&text).map_err(CliError::Usage)?;
    let overall = sim::summarize(&rows);
    let mut levels: Vec<u32> = rows.iter().map(|r| r.requested_level).collect();
    levels.sort_unstable();
    levels.dedup();
    let by_requested_level: Vec<(u32, sim::Summary)> = levels
        .into_iter()
        .map(|k| {
            let group: Vec<_> = rows
                .iter()
                .filter(|r| r.requested_level == k)
                .cloned()
                .collect();
            (k, sim::summarize(&group))
        })
        .collect();
    let out = StatsOutput {
        overall,
        by_requested_level,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&out).expect("serialize"));
    } else {
        let p = |label: &str, s: &sim::Summary| {
            println!(
                "{label}: runs {} accepted {} (fraction {:.4}) wins mean {:.1} std {:.1}",
                s.runs, s.accepted, s.acceptance_fraction, s.mean_wins, s.std_wins
            );
        };
        p("overall", &out.overall);
        for (k, s) in &out.by_requested_level {
            p(&format!("requested level {k}"), s);
        }
    }
    Ok(())
}
