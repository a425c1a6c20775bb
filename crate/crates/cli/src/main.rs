//! Batch analysis of ranked elections under the k-approval veto rule.
//!
//! Every subcommand reads an election file, prints one compact JSON report
//! to stdout with keys in sorted order, and keeps human commentary on
//! stderr, so outputs are stable enough to diff and archive. Exit codes:
//! 0 success, 2 bad input, 3 refused for exceeding an enumeration budget
//! (override with the VETOCORE_BUDGET environment variable).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use vetocore::distortion::{
    distortion_egalitarian, distortion_percentile, distortion_utilitarian,
    DistortionError, DistortionResult, DistortionValue,
};
use vetocore::election::ElectionError;
use vetocore::flow_verify::{construct_distortion_flow, verify_flow, FlowError, FlowNetwork};
use vetocore::generators::{
    gen_percentile_cyclic, gen_percentile_unbounded, gen_random, gen_remark_example,
    gen_util_lower_bound, GenError, NamedInstance,
};
use vetocore::lp::LpEngine;
use vetocore::metric::{format_ratio, parse_ratio};
use vetocore::minority::{minority_protection, MinorityError};
use vetocore::veto::{run_k_approval_veto, VetoError};
use vetocore::veto_core::{core_membership, CoreError};
use vetocore::{
    CandidateId, DistortionConfig, Election, Rational, VetoOrder, WinnerBudget,
    DEFAULT_BUDGET,
};

#[derive(Parser)]
#[command(name = "vetocore", version, about = "Election analysis under k-approval veto")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Possible winners at budget k, with a certificate per candidate.
    Core {
        #[arg(long)]
        k: usize,
        file: PathBuf,
    },
    /// Winners under one veto order, or the union over all orders.
    Winners {
        #[arg(long)]
        k: usize,
        /// Space-separated voter ids, each voter appearing k times.
        #[arg(long, conflicts_with = "enumerate")]
        order: Option<String>,
        /// Union of winner sets over every distinct veto order.
        #[arg(long)]
        enumerate: bool,
        file: PathBuf,
    },
    /// Minority protection level of every candidate.
    Protection { file: PathBuf },
    /// Exact metric distortion of one or all candidates.
    Distortion {
        #[arg(long)]
        objective: ObjectiveArg,
        /// Percentile parameter as p/q; only with --objective percentile.
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        candidate: Option<usize>,
        file: PathBuf,
    },
    /// Build and check the flow certificate bounding a winner's
    /// utilitarian distortion against one rival.
    VerifyFlow {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        w: usize,
        #[arg(long)]
        cstar: usize,
        file: PathBuf,
    },
    /// Write a generated election, plus a witness sidecar for the named
    /// families.
    Gen {
        #[arg(long)]
        family: FamilyArg,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        delta: Option<String>,
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        epsilon: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Utilitarian,
    Egalitarian,
    Percentile,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    UtilLb,
    PercentileUnbounded,
    PercentileCyclic,
    Remark,
    Random,
}

enum CliError {
    Input(String),
    Budget(String),
}

impl CliError {
    fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

impl From<ElectionError> for CliError {
    fn from(e: ElectionError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<VetoError> for CliError {
    fn from(e: VetoError) -> Self {
        match e {
            VetoError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<MinorityError> for CliError {
    fn from(e: MinorityError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<DistortionError> for CliError {
    fn from(e: DistortionError) -> Self {
        match e {
            DistortionError::SubsetBudgetExceeded { .. } => CliError::Budget(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    match run(cli.command) {
        Ok(label) => {
            eprintln!("{label} finished in {:.1?}", started.elapsed());
            ExitCode::SUCCESS
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Budget(msg)) => {
            eprintln!("refused: {msg}");
            ExitCode::from(3)
        }
    }
}

/// Reads the election and a digest of the exact input bytes.
fn load(path: &Path) -> Result<(Election, String), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let digest = format!("sha256:{:x}", Sha256::digest(&bytes));
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::input(format!("{}: not UTF-8", path.display())))?;
    Ok((Election::parse(&text)?, digest))
}

fn budget_cap() -> Result<Option<u128>, CliError> {
    match std::env::var("VETOCORE_BUDGET") {
        Ok(raw) => raw
            .trim()
            .parse::<u128>()
            .map(Some)
            .map_err(|_| CliError::input(format!("VETOCORE_BUDGET is not an integer: {raw}"))),
        Err(_) => Ok(Some(DEFAULT_BUDGET)),
    }
}

fn parse_rational_arg(name: &str, raw: &str) -> Result<Rational, CliError> {
    parse_ratio(raw).ok_or_else(|| CliError::input(format!("--{name}: bad rational {raw:?}")))
}

fn require<T>(value: Option<T>, name: &str, family: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::input(format!("--family {family} needs --{name}")))
}

fn emit(report: Value) {
    use std::io::Write;
    // Exit quietly when the reader hangs up early, e.g. `vetocore ... | head`.
    if let Err(err) = writeln!(std::io::stdout(), "{report}") {
        if err.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        panic!("failed writing report to stdout: {err}");
    }
}

fn run(command: Command) -> Result<&'static str, CliError> {
    match command {
        Command::Core { k, file } => cmd_core(k, &file),
        Command::Winners { k, order, enumerate, file } => {
            cmd_winners(k, order.as_deref(), enumerate, &file)
        }
        Command::Protection { file } => cmd_protection(&file),
        Command::Distortion { objective, alpha, candidate, file } => {
            cmd_distortion(objective, alpha.as_deref(), candidate, &file)
        }
        Command::VerifyFlow { k, w, cstar, file } => cmd_verify_flow(k, w, cstar, &file),
        Command::Gen { family, k, m, n, delta, alpha, epsilon, seed, output } => {
            cmd_gen(family, k, m, n, delta, alpha, epsilon, seed, &output)
        }
    }
}

fn cmd_core(k: usize, file: &Path) -> Result<&'static str, CliError> {
    let (e, digest) = load(file)?;
    let mut core = Vec::new();
    let mut certificates = Vec::new();
    for c in e.candidates() {
        let certificate = core_membership(&e, k, c)?;
        if certificate.is_member() {
            core.push(c.0);
        }
        certificates.push(serde_json::to_value(&certificate).expect("serializable"));
    }
    emit(json!({
        "command": "core",
        "input": digest,
        "k": k,
        "core": core,
        "certificates": certificates,
    }));
    Ok("core")
}

fn cmd_winners(
    k: usize,
    order: Option<&str>,
    enumerate: bool,
    file: &Path,
) -> Result<&'static str, CliError> {
    let (e, digest) = load(file)?;
    match (order, enumerate) {
        (Some(line), false) => {
            let order = VetoOrder::parse_line(line, &e, k)?;
            let (winners, trace) = run_k_approval_veto(&e, k, &order)?;
            emit(json!({
                "command": "winners",
                "input": digest,
                "k": k,
                "mode": "order",
                "order": order.to_line(),
                "winners": winners.iter().map(|c| c.0).collect::<Vec<_>>(),
                "trace": serde_json::to_value(&trace).expect("serializable"),
            }));
        }
        (None, true) => {
            let budget = WinnerBudget::Exhaustive { order_cap: budget_cap()? };
            let winners = vetocore::veto::enumerate_possible_winners(&e, k, &budget)?;
            let orders = vetocore::veto::distinct_order_count(e.num_voters(), k)
                .map(|c| c.to_string());
            emit(json!({
                "command": "winners",
                "input": digest,
                "k": k,
                "mode": "enumerate",
                "orders": orders,
                "winners": winners.iter().map(|c| c.0).collect::<Vec<_>>(),
            }));
        }
        _ => return Err(CliError::input("pass exactly one of --order or --enumerate")),
    }
    Ok("winners")
}

fn cmd_protection(file: &Path) -> Result<&'static str, CliError> {
    let (e, digest) = load(file)?;
    let mut protections = Vec::new();
    let mut reports = Vec::new();
    for c in e.candidates() {
        let report = minority_protection(&e, c)?;
        protections.push(report.protection);
        reports.push(serde_json::to_value(&report).expect("serializable"));
    }
    emit(json!({
        "command": "protection",
        "input": digest,
        "protections": protections,
        "reports": reports,
    }));
    Ok("protection")
}

fn distortion_entry(c: CandidateId, result: &DistortionResult) -> Value {
    let value = match &result.value {
        DistortionValue::Finite(v) => json!(format_ratio(v)),
        DistortionValue::Unbounded => json!("unbounded"),
    };
    json!({
        "candidate": c.0,
        "value": value,
        "optimal": result.optimal_candidate.0,
        "witness": serde_json::to_value(&result.witness).expect("serializable"),
    })
}

fn cmd_distortion(
    objective: ObjectiveArg,
    alpha: Option<&str>,
    candidate: Option<usize>,
    file: &Path,
) -> Result<&'static str, CliError> {
    let (e, digest) = load(file)?;
    let alpha = match (objective, alpha) {
        (ObjectiveArg::Percentile, Some(raw)) => Some(parse_rational_arg("alpha", raw)?),
        (ObjectiveArg::Percentile, None) => {
            return Err(CliError::input("--objective percentile needs --alpha"))
        }
        (_, Some(_)) => {
            return Err(CliError::input("--alpha only applies to --objective percentile"))
        }
        (_, None) => None,
    };
    let config = DistortionConfig {
        engine: LpEngine::Rational,
        subset_cap: budget_cap()?,
    };
    let targets: Vec<CandidateId> = match candidate {
        Some(i) => vec![CandidateId(i)],
        None => e.candidates().collect(),
    };
    let mut results = Vec::new();
    for c in targets {
        let result = match (objective, &alpha) {
            (ObjectiveArg::Utilitarian, _) => distortion_utilitarian(&e, c, &config)?,
            (ObjectiveArg::Egalitarian, _) => distortion_egalitarian(&e, c, &config)?,
            (ObjectiveArg::Percentile, Some(a)) => distortion_percentile(&e, c, a, &config)?,
            (ObjectiveArg::Percentile, None) => unreachable!("checked above"),
        };
        results.push(distortion_entry(c, &result));
    }
    let objective_name = match objective {
        ObjectiveArg::Utilitarian => "utilitarian",
        ObjectiveArg::Egalitarian => "egalitarian",
        ObjectiveArg::Percentile => "percentile",
    };
    emit(json!({
        "command": "distortion",
        "input": digest,
        "objective": objective_name,
        "alpha": alpha.as_ref().map(format_ratio),
        "results": results,
    }));
    Ok("distortion")
}

fn cmd_verify_flow(
    k: usize,
    w: usize,
    cstar: usize,
    file: &Path,
) -> Result<&'static str, CliError> {
    let (e, digest) = load(file)?;
    let (w, cstar) = (CandidateId(w), CandidateId(cstar));
    let matching = match core_membership(&e, k, w)? {
        vetocore::veto_core::CoreCertificate::Member { matching } => matching,
        vetocore::veto_core::CoreCertificate::Blocked { .. } => {
            return Err(CliError::input(format!(
                "{w} is not a possible winner at k={k}; no certificate exists"
            )))
        }
    };
    let flow = construct_distortion_flow(&e, k, w, cstar, &matching)?;
    let report = verify_flow(&FlowNetwork::new(&e), &flow, k)?;
    emit(json!({
        "command": "verify-flow",
        "input": digest,
        "k": k,
        "w": w.0,
        "cstar": cstar.0,
        "stage1_total": format_ratio(&flow.stage1_total),
        "report": serde_json::to_value(&report).expect("serializable"),
    }));
    Ok("verify-flow")
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    family: FamilyArg,
    k: Option<usize>,
    m: Option<usize>,
    n: Option<usize>,
    delta: Option<String>,
    alpha: Option<String>,
    epsilon: Option<String>,
    seed: Option<u64>,
    output: &Path,
) -> Result<&'static str, CliError> {
    let (family_name, election, sidecar): (&str, Election, Option<NamedInstance>) =
        match family {
            FamilyArg::UtilLb => {
                let k = require(k, "k", "util-lb")?;
                let m = require(m, "m", "util-lb")?;
                let delta = match &delta {
                    Some(raw) => parse_rational_arg("delta", raw)?,
                    None => Rational::from_integer(0.into()),
                };
                let inst = gen_util_lower_bound(k, m, &delta)?;
                ("util-lb", inst.election.clone(), Some(inst))
            }
            FamilyArg::PercentileUnbounded => {
                let k = require(k, "k", "percentile-unbounded")?;
                let raw = require(alpha.as_deref(), "alpha", "percentile-unbounded")?;
                let alpha = parse_rational_arg("alpha", raw)?;
                let inst = gen_percentile_unbounded(k, &alpha)?;
                ("percentile-unbounded", inst.election.clone(), Some(inst))
            }
            FamilyArg::PercentileCyclic => {
                let raw = require(alpha.as_deref(), "alpha", "percentile-cyclic")?;
                let alpha = parse_rational_arg("alpha", raw)?;
                let raw = require(epsilon.as_deref(), "epsilon", "percentile-cyclic")?;
                let epsilon = parse_rational_arg("epsilon", raw)?;
                let inst = gen_percentile_cyclic(&alpha, &epsilon)?;
                ("percentile-cyclic", inst.election.clone(), Some(inst))
            }
            FamilyArg::Remark => {
                let inst = gen_remark_example();
                ("remark", inst.election.clone(), Some(inst))
            }
            FamilyArg::Random => {
                let n = require(n, "n", "random")?;
                let m = require(m, "m", "random")?;
                let e = gen_random(n, m, seed.unwrap_or(0))?;
                ("random", e, None)
            }
        };
    std::fs::write(output, election.to_text())?;
    let sidecar_path = match &sidecar {
        Some(instance) => {
            let path = format!("{}.witness.json", output.display());
            let body = serde_json::to_value(instance).expect("serializable");
            std::fs::write(&path, format!("{body}\n"))?;
            Some(path)
        }
        None => None,
    };
    emit(json!({
        "command": "gen",
        "family": family_name,
        "n": election.num_voters(),
        "m": election.num_candidates(),
        "output": output.display().to_string(),
        "sidecar": sidecar_path,
    }));
    Ok("gen")
}
