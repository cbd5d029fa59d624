//! `qpea`: root finding by phase estimation on a simulated register.
//!
//! Coefficients are given lowest degree first: `--coeffs -1,0,1` is `x^2 - 1`.
//!
//! Exit codes: 0 success, 2 bad input, 3 the computation failed (a partial
//! report is still printed).

mod input;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use thiserror::Error;

use qpea::ipea::{find_all_roots, InitStrategy, IpeaError, Measurement, RunConfig};
use qpea::ledger::{compare_report, count_circuit};
use qpea::oracle::{self, OracleError};
use qpea::poly::{Mode, PolyError, Polynomial};
use qpea::prc::{build_prc, effective_operator, PrcError};

use input::{load_coeffs, parse_list, InputError};

#[derive(Parser)]
#[command(name = "qpea", version, about = "Polynomial roots by iterative phase estimation on a simulated register")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate every root, deflating one root (or conjugate pair) at a time.
    Roots(RootsArgs),
    /// Extract the post-selected operator of the circuit and fit its scale.
    PrcVerify(PrcArgs),
    /// Basic-operation counts for m main qubits.
    Gates(GatesArgs),
    /// Classical reference roots.
    Oracle(OracleArgs),
    /// Quantum vs. classical complexity table.
    Compare(CompareArgs),
}

#[derive(Args)]
struct CoeffArgs {
    /// Coefficients a0..an, lowest degree first, comma separated or a JSON array.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "coeffs_file")]
    coeffs: Option<String>,
    /// File holding the coefficients in either format.
    #[arg(long)]
    coeffs_file: Option<PathBuf>,
}

#[derive(Args)]
struct OutputArgs {
    /// JSON output (default).
    #[arg(long, conflicts_with = "text")]
    json: bool,
    /// Aligned text output with the same values.
    #[arg(long)]
    text: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    X,
    Recip,
}

impl ModeArg {
    fn mode(self) -> Option<Mode> {
        match self {
            ModeArg::Auto => None,
            ModeArg::X => Some(Mode::XMode),
            ModeArg::Recip => Some(Mode::RecipXMode),
        }
    }

    fn name(self) -> &'static str {
        match self {
            ModeArg::Auto => "auto",
            ModeArg::X => "x",
            ModeArg::Recip => "recip",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Mixed,
    Eigenstate,
}

#[derive(Args)]
struct RootsArgs {
    #[command(flatten)]
    coeffs: CoeffArgs,
    /// Bit precision b.
    #[arg(long, default_value_t = 6)]
    bits: u32,
    #[arg(long, value_enum, default_value = "auto")]
    mode: ModeArg,
    /// Exact probabilities (default).
    #[arg(long, conflicts_with = "shots")]
    exact: bool,
    /// Sample N chain attempts per iteration instead (b <= 3).
    #[arg(long, value_name = "N")]
    shots: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "mixed")]
    init: InitArg,
    /// Residual tolerance on the input polynomial; default 1e-6 (1 + max|a_i|).
    #[arg(long)]
    tolerance: Option<f64>,
    /// Longest chain simulated gate by gate; longer chains use the operator power.
    #[arg(long, default_value_t = 16)]
    max_l: usize,
    /// Report raw estimates without Newton polishing.
    #[arg(long)]
    no_polish: bool,
    /// Do not retry failed mixed-state stages with an eigenstate.
    #[arg(long)]
    no_fallback: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct PrcArgs {
    #[command(flatten)]
    coeffs: CoeffArgs,
    #[arg(long, value_enum, default_value = "auto")]
    mode: ModeArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct GatesArgs {
    /// Number of main qubits.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=40))]
    m: u32,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    coeffs: CoeffArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// Degrees, comma separated.
    #[arg(long, default_value = "4,16,64,256,1024,65536")]
    n: String,
    /// Bit precisions, comma separated.
    #[arg(long, default_value = "1,4,8,16")]
    b: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("invalid polynomial: {0}")]
    BadPolynomial(PolyError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ipea(IpeaError),
    #[error(transparent)]
    Prc(#[from] PrcError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Poly(PolyError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::BadPolynomial(_) | CliError::Usage(_) => 2,
            _ => 3,
        }
    }
}

impl From<IpeaError> for CliError {
    fn from(e: IpeaError) -> Self {
        match e {
            IpeaError::InvalidConfig(msg) => CliError::Usage(msg),
            other => CliError::Ipea(other),
        }
    }
}

/// What a command produced: the report and whether it counts as success.
struct Outcome {
    value: Value,
    text: Option<String>,
    ok: bool,
}

fn polynomial(args: &CoeffArgs) -> Result<(Vec<f64>, Polynomial), CliError> {
    let coeffs = load_coeffs(args.coeffs.as_deref(), args.coeffs_file.as_deref())?;
    let p = Polynomial::new(coeffs.clone())
        .and_then(|p| p.normalize())
        .map_err(CliError::BadPolynomial)?;
    Ok((coeffs, p))
}

fn cmd_roots(args: &RootsArgs) -> Result<Outcome, CliError> {
    let (coeffs, p) = polynomial(&args.coeffs)?;
    if let Some(t) = args.tolerance {
        if !(t > 0.0) {
            return Err(CliError::Usage(format!("tolerance must be positive, got {t}")));
        }
    }
    let measurement = match args.shots {
        Some(count) => Measurement::Shots { count, seed: args.seed },
        None => Measurement::Exact,
    };
    let cfg = RunConfig {
        bits: args.bits,
        measurement,
        init: match args.init {
            InitArg::Mixed => InitStrategy::MaximallyMixed,
            InitArg::Eigenstate => InitStrategy::Eigenstate,
        },
        mode: args.mode.mode(),
        max_l: args.max_l,
        polish: !args.no_polish,
        eigenstate_fallback: !args.no_fallback,
        tolerance: args.tolerance,
        ..RunConfig::default()
    };
    let result = find_all_roots(&p, &cfg)?;
    let reference = oracle::find_roots_default(&p)?;
    let pairing = oracle::pairing_error(&result.roots, &reference.roots);
    let input = json!({
        "coeffs": coeffs.iter().map(|&c| report::num(c)).collect::<Vec<_>>(),
        "bits": args.bits,
        "mode": args.mode.name(),
        "measurement": match measurement {
            Measurement::Exact => json!({ "kind": "exact" }),
            Measurement::Shots { count, seed } => json!({ "kind": "shots", "shots": count, "seed": seed }),
        },
        "init": match args.init { InitArg::Mixed => "mixed", InitArg::Eigenstate => "eigenstate" },
        "polish": cfg.polish,
        "eigenstate_fallback": cfg.eigenstate_fallback,
        "max_l": cfg.max_l,
    });
    let summary = report::RootsSummary { original: &p, report: &result, oracle_roots: &reference.roots, pairing_error: pairing };
    let (body, ok) = report::roots_body(&summary, input);
    Ok(Outcome { value: report::envelope("roots", body), text: None, ok })
}

fn cmd_prc_verify(args: &PrcArgs) -> Result<Outcome, CliError> {
    let (coeffs, p) = polynomial(&args.coeffs)?;
    let (padded, pad_count) = p.pad_to_power_of_two();
    let mode = args.mode.mode().unwrap_or_else(|| padded.select_mode());
    let sys = padded.scale(mode).map_err(CliError::Poly)?;
    let eff = effective_operator(&build_prc(&sys)?, &sys)?;
    let body = report::prc_body(&coeffs, pad_count, &sys, &eff);
    Ok(Outcome { value: report::envelope("prc-verify", body), text: None, ok: true })
}

fn cmd_gates(args: &GatesArgs) -> Result<Outcome, CliError> {
    let ledger = count_circuit(args.m as usize);
    Ok(Outcome { value: report::envelope("gates", report::gates_body(&ledger)), text: None, ok: true })
}

fn cmd_oracle(args: &OracleArgs) -> Result<Outcome, CliError> {
    let (coeffs, p) = polynomial(&args.coeffs)?;
    let res = oracle::find_roots_default(&p)?;
    let body = report::oracle_body(&coeffs, &res.roots, res.max_residual, res.iterations_used);
    Ok(Outcome { value: report::envelope("oracle", body), text: None, ok: true })
}

fn cmd_compare(args: &CompareArgs) -> Result<Outcome, CliError> {
    let ns: Vec<u64> = parse_list(&args.n)?;
    let bs: Vec<u32> = parse_list(&args.b)?;
    if ns.iter().any(|&n| n < 2) || bs.iter().any(|&b| b < 1) || ns.is_empty() || bs.is_empty() {
        return Err(CliError::Usage("need degrees n >= 2 and precisions b >= 1".into()));
    }
    let rows = compare_report(&ns, &bs);
    let text = report::render_compare(&rows);
    Ok(Outcome { value: report::envelope("compare", report::compare_body(&rows)), text: Some(text), ok: true })
}

fn emit(outcome: &Outcome, output: &OutputArgs) {
    if output.text {
        match &outcome.text {
            Some(t) => print!("{t}"),
            None => print!("{}", report::render_text(&outcome.value)),
        }
    } else {
        println!("{}", outcome.value);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, output) = match &cli.command {
        Command::Roots(a) => (cmd_roots(a), &a.output),
        Command::PrcVerify(a) => (cmd_prc_verify(a), &a.output),
        Command::Gates(a) => (cmd_gates(a), &a.output),
        Command::Oracle(a) => (cmd_oracle(a), &a.output),
        Command::Compare(a) => (cmd_compare(a), &a.output),
    };
    match result {
        Ok(outcome) => {
            emit(&outcome, output);
            if outcome.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut body = Map::new();
            body.insert("error".into(), json!(e.to_string()));
            body.insert("status".into(), json!("error"));
            if !output.text {
                println!("{}", report::envelope("error", body));
            }
            ExitCode::from(e.exit_code())
        }
    }
}
