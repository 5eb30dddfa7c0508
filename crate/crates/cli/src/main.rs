//! Batch front end: parse channel specs, run the synthesis / classification /
//! rate / uncertainty / simulation / multilevel analyses, and emit CSV or
//! JSON artifacts.
//!
//! Artifacts go to `--out` (written atomically) or stdout; progress and
//! summaries go to stderr. For a fixed config and seed the artifact bytes are
//! identical run to run.
//!
//! Exit codes: 0 success, 2 argument/validation errors, 3 resource-cap
//! exceedance, 4 failed verification asserts.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qpolar::channel::{make_builtin, ChannelSpec};
use qpolar::cqsynth::{amplitude_channel, environment_channel, holevo, phase_channel};
use qpolar::polar::{
    classify, rate_report, synthesize_all, uncertainty_report, Direction, RateReport,
    SynthesisConfig, SynthesizedChannelTable, UncertaintyReport,
};
use qpolar::protosim::{run_protocol, ProtocolConfig};
use qpolar::multilevel::{
    level_rates, superactivation_probe, LevelRates, MultiQubitChannel,
};
use qpolar::{Error, Result};

#[derive(Parser)]
#[command(
    name = "qpolar",
    about = "Quantum polar code construction and protocol analysis",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BasisArg {
    Amplitude,
    Phase,
    Environment,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DirectionArg {
    Fwd,
    Transposed,
}

#[derive(Args)]
struct CommonArgs {
    /// Channel spec file (JSON)
    #[arg(long = "channel", required = true)]
    channel: PathBuf,

    /// Blocklengths, comma separated (powers of two)
    #[arg(long = "n", value_delimiter = ',', default_value = "2,4")]
    n: Vec<usize>,

    /// Threshold exponent in (0, 0.5)
    #[arg(long = "beta", default_value_t = 0.3)]
    beta: f64,

    /// Seed for every random choice this run makes
    #[arg(long = "seed", default_value_t = 0)]
    seed: u64,

    /// Output path (stdout when omitted); writes are atomic
    #[arg(long = "out")]
    out: Option<PathBuf>,

    /// Dimension cap for dense operators
    #[arg(long = "cap-dim", default_value_t = 4096)]
    cap_dim: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Which induced cq channel to synthesize
    #[arg(long = "basis", value_enum, default_value_t = BasisArg::Amplitude)]
    basis: BasisArg,

    /// Encoding matrix direction; defaults to the basis's natural one
    #[arg(long = "direction", value_enum)]
    direction: Option<DirectionArg>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Average the protocol over the frozen strings instead of sampling one
    #[arg(long = "average-frozen", default_value_t = false)]
    average_frozen: bool,
}

#[derive(Args)]
struct MultilevelArgs {
    /// Channel spec file(s); pass twice for the joint tensor-product mode
    #[arg(long = "channel", required = true, num_args = 1..=2)]
    channel: Vec<PathBuf>,

    #[arg(long = "seed", default_value_t = 0)]
    seed: u64,

    #[arg(long = "out")]
    out: Option<PathBuf>,

    #[arg(long = "cap-dim", default_value_t = 4096)]
    cap_dim: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Exact sqrt(F)/I tables of the synthesized channels
    Synth(SynthArgs),
    /// A/X/Z/B input partition at each blocklength
    Classify(CommonArgs),
    /// Net-rate report per blocklength
    Rates(CommonArgs),
    /// Per-index uncertainty-relation report (phase vs environment)
    Uncertainty(CommonArgs),
    /// Full coherent protocol simulation at one blocklength
    Simulate(SimulateArgs),
    /// Per-level rates; with two channels, the superactivation probe
    Multilevel(MultilevelArgs),
    /// (N, fraction-good, I(W)) series for polarization figures
    PlotData(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) | Error::Validation(_) => 2,
        Error::ResourceLimit(_) => 3,
        Error::Verification(_) => 4,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Rates(args) => cmd_rates(args),
        Command::Uncertainty(args) => cmd_uncertainty(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Multilevel(args) => cmd_multilevel(args),
        Command::PlotData(args) => cmd_plot_data(args),
    }
}

fn load_channel_spec(path: &Path) -> Result<ChannelSpec> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Validation(format!("cannot read channel spec {}: {e}", path.display()))
    })?;
    ChannelSpec::from_json_str(&text)
}

fn validate_common(args: &CommonArgs) -> Result<()> {
    if !(args.beta > 0.0 && args.beta < 0.5) {
        return Err(Error::Argument(format!(
            "beta = {} outside (0, 0.5)",
            args.beta
        )));
    }
    for &n in &args.n {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Argument(format!(
                "blocklength {n} is not a power of two"
            )));
        }
    }
    Ok(())
}

/// Writes the artifact atomically to `out`, or to stdout when absent.
fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
            let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
                .map_err(|e| Error::Validation(format!("cannot create temp file: {e}")))?;
            tmp.write_all(content.as_bytes())
                .map_err(|e| Error::Validation(format!("cannot write artifact: {e}")))?;
            tmp.persist(path)
                .map_err(|e| Error::Validation(format!("cannot persist artifact: {e}")))?;
            Ok(())
        }
    }
}

fn cq_channel_for(
    spec: &ChannelSpec,
    basis: BasisArg,
) -> Result<qpolar::cqsynth::BinaryCqChannel> {
    let ch = make_builtin(spec)?;
    match basis {
        BasisArg::Amplitude => amplitude_channel(&ch),
        BasisArg::Phase => phase_channel(&ch),
        BasisArg::Environment => environment_channel(&ch),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    validate_common(&args.common)?;
    let spec = load_channel_spec(&args.common.channel)?;
    let w = cq_channel_for(&spec, args.basis)?;
    let direction = match (args.direction, args.basis) {
        (Some(DirectionArg::Fwd), _) => Direction::Forward,
        (Some(DirectionArg::Transposed), _) => Direction::Transposed,
        (None, BasisArg::Phase) => Direction::Transposed,
        (None, _) => Direction::Forward,
    };
    let cfg = SynthesisConfig::with_cap(args.common.cap_dim);
    let mut lines = vec![SynthesizedChannelTable::CSV_HEADER.to_string()];
    for &n in &args.common.n {
        let table = synthesize_all(&w, n, direction, &cfg)?;
        lines.extend(table.csv_rows());
    }
    emit(&args.common.out, &(lines.join("\n") + "\n"))
}

fn tables_for(
    spec: &ChannelSpec,
    n: usize,
    cap_dim: usize,
) -> Result<(SynthesizedChannelTable, SynthesizedChannelTable)> {
    let ch = make_builtin(spec)?;
    let cfg = SynthesisConfig::with_cap(cap_dim);
    let ta = synthesize_all(&amplitude_channel(&ch)?, n, Direction::Forward, &cfg)?;
    let tp = synthesize_all(&phase_channel(&ch)?, n, Direction::Transposed, &cfg)?;
    Ok((ta, tp))
}

fn partition_json(part: &qpolar::polar::ChannelPartition, beta: f64) -> serde_json::Value {
    serde_json::json!({
        "N": part.n_size,
        "beta": beta,
        "a": part.a,
        "x": part.x,
        "z": part.z,
        "b": part.b,
    })
}

fn cmd_classify(args: CommonArgs) -> Result<()> {
    validate_common(&args)?;
    let spec = load_channel_spec(&args.channel)?;
    let mut parts = Vec::new();
    for &n in &args.n {
        let (ta, tp) = tables_for(&spec, n, args.cap_dim)?;
        let part = classify(&ta, &tp, args.beta)?;
        parts.push(partition_json(&part, args.beta));
    }
    let body = serde_json::to_string_pretty(&serde_json::Value::Array(parts))
        .expect("partition JSON serializes");
    emit(&args.out, &(body + "\n"))
}

fn cmd_rates(args: CommonArgs) -> Result<()> {
    validate_common(&args)?;
    let spec = load_channel_spec(&args.channel)?;
    let ch = make_builtin(&spec)?;
    let mut lines = vec![RateReport::CSV_HEADER.to_string()];
    for &n in &args.n {
        let (ta, tp) = tables_for(&spec, n, args.cap_dim)?;
        let part = classify(&ta, &tp, args.beta)?;
        lines.push(rate_report(&part, &ch).csv_row());
    }
    emit(&args.out, &(lines.join("\n") + "\n"))
}

fn cmd_uncertainty(args: CommonArgs) -> Result<()> {
    validate_common(&args)?;
    let spec = load_channel_spec(&args.channel)?;
    let ch = make_builtin(&spec)?;
    let cfg = SynthesisConfig::with_cap(args.cap_dim);
    let mut lines = vec![UncertaintyReport::CSV_HEADER.to_string()];
    let mut all_pass = true;
    for &n in &args.n {
        let report = uncertainty_report(&ch, n, args.beta, &cfg)?;
        lines.extend(report.csv_rows());
        eprintln!(
            "N={n}: phase/env good sets disjoint: {}, bad-set/env disjoint: {}",
            report.phase_env_disjoint,
            report
                .bad_env_disjoint
                .map_or("not checked (degradability unknown)".to_string(), |b| b
                    .to_string()),
        );
        all_pass &= report.all_pass();
    }
    emit(&args.out, &(lines.join("\n") + "\n"))?;
    if !all_pass {
        return Err(Error::Verification(
            "an uncertainty relation failed; see the FAIL rows".into(),
        ));
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    validate_common(&args.common)?;
    if args.common.n.len() != 1 {
        return Err(Error::Argument(
            "simulate takes a single --n blocklength".into(),
        ));
    }
    let n = args.common.n[0];
    let spec = load_channel_spec(&args.common.channel)?;
    let ch = make_builtin(&spec)?;
    let (ta, tp) = tables_for(&spec, n, args.common.cap_dim)?;
    let part = classify(&ta, &tp, args.common.beta)?;

    // frozen bits: exact averaging, or one assignment drawn from the seed
    let mut rng = ChaCha8Rng::seed_from_u64(args.common.seed);
    let (frozen_amp, frozen_phase): (Vec<u8>, Vec<u8>) = if args.average_frozen {
        (vec![0; part.z.len()], vec![0; part.x.len()])
    } else {
        (
            (0..part.z.len()).map(|_| rng.random_range(0..2) as u8).collect(),
            (0..part.x.len()).map(|_| rng.random_range(0..2) as u8).collect(),
        )
    };

    let mut cfg = ProtocolConfig::new(
        ch,
        part.clone(),
        frozen_amp.clone(),
        frozen_phase.clone(),
        args.average_frozen,
        args.common.seed,
    );
    cfg.max_state_dim = cfg
        .max_state_dim
        .max(args.common.cap_dim.saturating_mul(args.common.cap_dim));
    let report = run_protocol(&cfg)?;

    let mut body = BTreeMap::new();
    body.insert("N".to_string(), serde_json::json!(n));
    body.insert("beta".to_string(), serde_json::json!(args.common.beta));
    body.insert(
        "channel".to_string(),
        serde_json::to_value(&spec).expect("channel spec serializes"),
    );
    body.insert("seed".to_string(), serde_json::json!(args.common.seed));
    body.insert(
        "partition".to_string(),
        partition_json(&part, args.common.beta),
    );
    body.insert("frozen_amp".to_string(), serde_json::json!(frozen_amp));
    body.insert("frozen_phase".to_string(), serde_json::json!(frozen_phase));
    body.insert(
        "ebit_fidelity".to_string(),
        serde_json::json!(report.ebit_fidelity),
    );
    body.insert(
        "stage_overlaps".to_string(),
        serde_json::json!(report.stage_overlaps),
    );
    body.insert("eps_amp".to_string(), serde_json::json!(report.eps_amp));
    body.insert("eps_phase".to_string(), serde_json::json!(report.eps_phase));
    body.insert(
        "averaged_over_frozen".to_string(),
        serde_json::json!(report.averaged_over_frozen),
    );
    let text = serde_json::to_string_pretty(&body).expect("report serializes");
    emit(&args.common.out, &(text + "\n"))
}

fn cmd_multilevel(args: MultilevelArgs) -> Result<()> {
    let specs: Vec<ChannelSpec> = args
        .channel
        .iter()
        .map(|p| load_channel_spec(p))
        .collect::<Result<_>>()?;
    match specs.as_slice() {
        [single] => {
            let mc = MultiQubitChannel::new(make_builtin(single)?)?;
            let rates = level_rates(&mc, args.cap_dim)?;
            let coherent = qpolar::polar::coherent_information(mc.channel());
            eprintln!(
                "net rate {} vs coherent information {} (levels: {})",
                rates.net,
                coherent,
                mc.levels()
            );
            emit_level_csv(&args.out, &rates)
        }
        [first, second] => {
            let a = make_builtin(first)?;
            let b = make_builtin(second)?;
            let probe = superactivation_probe(&a, &b, args.cap_dim)?;
            let joint = MultiQubitChannel::new(qpolar::multilevel::tensor_channels(&a, &b)?)?;
            let rates = level_rates(&joint, args.cap_dim)?;
            eprintln!(
                "joint net rate {}, factor coherent informations {} and {}, superactivated: {}",
                probe.joint_net, probe.coherent_a, probe.coherent_b, probe.superactivated
            );
            emit_level_csv(&args.out, &rates)
        }
        _ => unreachable!("clap bounds --channel to 1..=2 occurrences"),
    }
}

fn emit_level_csv(out: &Option<PathBuf>, rates: &LevelRates) -> Result<()> {
    let mut lines = vec![LevelRates::CSV_HEADER.to_string()];
    lines.extend(rates.csv_rows());
    emit(out, &(lines.join("\n") + "\n"))
}

fn cmd_plot_data(args: CommonArgs) -> Result<()> {
    validate_common(&args)?;
    let spec = load_channel_spec(&args.channel)?;
    let ch = make_builtin(&spec)?;
    let w = amplitude_channel(&ch)?;
    let iw = holevo(&w);
    let cfg = SynthesisConfig::with_cap(args.cap_dim);
    let mut lines = vec!["N,fraction_good,holevo".to_string()];
    for &n in &args.n {
        let table = synthesize_all(&w, n, Direction::Forward, &cfg)?;
        let fraction = table.good_set(args.beta).len() as f64 / n as f64;
        lines.push(format!("{n},{fraction},{iw}"));
    }
    emit(&args.out, &(lines.join("\n") + "\n"))
}
