use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use cvqsdc_core::gaussian::{displace, squeeze, vacuum, wigner};
use cvqsdc_core::protocols::{self, CqdConfig, QsdcConfig, QsdcMessage, WPolicy};
use cvqsdc_core::security::{self, write_sweep_csv};
use cvqsdc_core::{
    AttackKind, GqcmParams, Leg, MeasurementMode, PhaseGrid, SqueezeParam, SweepGrid, SweepRange, Transcript,
};

const EXIT_CONFIG: u8 = 1;
const EXIT_ABORTED: u8 = 2;

/// Simulator for continuous-variable QSDC and controlled quantum dialogue.
#[derive(Debug, Parser)]
#[command(name = "cvqsdc", version)]
struct Cli {
    /// Flat `key = value` file of flags for the subcommand; explicit flags win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one protocol session and write its transcript as JSON.
    #[command(args_override_self = true)]
    Run(RunArgs),
    /// Evaluate the ΔI security criterion over a parameter grid.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Tabulate the Wigner function of a squeezed coherent state.
    #[command(args_override_self = true)]
    Wigner(WignerArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProtocolArg {
    Qsdc,
    Cqd,
    Smp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Expectation,
    Sampled,
}

impl From<ModeArg> for MeasurementMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Expectation => MeasurementMode::Expectation,
            ModeArg::Sampled => MeasurementMode::Sampled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AttackArg {
    None,
    Gqcm,
    InterceptMeasureResend,
    InterceptDelaySwap,
    Dos,
    ParticipantCharlie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WPolicyArg {
    SharedW,
    PerSlotW,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    protocol: ProtocolArg,
    /// Slots: total for qsdc (default 64), message slots for cqd/smp (default 16).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value = "sampled")]
    mode: ModeArg,
    /// QSDC payload as a 0/1 string, grouped into 3-bit symbols.
    #[arg(long, conflicts_with = "payload_real")]
    payload_bits: Option<String>,
    /// QSDC payload as one real value on every message slot (default 0).
    #[arg(long, allow_negative_numbers = true)]
    payload_real: Option<f64>,
    #[arg(long = "m-a", default_value_t = 0.0, allow_negative_numbers = true)]
    m_a: f64,
    #[arg(long = "m-b", default_value_t = 0.0, allow_negative_numbers = true)]
    m_b: f64,
    #[arg(long = "assets-a", default_value_t = 0.0)]
    assets_a: f64,
    #[arg(long = "assets-b", default_value_t = 0.0)]
    assets_b: f64,
    #[arg(long, value_enum, default_value = "none")]
    attack: AttackArg,
    /// Channel segment the attack targets.
    #[arg(long)]
    leg: Option<Leg>,
    /// GQCM amplifier gain A ≥ 1.
    #[arg(long, default_value_t = 1.0)]
    gain: f64,
    /// GQCM beamsplitter transmission T.
    #[arg(long, default_value_t = 0.5)]
    transmission: f64,
    /// Standard deviation of the random amplitudes resent by a DoS attacker.
    #[arg(long, default_value_t = 2.0)]
    dos_scale: f64,
    #[arg(long, value_enum, default_value = "shared-w")]
    w_policy: WPolicyArg,
    /// Aggregate false-alarm level of the verification policy.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, env = "CVQSDC_SEED", default_value_t = 0)]
    seed: u64,
    /// Transcript destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Amplifier gain, `v` or `start:stop:step`.
    #[arg(long = "A", allow_hyphen_values = true)]
    a: SweepRange,
    /// Transmission.
    #[arg(long = "T", allow_hyphen_values = true)]
    t: SweepRange,
    /// Effective squeeze magnitude.
    #[arg(long, allow_hyphen_values = true)]
    g: SweepRange,
    /// Effective squeeze phase.
    #[arg(long, allow_hyphen_values = true)]
    h: SweepRange,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WignerArgs {
    /// Coherent amplitude, e.g. `1.2+2.1i`.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Complex64,
    #[arg(long, default_value_t = 0.0)]
    squeeze_r: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    squeeze_theta: f64,
    /// Range used for both axes.
    #[arg(long, default_value = "-5:5:0.05", allow_hyphen_values = true)]
    grid: SweepRange,
    #[arg(long, allow_hyphen_values = true)]
    x_grid: Option<SweepRange>,
    #[arg(long, allow_hyphen_values = true)]
    p_grid: Option<SweepRange>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let argv = match expand_config(std::env::args_os().collect()) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args).map(|()| ExitCode::SUCCESS),
        Command::Wigner(args) => cmd_wigner(args).map(|()| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(EXIT_CONFIG)
    })
}

/// Splices `--key value` pairs from the `--config` file in right after the
/// subcommand, so flags given on the command line come later and win.
fn expand_config(mut argv: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let Some(pos) = argv
        .iter()
        .position(|a| a == "--config" || a.to_string_lossy().starts_with("--config="))
    else {
        return Ok(argv);
    };
    let flag = argv.remove(pos).to_string_lossy().into_owned();
    let path = match flag.strip_prefix("--config=") {
        Some(p) => PathBuf::from(p),
        None if pos < argv.len() => PathBuf::from(argv.remove(pos)),
        None => bail!("--config needs a path"),
    };
    let pairs = read_config(&path)?;
    let sub = argv
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|i| i + 2)
        .unwrap_or(argv.len());
    let injected = pairs.into_iter().map(|(k, v)| OsString::from(format!("--{k}={v}")));
    argv.splice(sub..sub, injected);
    Ok(argv)
}

fn read_config(path: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let mut pairs = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("{}:{}: expected `key = value`", path.display(), no + 1);
        };
        let k = k.trim().trim_start_matches("--");
        if k.is_empty() || k == "config" {
            bail!("{}:{}: invalid key {k:?}", path.display(), no + 1);
        }
        pairs.push((k.to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn attack_from(args: &RunArgs, default_leg: Leg) -> anyhow::Result<AttackKind> {
    let leg = args.leg.unwrap_or(default_leg);
    Ok(match args.attack {
        AttackArg::None => AttackKind::None,
        AttackArg::Gqcm => AttackKind::Gqcm {
            params: GqcmParams::new(args.gain, args.transmission)?,
            leg,
        },
        AttackArg::InterceptMeasureResend => AttackKind::InterceptMeasureResend { leg },
        AttackArg::InterceptDelaySwap => AttackKind::InterceptDelaySwap,
        AttackArg::Dos => AttackKind::DenialOfService {
            leg,
            amplitude_scale: args.dos_scale,
        },
        AttackArg::ParticipantCharlie => AttackKind::ParticipantCharlie,
    })
}

fn cmd_run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let mode = MeasurementMode::from(args.mode);
    let transcript: Transcript = match args.protocol {
        ProtocolArg::Qsdc => {
            let mut cfg = QsdcConfig::new(args.n.unwrap_or(64), mode, args.seed);
            if let Some(alpha) = args.alpha {
                cfg.policy.aggregate_alpha = alpha;
            }
            let message = match (&args.payload_bits, args.payload_real) {
                (Some(bits), _) => QsdcMessage::Bits(bits.clone()),
                (None, real) => QsdcMessage::Real(real.unwrap_or(0.0)),
            };
            let attack = attack_from(&args, Leg::BobAlice)?;
            protocols::run_qsdc(&cfg, &message, &attack)?
        }
        ProtocolArg::Cqd | ProtocolArg::Smp => {
            let mut cfg = CqdConfig::new(args.n.unwrap_or(16), mode, args.seed);
            if let Some(alpha) = args.alpha {
                cfg.policy.aggregate_alpha = alpha;
            }
            cfg.w_policy = match args.w_policy {
                WPolicyArg::SharedW => WPolicy::SharedW,
                WPolicyArg::PerSlotW => WPolicy::PerSlotW,
            };
            if args.protocol == ProtocolArg::Cqd {
                let attack = attack_from(&args, Leg::AliceBob)?;
                protocols::run_cqd(&cfg, args.m_a, args.m_b, &attack)?
            } else {
                if args.attack != AttackArg::None {
                    bail!("smp runs without attacks");
                }
                protocols::run_socialist_millionaire(args.assets_a, args.assets_b, &cfg)?
            }
        }
    };
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "{}", transcript.to_json())?;
    out.flush()?;
    if let Some(reason) = transcript.abort_reason() {
        eprintln!("aborted: {}", serde_json::to_string(reason)?);
        return Ok(ExitCode::from(EXIT_ABORTED));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let grid = SweepGrid::from_ranges(&args.a, &args.t, &args.g, &args.h);
    if grid.is_empty() {
        bail!("empty sweep grid");
    }
    let rows = security::sweep(&grid)?;
    let mut out = output(args.out.as_deref())?;
    write_sweep_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_wigner(args: WignerArgs) -> anyhow::Result<()> {
    let s = SqueezeParam::new(args.squeeze_r, args.squeeze_theta)?;
    let state = squeeze(&displace(&vacuum(), args.alpha), s);
    let grid = PhaseGrid::new(args.x_grid.unwrap_or(args.grid), args.p_grid.unwrap_or(args.grid));
    let field = wigner(&state, &grid)?;
    let mut out = output(args.out.as_deref())?;
    field.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}
