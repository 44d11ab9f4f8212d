//! Batch command line.
//!
//! Exit status 0 on success, 2 for invalid input, 3 when a computation
//! fails. Errors go to standard error as one JSON line.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use powerforge_core::simulate::{dataset_seed, simulate_dataset};
use powerforge_core::stats::{AxisMode, PowerCurve, PowerPoint};
use powerforge_core::LevelPair;

use crate::canonical;
use crate::error::{AppError, Result};
use crate::export;
use crate::parallel;
use crate::session::{PowerSelection, Session, XRange};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_COMPUTATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "powerforge", version, about = "Simulation-based power analysis for within-subject experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Power against participants or replications for one pair.
    PowerCurve(PowerCurveArgs),
    /// Simulated pairwise differences with adjusted intervals.
    Pairwise(PairwiseArgs),
    /// The counterbalanced trial table.
    TrialTable(TableArgs),
    /// One simulated dataset, for checking against other tools.
    Dataset(DatasetArgs),
    /// Run the local HTTP service (port from POWERFORGE_PORT, default 8710).
    Serve,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub session: PathBuf,
    /// Overrides the session's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Participants,
    Replications,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TierArg {
    /// Closed-form points only.
    Analytic,
    /// Closed-form points replaced by Monte Carlo estimates.
    Simulated,
}

#[derive(Debug, Args)]
pub struct PowerCurveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Simulated datasets per point.
    #[arg(long, default_value_t = 1000)]
    pub k: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Curve positions, both ends included.
    #[arg(long, default_value = "6..50")]
    pub n: String,
    /// `IV:levelA-levelB`; defaults to the session's selection.
    #[arg(long, conflicts_with = "min_power")]
    pub pair: Option<String>,
    #[arg(long)]
    pub min_power: bool,
    #[arg(long, value_enum, default_value_t = AxisArg::Participants)]
    pub axis: AxisArg,
    #[arg(long, value_enum, default_value_t = TierArg::Simulated)]
    pub tier: TierArg,
}

#[derive(Debug, Args)]
pub struct PairwiseArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Number of simulated frames.
    #[arg(long, default_value_t = 30)]
    pub frames: usize,
    /// Repeatable; defaults to the session's pairwise selection.
    #[arg(long)]
    pub pair: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset index within the seed's batch.
    #[arg(long, default_value_t = 0)]
    pub index: u64,
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return EXIT_OK;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", serde_json::json!({ "error": "invalid_arguments", "message": first }));
            return EXIT_INVALID;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", e.to_json());
            if e.is_validation() {
                EXIT_INVALID
            } else {
                EXIT_COMPUTATION
            }
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::PowerCurve(a) => power_curve(a),
        Command::Pairwise(a) => pairwise(a),
        Command::TrialTable(a) => trial_table(a),
        Command::Dataset(a) => dataset(a),
        Command::Serve => crate::server::serve_from_env(),
    }
}

fn load(common: &Common) -> Result<Session> {
    let mut session = Session::load(&common.session)?;
    if let Some(seed) = common.seed {
        session.override_settings(|s| s.seed = seed)?;
    }
    Ok(session)
}

fn output(common: &Common) -> Result<Box<dyn Write>> {
    Ok(match &common.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[derive(Serialize)]
struct CurveReport<'a> {
    pair: String,
    axis: AxisMode,
    fixed: u32,
    alpha: f64,
    points: &'a [PowerPoint],
}

fn power_curve(a: PowerCurveArgs) -> Result<()> {
    let mut session = load(&a.common)?;
    let x_range: XRange = a.n.parse()?;
    let selection = match (&a.pair, a.min_power) {
        (Some(spec), _) => Some(PowerSelection::Pair {
            pair: LevelPair::parse(spec, session.design())?,
        }),
        (None, true) => Some(PowerSelection::MinimumPower),
        (None, false) => None,
    };
    session.override_settings(|s| {
        s.datasets = a.k;
        s.alpha = a.alpha;
        s.x_range = x_range;
        s.axis = match a.axis {
            AxisArg::Participants => AxisMode::Participants,
            AxisArg::Replications => AxisMode::Replications,
        };
        if let Some(sel) = selection {
            s.selection = sel;
        }
    })?;
    let req = session.curve_request()?;
    let curve: PowerCurve = match a.tier {
        TierArg::Analytic => parallel::analytic_curve(&req)?,
        TierArg::Simulated => parallel::power_curve(&req, &mut |_| {}, &|| false)?,
    };
    let mut out = output(&a.common)?;
    match a.common.format {
        Format::Csv => export::write_power_curve(&mut out, &curve)?,
        Format::Json => {
            let report = CurveReport {
                pair: curve.pair.label(session.design()),
                axis: curve.axis,
                fixed: curve.fixed,
                alpha: curve.alpha,
                points: &curve.points,
            };
            out.write_all(canonical::to_string(&report)?.as_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn pairwise(a: PairwiseArgs) -> Result<()> {
    let mut session = load(&a.common)?;
    let pairs = a
        .pair
        .iter()
        .map(|p| LevelPair::parse(p, session.design()))
        .collect::<powerforge_core::Result<Vec<_>>>()?;
    session.override_settings(|s| {
        s.alpha = a.alpha;
        s.frames = a.frames;
        if !pairs.is_empty() {
            s.pairwise_pairs = pairs;
        }
    })?;
    let frames = session.pairwise_inputs().compute()?;
    let mut out = output(&a.common)?;
    match a.common.format {
        Format::Csv => export::write_frames(&mut out, session.design(), &frames)?,
        Format::Json => out.write_all(canonical::to_string(&frames)?.as_bytes())?,
    }
    out.flush()?;
    Ok(())
}

fn trial_table(a: TableArgs) -> Result<()> {
    let session = load(&a.common)?;
    let table = session.trial_table();
    let mut out = output(&a.common)?;
    match a.common.format {
        Format::Csv => export::write_trial_table(&mut out, session.design(), &table)?,
        Format::Json => out.write_all(canonical::to_string(&table)?.as_bytes())?,
    }
    out.flush()?;
    Ok(())
}

fn dataset(a: DatasetArgs) -> Result<()> {
    let session = load(&a.common)?;
    let model = session.model();
    let seed = dataset_seed(session.settings().seed, a.index);
    let data = simulate_dataset(&model, model.design.participants, seed).map_err(AppError::from)?;
    let mut out = output(&a.common)?;
    match a.common.format {
        Format::Csv => export::write_dataset(&mut out, session.design(), &data)?,
        Format::Json => out.write_all(canonical::to_string(&data)?.as_bytes())?,
    }
    out.flush()?;
    Ok(())
}
