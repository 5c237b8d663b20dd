//! Offline researcher tools over the `crowdgaze` core. Every random choice is driven by an
//! explicit `--seed`, so identical arguments give byte-identical output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use crowdgaze::analysis::{self, AnalysisError, SampleSet};
use crowdgaze::chart::{generate_chart, ChartParams};
use crowdgaze::session::{estimate_cost, ExperimentParams};
use crowdgaze::simulate::{
    run_tutorial_sweep, stepped_range, GazeMixture, ParticipantModel, SweepAxis, SweepConfig,
};
use crowdgaze::{FrameSize, Money};
use num_traits::ToPrimitive;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or unreadable input files; exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Well-formed input that cannot be processed; exit code 3.
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Parse { lines, message } => {
                let lines: Vec<String> = lines.iter().map(ToString::to_string).collect();
                CliError::Usage(format!("malformed input at line(s) {}: {message}", lines.join(", ")))
            }
            AnalysisError::Parameter(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "crowdgaze",
    version,
    about = "Chart generation, simulation sweeps and gaze density analysis",
    after_help = "Parameter symbols (defaults):\n  t_v  clip length before the frame of interest (10 s)\n  t_c  chart display time (1 s)\n  t_t  tutorial animation length (3 s)\n  f_s  font size (20 px)\n  D_r  relative triplet density, f_s / vertical spacing (0.5)\n  R_a  tutorial approval radius (100 px)\n\nExit codes: 0 success, 2 usage or parameter error, 3 data error."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one character chart as JSON.
    Chart(ChartArgs),
    /// Simulated tutorial success rates over a parameter range and approval radii, as CSV.
    Sweep(SweepArgs),
    /// Smooth a sample file into a density grid (JSON) and/or a heatmap (PGM).
    Aggregate(AggregateArgs),
    /// Render a density grid JSON file as a PGM heatmap.
    Heatmap(HeatmapArgs),
    /// Chi-square distances of our samples and the flat baseline to a reference sample file.
    Compare(CompareArgs),
    /// Total pay for a number of gaze locations per frame.
    Cost(CostArgs),
    /// Print experiment parameters as JSON, usable as a campaign's `parameters`.
    Params(ParamArgs),
}

#[derive(Debug, Args)]
pub struct ChartArgs {
    /// Frame width, pixels.
    #[arg(long, default_value_t = 1024)]
    pub width: u32,
    /// Frame height, pixels.
    #[arg(long, default_value_t = 576)]
    pub height: u32,
    /// Font size f_s, pixels.
    #[arg(long = "font", alias = "f-s", default_value_t = 20.0)]
    pub font_size: f64,
    /// Relative triplet density D_r.
    #[arg(long = "density", alias = "d-r", default_value_t = 0.5)]
    pub density: f64,
    /// Jitter as a fraction of the vertical spacing.
    #[arg(long, default_value_t = 0.25)]
    pub jitter: f64,
    #[arg(long)]
    pub seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AxisArg {
    /// Relative density D_r, 0.3 to 1.0.
    Density,
    /// Chart duration t_c in seconds, 0.1 to 1.5.
    Duration,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: AxisArg,
    /// First swept value; the axis minimum when omitted.
    #[arg(long)]
    pub from: Option<f64>,
    /// Last swept value; the axis maximum when omitted.
    #[arg(long)]
    pub to: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    /// Smallest approval radius R_a, pixels.
    #[arg(long, default_value_t = 20.0)]
    pub ra_from: f64,
    #[arg(long, default_value_t = 200.0)]
    pub ra_to: f64,
    #[arg(long, default_value_t = 20.0)]
    pub ra_step: f64,
    /// Simulated tutorials per swept value.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
    /// Chart display time t_c when sweeping density, seconds.
    #[arg(long, default_value_t = 1.0)]
    pub t_c: f64,
    /// Density D_r when sweeping duration.
    #[arg(long, default_value_t = 0.5)]
    pub d_r: f64,
    /// Tutorial animation length t_t, seconds.
    #[arg(long, default_value_t = 3.0)]
    pub t_t: f64,
    /// Font size f_s, pixels.
    #[arg(long, default_value_t = 20.0)]
    pub f_s: f64,
    /// Probability that a misread produces text matching no triplet.
    #[arg(long, default_value_t = 0.5)]
    pub p_garbage: f64,
    /// Standard deviation of perceived-position noise, pixels.
    #[arg(long, default_value_t = 15.0)]
    pub noise: f64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Sample file: `# width=W height=H`, then `frame_time_ms,x,y` rows.
    pub samples: PathBuf,
    /// Density grid JSON output; standard output when neither output is given.
    #[arg(long)]
    pub density_out: Option<PathBuf>,
    /// PGM heatmap output.
    #[arg(long)]
    pub heatmap_out: Option<PathBuf>,
    /// Evaluate the density on blocks of k×k pixels.
    #[arg(long, default_value_t = 1)]
    pub downsample: u32,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    /// Density grid JSON file.
    pub density: PathBuf,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Our sample file.
    pub ours: PathBuf,
    /// Reference sample file, e.g. from an eye tracker.
    pub reference: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub downsample: u32,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// Gaze locations wanted per frame.
    #[arg(long, default_value_t = 50)]
    pub locations: u64,
    /// Pay per completed session, as a decimal amount.
    #[arg(long, default_value = "0.15")]
    pub pay: String,
    /// Frames shown per session.
    #[arg(long, default_value_t = 6)]
    pub batch: u64,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    /// Clip length t_v, seconds.
    #[arg(long, default_value_t = 10.0)]
    pub t_v: f64,
    /// Chart display time t_c, seconds.
    #[arg(long, default_value_t = 1.0)]
    pub t_c: f64,
    /// Tutorial animation length t_t, seconds.
    #[arg(long, default_value_t = 3.0)]
    pub t_t: f64,
    /// Font size f_s, pixels.
    #[arg(long, default_value_t = 20.0)]
    pub f_s: f64,
    /// Relative triplet density D_r.
    #[arg(long, default_value_t = 0.5)]
    pub d_r: f64,
    /// Approval radius R_a, pixels.
    #[arg(long, default_value_t = 100.0)]
    pub r_a: f64,
}

fn write_output(path: Option<&Path>, bytes: &[u8], stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => stdout
            .write_all(bytes)
            .map_err(|e| CliError::Data(format!("standard output: {e}"))),
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn read_samples(path: &Path) -> Result<SampleSet<f64>, CliError> {
    let ingested = analysis::read_samples::<f64, _>(read_input(path)?.as_slice())?;
    if ingested.samples.is_empty() {
        return Err(CliError::Data(format!("{}: no samples inside the frame", path.display())));
    }
    Ok(ingested.samples)
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// Parses a plain decimal such as `0.15` exactly.
pub fn parse_money(text: &str) -> Option<Money> {
    let text = text.trim();
    let (whole, frac) = text.split_once('.').unwrap_or((text, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    let digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if !digits(whole) || !digits(frac) || frac.len() > 12 {
        return None;
    }
    let scale = 10i64.checked_pow(frac.len() as u32)?;
    let whole: i64 = if whole.is_empty() { 0 } else { whole.parse().ok()? };
    let frac: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    Some(Money::new(whole.checked_mul(scale)?.checked_add(frac)?, scale))
}

/// Two decimals when the amount is a whole number of cents, otherwise up to six.
pub fn format_money(amount: Money) -> String {
    let cents = amount * Money::from_integer(100);
    if cents.is_integer() {
        let c = cents.to_integer();
        format!("{}.{:02}", c / 100, c % 100)
    } else {
        format!("{:.6}", amount.to_f64().unwrap_or(f64::NAN))
    }
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Chart(a) => {
            let params = ChartParams {
                frame_width: a.width,
                frame_height: a.height,
                font_size: a.font_size,
                relative_density: a.density,
                jitter_fraction: a.jitter,
                seed: a.seed,
            };
            let chart = generate_chart(&params).map_err(|e| CliError::Usage(e.to_string()))?;
            write_output(a.out.as_deref(), &json_bytes(&chart)?, stdout)
        }
        Command::Sweep(a) => {
            let axis = match a.axis {
                AxisArg::Density => SweepAxis::Density,
                AxisArg::Duration => SweepAxis::Duration,
            };
            let (lo, hi) = axis.range();
            let values = stepped_range(a.from.unwrap_or(lo), a.to.unwrap_or(hi), a.step);
            let radii = stepped_range(a.ra_from, a.ra_to, a.ra_step);
            let config = SweepConfig {
                axis,
                values,
                approval_radii: radii,
                trials_per_point: a.trials,
                chart: ChartParams {
                    font_size: a.f_s,
                    relative_density: a.d_r,
                    ..ChartParams::default()
                },
                chart_duration: a.t_c,
                seed: a.seed,
            };
            let frame = FrameSize::new(config.chart.frame_width, config.chart.frame_height);
            let model = ParticipantModel {
                p_garbage: a.p_garbage,
                report_noise_sigma: a.noise,
                ..ParticipantModel::with_gaze(GazeMixture::two_blobs(frame), a.seed)
            };
            let path = ExperimentParams {
                t_t: a.t_t,
                f_s: a.f_s,
                ..ExperimentParams::default()
            }
            .path_params();
            let result = run_tutorial_sweep(&config, &model, &path, frame).map_err(|e| CliError::Usage(e.to_string()))?;
            write_output(a.out.as_deref(), result.to_csv().as_bytes(), stdout)
        }
        Command::Aggregate(a) => {
            if a.downsample == 0 {
                return Err(CliError::Usage("--downsample must be at least 1".into()));
            }
            let samples = read_samples(&a.samples)?;
            let bw = analysis::estimate_bandwidth(&samples)?;
            let grid = analysis::kde_downsampled(&samples, &bw, a.downsample)?;
            if a.density_out.is_none() && a.heatmap_out.is_none() {
                return write_output(None, &json_bytes(&grid)?, stdout);
            }
            if let Some(p) = &a.density_out {
                write_output(Some(p), &json_bytes(&grid)?, stdout)?;
            }
            if let Some(p) = &a.heatmap_out {
                write_output(Some(p), &analysis::render_heatmap(&grid).to_pgm(), stdout)?;
            }
            Ok(())
        }
        Command::Heatmap(a) => {
            let grid = analysis::read_density_json(read_input(&a.density)?.as_slice())?;
            write_output(a.out.as_deref(), &analysis::render_heatmap(&grid).to_pgm(), stdout)
        }
        Command::Compare(a) => {
            if a.downsample == 0 {
                return Err(CliError::Usage("--downsample must be at least 1".into()));
            }
            let ours = read_samples(&a.ours)?;
            let reference = read_samples(&a.reference)?;
            let report = analysis::compare(&ours, &reference, a.downsample)?;
            write_output(None, &json_bytes(&report)?, stdout)
        }
        Command::Cost(a) => {
            let pay = parse_money(&a.pay).ok_or_else(|| CliError::Usage(format!("--pay {:?} is not a decimal amount", a.pay)))?;
            if a.batch == 0 {
                return Err(CliError::Usage("--batch must be at least 1".into()));
            }
            let total = estimate_cost(a.locations, pay, a.batch);
            write_output(None, format!("{}\n", format_money(total)).as_bytes(), stdout)
        }
        Command::Params(a) => {
            let params = ExperimentParams {
                t_v: a.t_v,
                t_c: a.t_c,
                t_t: a.t_t,
                f_s: a.f_s,
                r_a: a.r_a,
                d_r: a.d_r,
                ..ExperimentParams::default()
            };
            if let Some((field, reason)) = params.problems().first() {
                return Err(CliError::Usage(format!("{field}: {reason}")));
            }
            write_output(None, &json_bytes(&params)?, stdout)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn money_parsing() {
        assert_eq!(parse_money("0.15"), Some(Money::new(3, 20)));
        assert_eq!(parse_money("2"), Some(Money::from_integer(2)));
        assert_eq!(parse_money(".5"), Some(Money::new(1, 2)));
        assert_eq!(parse_money("1.2.3"), None);
        assert_eq!(parse_money("-1"), None);
        assert_eq!(parse_money(""), None);
    }

    #[test]
    fn money_formatting() {
        assert_eq!(format_money(Money::new(5, 2)), "2.50");
        assert_eq!(format_money(Money::new(1, 3)), "0.333333");
        assert_eq!(format_money(Money::from_integer(12)), "12.00");
    }
}
