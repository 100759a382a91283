use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use ventral::contrast::accumulate_image;
use ventral::evaluation::{divergence_error, of_to_divergence, parse_flow_field_csv, Estimate};
use ventral::events::{
    batch_stream, parse_event_file, parse_ground_truth_csv, remove_hot_pixels, rescale_events,
    subsample_events, write_event_file, write_ground_truth_csv, EventFormat, SensorGeometry,
};
use ventral::simulator::{generate_landing_events, SimConfig};
use ventral::solver::{estimate_stream_divergence, SolverParams};
use ventral::Error;

#[derive(Debug, Parser)]
#[command(name = "ventral", version, about = "Divergence estimation from event streams during ventral landing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate per-batch divergence from an event file.
    Estimate(EstimateArgs),
    /// Generate a synthetic landing event stream and its ground truth.
    Simulate(SimulateArgs),
    /// Score divergence estimates against ground truth.
    Evaluate(EvaluateArgs),
    /// Convert an optic-flow field to a divergence value.
    Of2div(Of2divArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<EventFormat>,
    #[arg(long, default_value_t = 0.5, value_parser = positive_f64)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.025, value_parser = positive_f64)]
    pub gamma: f64,
    #[arg(long, default_value_t = ventral::geometry::DEFAULT_EPSILON, value_parser = unit_interval_f64)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iterations: usize,
    #[arg(long)]
    pub output: PathBuf,
    /// Rescale event coordinates to WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_resolution)]
    pub resize: Option<SensorGeometry>,
    /// Keep each event with this probability.
    #[arg(long, value_parser = keep_fraction)]
    pub sample: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Remove hot pixels whose count exceeds median + K * MAD.
    #[arg(long, value_name = "K", value_parser = positive_f64)]
    pub hot_pixels: Option<f64>,
    /// Write 0 in the runtime column so output depends only on the inputs.
    #[arg(long)]
    pub no_timing: bool,
    /// Write the motion-compensated image of every solved batch as PGM here.
    #[arg(long)]
    pub dump_images: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Vertical velocity (<= 0).
    #[arg(long, allow_hyphen_values = true, value_parser = non_positive_f64)]
    pub nu: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub z0: f64,
    #[arg(long, value_parser = positive_f64)]
    pub duration: f64,
    #[arg(long, default_value_t = 160)]
    pub width: u32,
    #[arg(long, default_value_t = 90)]
    pub height: u32,
    /// Focal length in pixels; defaults to the larger sensor dimension.
    #[arg(long, value_parser = positive_f64)]
    pub focal_length: Option<f64>,
    #[arg(long, default_value_t = 600)]
    pub points: usize,
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    pub spacing: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_px: f64,
    /// Clutter events as a fraction of trajectory events.
    #[arg(long, default_value_t = 0.0)]
    pub clutter: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Event file to write.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_parser = parse_format)]
    pub format: Option<EventFormat>,
    /// Ground-truth divergence CSV to write.
    #[arg(long)]
    pub ground_truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub estimates: PathBuf,
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Also write per-batch errors as CSV.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Of2divArgs {
    /// Flow CSV: `# foe=<fx>,<fy> tau=<t>` header then `px,py,vx,vy` rows.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug)]
pub enum CommandError {
    /// Bad flags or unreadable inputs (exit code 2).
    Usage(String),
    /// Failure while processing valid inputs (exit code 1).
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CommandError {
    fn from(err: anyhow::Error) -> Self {
        CommandError::Runtime(err)
    }
}

fn usage(err: impl std::fmt::Display) -> CommandError {
    CommandError::Usage(err.to_string())
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got `{s}`")),
    }
}

fn non_positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v <= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a number <= 0 (descent), got `{s}`")),
    }
}

fn unit_interval_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..1.0).contains(&v) => Ok(v),
        _ => Err(format!("expected a number in [0, 1), got `{s}`")),
    }
}

fn keep_fraction(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v <= 1.0 => Ok(v),
        _ => Err(format!("expected a fraction in (0, 1], got `{s}`")),
    }
}

fn parse_format(s: &str) -> Result<EventFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_resolution(s: &str) -> Result<SensorGeometry, String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
    let w = w.parse().map_err(|_| format!("bad width in `{s}`"))?;
    let h = h.parse().map_err(|_| format!("bad height in `{s}`"))?;
    SensorGeometry::new(w, h).map_err(|e| e.to_string())
}

fn read_input(path: &Path) -> Result<Vec<u8>, CommandError> {
    fs::read(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CommandError> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Estimate(args) => estimate(args),
        Command::Simulate(args) => simulate(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Of2div(args) => of2div(args),
    }
}

fn estimate(args: EstimateArgs) -> Result<(), CommandError> {
    let bytes = read_input(&args.input)?;
    let format = args.format.unwrap_or_else(|| EventFormat::from_path(&args.input));
    let mut stream = parse_event_file(&bytes, format)
        .with_context(|| format!("reading {}", args.input.display()))?;
    info!("read {} events from {}", stream.len(), args.input.display());

    if let Some(k) = args.hot_pixels {
        stream = remove_hot_pixels(&stream, k).map_err(anyhow::Error::from)?;
    }
    if let Some(target) = args.resize {
        stream = rescale_events(&stream, target);
    }
    if let Some(fraction) = args.sample {
        stream = subsample_events(&stream, fraction, args.seed).map_err(anyhow::Error::from)?;
    }

    let params = SolverParams {
        gamma: args.gamma,
        tau: args.tau,
        epsilon: args.epsilon,
        max_iterations: args.max_iterations,
    };
    params.validate().map_err(usage)?;

    let batches = batch_stream(&stream, args.tau).map_err(anyhow::Error::from)?;
    let estimates = estimate_stream_divergence(&batches, &params);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "# tau={} gamma={} epsilon={} width={} height={}",
        args.tau,
        args.gamma,
        args.epsilon,
        stream.geometry().width(),
        stream.geometry().height()
    );
    out.push_str("# t_s,divergence,contrast,bound_gap,iterations,runtime_s\n");
    let mut failures = 0usize;
    for est in &estimates {
        match &est.outcome {
            Ok(s) => {
                if !s.certified {
                    warn!("batch ending at {} stopped on the interval-width floor (gap {})", s.t, s.bound_gap);
                }
                let runtime = if args.no_timing { 0.0 } else { s.runtime_s };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    s.t, s.divergence, s.contrast, s.bound_gap, s.iterations, runtime
                );
            }
            Err(e) => {
                failures += 1;
                warn!("batch ending at {} failed: {e}", est.t);
                let _ = writeln!(out, "# batch ending at {} failed: {e}", est.t);
            }
        }
    }
    write_output(&args.output, out)?;

    if let Some(dir) = &args.dump_images {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        // estimates are in time order with empty batches skipped
        let solved = batches.iter().filter(|b| !b.is_empty()).zip(&estimates);
        for (batch, est) in solved {
            let Ok(sample) = &est.outcome else { continue };
            let image = accumulate_image(batch, sample.nu).map_err(anyhow::Error::from)?;
            let path = dir.join(format!("batch_{:.3}.pgm", sample.t));
            write_output(&path, image.to_pgm())?;
        }
    }

    if failures == estimates.len() && !estimates.is_empty() {
        return Err(CommandError::Runtime(anyhow!("every batch failed to solve")));
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), CommandError> {
    let geometry = SensorGeometry::new(args.width, args.height).map_err(usage)?;
    let mut config = SimConfig::new(geometry, args.z0, args.nu, args.duration);
    if let Some(f) = args.focal_length {
        config.focal_length = f;
    }
    config.n_points = args.points;
    config.event_spacing_px = args.spacing;
    config.noise_px = args.noise_px;
    config.noise_event_fraction = args.clutter;
    config.seed = args.seed;
    config.validate().map_err(usage)?;

    let (stream, truth) = generate_landing_events(&config).map_err(anyhow::Error::from)?;
    let format = args.format.unwrap_or_else(|| EventFormat::from_path(&args.output));
    write_output(&args.output, write_event_file(&stream, format))?;
    write_output(&args.ground_truth, write_ground_truth_csv(&truth.samples))?;
    info!("wrote {} events to {}", stream.len(), args.output.display());
    Ok(())
}

/// Reads estimator output (or any `t,divergence[,...]` CSV). The sixth
/// column, when present, is taken as the solve time.
fn read_estimates(text: &str) -> anyhow::Result<Vec<Estimate>> {
    let pairs = parse_ground_truth_csv(text)?;
    let runtimes = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split(',').nth(5).and_then(|v| v.trim().parse::<f64>().ok()));
    Ok(pairs
        .into_iter()
        .zip(runtimes)
        .map(|((t, divergence), runtime_s)| Estimate { t, divergence, runtime_s })
        .collect())
}

fn evaluate(args: EvaluateArgs) -> Result<(), CommandError> {
    let est_text = String::from_utf8(read_input(&args.estimates)?)
        .map_err(|_| usage(format!("{} is not UTF-8", args.estimates.display())))?;
    let gt_text = String::from_utf8(read_input(&args.ground_truth)?)
        .map_err(|_| usage(format!("{} is not UTF-8", args.ground_truth.display())))?;
    let estimates = read_estimates(&est_text)
        .with_context(|| format!("reading {}", args.estimates.display()))?;
    let truth = parse_ground_truth_csv(&gt_text)
        .with_context(|| format!("reading {}", args.ground_truth.display()))?;
    let report = divergence_error(&estimates, &truth).map_err(anyhow::Error::from)?;

    println!("batches scored: {}", report.per_batch_errors.len());
    println!("excluded (zero ground truth): {}", report.excluded);
    println!("mean absolute error: {:.4} %", report.mean_abs_error_pct);
    match report.mean_runtime_s {
        Some(rt) => println!("mean runtime per batch: {rt:.4} s"),
        None => println!("mean runtime per batch: n/a"),
    }

    if let Some(path) = &args.output {
        let mut out = String::new();
        let _ = writeln!(out, "# mean_abs_error_pct={}", report.mean_abs_error_pct);
        if let Some(rt) = report.mean_runtime_s {
            let _ = writeln!(out, "# mean_runtime_s={rt}");
        }
        out.push_str("# t_s,error_pct\n");
        for (t, e) in &report.per_batch_errors {
            let _ = writeln!(out, "{t},{e}");
        }
        write_output(path, out)?;
    }
    Ok(())
}

fn of2div(args: Of2divArgs) -> Result<(), CommandError> {
    let text = String::from_utf8(read_input(&args.input)?)
        .map_err(|_| usage(format!("{} is not UTF-8", args.input.display())))?;
    let field = parse_flow_field_csv(&text).with_context(|| format!("reading {}", args.input.display()))?;
    let divergence = of_to_divergence(&field).map_err(anyhow::Error::from)?;
    println!("{divergence}");
    Ok(())
}
