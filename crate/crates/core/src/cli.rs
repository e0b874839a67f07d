//! Command-line front end: `analyze`, `synth` and `compare`.
//!
//! Exit codes are part of the interface:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | GOOD (or success for `synth` / `compare`) |
//! | 1 | input error: unreadable or malformed campaign, bad usage of `compare` |
//! | 2 | invalid flags or model parameters |
//! | 3 | BAD: PDR is not at the onset of saturation |
//! | 4 | NO_SATURATION: the sweep never crossed the PDR threshold |

use std::ffi::OsString;
use std::fs;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::curve::{
    sample_campaign, LoadLossModel, PiecewiseThroughput, PreSatRamp, SyntheticModel,
};
use crate::error::{Error, Result};
use crate::ingest::{read_campaign_with, write_campaign, ExperimentMetadata, LoadLossCurve};
use crate::metrics::DEFAULT_TX_TOLERANCE;
use crate::report::{
    emit_report, render_loss_plot, PlotOptions, ReportBundle, ReportFormat, LOSS_SVG, REPORT_JSON,
    REPORT_MD,
};
use crate::saturation::{Classification, DEFAULT_ETA, DEFAULT_PDR_THRESHOLD};

pub const EXIT_GOOD: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BAD: i32 = 3;
pub const EXIT_NO_SATURATION: i32 = 4;

/// Set to any value to disable ANSI colors.
pub const NO_COLOR_ENV: &str = "PASTRAMI_NO_COLOR";

const MPPS: f64 = 1e6;

#[derive(Debug, Parser)]
#[command(
    name = "pdrcheck",
    version,
    about = "Analyze software-router load sweeps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze campaign directories and write reports.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic campaign directory.
    Synth(SynthArgs),
    /// Print PDR, classification and max Δ_UCL95 side by side.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ThresholdArgs {
    /// Loss ratio defining PDR (0.005 is PDR@0.5%).
    #[arg(long, default_value_t = DEFAULT_PDR_THRESHOLD)]
    pub pdr_threshold: f64,
    /// TIR below which the sweep counts as saturated.
    #[arg(long, default_value_t = DEFAULT_ETA)]
    pub eta: f64,
    /// Allowed relative gap between transmitted count and load·duration.
    #[arg(long, default_value_t = DEFAULT_TX_TOLERANCE)]
    pub tx_tolerance: f64,
    /// Number of campaigns analyzed concurrently.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum)]
pub enum OutputFormat {
    Json,
    #[value(alias = "markdown")]
    Md,
    Svg,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Campaign directories (metadata.json + runs.csv).
    #[arg(required = true)]
    pub campaigns: Vec<PathBuf>,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    /// Output directory. Defaults to each campaign's own directory; with
    /// several campaigns, reports go to <out>/<campaign name>/.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report files to write.
    #[arg(long, value_delimiter = ',', default_value = "json,md,svg")]
    pub format: Vec<OutputFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthMode {
    Ideal,
    Realistic,
    /// Throughput interpolated between --knots.
    Piecewise,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = SynthMode::Ideal)]
    pub mode: SynthMode,
    /// Saturation offered load, Mpps (ideal and realistic).
    #[arg(long, default_value_t = 1.0)]
    pub o_sat: f64,
    /// Loss ratio at the saturation load (realistic).
    #[arg(long, default_value_t = 0.01)]
    pub plr_at_sat: f64,
    /// Load where throughput starts to decline, Mpps (realistic). Default 1.5·o_sat.
    #[arg(long)]
    pub o_trash: Option<f64>,
    /// Load span over which throughput declines to 0 past o_trash, Mpps (realistic). Default o_sat.
    #[arg(long)]
    pub m: Option<f64>,
    /// Loss ratio where the pre-saturation ramp starts (realistic).
    #[arg(long, default_value_t = 1e-6)]
    pub plr_floor: f64,
    /// Load where the pre-saturation ramp starts, Mpps (realistic). Default 0.5·o_sat.
    #[arg(long)]
    pub o_floor: Option<f64>,
    /// Lossless up to o_sat (realistic).
    #[arg(long)]
    pub no_ramp: bool,
    /// load:throughput pairs in Mpps, comma separated (piecewise).
    #[arg(long)]
    pub knots: Option<String>,
    /// Offered loads as start:stop:step in Mpps, stop inclusive.
    #[arg(long)]
    pub loads: String,
    /// Runs per load level.
    #[arg(long, default_value_t = 50)]
    pub runs: usize,
    /// Run duration, seconds.
    #[arg(long, default_value_t = 10.0)]
    pub duration: f64,
    #[arg(long)]
    pub seed: u64,
    /// Campaign directory to create.
    #[arg(long)]
    pub out: PathBuf,
    /// Date recorded in metadata.json.
    #[arg(long, default_value = "1970-01-01")]
    pub date: String,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub campaigns: Vec<PathBuf>,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
}

/// Resolved analysis settings.
#[derive(Debug, Clone)]
pub struct CliConfig {
    pub pdr_threshold: f64,
    pub eta: f64,
    pub tx_tolerance: f64,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub formats: Vec<OutputFormat>,
    pub parallel: usize,
    pub color: bool,
    pub generated_at: String,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            pdr_threshold: DEFAULT_PDR_THRESHOLD,
            eta: DEFAULT_ETA,
            tx_tolerance: DEFAULT_TX_TOLERANCE,
            output_dir: None,
            seed: None,
            formats: vec![OutputFormat::Json, OutputFormat::Md, OutputFormat::Svg],
            parallel: 1,
            color: false,
            generated_at: timestamp(),
        }
    }
}

impl CliConfig {
    fn from_thresholds(t: &ThresholdArgs) -> Self {
        CliConfig {
            pdr_threshold: t.pdr_threshold,
            eta: t.eta,
            tx_tolerance: t.tx_tolerance,
            parallel: t.parallel.max(1),
            color: color_enabled(),
            ..CliConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("--pdr-threshold", self.pdr_threshold),
            ("--eta", self.eta),
            ("--tx-tolerance", self.tx_tolerance),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Report timestamp; honors `SOURCE_DATE_EPOCH` for reproducible output.
fn timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|s| chrono::DateTime::from_timestamp(s, 0));
    fixed
        .unwrap_or_else(chrono::Utc::now)
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn color_enabled() -> bool {
    std::env::var_os(NO_COLOR_ENV).is_none() && std::io::stdout().is_terminal()
}

fn paint(c: Classification, color: bool) -> String {
    let label = c.to_string();
    if !color {
        return label;
    }
    let code = match c {
        Classification::Good => "32",
        Classification::Bad => "31",
        Classification::NoSaturation => "33",
    };
    format!("\x1b[1;{code}m{label}\x1b[0m")
}

/// Parse arguments and run. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match cli.command {
        Command::Analyze(a) => {
            let mut config = CliConfig::from_thresholds(&a.thresholds);
            config.output_dir = a.out;
            config.formats = a.format;
            cmd_analyze(&a.campaigns, &config, out, err)
        }
        Command::Synth(s) => cmd_synth(&s, out, err),
        Command::Compare(c) => {
            let config = CliConfig::from_thresholds(&c.thresholds);
            cmd_compare(&c.campaigns, &config, out, err)
        }
    }
}

fn campaign_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Run `f` over `items` on up to `workers` threads, keeping input order.
fn map_parallel<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.min(items.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every slot is filled"))
        .collect()
}

/// Validation and I/O errors already name their file.
fn describe(path: &Path, e: &Error) -> String {
    match e {
        Error::Validation { .. } | Error::Io { .. } => e.to_string(),
        _ => format!("{}: {e}", path.display()),
    }
}

fn load_and_analyze(path: &Path, config: &CliConfig) -> Result<(LoadLossCurve, ReportBundle)> {
    let curve = read_campaign_with(path, config.tx_tolerance)?;
    let bundle = ReportBundle::analyze(
        &curve,
        campaign_name(path),
        config.pdr_threshold,
        config.eta,
        config.generated_at.clone(),
    )?;
    Ok((curve, bundle))
}

fn write_reports(
    out_dir: &Path,
    bundle: &mut ReportBundle,
    formats: &[OutputFormat],
) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let write = |name: &str, body: &str| {
        let p = out_dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };
    if formats.contains(&OutputFormat::Svg) {
        let opts = PlotOptions {
            title: bundle.campaign.clone(),
            ..PlotOptions::default()
        };
        let svg = render_loss_plot(&bundle.stats, &bundle.verdict, &opts)?;
        write(LOSS_SVG, &svg)?;
        bundle.plot_artifacts = vec![LOSS_SVG.to_string()];
    }
    if formats.contains(&OutputFormat::Json) {
        write(REPORT_JSON, &emit_report(bundle, ReportFormat::Json)?)?;
    }
    if formats.contains(&OutputFormat::Md) {
        write(REPORT_MD, &emit_report(bundle, ReportFormat::Markdown)?)?;
    }
    Ok(())
}

fn exit_for(c: Classification) -> i32 {
    match c {
        Classification::Good => EXIT_GOOD,
        Classification::Bad => EXIT_BAD,
        Classification::NoSaturation => EXIT_NO_SATURATION,
    }
}

fn severity(code: i32) -> u8 {
    match code {
        EXIT_INPUT => 3,
        EXIT_BAD => 2,
        EXIT_NO_SATURATION => 1,
        _ => 0,
    }
}

/// Analyze each campaign and write its reports. With several campaigns
/// the exit code is the most severe one (input error, then BAD, then
/// NO_SATURATION).
pub fn cmd_analyze(
    campaigns: &[PathBuf],
    config: &CliConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    if let Err(e) = config.validate() {
        let _ = writeln!(err, "error: {e}");
        return EXIT_USAGE;
    }
    if campaigns.is_empty() {
        let _ = writeln!(err, "error: no campaign given");
        return EXIT_INPUT;
    }
    let multi = campaigns.len() > 1;
    let results = map_parallel(campaigns, config.parallel, |path| -> Result<ReportBundle> {
        let (_, mut bundle) = load_and_analyze(path, config)?;
        let dir = match (&config.output_dir, multi) {
            (Some(o), true) => o.join(campaign_name(path)),
            (Some(o), false) => o.clone(),
            (None, _) => path.clone(),
        };
        write_reports(&dir, &mut bundle, &config.formats)?;
        Ok(bundle)
    });

    let mut code = EXIT_GOOD;
    for (path, r) in campaigns.iter().zip(results) {
        let c = match r {
            Ok(b) => {
                let v = &b.verdict;
                let pdr = match v.pdr_load_pps {
                    Some(l) if v.sweep_exhausted => {
                        format!("{:.4} Mpps (sweep exhausted)", l / MPPS)
                    }
                    Some(l) => format!("{:.4} Mpps", l / MPPS),
                    None => "absent".into(),
                };
                let _ = writeln!(
                    out,
                    "{}: {}  PDR@{}% = {}",
                    b.campaign,
                    paint(v.classification, config.color),
                    v.pdr_threshold * 100.0,
                    pdr
                );
                if !b.accuracy.accurate {
                    let _ = writeln!(out, "  {}", b.accuracy.reason);
                }
                for w in &b.warnings {
                    let _ = writeln!(err, "warning: {}: {w}", b.campaign);
                }
                exit_for(v.classification)
            }
            Err(e) => {
                let _ = writeln!(err, "error: {}", describe(path, &e));
                EXIT_INPUT
            }
        };
        if severity(c) > severity(code) {
            code = c;
        }
    }
    code
}

/// Parse `start:stop:step` (Mpps, stop inclusive) into integer pps loads.
pub fn parse_loads(spec: &str) -> Result<Vec<u64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err(Error::invalid(format!(
            "loads must be start:stop:step in Mpps, got {spec:?}"
        )));
    };
    let num = |s: &str| -> Result<u64> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("{s:?} is not a number")))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(format!("load values must be > 0, got {s}")));
        }
        Ok((v * MPPS).round() as u64)
    };
    let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
    if step == 0 || start == 0 {
        return Err(Error::invalid("start and step must be at least 1 pps"));
    }
    if stop < start {
        return Err(Error::invalid("stop must be ≥ start"));
    }
    Ok((0..)
        .map(|i| start + i * step)
        .take_while(|&l| l <= stop)
        .collect())
}

fn parse_knots(spec: &str) -> Result<Vec<(f64, f64)>> {
    spec.split(',')
        .map(|pair| {
            let (o, t) = pair
                .split_once(':')
                .ok_or_else(|| Error::invalid(format!("knot {pair:?} must be load:throughput")))?;
            let p = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map(|v| v * MPPS)
                    .map_err(|_| Error::invalid(format!("{s:?} is not a number")))
            };
            Ok((p(o)?, p(t)?))
        })
        .collect()
}

fn build_model(args: &SynthArgs) -> Result<(Box<dyn LoadLossModel + Send + Sync>, String)> {
    let o_sat = args.o_sat * MPPS;
    match args.mode {
        SynthMode::Ideal => {
            let m = SyntheticModel::ideal(o_sat)?;
            let desc = format!("synthetic ideal model: o_sat={o_sat} pps");
            Ok((Box::new(m), desc))
        }
        SynthMode::Realistic => {
            let o_trash = args.o_trash.map_or(1.5 * o_sat, |v| v * MPPS);
            let m = args.m.map_or(o_sat, |v| v * MPPS);
            let ramp = (!args.no_ramp).then(|| PreSatRamp {
                plr_floor: args.plr_floor,
                o_floor: args.o_floor.map_or(0.5 * o_sat, |v| v * MPPS),
            });
            let model = SyntheticModel::realistic(o_sat, args.plr_at_sat, o_trash, m, ramp)?;
            let ramp_desc = match ramp {
                Some(r) => format!("plr_floor={} o_floor={} pps", r.plr_floor, r.o_floor),
                None => "no ramp".into(),
            };
            let desc = format!(
                "synthetic realistic model: o_sat={o_sat} pps plr_at_sat={} o_trash={o_trash} pps m={m} pps {ramp_desc}",
                args.plr_at_sat
            );
            Ok((Box::new(model), desc))
        }
        SynthMode::Piecewise => {
            let spec = args
                .knots
                .as_deref()
                .ok_or_else(|| Error::invalid("--mode piecewise needs --knots"))?;
            let model = PiecewiseThroughput::new(parse_knots(spec)?)?;
            Ok((
                Box::new(model),
                format!("synthetic piecewise model: knots (Mpps)={spec}"),
            ))
        }
    }
}

/// Generate a synthetic campaign directory.
pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let prepared = (|| -> Result<_> {
        let (model, desc) = build_model(args)?;
        let loads = parse_loads(&args.loads)?;
        if args.runs == 0 {
            return Err(Error::invalid("--runs must be ≥ 1"));
        }
        let runs = sample_campaign(model.as_ref(), &loads, args.duration, args.runs, args.seed)?;
        let mut meta = ExperimentMetadata::synthetic(args.runs, args.duration);
        meta.date = args.date.clone();
        meta.notes.push(format!("{desc}; seed={}", args.seed));
        LoadLossCurve::from_runs(meta, runs, DEFAULT_TX_TOLERANCE)
    })();
    let curve = match prepared {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Err(e) = write_campaign(&curve, &args.out) {
        let _ = writeln!(err, "error: {e}");
        return EXIT_INPUT;
    }
    let _ = writeln!(
        out,
        "wrote {} levels × {} runs to {}",
        curve.levels().len(),
        args.runs,
        args.out.display()
    );
    EXIT_GOOD
}

/// Tabulate several campaigns. Does not write any files.
pub fn cmd_compare(
    campaigns: &[PathBuf],
    config: &CliConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    if campaigns.len() < 2 {
        let _ = writeln!(
            err,
            "usage: pdrcheck compare <CAMPAIGN> <CAMPAIGN>...  (at least two campaigns)"
        );
        return EXIT_INPUT;
    }
    if let Err(e) = config.validate() {
        let _ = writeln!(err, "error: {e}");
        return EXIT_USAGE;
    }
    let results = map_parallel(campaigns, config.parallel, |p| load_and_analyze(p, config));
    let mut bundles = Vec::with_capacity(results.len());
    let mut failed = false;
    for (path, r) in campaigns.iter().zip(results) {
        match r {
            Ok((_, b)) => bundles.push(b),
            Err(e) => {
                failed = true;
                let _ = writeln!(err, "error: {}", describe(path, &e));
            }
        }
    }
    if failed {
        return EXIT_INPUT;
    }

    let width = bundles
        .iter()
        .map(|b| b.campaign.chars().count())
        .max()
        .unwrap_or(0)
        .max("campaign".len());
    let _ = writeln!(
        out,
        "{:<width$}  {:>12}  {:<13}  {:>11}  note",
        "campaign", "PDR [Mpps]", "class", "max Δ_UCL95"
    );
    for b in &bundles {
        let v = &b.verdict;
        let pdr = v
            .pdr_load_pps
            .map_or("absent".to_string(), |l| format!("{:.4}", l / MPPS));
        let delta = b
            .max_delta_ucl95()
            .map_or("n/a".to_string(), |d| format!("{d:.4}"));
        let note = match v.classification {
            Classification::Good => String::new(),
            Classification::Bad => {
                "(!) PDR unreliable: no sustained saturation past the PDR point".into()
            }
            Classification::NoSaturation => "(!) PDR threshold never crossed".into(),
        };
        // pad before painting so ANSI codes do not skew the columns
        let class = format!("{:<13}", v.classification.to_string());
        let class = if config.color {
            class.replace(
                &v.classification.to_string(),
                &paint(v.classification, true),
            )
        } else {
            class
        };
        let _ = writeln!(
            out,
            "{:<width$}  {:>12}  {}  {:>11}  {}",
            b.campaign, pdr, class, delta, note
        );
    }
    EXIT_GOOD
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_spec() {
        assert_eq!(
            parse_loads("0.1:0.5:0.1").unwrap(),
            vec![100_000, 200_000, 300_000, 400_000, 500_000]
        );
        assert_eq!(parse_loads("1:1:0.5").unwrap(), vec![1_000_000]);
        assert_eq!(parse_loads("0.05:0.2:0.1").unwrap(), vec![50_000, 150_000]);
        assert!(parse_loads("1:0.5:0.1").is_err());
        assert!(parse_loads("1:2").is_err());
        assert!(parse_loads("a:2:1").is_err());
        assert!(parse_loads("1:2:0").is_err());
    }

    #[test]
    fn knots_spec() {
        assert_eq!(
            parse_knots("1:1,2:1.5").unwrap(),
            vec![(1e6, 1e6), (2e6, 1.5e6)]
        );
        assert!(parse_knots("1-1").is_err());
    }

    #[test]
    fn parallel_map_keeps_order() {
        let v: Vec<u32> = (0..50).collect();
        assert_eq!(
            map_parallel(&v, 4, |x| x * 2),
            v.iter().map(|x| x * 2).collect::<Vec<_>>()
        );
    }

    #[test]
    fn config_bounds() {
        let mut c = CliConfig::default();
        assert!(c.validate().is_ok());
        c.eta = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn severity_order() {
        assert!(severity(EXIT_INPUT) > severity(EXIT_BAD));
        assert!(severity(EXIT_BAD) > severity(EXIT_NO_SATURATION));
        assert!(severity(EXIT_NO_SATURATION) > severity(EXIT_GOOD));
    }
}
