//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cpdecode_core::eval::{
    aggregate, run_protocol, score_external, session_accumulative, Grouping, RunOutcome, Summary,
};
use cpdecode_core::signal::{EmsConfig, FeatureOptions};
use cpdecode_core::{
    BandSpec, BayesConfig, LabelMode, LabelSource, ModelKind, ModelSpec, PacketizerConfig, PredictionMode, RunData,
    RunReport,
};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::DataError;
use crate::io::{self, mat, reports, tables, KeyMap, StreamBundle};
use crate::synth::{synth_generate, Drift, SynthConfig};
use crate::{plot, process_run};

pub const DATA_DIR_ENV: &str = "CPDECODE_DATA_DIR";
pub const STREAM_EXT: &str = "cpd";
pub const MANIFEST: &str = "manifest.json";

/// A malformed request, reported with exit code 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser, Serialize)]
#[command(name = "cpdecode", version, about = "Online Bayesian decoding of continuous-pursuit kinematics from EEG")]
pub struct Cli {
    /// Default input directory for `ingest` and `evaluate`.
    #[arg(long, env = DATA_DIR_ENV, global = true)]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Generate synthetic streams with known weights.
    Synth(SynthArgs),
    /// Convert dataset runs (.mat) into stream containers.
    Ingest(IngestArgs),
    /// Decode runs and write per-run reports and a summary.
    Evaluate(EvaluateArgs),
    /// Aggregate existing report files.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PacketArgs {
    /// Acquisition rate in Hz; dataset files supply their own.
    #[arg(long, default_value_t = 1000.0)]
    pub fs_in: f64,
    /// Rate after decimation in Hz.
    #[arg(long, default_value_t = 250.0)]
    pub fs: f64,
    #[arg(long, default_value_t = 0.25)]
    pub window_sec: f64,
    #[arg(long, default_value_t = 0.04)]
    pub step_sec: f64,
}

impl PacketArgs {
    fn config(&self) -> PacketizerConfig {
        PacketizerConfig {
            fs_in: self.fs_in,
            fs: self.fs,
            fp: 1.0 / self.step_sec,
            window_sec: self.window_sec,
            step_sec: self.step_sec,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FeatureArgs {
    /// Comma-separated `name:lo-hi` bands in Hz.
    #[arg(long, default_value = "theta:4-7,alpha:8-13,beta:13-30")]
    pub bands: String,
    /// Label source: velocity, pos_error or auto.
    #[arg(long, default_value = "velocity", value_parser = parse_label_source)]
    pub label_source: LabelSource,
    /// Skip building the CAR + EMS raw-window stream.
    #[arg(long)]
    pub no_raw: bool,
    /// TOML file naming the datasets inside each .mat file.
    #[arg(long)]
    pub keymap: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Forgetting factor λ.
    #[arg(long, default_value_t = 0.98)]
    pub lambda_forget: f64,
    /// Mini-batch size K in packets.
    #[arg(long, default_value_t = 50)]
    pub update_interval: usize,
    #[arg(long, default_value_t = 0.01)]
    pub sigma2_init: f64,
    #[arg(long, default_value_t = 0.05)]
    pub beta_r: f64,
    #[arg(long, default_value_t = 0.001)]
    pub r_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r_max: f64,
    /// Initial prior precision α.
    #[arg(long, default_value_t = 1.0)]
    pub alpha_init: f64,
    /// Disable the empirical-Bayes σ² and α updates.
    #[arg(long)]
    pub no_eb: bool,
    /// Freeze Bayes models after calibration.
    #[arg(long)]
    pub frozen: bool,
    /// Ridge penalty of the AR baseline.
    #[arg(long, default_value_t = 1e-3)]
    pub ridge_lambda: f64,
}

impl ModelArgs {
    fn spec(&self, kind: ModelKind) -> ModelSpec {
        ModelSpec {
            kind,
            bayes: BayesConfig {
                sigma2_init: self.sigma2_init,
                forgetting: self.lambda_forget,
                update_interval: self.update_interval,
                beta_r: self.beta_r,
                r_min: self.r_min,
                r_max: self.r_max,
                alpha_init: self.alpha_init,
                empirical_bayes: !self.no_eb,
            },
            ridge_lambda: self.ridge_lambda,
            adapt: !self.frozen,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed of the true weights, shared by all generated runs; defaults to --seed.
    #[arg(long)]
    pub weight_seed: Option<u64>,
    #[arg(long, default_value_t = 2000)]
    pub n_packets: usize,
    #[arg(long, default_value_t = 20)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub n_relevant: usize,
    /// Label noise SD.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// none, switch:FRACTION or walk:RATE.
    #[arg(long, default_value = "none")]
    pub drift: Drift,
    /// Meaning of the generated labels: velocity, acceleration or pos_error.
    #[arg(long, default_value = "velocity", value_parser = parse_label_mode)]
    pub label_mode: LabelMode,
    #[arg(long, default_value_t = 1)]
    pub sessions: u32,
    /// Runs per session.
    #[arg(long, default_value_t = 1)]
    pub runs: u32,
    /// Also write CSV mirrors of the streams.
    #[arg(long)]
    pub csv: bool,
    #[command(flatten)]
    pub packet: PacketArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IngestArgs {
    /// Run files or directories; defaults to the data directory.
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: bool,
    #[command(flatten)]
    pub packet: PacketArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolArg {
    MidRun,
    Accumulative,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    /// Stream containers, run files or directories; defaults to the data directory.
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated models: bayes_ard, bayes_iso, ar, eegnet.
    #[arg(long, value_delimiter = ',', default_value = "bayes_ard,bayes_iso,ar")]
    pub model: Vec<ModelKind>,
    /// Comma-separated prediction modes: velocity, acceleration.
    #[arg(long, value_delimiter = ',', default_value = "velocity,acceleration")]
    pub mode: Vec<PredictionMode>,
    #[arg(long, value_enum, default_value_t = ProtocolArg::MidRun)]
    pub protocol: ProtocolArg,
    /// Exchange CSV, or a directory of `<run>.<mode>.csv` / `<run>.csv`
    /// files, with external predictions scored as `eegnet`.
    #[arg(long)]
    pub predictions_from: Option<PathBuf>,
    /// Write per-run true and decoded velocity CSVs.
    #[arg(long)]
    pub traces: bool,
    /// Write per-run line plots.
    #[arg(long)]
    pub plot: bool,
    /// Record wall-clock time in reports (makes them non-reproducible).
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub packet: PacketArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub params: ModelArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// A reports.json file or a directory searched recursively.
    pub input: PathBuf,
    /// Output directory; defaults to the input directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_label_source(s: &str) -> Result<LabelSource, String> {
    match s {
        "velocity" => Ok(LabelSource::Velocity),
        "pos_error" => Ok(LabelSource::PosError),
        "auto" => Ok(LabelSource::Auto),
        _ => Err(format!("unknown label source {s:?} (velocity, pos_error, auto)")),
    }
}

fn parse_label_mode(s: &str) -> Result<LabelMode, String> {
    match s {
        "velocity" => Ok(LabelMode::Velocity),
        "acceleration" => Ok(LabelMode::Acceleration),
        "pos_error" => Ok(LabelMode::PosError),
        _ => Err(format!("unknown label mode {s:?} (velocity, acceleration, pos_error)")),
    }
}

/// Parses `theta:4-7,alpha:8-13`.
pub fn parse_bands(s: &str) -> anyhow::Result<Vec<BandSpec>> {
    let bands = s
        .split(',')
        .map(|item| {
            let bad = || usage(format!("band {item:?} is not name:lo-hi"));
            let (name, range) = item.trim().split_once(':').ok_or_else(bad)?;
            let (lo, hi) = range.split_once('-').ok_or_else(bad)?;
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            if name.is_empty() || !(lo >= 0.0 && hi > lo) {
                return Err(bad());
            }
            Ok(BandSpec { name: name.to_string(), lo, hi })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(bands)
}

/// Maps an error chain to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let core_code = |e: &cpdecode_core::Error| {
        if e.is_numerical() {
            3
        } else if matches!(e, cpdecode_core::Error::InvalidConfig(_)) {
            1
        } else {
            2
        }
    };
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<clap::Error>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<cpdecode_core::Error>() {
            return core_code(e);
        }
        if let Some(e) = cause.downcast_ref::<DataError>() {
            return match e {
                DataError::Core(c) => core_code(c),
                _ => 2,
            };
        }
    }
    2
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(cli, a),
        Command::Ingest(a) => cmd_ingest(cli, a),
        Command::Evaluate(a) => cmd_evaluate(cli, a),
        Command::Report(a) => cmd_report(a),
    }
}

#[derive(Serialize)]
struct Versions {
    cpdecode: &'static str,
    cpdecode_core: &'static str,
    stream_container: u32,
    snapshot: u32,
}

#[derive(Serialize)]
struct Manifest<'a, R: Serialize> {
    command: &'a str,
    args: &'a Cli,
    resolved: R,
    seed: Option<u64>,
    versions: Versions,
}

fn write_manifest<R: Serialize>(
    dir: &Path,
    cli: &Cli,
    command: &str,
    seed: Option<u64>,
    resolved: R,
) -> anyhow::Result<()> {
    let m = Manifest {
        command,
        args: cli,
        resolved,
        seed,
        versions: Versions {
            cpdecode: env!("CARGO_PKG_VERSION"),
            cpdecode_core: cpdecode_core::VERSION,
            stream_container: io::CONTAINER_VERSION,
            snapshot: cpdecode_core::snapshot::SNAPSHOT_VERSION,
        },
    };
    let path = dir.join(MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&m)? + "\n").map_err(|e| DataError::io(&path, e))?;
    Ok(())
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    Ok(())
}

fn cmd_synth(cli: &Cli, a: &SynthArgs) -> anyhow::Result<()> {
    if a.sessions == 0 || a.runs == 0 {
        bail!(usage("--sessions and --runs must be at least 1"));
    }
    let packetizer = a.packet.config();
    packetizer.validate()?;
    let base = SynthConfig {
        seed: a.seed,
        weight_seed: Some(a.weight_seed.unwrap_or(a.seed)),
        n_packets: a.n_packets,
        dim: a.dim,
        n_relevant: a.n_relevant,
        noise_std: a.noise,
        drift: a.drift,
        mode: a.label_mode,
        packetizer,
    };
    base.validate().map_err(usage)?;
    create_dir(&a.out)?;
    let mut configs = Vec::new();
    for s in 0..a.sessions {
        for r in 0..a.runs {
            let i = u64::from(s * a.runs + r);
            configs.push((s + 1, r + 1, SynthConfig { seed: a.seed.wrapping_add(i), ..base.clone() }));
        }
    }
    for (session, run, cfg) in &configs {
        let (mut bundle, truth) = synth_generate(cfg).map_err(usage)?;
        bundle.meta.subject = 1;
        bundle.meta.session = *session;
        bundle.meta.run = *run;
        let name = bundle.meta.to_string();
        io::export_streams(&a.out.join(format!("{name}.{STREAM_EXT}")), &bundle)?;
        let gt = a.out.join(format!("{name}.ground_truth.json"));
        fs::write(&gt, serde_json::to_string_pretty(&truth)? + "\n").map_err(|e| DataError::io(&gt, e))?;
        if a.csv {
            write_mirrors(&a.out, &name, &bundle)?;
        }
        println!(
            "{name}: {} packets × {} features, {} relevant, drift {}, seed {}",
            bundle.packets.len(),
            bundle.packets.feature_dim(),
            truth.n_relevant,
            cfg.drift,
            cfg.seed
        );
    }
    let resolved: Vec<&SynthConfig> = configs.iter().map(|(_, _, c)| c).collect();
    write_manifest(&a.out, cli, "synth", Some(a.seed), resolved)
}

fn write_mirrors(dir: &Path, name: &str, bundle: &StreamBundle) -> anyhow::Result<()> {
    tables::write_features(&dir.join(format!("{name}.features.csv")), &bundle.packets)?;
    tables::write_labels(&dir.join(format!("{name}.labels.csv")), &bundle.labels, &bundle.packets.timestamps)?;
    Ok(())
}

#[derive(Serialize)]
struct PipelineResolved {
    packetizer: PacketizerConfig,
    bands: Vec<BandSpec>,
    features: FeatureOptions,
    label_source: LabelSource,
    keymap: KeyMap,
}

fn pipeline(packet: &PacketArgs, f: &FeatureArgs) -> anyhow::Result<PipelineResolved> {
    let packetizer = packet.config();
    packetizer.validate()?;
    let bands = parse_bands(&f.bands)?;
    bands.iter().try_for_each(|b| b.validate(packetizer.fs))?;
    let keymap = match &f.keymap {
        Some(p) => KeyMap::from_toml_file(p)?,
        None => KeyMap::default(),
    };
    Ok(PipelineResolved {
        packetizer,
        bands,
        features: FeatureOptions { raw_windows: !f.no_raw, ems: EmsConfig::default() },
        label_source: f.label_source,
        keymap,
    })
}

fn input_paths(cli: &Cli, inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let roots: Vec<PathBuf> = if inputs.is_empty() {
        match &cli.data_dir {
            Some(d) => vec![d.clone()],
            None => bail!(usage(format!("no inputs given and {DATA_DIR_ENV} is not set"))),
        }
    } else {
        inputs.to_vec()
    };
    let mut out = Vec::new();
    for root in roots {
        if root.is_dir() {
            collect_inputs(&root, &mut out)?;
        } else if root.exists() {
            out.push(root);
        } else {
            return Err(DataError::io(&root, std::io::ErrorKind::NotFound.into()).into());
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn collect_inputs(dir: &Path, out: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| DataError::io(dir, e))? {
        let p = entry.map_err(|e| DataError::io(dir, e))?.path();
        if p.is_dir() {
            collect_inputs(&p, out)?;
        } else if p.extension().is_some_and(|e| e == STREAM_EXT || e == "mat" || e == "h5") {
            out.push(p);
        }
    }
    Ok(())
}

fn load_bundle(path: &Path, p: &PipelineResolved) -> anyhow::Result<StreamBundle> {
    if path.extension().is_some_and(|e| e == STREAM_EXT) {
        return Ok(io::import_streams(path)?);
    }
    let record = mat::load_run(path, &p.keymap)?;
    process_run(&record, &p.packetizer, &p.bands, &p.features, p.label_source)
        .map_err(DataError::from)
        .with_context(|| format!("processing {}", path.display()))
}

fn load_all(paths: &[PathBuf], p: &PipelineResolved) -> anyhow::Result<Vec<StreamBundle>> {
    let mut bundles = paths.par_iter().map(|path| load_bundle(path, p)).collect::<anyhow::Result<Vec<_>>>()?;
    bundles.sort_by(|a, b| a.meta.cmp(&b.meta));
    Ok(bundles)
}

fn cmd_ingest(cli: &Cli, a: &IngestArgs) -> anyhow::Result<()> {
    let p = pipeline(&a.packet, &a.features)?;
    let paths: Vec<PathBuf> =
        input_paths(cli, &a.inputs)?.into_iter().filter(|p| p.extension().is_some_and(|e| e != STREAM_EXT)).collect();
    if paths.is_empty() {
        bail!(DataError::format(
            a.inputs.first().or(cli.data_dir.as_ref()).cloned().unwrap_or_default(),
            "no runs matched"
        ));
    }
    create_dir(&a.out)?;
    let bundles = load_all(&paths, &p)?;
    for b in &bundles {
        let name = b.meta.to_string();
        io::export_streams(&a.out.join(format!("{name}.{STREAM_EXT}")), b)?;
        if a.csv {
            write_mirrors(&a.out, &name, b)?;
        }
        println!("{name}: {} packets × {} features", b.packets.len(), b.packets.feature_dim());
    }
    write_manifest(&a.out, cli, "ingest", None, &p)
}

enum Job<'a> {
    Run { model: ModelKind, mode: PredictionMode, run: &'a RunData },
    Subject { model: ModelKind, mode: PredictionMode, sessions: Vec<Vec<RunData>> },
    External { mode: PredictionMode, run: &'a RunData, predictions: DMatrix<f64> },
}

fn prediction_file(source: &Path, run: &RunData, mode: PredictionMode, single: bool) -> anyhow::Result<PathBuf> {
    if source.is_file() {
        if !single {
            bail!(usage("a single --predictions-from file needs exactly one run and one mode; pass a directory"));
        }
        return Ok(source.to_path_buf());
    }
    let name = run.meta.to_string();
    for candidate in [format!("{name}.{mode}.csv"), format!("{name}.csv")] {
        let p = source.join(candidate);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(DataError::format(source, format!("no predictions for {name} ({mode})")).into())
}

fn run_job(job: &Job<'_>, a: &EvaluateArgs) -> anyhow::Result<Vec<RunOutcome>> {
    let start = Instant::now();
    let mut outcomes = match job {
        Job::Run { model, mode, run } => vec![run_protocol(run, &a.params.spec(*model), *mode)
            .with_context(|| format!("{run} / {model} / {mode}", run = run.meta))?],
        Job::Subject { model, mode, sessions } => session_accumulative(sessions, &a.params.spec(*model), *mode)
            .with_context(|| format!("subject {} / {model} / {mode}", sessions[0][0].meta.subject))?,
        Job::External { mode, run, predictions } => {
            vec![score_external(run, predictions, *mode).with_context(|| format!("{} / eegnet / {mode}", run.meta))?]
        }
    };
    if a.timing {
        let per = start.elapsed().as_secs_f64() / outcomes.len().max(1) as f64;
        outcomes.iter_mut().for_each(|o| o.report.wall_time = per);
    }
    Ok(outcomes)
}

fn cmd_evaluate(cli: &Cli, a: &EvaluateArgs) -> anyhow::Result<()> {
    let p = pipeline(&a.packet, &a.features)?;
    if a.model.is_empty() || a.mode.is_empty() {
        bail!(usage("at least one --model and one --mode are required"));
    }
    let mut models = a.model.clone();
    models.sort();
    models.dedup();
    let mut modes = a.mode.clone();
    modes.sort();
    modes.dedup();
    let external = models.contains(&ModelKind::Eegnet);
    if external != a.predictions_from.is_some() {
        bail!(usage("--model eegnet and --predictions-from must be given together"));
    }
    for m in &models {
        if *m != ModelKind::Eegnet {
            a.params.spec(*m).bayes.validate()?;
        }
    }

    let paths = input_paths(cli, &a.inputs)?;
    let bundles = load_all(&paths, &p)?;
    if bundles.is_empty() {
        bail!(DataError::format(
            a.inputs.first().or(cli.data_dir.as_ref()).cloned().unwrap_or_default(),
            "no runs matched"
        ));
    }
    let runs = bundles.iter().map(|b| b.to_run_data().map_err(DataError::from)).collect::<Result<Vec<_>, _>>()?;
    create_dir(&a.out)?;

    let mut jobs = Vec::new();
    for &mode in &modes {
        for &model in models.iter().filter(|m| **m != ModelKind::Eegnet) {
            match a.protocol {
                ProtocolArg::MidRun => jobs.extend(runs.iter().map(|run| Job::Run { model, mode, run })),
                ProtocolArg::Accumulative => {
                    let mut by_subject: BTreeMap<u32, BTreeMap<u32, Vec<RunData>>> = BTreeMap::new();
                    for run in &runs {
                        by_subject
                            .entry(run.meta.subject)
                            .or_default()
                            .entry(run.meta.session)
                            .or_default()
                            .push(run.clone());
                    }
                    for sessions in by_subject.into_values() {
                        jobs.push(Job::Subject { model, mode, sessions: sessions.into_values().collect() });
                    }
                }
            }
        }
        if let Some(source) = &a.predictions_from {
            let single = runs.len() == 1 && modes.len() == 1;
            for run in &runs {
                let file = prediction_file(source, run, mode, single)?;
                let predictions = io::read_predictions(&file, run.split()..run.len())?;
                jobs.push(Job::External { mode, run, predictions });
            }
        }
    }

    let results = jobs.par_iter().map(|job| run_job(job, a)).collect::<anyhow::Result<Vec<_>>>()?;
    let mut outcomes: Vec<RunOutcome> = results.into_iter().flatten().collect();
    outcomes.sort_by(|x, y| {
        (x.report.meta(), x.report.mode, x.report.model).cmp(&(y.report.meta(), y.report.mode, y.report.model))
    });

    if a.traces || a.plot {
        let dt: BTreeMap<String, f64> = runs.iter().map(|r| (r.meta.to_string(), r.dt)).collect();
        let trace_dir = a.out.join("traces");
        let plot_dir = a.out.join("plots");
        for o in &outcomes {
            let stem = format!("{}_{}_{}", o.report.meta(), o.report.model, o.report.mode);
            if a.traces {
                create_dir(&trace_dir)?;
                tables::write_traces(&trace_dir.join(format!("{stem}.csv")), o, dt[&o.report.meta().to_string()])?;
            }
            if a.plot {
                create_dir(&plot_dir)?;
                plot::plot_traces(&plot_dir.join(format!("{stem}.png")), &o.truth, &o.predicted)?;
            }
        }
    }

    let reports: Vec<RunReport> = outcomes.into_iter().map(|o| o.report).collect();
    reports::write_reports(&a.out, &reports)?;
    let summary = aggregate(&reports);
    reports::write_summary(&a.out, &summary)?;
    print_summary(&summary);

    #[derive(Serialize)]
    struct Resolved<'a> {
        pipeline: &'a PipelineResolved,
        models: Vec<ModelSpec>,
        modes: &'a [PredictionMode],
        inputs: &'a [PathBuf],
    }
    let specs = models.iter().map(|m| a.params.spec(*m)).collect();
    write_manifest(
        &a.out,
        cli,
        "evaluate",
        None,
        Resolved { pipeline: &p, models: specs, modes: &modes, inputs: &paths },
    )
}

fn print_summary(summary: &Summary) {
    println!("{:<13} {:<10} {:>5} {:>12} {:>12} {:>12}", "mode", "model", "runs", "median", "geo_mean", "sd");
    for r in summary.rows.iter().filter(|r| r.grouping == Grouping::All) {
        println!(
            "{:<13} {:<10} {:>5} {:>12.6} {:>12.6} {:>12.6}",
            r.mode.name(),
            r.model.name(),
            r.n,
            r.median,
            r.geo_mean,
            r.sd
        );
    }
    for r in summary.ratios.iter().filter(|r| r.grouping == Grouping::All) {
        println!("{} {} / {}: geometric-mean ratio {:.4}", r.mode.name(), r.model_a.name(), r.model_b.name(), r.ratio);
    }
}

fn cmd_report(a: &ReportArgs) -> anyhow::Result<()> {
    let reports = reports::read_reports(&a.input)?;
    let out = match &a.out {
        Some(o) => o.clone(),
        None if a.input.is_dir() => a.input.clone(),
        None => a.input.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    create_dir(&out)?;
    let summary = aggregate(&reports);
    reports::write_summary(&out, &summary)?;
    print_summary(&summary);
    Ok(())
}
