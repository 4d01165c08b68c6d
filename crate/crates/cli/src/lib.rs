//! `virtimu` command-line driver: motion synthesis, virtual IMU generation,
//! calibration, feature extraction and subject-wise experiments, all driven
//! by one TOML config file.

pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;
use virtimu_core::benchmark::{real_streams, subject_id, virtual_streams, BenchmarkConfig};
use virtimu_core::calibration::{Calibration, ChannelSamples};
use virtimu_core::features::{featurize, segment_windows};
use virtimu_core::io::{generate_synthetic_motion, read_imu_csv, read_motion_file, write_imu_csv, write_motion_file};
use virtimu_core::kinematics::inverse_kinematics;
use virtimu_core::learn::ExperimentConfig;
use virtimu_core::model::Skeleton;
use virtimu_core::pipeline::{curve_table, prepare_data, prepare_stream, run_sweep};
use virtimu_core::sensorsim::{mix_seed, simulate_imu, ImuStream, Source, StreamMeta};

pub use config::Config;

const SYNTH_STREAM: u64 = 0x5e7d;
const GEN_IMU_STREAM: u64 = 0x91a0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("no inputs: {0}")]
    NoInputs(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: virtimu_core::Error,
    },
    #[error("{stage}: {path}: {source}")]
    Io {
        stage: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for usage and configuration problems, 1 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::NoInputs(_) => 2,
            CliError::Stage { .. } | CliError::Io { .. } => 1,
        }
    }
}

fn stage(stage: &'static str) -> impl Fn(virtimu_core::Error) -> CliError {
    move |source| CliError::Stage { stage, source }
}

fn io_err<'a>(stage: &'static str, path: &'a Path) -> impl Fn(std::io::Error) -> CliError + 'a {
    move |source| CliError::Io {
        stage,
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "virtimu",
    version,
    about = "Virtual IMU data generation and activity recognition experiments"
)]
pub struct Cli {
    /// TOML config file; built-in defaults otherwise.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Print the resolved plan and exit without computing anything.
    #[arg(long, global = true)]
    pub dry_run: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic motion clips (joint positions) as JSON files.
    Synth {
        #[arg(long)]
        clips: Option<usize>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Simulate virtual IMU CSVs from motion files.
    GenImu {
        /// Motion files, globs or directories; `gen_imu.inputs` if omitted.
        inputs: Vec<String>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Fit rank calibration maps from virtual to real IMU data.
    Calibrate {
        #[arg(long, value_name = "GLOB")]
        real: Vec<String>,
        #[arg(long = "virtual", value_name = "GLOB")]
        virtual_inputs: Vec<String>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Window IMU data and write ECDF feature vectors as CSV.
    Featurize {
        #[arg(long, value_name = "GLOB")]
        real: Vec<String>,
        #[arg(long = "virtual", value_name = "GLOB")]
        virtual_inputs: Vec<String>,
        /// Calibration file applied to the virtual streams.
        #[arg(long, value_name = "FILE")]
        calibration: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Write the synthetic benchmark: real subject recordings and virtual clips as IMU CSVs.
    Benchmark {
        #[arg(long)]
        subjects: Option<usize>,
        #[arg(long)]
        clips: Option<usize>,
        /// Receives `real/` and `virtual/` subdirectories.
        #[arg(long, value_name = "DIR", default_value = "benchmark")]
        out: PathBuf,
    },
    /// Leave-one-subject-out experiments over scenarios and real-data fractions.
    Experiment {
        #[arg(long, value_name = "GLOB")]
        real: Vec<String>,
        #[arg(long = "virtual", value_name = "GLOB")]
        virtual_inputs: Vec<String>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

/// Worker count from `VIRTIMU_THREADS`; `None` when unset.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("VIRTIMU_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "VIRTIMU_THREADS must be a positive integer, got `{v}`"
            ))),
        },
    }
}

/// Runs one command inside a thread pool sized by `VIRTIMU_THREADS`.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads_from_env()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker threads: {e}")))?;
    pool.install(|| run_command(cli))
}

fn run_command(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Synth { clips, out } => {
            if let Some(c) = clips {
                cfg.synth.clips_per_activity = c;
            }
            if let Some(o) = out {
                cfg.synth.output_dir = o;
            }
            cfg.validate()?;
            cmd_synth(&cfg, cli.dry_run)
        }
        Command::GenImu { inputs, out } => {
            if !inputs.is_empty() {
                cfg.gen_imu.inputs = inputs;
            }
            if let Some(o) = out {
                cfg.gen_imu.output_dir = o;
            }
            cfg.validate()?;
            cmd_gen_imu(&cfg, cli.dry_run)
        }
        Command::Calibrate {
            real,
            virtual_inputs,
            out,
        } => {
            override_inputs(&mut cfg, real, virtual_inputs);
            if let Some(o) = out {
                cfg.calibration.output = o;
            }
            cfg.validate()?;
            cmd_calibrate(&cfg, cli.dry_run)
        }
        Command::Featurize {
            real,
            virtual_inputs,
            calibration,
            out,
        } => {
            override_inputs(&mut cfg, real, virtual_inputs);
            if let Some(o) = out {
                cfg.features.output = o;
            }
            cfg.validate()?;
            cmd_featurize(&cfg, calibration.as_deref(), cli.dry_run)
        }
        Command::Benchmark { subjects, clips, out } => {
            let mut bench = BenchmarkConfig {
                seed: cfg.seed,
                ..BenchmarkConfig::default()
            };
            if let Some(n) = subjects {
                bench.n_subjects = n;
            }
            if let Some(c) = clips {
                bench.virtual_clips_per_activity = c;
            }
            cmd_benchmark(&bench, &out, cli.dry_run)
        }
        Command::Experiment {
            real,
            virtual_inputs,
            out,
        } => {
            override_inputs(&mut cfg, real, virtual_inputs);
            if let Some(o) = out {
                cfg.experiment.output_dir = o;
            }
            cfg.validate()?;
            cmd_experiment(&cfg, cli.dry_run)
        }
    }
}

fn override_inputs(cfg: &mut Config, real: Vec<String>, virtual_inputs: Vec<String>) {
    if !real.is_empty() {
        cfg.experiment.real = real;
    }
    if !virtual_inputs.is_empty() {
        cfg.experiment.virtual_inputs = virtual_inputs;
    }
}

/// Expands paths, globs and directories (files with extension `ext`) into a
/// sorted, duplicate-free list. Matching nothing at all is an error.
pub fn resolve_inputs(patterns: &[String], ext: &str) -> Result<Vec<PathBuf>, CliError> {
    let found = expand(patterns, ext)?;
    if found.is_empty() {
        return Err(CliError::NoInputs(format!("{patterns:?} matched no .{ext} files")));
    }
    Ok(found)
}

fn expand(patterns: &[String], ext: &str) -> Result<Vec<PathBuf>, CliError> {
    let mut found = Vec::new();
    for pattern in patterns {
        let path = Path::new(pattern);
        if path.is_dir() {
            let entries = std::fs::read_dir(path).map_err(|e| CliError::Config(format!("{pattern}: {e}")))?;
            for entry in entries {
                let p = entry.map_err(|e| CliError::Config(format!("{pattern}: {e}")))?.path();
                if p.is_file() && p.extension().is_some_and(|x| x == ext) {
                    found.push(p);
                }
            }
        } else {
            let paths = glob::glob(pattern).map_err(|e| CliError::Config(format!("bad pattern `{pattern}`: {e}")))?;
            found.extend(paths.filter_map(|p| p.ok()).filter(|p| p.is_file()));
        }
    }
    found.sort();
    found.dedup();
    Ok(found)
}

fn create_dir(stage_name: &'static str, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(stage_name, dir))
}

fn write_file(stage_name: &'static str, path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(stage_name, parent)?;
    }
    std::fs::write(path, contents).map_err(io_err(stage_name, path))
}

fn print_plan(lines: &[String]) {
    for line in lines {
        println!("{line}");
    }
}

pub fn cmd_synth(cfg: &Config, dry_run: bool) -> Result<(), CliError> {
    let s = &cfg.synth;
    if dry_run {
        print_plan(&[
            "stage synth".into(),
            format!(
                "  activities: {:?}",
                s.activities.iter().map(|a| a.name()).collect::<Vec<_>>()
            ),
            format!("  clips per activity: {}", s.clips_per_activity),
            format!("  duration: {:?} s", s.duration_s),
            format!("  seed: {}", cfg.seed),
            format!(
                "  output: {} ({} files)",
                s.output_dir.display(),
                s.activities.len() * s.clips_per_activity
            ),
        ]);
        return Ok(());
    }
    let skeleton = Skeleton::default_22();
    let jobs: Vec<_> = s
        .activities
        .iter()
        .flat_map(|&a| (0..s.clips_per_activity).map(move |k| (a, k)))
        .collect();
    create_dir("synth", &s.output_dir)?;
    let [lo, hi] = s.duration_s;
    jobs.par_iter().try_for_each(|&(activity, k)| {
        let clip_seed = mix_seed(mix_seed(cfg.seed, SYNTH_STREAM), (activity as u64) << 32 | k as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(clip_seed);
        let seconds = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let motion = generate_synthetic_motion(activity, seconds, clip_seed).map_err(stage("synth"))?;
        let path = s.output_dir.join(format!("{activity}_{k:03}.json"));
        write_motion_file(&path, &motion, &skeleton).map_err(stage("synth"))
    })?;
    log::info!("synth: wrote {} motion files to {}", jobs.len(), s.output_dir.display());
    Ok(())
}

pub fn cmd_gen_imu(cfg: &Config, dry_run: bool) -> Result<(), CliError> {
    let inputs = resolve_inputs(&cfg.gen_imu.inputs, "json")?;
    let skeleton = cfg.skeleton()?;
    let placements = cfg.placements(&skeleton)?;
    let sim = cfg.simulation();
    let out_dir = &cfg.gen_imu.output_dir;
    if dry_run {
        print_plan(&[
            "stage gen-imu: inverse kinematics, sensor simulation".into(),
            format!("  motion files: {}", inputs.len()),
            format!(
                "  placements: {:?}",
                placements.iter().map(|p| p.location.as_str()).collect::<Vec<_>>()
            ),
            format!(
                "  internal rate {} Hz, output rate {} Hz",
                sim.internal_rate, sim.out_rate
            ),
            format!("  seed: {}", cfg.seed),
            format!("  output: {} ({} files)", out_dir.display(), inputs.len()),
        ]);
        return Ok(());
    }
    create_dir("gen-imu", out_dir)?;
    inputs.par_iter().enumerate().try_for_each(|(i, path)| {
        let motion = read_motion_file(path, &skeleton).map_err(stage("gen-imu"))?;
        let pose = inverse_kinematics(&skeleton, &motion).map_err(stage("gen-imu"))?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut clip_sim = sim;
        clip_sim.noise = sim
            .noise
            .with_seed(mix_seed(mix_seed(cfg.seed, GEN_IMU_STREAM), i as u64));
        if motion.label.is_none() {
            log::warn!("gen-imu: {} has no activity label", path.display());
        }
        let meta = StreamMeta {
            activity: motion.label.clone(),
            subject: Some(format!("virtual-{stem}")),
            source: Source::Virtual,
        };
        let stream = simulate_imu(&skeleton, &pose, &placements, &clip_sim)
            .map_err(stage("gen-imu"))?
            .with_meta(meta);
        write_imu_csv(&[stream], out_dir.join(format!("{stem}.csv"))).map_err(stage("gen-imu"))
    })?;
    log::info!("gen-imu: wrote {} IMU files to {}", inputs.len(), out_dir.display());
    Ok(())
}

fn read_streams(paths: &[PathBuf], source: Source) -> Result<Vec<ImuStream>, CliError> {
    let per_file = paths
        .par_iter()
        .map(|p| read_imu_csv(p, source))
        .collect::<Result<Vec<_>, _>>()
        .map_err(stage("read"))?;
    Ok(per_file.into_iter().flatten().collect())
}

fn samples_by_class(streams: &[ImuStream]) -> BTreeMap<String, ChannelSamples> {
    let mut by_class: BTreeMap<String, ChannelSamples> = BTreeMap::new();
    for s in streams {
        let class = s.meta.activity.clone().unwrap_or_default();
        by_class.entry(class).or_default().extend_stream(s);
    }
    by_class
}

pub fn cmd_calibrate(cfg: &Config, dry_run: bool) -> Result<(), CliError> {
    let real_paths = resolve_inputs(&cfg.experiment.real, "csv")?;
    let virtual_paths = resolve_inputs(&cfg.experiment.virtual_inputs, "csv")?;
    let pipe = cfg.pipeline();
    if dry_run {
        print_plan(&[
            "stage calibrate: downsample, channel selection, rank maps".into(),
            format!(
                "  real files: {}, virtual files: {}",
                real_paths.len(),
                virtual_paths.len()
            ),
            format!(
                "  {} knots, per-class maps: {}",
                cfg.calibration.n_knots, cfg.calibration.per_class
            ),
            format!("  output: {}", cfg.calibration.output.display()),
        ]);
        return Ok(());
    }
    let real = read_streams(&real_paths, Source::Real)?;
    let virt = read_streams(&virtual_paths, Source::Virtual)?;
    let locations = pipe.locations_for(&real);
    let prep = |streams: &[ImuStream]| -> Result<Vec<ImuStream>, CliError> {
        streams
            .par_iter()
            .map(|s| prepare_stream(s, &locations, &pipe))
            .collect::<Result<_, _>>()
            .map_err(stage("preprocess"))
    };
    let (real, virt) = (prep(&real)?, prep(&virt)?);
    let cal = Calibration::fit(
        &samples_by_class(&virt),
        &samples_by_class(&real),
        cfg.calibration.n_knots,
        cfg.calibration.per_class,
    )
    .map_err(stage("calibrate"))?;
    let json = cal.to_json().map_err(stage("calibrate"))?;
    write_file("calibrate", &cfg.calibration.output, json)?;
    log::info!("calibrate: wrote {}", cfg.calibration.output.display());
    Ok(())
}

pub fn cmd_featurize(cfg: &Config, calibration: Option<&Path>, dry_run: bool) -> Result<(), CliError> {
    let real_paths = expand(&cfg.experiment.real, "csv")?;
    let virtual_paths = expand(&cfg.experiment.virtual_inputs, "csv")?;
    if real_paths.is_empty() && virtual_paths.is_empty() {
        return Err(CliError::NoInputs(format!(
            "{:?} and {:?} matched no .csv files",
            cfg.experiment.real, cfg.experiment.virtual_inputs
        )));
    }
    let pipe = cfg.pipeline();
    if dry_run {
        print_plan(&[
            "stage featurize: downsample, channel selection, calibration, windows, ECDF features".into(),
            format!(
                "  real files: {}, virtual files: {}",
                real_paths.len(),
                virtual_paths.len()
            ),
            format!(
                "  calibration: {}",
                calibration.map_or("none".into(), |p| p.display().to_string())
            ),
            format!(
                "  window {} s, overlap {}, {} components",
                pipe.window_seconds, pipe.overlap, pipe.n_components
            ),
            format!("  output: {}", cfg.features.output.display()),
        ]);
        return Ok(());
    }
    let cal = calibration
        .map(Calibration::load)
        .transpose()
        .map_err(stage("calibrate"))?;
    let mut streams = read_streams(&real_paths, Source::Real)?;
    streams.extend(read_streams(&virtual_paths, Source::Virtual)?);
    let locations = pipe.locations_for(&streams);
    let windows = streams
        .par_iter()
        .map(|s| {
            let mut p = prepare_stream(s, &locations, &pipe).map_err(stage("preprocess"))?;
            if let (Some(cal), Source::Virtual) = (&cal, p.meta.source) {
                p = cal.apply(&p).map_err(stage("calibrate"))?;
            }
            segment_windows(&p, pipe.window_seconds, pipe.overlap).map_err(stage("window"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let windows: Vec<_> = windows.into_iter().flatten().collect();
    let fm = featurize(&windows, pipe.n_components).map_err(stage("featurize"))?;
    let mut buf = Vec::new();
    fm.write_csv(&mut buf)
        .map_err(io_err("featurize", &cfg.features.output))?;
    write_file("featurize", &cfg.features.output, buf)?;
    log::info!(
        "featurize: wrote {} rows to {}",
        fm.len(),
        cfg.features.output.display()
    );
    Ok(())
}

pub fn cmd_benchmark(bench: &BenchmarkConfig, out: &Path, dry_run: bool) -> Result<(), CliError> {
    if bench.n_subjects < 2 {
        return Err(CliError::Config("the benchmark needs at least 2 subjects".into()));
    }
    let (real_dir, virtual_dir) = (out.join("real"), out.join("virtual"));
    if dry_run {
        print_plan(&[
            "stage benchmark: synthetic subjects and virtual clips".into(),
            format!(
                "  subjects: {}, {} s per activity",
                bench.n_subjects, bench.real_seconds
            ),
            format!("  virtual clips per activity: {}", bench.virtual_clips_per_activity),
            format!("  seed: {}", bench.seed),
            format!("  output: {}, {}", real_dir.display(), virtual_dir.display()),
        ]);
        return Ok(());
    }
    create_dir("benchmark", &real_dir)?;
    create_dir("benchmark", &virtual_dir)?;
    let real = real_streams(bench).map_err(stage("benchmark"))?;
    for s in 0..bench.n_subjects {
        let subject = subject_id(s);
        let mine: Vec<ImuStream> = real
            .iter()
            .filter(|st| st.meta.subject.as_deref() == Some(subject.as_str()))
            .cloned()
            .collect();
        write_imu_csv(&mine, real_dir.join(format!("{subject}.csv"))).map_err(stage("benchmark"))?;
    }
    let virt = virtual_streams(bench).map_err(stage("benchmark"))?;
    for st in &virt {
        let name = st.meta.subject.as_deref().unwrap_or("virtual");
        write_imu_csv(std::slice::from_ref(st), virtual_dir.join(format!("{name}.csv"))).map_err(stage("benchmark"))?;
    }
    log::info!(
        "benchmark: wrote {} real and {} virtual streams to {}",
        real.len(),
        virt.len(),
        out.display()
    );
    Ok(())
}

pub fn report_file_name(scenario: impl std::fmt::Display, fraction: f64) -> String {
    format!("report_{scenario}_{fraction}.csv")
}

pub fn cmd_experiment(cfg: &Config, dry_run: bool) -> Result<(), CliError> {
    let ex = &cfg.experiment;
    let real_paths = resolve_inputs(&ex.real, "csv")?;
    let needs_virtual: Vec<_> = ex.scenarios.iter().filter(|s| s.uses_virtual()).collect();
    let virtual_paths = if needs_virtual.is_empty() {
        Vec::new()
    } else {
        let found = expand(&ex.virtual_inputs, "csv")?;
        if found.is_empty() {
            return Err(CliError::Config(format!(
                "scenario `{}` needs virtual data, but {:?} matched no .csv files",
                needs_virtual[0], ex.virtual_inputs
            )));
        }
        found
    };
    let pipe = cfg.pipeline();
    let base = ExperimentConfig {
        n_runs: ex.n_runs,
        forest: cfg.forest,
        seed: cfg.seed,
        ..ExperimentConfig::default()
    };
    if dry_run {
        print_plan(&[
            "stage experiment: downsample, accel selection, per-fold calibration, windows, features, leave-one-subject-out".into(),
            format!("  real files: {}, virtual files: {}", real_paths.len(), virtual_paths.len()),
            format!("  scenarios: {:?}", ex.scenarios.iter().map(|s| s.to_string()).collect::<Vec<_>>()),
            format!("  fractions: {:?}", ex.fractions),
            format!("  runs per fold: {}, trees: {}", ex.n_runs, cfg.forest.n_trees),
            format!("  seed: {}", cfg.seed),
            format!("  output: {}", ex.output_dir.display()),
        ]);
        return Ok(());
    }
    let real = read_streams(&real_paths, Source::Real)?;
    let virt = read_streams(&virtual_paths, Source::Virtual)?;
    let data = prepare_data(&real, &virt, &pipe).map_err(stage("preprocess"))?;
    log::info!(
        "experiment: {} real and {} virtual windows over locations {:?}",
        data.real.len(),
        data.virtual_windows.len(),
        data.locations
    );
    let reports = run_sweep(&data, &ex.scenarios, &ex.fractions, &base, &pipe).map_err(stage("experiment"))?;

    create_dir("experiment", &ex.output_dir)?;
    for r in &reports {
        let path = ex.output_dir.join(report_file_name(r.scenario, r.real_fraction));
        r.save_csv(&path).map_err(stage("experiment"))?;
        for flag in &r.flags {
            log::warn!("experiment: {} at fraction {}: {flag}", r.scenario, r.real_fraction);
        }
    }
    let summary = serde_json::to_string_pretty(&reports).map_err(|e| CliError::Stage {
        stage: "experiment",
        source: e.into(),
    })?;
    write_file("experiment", &ex.output_dir.join("summary.json"), summary)?;
    write_file("experiment", &ex.output_dir.join("curve.dat"), curve_table(&reports))?;
    for r in &reports {
        println!(
            "{:<8} fraction {:<5} macro F1 {:.4} +- {:.4}",
            r.scenario.to_string(),
            r.real_fraction,
            r.mean_f1,
            r.run_std_f1
        );
    }
    Ok(())
}
