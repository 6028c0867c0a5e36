//! Command-line interface: dataset generation, noise injection, runs,
//! rankings, evaluation reports, and the iteration-rate sweep.
//!
//! Commands never mutate their input directories; every artifact lands
//! under the output path given on the command line. Failures print a
//! machine-readable JSON object on stderr and exit 2 (configuration),
//! 3 (data/format), or 4 (run).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::data::{generate_synthetic, Dataset, SyntheticSpec};
use crate::engine::{self, LateStopConfig, RunEvent, RunResult};
use crate::error::{Error, Result};
use crate::eval;
use crate::noise::{self, NoiseSpec};
use crate::rundir::{self, DatasetInfo, HoldoutInfo, NoiseSidecar, RunManifest};
use crate::tracker::RankCriterion;

#[derive(Debug, Parser)]
#[command(
    name = "latestop",
    version,
    about = "Iterative noisy-label dataset cleaning via first-time k-epoch learning dynamics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic Gaussian-mixture dataset.
    Gen(GenArgs),
    /// Convert an IDX image/label pair into a dataset directory.
    ImportIdx(ImportIdxArgs),
    /// Inject label noise into a dataset, keeping ground truth on the side.
    Noise(NoiseArgs),
    /// Execute the iterative cleaning run.
    Run(RunArgs),
    /// Emit the ranking of one iteration as CSV.
    Rank(RankArgs),
    /// Emit evaluation reports for a finished run.
    Eval(EvalArgs),
    /// Run the iteration-rate sweep: one run per (m, seed) pair.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct ImportIdxArgs {
    /// IDX image file (magic 0x00000803).
    #[arg(long)]
    pub images: PathBuf,
    /// IDX label file (magic 0x00000801).
    #[arg(long)]
    pub labels: PathBuf,
    /// Output dataset directory (created; must be empty).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// JSON file describing the synthetic dataset.
    #[arg(long)]
    pub spec: PathBuf,
    /// Output dataset directory (created; must be empty).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseKindArg {
    /// Symmetric: uniform flips to one of the other classes.
    Sym,
    /// Instance-dependent: feature-driven flip targets.
    Ins,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Input dataset directory.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub kind: NoiseKindArg,
    /// Expected mislabeled fraction in [0, 1].
    #[arg(long)]
    pub rate: f64,
    #[arg(long)]
    pub seed: u64,
    /// Std dev of the per-instance flip probability (instance-dependent only).
    #[arg(long, default_value_t = 0.1)]
    pub instance_sd: f64,
    /// Output dataset directory (created; must be empty).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Input dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Run configuration (flat JSON; unknown keys are rejected).
    #[arg(long)]
    pub config: PathBuf,
    /// Output run directory (created; must be empty).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional test dataset directory; records per-epoch test accuracy.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Suppress progress output on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Fkl,
    Loss,
}

impl From<CriterionArg> for RankCriterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Fkl => RankCriterion::Fkl,
            CriterionArg::Loss => RankCriterion::Loss,
        }
    }
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub rundir: PathBuf,
    #[arg(long, value_enum, default_value_t = CriterionArg::Fkl)]
    pub criterion: CriterionArg,
    /// Iteration whose ranking to emit (1 ranks the full training set).
    #[arg(long, default_value_t = 1)]
    pub iteration: u32,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportArg {
    /// Label precision by rank range (deciles; absolute cuts at N=45,000).
    Precision,
    /// Clean/mislabeled inventory of the kept set.
    Retention,
    /// Ground-truth noise rate of each iteration's training set.
    NoiseCurve,
    /// Average-rank change of falsely retained examples after fixing labels.
    RankShift,
    /// Test accuracy of the stored classifier.
    Accuracy,
    /// Long-format CSV of per-epoch curves for plotting.
    PlotData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    /// Retrained model when present, otherwise the last iteration's.
    Auto,
    Final,
    Retrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    /// Flat CSV suitable for external plotting. `plot-data` is always CSV.
    Csv,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub rundir: PathBuf,
    #[arg(long, value_enum)]
    pub report: ReportArg,
    /// Dataset directory with ground truth; defaults to the path recorded
    /// in the run manifest.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Test dataset directory (accuracy report).
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Run on the label-fixed dataset to compare against (rank-shift report).
    #[arg(long)]
    pub fixed_rundir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = CriterionArg::Fkl)]
    pub criterion: CriterionArg,
    #[arg(long, default_value_t = 1)]
    pub iteration: u32,
    #[arg(long, value_enum, default_value_t = ModelArg::Auto)]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated iteration rates.
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 5.0, 4.0, 3.0, 2.0])]
    pub m: Vec<f64>,
    /// Number of master seeds per m (seed list is shared across m values).
    #[arg(long, default_value_t = 5)]
    pub seeds: u32,
    /// Output directory (created; must be empty).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional test dataset for final-accuracy columns.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => cmd_gen(&args),
        Command::ImportIdx(args) => cmd_import_idx(&args),
        Command::Noise(args) => cmd_noise(&args),
        Command::Run(args) => cmd_run(&args).map(|_| ()),
        Command::Rank(args) => cmd_rank(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            let mut f = fs::File::create(path)?;
            f.write_all(text.as_bytes())?;
            Ok(())
        }
        None => {
            print!("{text}");
            std::io::stdout().flush()?;
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, &text)
}

pub fn cmd_gen(args: &GenArgs) -> Result<()> {
    let text = fs::read_to_string(&args.spec)
        .map_err(|e| Error::Config(format!("cannot read spec {}: {e}", args.spec.display())))?;
    let spec: SyntheticSpec = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("bad synthetic spec: {e}")))?;
    let ds = generate_synthetic(&spec)?;
    rundir::save_dataset_dir(&ds, &args.out, None)?;
    let mut snapshot = serde_json::to_string_pretty(&spec)?;
    snapshot.push('\n');
    fs::write(args.out.join("gen.json"), snapshot)?;
    eprintln!(
        "generated {} examples ({} classes x {}, dim {}) -> {}",
        ds.len(),
        spec.num_classes,
        spec.examples_per_class,
        spec.feature_dim,
        args.out.display()
    );
    Ok(())
}

pub fn cmd_import_idx(args: &ImportIdxArgs) -> Result<()> {
    let ds = crate::data::load_idx(&args.images, &args.labels)?;
    rundir::save_dataset_dir(&ds, &args.out, None)?;
    eprintln!(
        "imported {} examples (dim {}, {} classes) -> {}",
        ds.len(),
        ds.feature_dim(),
        ds.num_classes,
        args.out.display()
    );
    Ok(())
}

pub fn cmd_noise(args: &NoiseArgs) -> Result<()> {
    let ds = rundir::load_dataset_dir(&args.input)?;
    let mut spec = match args.kind {
        NoiseKindArg::Sym => NoiseSpec::symmetric(args.rate, args.seed),
        NoiseKindArg::Ins => NoiseSpec::instance_dependent(args.rate, args.seed),
    };
    spec.instance_sd = args.instance_sd;
    let (noisy, report) = noise::inject(&ds, &spec)?;
    eprintln!(
        "flipped {} of {} labels (realized rate {:.4}) -> {}",
        report.num_flipped,
        noisy.len(),
        report.realized_rate,
        args.out.display()
    );
    rundir::save_dataset_dir(&noisy, &args.out, Some(&NoiseSidecar { spec, report }))?;
    Ok(())
}

/// What `run` prints on stdout as its machine-readable result.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub run_dir: String,
    pub iterations: usize,
    pub train_size: usize,
    pub holdout_size: usize,
    pub kept: usize,
    pub removed: usize,
    pub final_noise_rate: Option<f64>,
}

/// Shared by `run` and `sweep`: split, run, annotate, persist.
fn execute_run(
    cfg: &LateStopConfig,
    data_dir: &Path,
    test_dir: Option<&Path>,
    out_dir: &Path,
    quiet: bool,
) -> Result<(RunResult, Dataset, RunSummary)> {
    let ds = rundir::load_dataset_dir(data_dir)?;
    let test = test_dir.map(rundir::load_dataset_dir).transpose()?;
    let noise_sidecar = rundir::load_noise_sidecar(data_dir)?;
    rundir::create_empty_dir(out_dir)?;

    let created_unix = rundir::unix_now();
    let (train, holdout) = engine::split_for_run(cfg, &ds)?;
    let mut result = engine::run_with_progress(cfg, &train, test.as_ref(), |event| {
        if quiet {
            return;
        }
        match event {
            RunEvent::EpochDone {
                iteration,
                epoch,
                train_accuracy,
                learned_count,
            } => {
                if epoch % 25 == 0 {
                    eprintln!(
                        "iter {iteration} epoch {epoch}: train_acc {train_accuracy:.4}, learned {learned_count}"
                    );
                }
            }
            RunEvent::IterationDone {
                iteration,
                size,
                epochs_trained,
                halt_reason,
            } => {
                eprintln!(
                    "iter {iteration} done after {epochs_trained} epochs ({halt_reason:?}): kept {size}"
                );
            }
        }
    })?;
    if train.clean_labels.is_some() {
        eval::annotate_noise_rates(&mut result, &train)?;
    }

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix,
        finished_unix: rundir::unix_now(),
        master_seed: cfg.master_seed,
        iteration_seeds: (1..=result.iterations.len() as u32)
            .map(|i| engine::derive_iteration_seed(cfg.master_seed, i))
            .collect(),
        config: cfg.clone(),
        config_hash: rundir::config_hash(cfg)?,
        dataset: DatasetInfo::describe(&ds, &rundir::dataset_csv_path(data_dir))?,
        test_dataset: match (&test, test_dir) {
            (Some(t), Some(dir)) => Some(DatasetInfo::describe(t, &rundir::dataset_csv_path(dir))?),
            _ => None,
        },
        noise_report: noise_sidecar.map(|s| s.report),
        holdout: HoldoutInfo {
            fraction: cfg.holdout_fraction,
            holdout_size: holdout.len(),
            train_size: train.len(),
        },
        layer_widths: result.network.layer_widths.clone(),
        iterations_run: result.iterations.len(),
    };
    rundir::write_holdout_ids(out_dir, &holdout.ids)?;
    rundir::write_run_dir(out_dir, &result, &manifest)?;

    let final_noise_rate = result.iterations.last().and_then(|_| {
        train.clean_labels.as_ref()?;
        train.subset(&result.kept).ok()?.noise_rate().ok()
    });
    let summary = RunSummary {
        run_dir: out_dir.display().to_string(),
        iterations: result.iterations.len(),
        train_size: train.len(),
        holdout_size: holdout.len(),
        kept: result.kept.len(),
        removed: result.removed.len(),
        final_noise_rate,
    };
    Ok((result, train, summary))
}

pub fn cmd_run(args: &RunArgs) -> Result<RunSummary> {
    let cfg = LateStopConfig::from_json_file(&args.config)?;
    let (_, _, summary) = execute_run(
        &cfg,
        &args.data,
        args.test.as_deref(),
        &args.out,
        args.quiet,
    )?;
    emit_json(&None, &summary)?;
    Ok(summary)
}

pub fn cmd_rank(args: &RankArgs) -> Result<()> {
    let (_, run) = rundir::load_run_dir(&args.rundir)?;
    let text = match args.criterion {
        CriterionArg::Fkl => {
            let ranking = eval::fkl_ranking(&run, args.iteration)?;
            let record = &run.iterations[args.iteration as usize - 1].record;
            let first: std::collections::HashMap<u64, Option<u32>> = record
                .ids
                .iter()
                .copied()
                .zip(record.first_learned.iter().copied())
                .collect();
            let mut out = String::from("rank,id,fkl\n");
            for (pos, id) in ranking.ids.iter().enumerate() {
                match first.get(id).copied().flatten() {
                    Some(e) => out.push_str(&format!("{pos},{id},{e}\n")),
                    None => out.push_str(&format!("{pos},{id},\n")),
                }
            }
            out
        }
        CriterionArg::Loss => {
            let ranking = eval::loss_ranking(&run, args.iteration)?;
            let it = &run.iterations[args.iteration as usize - 1];
            let window = run.config.loss_window(it.log.num_epochs());
            let tail = &it.log.epochs[it.log.num_epochs() - window..];
            let means: std::collections::HashMap<u64, f64> = it
                .log
                .ids
                .iter()
                .enumerate()
                .map(|(i, &id)| {
                    (
                        id,
                        tail.iter().map(|r| r.loss[i]).sum::<f64>() / window as f64,
                    )
                })
                .collect();
            let mut out = String::from("rank,id,mean_loss\n");
            for (pos, id) in ranking.ids.iter().enumerate() {
                out.push_str(&format!("{pos},{id},{}\n", means[id]));
            }
            out
        }
    };
    emit(&args.out, &text)
}

fn dataset_for_eval(args: &EvalArgs, manifest: &RunManifest) -> Result<Dataset> {
    match &args.data {
        Some(dir) => rundir::load_dataset_dir(dir),
        None => crate::data::load_csv(Path::new(&manifest.dataset.path)),
    }
}

/// The population a run ranked: the post-holdout training set, recovered
/// from the run's first iteration.
fn training_subset(run: &RunResult, ds: &Dataset) -> Result<Dataset> {
    let ids = run
        .iteration_ids(1)
        .ok_or_else(|| Error::Input("run has no iterations".into()))?;
    ds.subset(ids)
}

#[derive(Debug, Serialize)]
struct PrecisionReport {
    criterion: RankCriterion,
    iteration: u32,
    ranked: usize,
    clean: eval::PrecisionTable,
    mislabeled: eval::PrecisionTable,
    reference_cuts: Option<ReferenceCuts>,
}

#[derive(Debug, Serialize)]
struct ReferenceCuts {
    clean: eval::PrecisionTable,
    mislabeled: eval::PrecisionTable,
}

#[derive(Debug, Serialize)]
struct NoiseCurvePoint {
    iteration: u32,
    noise_rate: f64,
}

fn precision_csv(report: &PrecisionReport) -> String {
    let mut out = String::from("grid,mode,lo,hi,matching,precision\n");
    let mut push = |grid: &str, table: &eval::PrecisionTable| {
        let mode = match table.mode {
            eval::PrecisionMode::CleanHead => "clean_head",
            eval::PrecisionMode::MislabeledTail => "mislabeled_tail",
        };
        for row in &table.rows {
            out.push_str(&format!(
                "{grid},{mode},{},{},{},{}\n",
                row.lo, row.hi, row.matching, row.precision
            ));
        }
    };
    push("decile", &report.clean);
    push("decile", &report.mislabeled);
    if let Some(cuts) = &report.reference_cuts {
        push("reference", &cuts.clean);
        push("reference", &cuts.mislabeled);
    }
    out
}

fn rank_shift_csv(report: &eval::RankShiftReport) -> String {
    let mut out =
        String::from("id,fkl_rank_before,fkl_rank_after,loss_rank_before,loss_rank_after\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.id,
            row.fkl_rank_before,
            row.fkl_rank_after,
            row.loss_rank_before,
            row.loss_rank_after
        ));
    }
    out
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let (manifest, run) = rundir::load_run_dir(&args.rundir)?;
    match args.report {
        ReportArg::Precision => {
            let ds = dataset_for_eval(args, &manifest)?;
            let train = training_subset(&run, &ds)?;
            let ranking = match args.criterion {
                CriterionArg::Fkl => eval::fkl_ranking(&run, args.iteration)?,
                CriterionArg::Loss => eval::loss_ranking(&run, args.iteration)?,
            };
            let n = ranking.len();
            let deciles = eval::decile_ranges(n);
            let clean =
                eval::label_precision(&ranking, &train, &deciles, eval::PrecisionMode::CleanHead)?;
            let mislabeled = eval::label_precision(
                &ranking,
                &train,
                &deciles,
                eval::PrecisionMode::MislabeledTail,
            )?;
            let reference_cuts = if n == 45_000 {
                let (head, tail) = eval::reference_ranges_45k();
                Some(ReferenceCuts {
                    clean: eval::label_precision(
                        &ranking,
                        &train,
                        &head,
                        eval::PrecisionMode::CleanHead,
                    )?,
                    mislabeled: eval::label_precision(
                        &ranking,
                        &train,
                        &tail,
                        eval::PrecisionMode::MislabeledTail,
                    )?,
                })
            } else {
                None
            };
            let report = PrecisionReport {
                criterion: args.criterion.into(),
                iteration: args.iteration,
                ranked: n,
                clean,
                mislabeled,
                reference_cuts,
            };
            match args.format {
                FormatArg::Json => emit_json(&args.out, &report),
                FormatArg::Csv => emit(&args.out, &precision_csv(&report)),
            }
        }
        ReportArg::Retention => {
            let ds = dataset_for_eval(args, &manifest)?;
            let train = training_subset(&run, &ds)?;
            let report = eval::retention(&run, &train)?;
            match args.format {
                FormatArg::Json => emit_json(&args.out, &report),
                FormatArg::Csv => emit(
                    &args.out,
                    &format!(
                        "total_clean_in_original,clean_kept,mislabeled_kept,clean_removed\n{},{},{},{}\n",
                        report.total_clean_in_original,
                        report.clean_kept,
                        report.mislabeled_kept,
                        report.clean_removed
                    ),
                ),
            }
        }
        ReportArg::NoiseCurve => {
            let ds = dataset_for_eval(args, &manifest)?;
            let train = training_subset(&run, &ds)?;
            let points: Vec<NoiseCurvePoint> = eval::noise_curve(&run, &train)?
                .into_iter()
                .enumerate()
                .map(|(i, noise_rate)| NoiseCurvePoint {
                    iteration: i as u32 + 1,
                    noise_rate,
                })
                .collect();
            match args.format {
                FormatArg::Json => emit_json(&args.out, &points),
                FormatArg::Csv => {
                    let mut out = String::from("iteration,noise_rate\n");
                    for p in &points {
                        out.push_str(&format!("{},{}\n", p.iteration, p.noise_rate));
                    }
                    emit(&args.out, &out)
                }
            }
        }
        ReportArg::RankShift => {
            let fixed_dir = args.fixed_rundir.as_ref().ok_or_else(|| {
                Error::Input("rank-shift needs --fixed-rundir (run on the label-fixed data)".into())
            })?;
            let (_, fixed_run) = rundir::load_run_dir(fixed_dir)?;
            let ds = dataset_for_eval(args, &manifest)?;
            let train = training_subset(&run, &ds)?;
            let ids = eval::falsely_retained_ids(&run, &train)?;
            let report = eval::rank_shift(&run, &fixed_run, &ids)?;
            match args.format {
                FormatArg::Json => emit_json(&args.out, &report),
                FormatArg::Csv => emit(&args.out, &rank_shift_csv(&report)),
            }
        }
        ReportArg::Accuracy => {
            let test_dir = args
                .test
                .as_ref()
                .ok_or_else(|| Error::Input("accuracy report needs --test <dataset dir>".into()))?;
            let test = rundir::load_dataset_dir(test_dir)?;
            let (params, which) = match args.model {
                ModelArg::Final => (&run.final_params, "final"),
                ModelArg::Retrained => (
                    run.retrained_params
                        .as_ref()
                        .ok_or_else(|| Error::Input("run has no retrained model".into()))?,
                    "retrained",
                ),
                ModelArg::Auto => match &run.retrained_params {
                    Some(p) => (p, "retrained"),
                    None => (&run.final_params, "final"),
                },
            };
            #[derive(Serialize)]
            struct AccuracyReport<'a> {
                model: &'a str,
                test_accuracy: f64,
            }
            let acc = eval::test_accuracy(&run.network, params, &test)?;
            match args.format {
                FormatArg::Json => emit_json(
                    &args.out,
                    &AccuracyReport {
                        model: which,
                        test_accuracy: acc,
                    },
                ),
                FormatArg::Csv => emit(&args.out, &format!("model,test_accuracy\n{which},{acc}\n")),
            }
        }
        ReportArg::PlotData => {
            let mut out = String::from("iteration,epoch,metric,value\n");
            for it in &run.iterations {
                for (e, v) in it.train_accuracy.iter().enumerate() {
                    out.push_str(&format!("{},{},train_accuracy,{v}\n", it.iteration, e + 1));
                }
                if let Some(curve) = &it.test_accuracy {
                    for (e, v) in curve.iter().enumerate() {
                        out.push_str(&format!("{},{},test_accuracy,{v}\n", it.iteration, e + 1));
                    }
                }
                if let Some(rate) = it.noise_rate {
                    out.push_str(&format!("{},0,noise_rate,{rate}\n", it.iteration));
                }
            }
            emit(&args.out, &out)
        }
    }
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let base = LateStopConfig::from_json_file(&args.config)?;
    if args.m.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one m value (--m)".into(),
        ));
    }
    if args.seeds == 0 {
        return Err(Error::Config(
            "sweep needs at least one seed (--seeds)".into(),
        ));
    }
    rundir::create_empty_dir(&args.out)?;

    let mut rows = Vec::with_capacity(args.m.len());
    for &m in &args.m {
        let mut cells = Vec::with_capacity(args.seeds as usize);
        for s in 0..args.seeds as u64 {
            let mut cfg = base.clone();
            cfg.m_percent = m;
            cfg.master_seed = base.master_seed.wrapping_add(s);
            cfg.validate()?;
            let run_out = args.out.join(format!("m_{m}")).join(format!("seed_{s}"));
            if !args.quiet {
                eprintln!(
                    "sweep: m={m} seed {} -> {}",
                    cfg.master_seed,
                    run_out.display()
                );
            }
            let (result, train, _summary) = execute_run(&cfg, &args.data, None, &run_out, true)?;
            let final_noise_rate = if train.clean_labels.is_some() {
                Some(train.subset(&result.kept)?.noise_rate()?)
            } else {
                None
            };
            let test_accuracy = match &args.test {
                Some(dir) => {
                    let test = rundir::load_dataset_dir(dir)?;
                    let params = result
                        .retrained_params
                        .as_ref()
                        .unwrap_or(&result.final_params);
                    Some(eval::test_accuracy(&result.network, params, &test)?)
                }
                None => None,
            };
            cells.push(eval::SweepCell {
                master_seed: cfg.master_seed,
                iterations: result.iterations.len(),
                kept: result.kept.len(),
                final_noise_rate,
                test_accuracy,
            });
        }
        let noise_rates: Vec<f64> = cells.iter().filter_map(|c| c.final_noise_rate).collect();
        let accs: Vec<f64> = cells.iter().filter_map(|c| c.test_accuracy).collect();
        let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
        rows.push(eval::SweepRow {
            m_percent: m,
            cells,
            mean_noise_rate: mean(&noise_rates),
            mean_test_accuracy: mean(&accs),
        });
    }
    let table = eval::SweepTable { rows };

    let mut json = serde_json::to_string_pretty(&table)?;
    json.push('\n');
    fs::write(args.out.join("sweep.json"), json)?;

    let mut csv =
        String::from("m_percent,master_seed,iterations,kept,final_noise_rate,test_accuracy\n");
    for row in &table.rows {
        for cell in &row.cells {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.m_percent,
                cell.master_seed,
                cell.iterations,
                cell.kept,
                cell.final_noise_rate
                    .map_or(String::new(), |v| v.to_string()),
                cell.test_accuracy.map_or(String::new(), |v| v.to_string()),
            ));
        }
    }
    fs::write(args.out.join("sweep.csv"), csv)?;
    emit_json(&None, &table)
}

/// The JSON object printed to stderr when a command fails.
pub fn error_json(err: &Error) -> String {
    #[derive(Serialize)]
    struct Inner<'a> {
        code: i32,
        kind: &'a str,
        message: String,
    }
    #[derive(Serialize)]
    struct Wrapper<'a> {
        error: Inner<'a>,
    }
    serde_json::to_string(&Wrapper {
        error: Inner {
            code: err.exit_code(),
            kind: err.kind(),
            message: err.to_string(),
        },
    })
    .unwrap_or_else(|_| format!("{{\"error\":{{\"code\":{}}}}}", err.exit_code()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn error_json_is_parseable_and_coded() {
        let err = Error::Config("bad".into());
        let value: serde_json::Value = serde_json::from_str(&error_json(&err)).unwrap();
        assert_eq!(value["error"]["code"], 2);
        assert_eq!(value["error"]["kind"], "config");
    }
}
