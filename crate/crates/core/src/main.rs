use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use multical::harness::{evaluate, gen_synthetic, make_splits, Method, MetricsReport, SplitSpec, SyntheticSpec};
use multical::hjz::{Adversary, HjzConfig, Learner};
use multical::io::{self, ExperimentConfig, GroupsFile, ModelFile, PredictionFile};
use multical::metrics::SmEceConfig;
use multical::{Dataset, Fitted, GroupCollection, DEFAULT_LAMBDA};

#[derive(Parser)]
#[command(name = "multical", version, about = "Measure and post-process multicalibration of binary predictors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Classic {
    Platt,
    Isotonic,
    Temperature,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Multi {
    Hkrr,
    Hjz,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Benchmark,
    Calibrated,
}

#[derive(clap::Args)]
struct FitArgs {
    /// Prediction file (CSV with score and label columns).
    #[arg(long)]
    predictions: PathBuf,
    /// Fraction of the training split used for fitting.
    #[arg(long)]
    cf: f64,
    #[arg(long)]
    seed: u64,
    /// Fit on the whole training split instead of a carved-out part.
    #[arg(long)]
    reuse_training_data: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Population and worst-group metrics of a prediction file.
    Measure {
        #[arg(long)]
        predictions: PathBuf,
        /// TOML file with [[groups]] entries.
        #[arg(long)]
        groups: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit one classic calibrator on the calibration split and apply it to every row.
    Calibrate {
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, value_enum)]
        method: Classic,
        /// Groups for the before/after metrics; the whole population when omitted.
        #[arg(long)]
        groups: Option<PathBuf>,
    },
    /// Fit HKRR or an HJZ variant on the calibration split and apply it to every row.
    Multicalibrate {
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, value_enum)]
        method: Multi,
        #[arg(long)]
        groups: PathBuf,
        /// HKRR violation tolerance (required for hkrr).
        #[arg(long)]
        alpha: Option<f64>,
        /// HJZ bin width (HKRR always uses the default).
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, value_enum, default_value = "hedge")]
        learner: LearnerArg,
        #[arg(long, value_enum, default_value = "best-response")]
        adversary: AdversaryArg,
        #[arg(long, default_value_t = 0.9)]
        learner_decay: f64,
        #[arg(long, default_value_t = 0.9)]
        adversary_decay: f64,
        #[arg(long, default_value_t = multical::hjz::DEFAULT_ROUNDS)]
        rounds: usize,
    },
    /// Run the full split / fit / select protocol from an experiment config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides split.seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides output_dir from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Write a synthetic dataset, its group definitions and its recorded metrics.
    Synth {
        #[arg(long)]
        seed: u64,
        /// Row count; defaults to the spec file's value or 50000.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum, default_value = "benchmark")]
        preset: Preset,
        /// TOML synthetic spec; replaces the preset.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnerArg {
    Hedge,
    Prod,
    OptimisticHedge,
    GradientDescent,
}

#[derive(Clone, Copy, ValueEnum)]
enum AdversaryArg {
    BestResponse,
    Hedge,
    OptimisticHedge,
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_groups(path: &Path, file: &PredictionFile) -> Result<GroupCollection> {
    let groups = GroupsFile::load(path).with_context(|| format!("reading groups {}", path.display()))?;
    let built = multical::harness::build_groups(&groups.groups, &file.attributes, groups.gamma)?;
    for name in &built.dropped {
        eprintln!("dropped group {name}: not above {} of the rows", groups.gamma);
    }
    if built.collection.is_empty() {
        bail!("no group survives the size filter");
    }
    Ok(built.collection)
}

fn measure(predictions: &Path, groups: &Path, out: Option<&Path>) -> Result<()> {
    let file = io::load_predictions(predictions).with_context(|| format!("reading {}", predictions.display()))?;
    let groups = load_groups(groups, &file)?;
    let d = &file.dataset;
    let report = evaluate(&d.scores(), &d.labels(), &groups, &SmEceConfig::default())?;
    write_json(&report, out)
}

#[derive(Serialize)]
struct SplitMetrics {
    validation: MetricsReport,
    test: MetricsReport,
}

#[derive(Serialize)]
struct FitSummary {
    method: String,
    cf: f64,
    seed: u64,
    calibration_rows: usize,
    patches: usize,
    before: SplitMetrics,
    after: SplitMetrics,
}

fn fit_and_apply(args: &FitArgs, groups: Option<&Path>, method: Method) -> Result<()> {
    let file = io::load_predictions(&args.predictions)
        .with_context(|| format!("reading {}", args.predictions.display()))?;
    let n = file.dataset.len();
    let groups = match groups {
        Some(p) => load_groups(p, &file)?,
        None => GroupCollection::whole_population(n),
    };
    let spec = SplitSpec {
        reuse_training_data: args.reuse_training_data,
        n_splits: 1,
        ..SplitSpec::with_cf(args.cf, args.seed)
    };
    let splits = make_splits(n, &spec)?;
    let mut data: Dataset = file.dataset.with_groups(groups.names(), &groups.masks())?;
    if splits.constant_half {
        data = data.with_scores(&vec![0.5; n])?;
    }
    if splits.calib.is_empty() {
        bail!("calibration fraction {} leaves no calibration rows", args.cf);
    }
    let calib = data.subset(&splits.calib)?;
    let fitted: Fitted = method.fit(&calib)?;
    let scores = fitted.apply(&data)?;

    let cfg = SmEceConfig::default();
    let metrics = |s: &[f64], idx: &[usize]| -> Result<MetricsReport> {
        let sub = data.subset(idx)?;
        let part: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
        Ok(evaluate(&part, &sub.labels(), &GroupCollection::from_dataset(&sub), &cfg)?)
    };
    let base = data.scores();
    let summary = FitSummary {
        method: method.to_string(),
        cf: args.cf,
        seed: args.seed,
        calibration_rows: calib.len(),
        patches: fitted.patch_count(),
        before: SplitMetrics { validation: metrics(&base, &splits.val)?, test: metrics(&base, &splits.test)? },
        after: SplitMetrics { validation: metrics(&scores, &splits.val)?, test: metrics(&scores, &splits.test)? },
    };

    fs::create_dir_all(&args.out_dir)?;
    ModelFile { group_names: groups.names(), model: fitted }.save(&args.out_dir.join("model.json"))?;
    let calibrated = PredictionFile {
        dataset: file.dataset.with_scores(&scores)?,
        attributes: file.attributes.clone(),
        sample_ids: file.sample_ids.clone(),
    };
    io::save_predictions(&calibrated, &args.out_dir.join("calibrated.csv"))?;
    write_json(&summary, Some(&args.out_dir.join("metrics.json")))?;
    println!(
        "{}: test max smECE {:.4} -> {:.4}, {} patches",
        summary.method, summary.before.test.max_smece, summary.after.test.max_smece, summary.patches
    );
    Ok(())
}

fn synth(seed: u64, n: Option<usize>, preset: Preset, spec: Option<&Path>, out_dir: &Path) -> Result<()> {
    let mut spec = match spec {
        Some(p) => toml::from_str::<SyntheticSpec>(&fs::read_to_string(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => match preset {
            Preset::Benchmark => SyntheticSpec::benchmark(50_000, seed),
            Preset::Calibrated => SyntheticSpec::calibrated(50_000, seed),
        },
    };
    spec.seed = seed;
    if let Some(n) = n {
        spec.n = n;
    }
    let data = gen_synthetic(&spec)?;
    fs::create_dir_all(out_dir)?;
    let file = PredictionFile { dataset: data.dataset.clone(), attributes: data.attributes.clone(), sample_ids: None };
    io::save_predictions(&file, &out_dir.join("data.csv"))?;
    GroupsFile { gamma: spec.gamma, groups: spec.group_specs() }.save(&out_dir.join("groups.toml"))?;

    let mut truth = csv::Writer::from_path(out_dir.join("truth.csv"))?;
    truth.write_record(["row", "true_prob"])?;
    for (i, p) in data.true_probs.iter().enumerate() {
        truth.write_record([i.to_string(), p.to_string()])?;
    }
    truth.flush()?;

    let d = &data.dataset;
    let report = evaluate(&d.scores(), &d.labels(), &data.groups, &SmEceConfig::default())?;
    write_json(&report, Some(&out_dir.join("metrics.json")))?;
    println!("wrote {} rows, {} groups, max smECE {:.4}", d.len(), data.groups.len(), report.max_smece);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Measure { predictions, groups, out } => measure(&predictions, &groups, out.as_deref()),
        Command::Calibrate { fit, method, groups } => {
            let method = match method {
                Classic::Platt => Method::Platt,
                Classic::Isotonic => Method::Isotonic,
                Classic::Temperature => Method::Temperature,
            };
            fit_and_apply(&fit, groups.as_deref(), method)
        }
        Command::Multicalibrate {
            fit,
            method,
            groups,
            alpha,
            lambda,
            learner,
            adversary,
            learner_decay,
            adversary_decay,
            rounds,
        } => {
            let method = match method {
                Multi::Hkrr => {
                    let Some(alpha) = alpha else { bail!("--alpha is required for hkrr") };
                    Method::Hkrr { alpha }
                }
                Multi::Hjz => {
                    let learner = match learner {
                        LearnerArg::Hedge => Learner::Hedge,
                        LearnerArg::Prod => Learner::Prod,
                        LearnerArg::OptimisticHedge => Learner::OptimisticHedge,
                        LearnerArg::GradientDescent => Learner::GradientDescent,
                    };
                    let adversary = match adversary {
                        AdversaryArg::BestResponse => Adversary::BestResponse,
                        AdversaryArg::Hedge => Adversary::Hedge,
                        AdversaryArg::OptimisticHedge => Adversary::OptimisticHedge,
                    };
                    let cfg = HjzConfig { rounds, lambda, ..HjzConfig::new(learner, adversary) }
                        .with_decays(learner_decay, adversary_decay);
                    cfg.validate()?;
                    Method::Hjz(cfg)
                }
            };
            fit_and_apply(&fit, Some(&groups), method)
        }
        Command::Sweep { config, seed, output_dir } => {
            let mut cfg = ExperimentConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.split.seed = s;
            }
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            let (outcome, files) = io::run_experiment(&cfg)?;
            let failed = outcome.runs.iter().filter(|r| r.error.is_some()).count();
            for choice in &outcome.best_by_family {
                println!("{:<12} {}", choice.family, choice.point);
            }
            if failed > 0 {
                eprintln!("{failed} of {} runs failed; see summary.json", outcome.runs.len());
            }
            println!("report written to {}", files.table.display());
            Ok(())
        }
        Command::Synth { seed, n, preset, spec, out_dir } => synth(seed, n, preset, spec.as_deref(), &out_dir),
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
