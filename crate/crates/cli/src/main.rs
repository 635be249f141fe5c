//! `rosetta`: validate registries, fuse responses, report statistics,
//! generate synthetic cohorts, and train or evaluate the cascade.
//!
//! Every subcommand that takes `--out` writes `manifest.json` next to its
//! outputs. Exit status: 0 on success, 1 on validation or runtime errors,
//! 2 on usage errors.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rosetta_core::analytics;
use rosetta_core::fusion::{self, ConflictPolicy};
use rosetta_core::ml::{self, cascade, CascadeModel, CascadeParams, CvParams, Dataset, GbdtParams, SelectParams};
use rosetta_core::registry::{self, Gender, Registry};
use rosetta_core::synth::{self, ClassCounts, GeneratorSpec};

use manifest::Manifest;

#[derive(Debug, Parser)]
#[command(
    name = "rosetta",
    version,
    about = "Questionnaire harmonization and two-stage screening models"
)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores). Results do
    /// not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a registry directory against every mapping rule.
    Validate {
        #[arg(long)]
        registry: PathBuf,
        /// Also write validation.txt, validation.json and a manifest here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-leaf fusion table, global totals and the instrument overlap matrix.
    Stats {
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Externally quoted source-question total reported next to the computed one.
        #[arg(long, default_value_t = analytics::REFERENCE_SOURCE_TOTAL)]
        reference_total: usize,
    },
    /// Translate and merge raw responses into one Rosetta vector per subject.
    Fuse {
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Policy::Max)]
        policy: Policy,
    },
    /// Generate a synthetic labeled cohort in raw records form.
    Synth {
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Generator spec (JSON). Defaults to the case-study layout.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Overrides the spec seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the spec effect size.
        #[arg(long)]
        effect_size: Option<f64>,
        /// Overrides class counts: autism,adhd,neither.
        #[arg(long, value_parser = parse_counts)]
        counts: Option<ClassCounts>,
    },
    /// Select features and fit the cascade on a fused cohort.
    Train {
        #[command(flatten)]
        cohort: CohortArgs,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Score a trained model on a fused cohort.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        cohort: CohortArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified cross-validation of the full training pipeline.
    Cv {
        #[command(flatten)]
        cohort: CohortArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Render a Rosetta question for a named subject.
    Render {
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        name: String,
        #[arg(long, value_enum, default_value_t = GenderArg::Unspecified)]
        gender: GenderArg,
    },
}

#[derive(Debug, Args)]
struct CohortArgs {
    /// Fused wide table written by `fuse`.
    #[arg(long)]
    cohort: PathBuf,
    /// Registry supplying code counts for imputation fallbacks.
    #[arg(long)]
    registry: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    max_features: usize,
    /// Stage-1 probability at which stage 2 runs.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value_t = 100)]
    rounds: usize,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    /// Inner folds used by feature selection.
    #[arg(long, default_value_t = 3)]
    select_folds: usize,
    #[arg(long, value_enum, default_value_t = Selection::Greedy)]
    selection: Selection,
}

impl ModelArgs {
    fn cascade(&self) -> CascadeParams {
        CascadeParams {
            gbdt: GbdtParams {
                rounds: self.rounds,
                max_depth: self.depth,
                learning_rate: self.learning_rate,
                seed: self.seed,
                ..GbdtParams::default()
            },
            threshold: self.threshold,
            ..CascadeParams::default()
        }
    }

    fn select(&self) -> SelectParams {
        SelectParams {
            max_features: self.max_features,
            folds: self.select_folds,
            seed: self.seed,
            method: match self.selection {
                Selection::Greedy => ml::SelectMethod::Greedy,
                Selection::GainRanked => ml::SelectMethod::GainRanked,
            },
            ..SelectParams::default()
        }
    }

    fn record(&self, m: &mut Manifest) {
        m.param("max_features", self.max_features)
            .param("threshold", self.threshold)
            .param("rounds", self.rounds)
            .param("depth", self.depth)
            .param("learning_rate", self.learning_rate)
            .param("select_folds", self.select_folds)
            .param("selection", format!("{:?}", self.selection).to_lowercase())
            .seed(self.seed);
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Policy {
    Max,
    First,
    Latest,
}

impl From<Policy> for ConflictPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Max => ConflictPolicy::Max,
            Policy::First => ConflictPolicy::First,
            Policy::Latest => ConflictPolicy::Latest,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GenderArg {
    Male,
    Female,
    Unspecified,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Selection {
    Greedy,
    GainRanked,
}

fn parse_counts(s: &str) -> std::result::Result<ClassCounts, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("{p:?} is not a count")))
        .collect::<std::result::Result<_, _>>()?;
    match parts[..] {
        [autism, adhd, neither] => Ok(ClassCounts { autism, adhd, neither }),
        _ => Err("expected three counts: autism,adhd,neither".into()),
    }
}

/// A failure that has already been reported in full on stderr/stdout.
#[derive(Debug)]
struct Reported;

impl std::fmt::Display for Reported {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("reported")
    }
}

impl std::error::Error for Reported {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.is::<Reported>() {
                eprintln!("error: {}", one_line(&e));
            }
            ExitCode::from(1)
        }
    }
}

fn one_line(e: &anyhow::Error) -> String {
    e.chain().map(|c| c.to_string()).collect::<Vec<_>>().join(": ")
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate { registry, out } => cmd_validate(&registry, out.as_deref()),
        Command::Stats {
            registry,
            out,
            reference_total,
        } => cmd_stats(&registry, &out, reference_total),
        Command::Fuse {
            registry,
            records,
            labels,
            out,
            policy,
        } => cmd_fuse(&registry, &records, &labels, &out, policy.into()),
        Command::Synth {
            registry,
            out,
            spec,
            seed,
            effect_size,
            counts,
        } => cmd_synth(&registry, &out, spec.as_deref(), seed, effect_size, counts),
        Command::Train { cohort, out, model } => cmd_train(&cohort, &out, &model),
        Command::Eval { model, cohort, out } => cmd_eval(&model, &cohort, &out),
        Command::Cv {
            cohort,
            out,
            folds,
            model,
        } => cmd_cv(&cohort, &out, folds, &model),
        Command::Render {
            registry,
            id,
            name,
            gender,
        } => cmd_render(&registry, &id, &name, gender),
    }
}

fn load_registry(dir: &Path) -> Result<Registry> {
    Registry::load_dir(dir).with_context(|| format!("loading registry {}", dir.display()))
}

/// Loads a registry and refuses to continue if it has rule errors.
fn load_valid_registry(dir: &Path) -> Result<Registry> {
    let reg = load_registry(dir)?;
    let report = registry::validate(&reg);
    if report.error_count() > 0 {
        for d in report
            .diagnostics
            .iter()
            .filter(|d| d.severity == registry::Severity::Error)
        {
            eprintln!("{d}");
        }
        eprintln!(
            "error: registry {} has {} validation errors",
            dir.display(),
            report.error_count()
        );
        return Err(Reported.into());
    }
    Ok(reg)
}

fn create_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_validate(dir: &Path, out: Option<&Path>) -> Result<()> {
    let reg = load_registry(dir)?;
    let report = registry::validate(&reg);
    print!("{}", report.to_text());
    if let Some(out) = out {
        create_out(out)?;
        let mut m = Manifest::new("validate");
        m.input(dir)?;
        m.write(out, "validation.txt", report.to_text().as_bytes())?;
        m.write(out, "validation.json", report.to_json().as_bytes())?;
        m.finish(out)?;
    }
    if report.error_count() > 0 {
        return Err(Reported.into());
    }
    Ok(())
}

fn cmd_stats(dir: &Path, out: &Path, reference_total: usize) -> Result<()> {
    let reg = load_registry(dir)?;
    let stats = analytics::leaf_stats(&reg);
    let global = analytics::global_stats_with_reference(&reg, reference_total);
    let matrix = analytics::overlap_matrix(&reg);
    create_out(out)?;
    let mut m = Manifest::new("stats");
    m.input(dir)?.param("reference_total", reference_total);
    for name in analytics::emit_reports(&stats, &global, &matrix, out)? {
        m.written(out, name)?;
    }
    m.finish(out)?;
    println!(
        "{} leaves, {} source questions, {} Rosetta questions",
        stats.len(),
        global.source_questions,
        global.rosetta_questions
    );
    if global.discrepancy() {
        println!(
            "note: computed source total {} differs from reference total {}",
            global.source_questions, global.reference_source_questions
        );
    }
    Ok(())
}

fn cmd_fuse(dir: &Path, records: &Path, labels: &Path, out: &Path, policy: ConflictPolicy) -> Result<()> {
    let reg = load_valid_registry(dir)?;
    let recs = fusion::parse_records(&read(records)?)
        .map_err(|e| e.in_file(records.file_name().unwrap_or_default().to_string_lossy()))?;
    let labs = fusion::parse_labels(&read(labels)?).with_context(|| format!("parsing {}", labels.display()))?;
    let cohort = fusion::build_cohort(&recs, &labs, &reg, policy)?;
    create_out(out)?;
    let mut m = Manifest::new("fuse");
    m.input(dir)?.input(records)?.input(labels)?;
    m.param("policy", policy.to_string());
    m.write(out, "fused.csv", cohort.to_csv()?.as_bytes())?;
    m.write(out, "provenance.json", cohort.provenance_json()?.as_bytes())?;
    m.write(out, "missingness.csv", cohort.missingness_csv().as_bytes())?;
    m.finish(out)?;
    let [a, d, n] = cohort.class_counts();
    println!(
        "{} subjects (autism {a}, adhd {d}, neither {n}), policy {policy}",
        cohort.len()
    );
    Ok(())
}

fn cmd_synth(
    dir: &Path,
    out: &Path,
    spec_path: Option<&Path>,
    seed: Option<u64>,
    effect_size: Option<f64>,
    counts: Option<ClassCounts>,
) -> Result<()> {
    let reg = load_valid_registry(dir)?;
    let mut spec = match spec_path {
        Some(p) => GeneratorSpec::from_json(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => GeneratorSpec::case_study(1.5, 0),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(e) = effect_size {
        spec.effect_size = e;
    }
    if let Some(c) = counts {
        spec.class_counts = c;
    }
    let cohort = synth::generate(&spec, &reg)?;
    create_out(out)?;
    let mut m = Manifest::new("synth");
    m.input(dir)?;
    if let Some(p) = spec_path {
        m.input(p)?;
    }
    m.param("effect_size", spec.effect_size)
        .param("class_counts", spec.class_counts)
        .seed(spec.seed);
    m.write(out, "records.tsv", fusion::records_to_text(&cohort.records).as_bytes())?;
    m.write(out, "labels.tsv", fusion::labels_to_text(&cohort.labels).as_bytes())?;
    m.write(out, "spec.json", spec.to_json()?.as_bytes())?;
    m.finish(out)?;
    println!("{} subjects, {} assessments", cohort.labels.len(), cohort.records.len());
    Ok(())
}

fn load_dataset(args: &CohortArgs) -> Result<Dataset> {
    let counts = match &args.registry {
        Some(dir) => {
            let reg = load_registry(dir)?;
            Some(
                reg.rosetta_questions()
                    .iter()
                    .map(|q| (q.id.clone(), q.code_count() as u32))
                    .collect(),
            )
        }
        None => None,
    };
    Dataset::from_csv(&read(&args.cohort)?, counts.as_ref())
        .with_context(|| format!("parsing {}", args.cohort.display()))
}

fn cohort_inputs(m: &mut Manifest, args: &CohortArgs) -> Result<()> {
    m.input(&args.cohort)?;
    if let Some(dir) = &args.registry {
        m.input(dir)?;
    }
    Ok(())
}

fn cmd_train(args: &CohortArgs, out: &Path, model_args: &ModelArgs) -> Result<()> {
    let data = load_dataset(args)?;
    let model = ml::train_pipeline(&data, &model_args.cascade(), &model_args.select())?;
    create_out(out)?;
    let mut m = Manifest::new("train");
    cohort_inputs(&mut m, args)?;
    model_args.record(&mut m);
    m.write(out, "model.json", model.to_json()?.as_bytes())?;
    let features: String = model.features.iter().map(|f| format!("{f}\n")).collect();
    m.write(out, "features.txt", features.as_bytes())?;
    m.finish(out)?;
    println!(
        "{} features selected from {} subjects",
        model.features.len(),
        data.len()
    );
    for fill in model.imputer.fills.iter().filter(|f| f.fallback) {
        eprintln!(
            "warning: {} never observed; imputed with mid code {}",
            fill.feature, fill.value
        );
    }
    Ok(())
}

fn cmd_eval(model_path: &Path, args: &CohortArgs, out: &Path) -> Result<()> {
    let model =
        CascadeModel::from_json(&read(model_path)?).with_context(|| format!("loading {}", model_path.display()))?;
    let data = load_dataset(args)?;
    let eval = cascade::evaluate_model(&model, &data);
    create_out(out)?;
    let mut m = Manifest::new("eval");
    m.input(model_path)?;
    cohort_inputs(&mut m, args)?;
    m.write(out, "predictions.csv", eval.predictions_csv().as_bytes())?;
    m.write(out, "eval.json", eval.to_json()?.as_bytes())?;
    m.finish(out)?;
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "n={} accuracy={:.4} auc_stage1={} auc_stage2={} stage2_calls={}",
        eval.n,
        eval.accuracy,
        show(eval.auc_stage1),
        show(eval.auc_stage2),
        model.stage2_calls()
    );
    Ok(())
}

fn cmd_cv(args: &CohortArgs, out: &Path, folds: usize, model_args: &ModelArgs) -> Result<()> {
    if folds < 2 {
        bail!("--folds must be at least 2");
    }
    let data = load_dataset(args)?;
    let params = CvParams {
        folds,
        seed: model_args.seed,
        cascade: model_args.cascade(),
        select: model_args.select(),
    };
    let report = ml::cross_validate(&data, &params)?;
    create_out(out)?;
    let mut m = Manifest::new("cv");
    cohort_inputs(&mut m, args)?;
    model_args.record(&mut m);
    m.param("folds", folds);
    m.write(out, "cv_report.csv", report.to_csv().as_bytes())?;
    m.write(out, "cv_report.json", report.to_json()?.as_bytes())?;
    m.finish(out)?;
    println!(
        "{folds}-fold auc_stage1={:.4} auc_stage2={:.4}",
        report.auc_stage1, report.auc_stage2
    );
    Ok(())
}

fn cmd_render(dir: &Path, id: &str, name: &str, gender: GenderArg) -> Result<()> {
    let reg = load_registry(dir)?;
    let q = reg
        .rosetta(id)
        .ok_or_else(|| rosetta_core::Error::UnknownRosetta(id.to_string()))?;
    let gender = match gender {
        GenderArg::Male => Gender::Male,
        GenderArg::Female => Gender::Female,
        GenderArg::Unspecified => Gender::Unspecified,
    };
    println!("{}", q.render(name, gender)?);
    for c in &q.codes {
        println!("  {}. {}", c.code, c.label);
    }
    Ok(())
}
