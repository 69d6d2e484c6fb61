mod config;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use har_core::adaboost::BoostConfig;
use har_core::convnet::NetConfig;
use har_core::datasets::{load_canonical, load_motionsense, write_canonical, DatasetBundle};
use har_core::experiments::{save_results, EngineConfig, ExperimentContext, Method, SplitMode, DEFAULT_HYB_FRACTION};
use har_core::report::{report_table, report_table_from_csv, ReportTable};
use har_core::similarity::{GammaMode, SimilarityKind};
use har_core::synth::{generate_population, PopulationSpec};

#[derive(Parser)]
#[command(name = "har", version, about = "Similarity-personalized activity recognition")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a dataset to the canonical windows/subjects CSV pair.
    Ingest(IngestArgs),
    /// Write the subject similarity matrices.
    Similarity(SimilarityArgs),
    /// Generate a synthetic population as canonical CSV.
    Synth(SynthArgs),
    /// Run PML / PDL / DL over every subject and write results.csv.
    Run(RunArgs),
    /// Render the summary table from a results CSV.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DatasetKind {
    Unimib,
    Motionsense,
    Canonical,
    Synth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum NetKind {
    Reference,
    Tiny,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

/// Comma-separated list parsed as a single flag value, so that a later
/// occurrence replaces an earlier one.
#[derive(Clone, Debug, PartialEq)]
struct List<T>(Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let items = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.parse::<T>().map_err(|e| e.to_string()))
            .collect::<std::result::Result<Vec<T>, String>>()?;
        if items.is_empty() {
            return Err("empty list".into());
        }
        Ok(List(items))
    }
}

impl<T: fmt::Display> fmt::Display for List<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(T::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// `median` or a positive number.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Gamma(GammaMode);

impl FromStr for Gamma {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.trim() == "median" {
            return Ok(Gamma(GammaMode::MedianHeuristic));
        }
        match s.trim().parse::<f64>() {
            Ok(g) if g > 0.0 && g.is_finite() => Ok(Gamma(GammaMode::Fixed(g))),
            _ => Err(format!("expected `median` or a positive number, got `{s}`")),
        }
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            GammaMode::MedianHeuristic => f.write_str("median"),
            GammaMode::Fixed(g) => write!(f, "{g}"),
        }
    }
}

#[derive(Args)]
struct Source {
    #[arg(long, value_enum)]
    dataset: DatasetKind,
    /// Required except for `--dataset synth`, which generates the default
    /// two-cluster population when no directory is given.
    #[arg(long)]
    dataset_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimilarityArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value = "physical,sensor,physical_sensor")]
    sim_kinds: List<SimilarityKind>,
    #[arg(long, default_value = "median")]
    gamma: Gamma,
    #[arg(long)]
    out: PathBuf,
    /// key=value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 12)]
    subjects: usize,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 10)]
    windows_per_class: usize,
    #[arg(long, default_value_t = 150)]
    window_length: usize,
    #[arg(long, default_value_t = 2)]
    clusters: usize,
    #[arg(long, default_value_t = 1.0)]
    inter: f64,
    #[arg(long, default_value_t = 0.3)]
    intra: f64,
    /// Draw physical attributes independently of the style cluster.
    #[arg(long)]
    no_correlation: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value = "PML,PDL,DL")]
    methods: List<Method>,
    #[arg(long, default_value = "physical,sensor,physical_sensor")]
    sim_kinds: List<SimilarityKind>,
    #[arg(long, default_value = "SI,HYB")]
    splits: List<SplitMode>,
    #[arg(long, default_value_t = DEFAULT_HYB_FRACTION)]
    hyb_fraction: f64,
    #[arg(long, default_value_t = BoostConfig::default().rounds)]
    rounds: usize,
    #[arg(long, value_enum, default_value_t = NetKind::Reference)]
    net: NetKind,
    /// Overrides the network's default epoch count.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value = "median")]
    gamma: Gamma,
    #[arg(long)]
    out: PathBuf,
    /// key=value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    results: PathBuf,
    /// Also write table.txt and table.csv here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match try_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_main() -> Result<()> {
    let cli = Cli::parse_from(expand_args(std::env::args_os().collect())?);
    match cli.command {
        Command::Ingest(a) => ingest(&a),
        Command::Similarity(a) => similarity(&a),
        Command::Synth(a) => synth(&a),
        Command::Run(a) => run(&a),
        Command::Report(a) => report(&a),
    }
}

/// Splices a `--config` file into the arguments of its subcommand.
fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config::config_path(&args) else {
        return Ok(args);
    };
    let pairs = config::read_config(&path)?;
    let command = Cli::command();
    let sub = args
        .get(1)
        .and_then(|s| command.find_subcommand(s.to_string_lossy().as_ref()))
        .with_context(|| "--config must follow a subcommand")?;
    let known: Vec<String> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    config::splice_config(&args, &pairs, &known, &path)
}

fn load(source: &Source) -> Result<DatasetBundle> {
    let dir = source.dataset_dir.as_deref();
    let canonical = |dir: &Path| {
        load_canonical(&dir.join("windows.csv"), &dir.join("subjects.csv"))
            .with_context(|| format!("loading canonical CSV from {}", dir.display()))
    };
    let need_dir = || dir.with_context(|| format!("--dataset {:?} needs --dataset-dir", source.dataset));
    let bundle = match source.dataset {
        DatasetKind::Unimib => canonical(need_dir()?)?.with_name("unimib"),
        DatasetKind::Canonical => {
            let dir = need_dir()?;
            let name = dir
                .canonicalize()
                .ok()
                .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                .unwrap_or_else(|| "canonical".into());
            canonical(dir)?.with_name(name)
        }
        DatasetKind::Motionsense => {
            let dir = need_dir()?;
            load_motionsense(dir)
                .with_context(|| format!("loading Motion Sense from {}", dir.display()))?
                .with_name("motionsense")
        }
        DatasetKind::Synth => match dir {
            Some(dir) => canonical(dir)?.with_name("synth"),
            None => generate_population(&PopulationSpec::two_cluster(source.seed))?,
        },
    };
    log::info!(
        "{}: {} subjects, {} windows, {} labels",
        bundle.name(),
        bundle.subjects().len(),
        bundle.windows().len(),
        bundle.label_set().len()
    );
    Ok(bundle)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn ingest(args: &IngestArgs) -> Result<()> {
    let bundle = load(&args.source)?;
    create_dir(&args.out)?;
    write_canonical(&bundle, &args.out)?;
    println!(
        "{}: wrote {} subjects and {} windows to {}",
        bundle.name(),
        bundle.subjects().len(),
        bundle.windows().len(),
        args.out.display()
    );
    Ok(())
}

fn similarity(args: &SimilarityArgs) -> Result<()> {
    let bundle = load(&args.source)?;
    let ctx = ExperimentContext::new(&bundle, args.gamma.0)?;
    create_dir(&args.out)?;
    for &kind in &args.sim_kinds.0 {
        let path = args.out.join(format!("similarity_{}.csv", kind.as_str()));
        ctx.matrix(kind)?.save_csv(&path)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let spec = PopulationSpec {
        n_subjects: args.subjects,
        n_classes: args.classes,
        windows_per_class: args.windows_per_class,
        window_length: args.window_length,
        n_style_clusters: args.clusters,
        inter_subject_scale: args.inter,
        intra_subject_scale: args.intra,
        physical_style_correlation: !args.no_correlation,
        seed: args.seed,
        ..PopulationSpec::two_cluster(args.seed)
    };
    let bundle = generate_population(&spec)?;
    create_dir(&args.out)?;
    write_canonical(&bundle, &args.out)?;
    println!(
        "wrote {} subjects and {} windows to {}",
        bundle.subjects().len(),
        bundle.windows().len(),
        args.out.display()
    );
    Ok(())
}

fn engine(args: &RunArgs) -> Result<EngineConfig> {
    if !(0.0..=1.0).contains(&args.hyb_fraction) {
        bail!("--hyb-fraction must lie in [0, 1], got {}", args.hyb_fraction);
    }
    let mut net = match args.net {
        NetKind::Reference => NetConfig::reference(0, 0),
        NetKind::Tiny => NetConfig::tiny(0),
    };
    if let Some(epochs) = args.epochs {
        net.epochs = epochs;
    }
    Ok(EngineConfig {
        boost: BoostConfig {
            rounds: args.rounds,
            ..BoostConfig::default()
        },
        net,
        gamma_mode: args.gamma.0,
        hyb_fraction: args.hyb_fraction,
        master_seed: args.source.seed,
    })
}

/// Every setting of a run, in the format `--config` reads.
fn resolved_config(args: &RunArgs, engine: &EngineConfig) -> String {
    let mut pairs = vec![("dataset", args.source.dataset.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default())];
    if let Some(dir) = &args.source.dataset_dir {
        pairs.push(("dataset-dir", dir.display().to_string()));
    }
    pairs.extend([
        ("seed", args.source.seed.to_string()),
        ("methods", args.methods.to_string()),
        ("sim-kinds", args.sim_kinds.to_string()),
        ("splits", args.splits.to_string()),
        ("hyb-fraction", args.hyb_fraction.to_string()),
        ("rounds", args.rounds.to_string()),
        ("net", args.net.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()),
        ("epochs", engine.net.epochs.to_string()),
        ("gamma", args.gamma.to_string()),
        ("out", args.out.display().to_string()),
    ]);
    config::render_config(&pairs)
}

fn write_table(table: &ReportTable, dir: &Path) -> Result<()> {
    fs::write(dir.join("table.txt"), table.render_text())?;
    fs::write(dir.join("table.csv"), table.to_csv())?;
    Ok(())
}

fn run(args: &RunArgs) -> Result<()> {
    let engine = engine(args)?;
    let bundle = load(&args.source)?;
    create_dir(&args.out)?;
    fs::write(args.out.join("config.txt"), resolved_config(args, &engine))?;
    let ctx = ExperimentContext::new(&bundle, engine.gamma_mode)?;
    let results = ctx.run_plan(&args.methods.0, &args.sim_kinds.0, &args.splits.0, &engine)?;
    save_results(&results, &args.out.join("results.csv"))?;
    let table = report_table(&results);
    write_table(&table, &args.out)?;
    print!("{}", table.render_text());
    Ok(())
}

fn report(args: &ReportArgs) -> Result<()> {
    let table = report_table_from_csv(&args.results)
        .with_context(|| format!("reading results from {}", args.results.display()))?;
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_table(&table, dir)?;
    }
    match args.format {
        Format::Text => print!("{}", table.render_text()),
        Format::Csv => print!("{}", table.to_csv()),
    }
    Ok(())
}
