use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use stentconv::corpus::SubsetMode;
use stentconv::graph::SignFilter;
use stentconv::model::Ablation;
use stentconv_cli::{
    cmd_build_graph, cmd_eval, cmd_export_graph, cmd_extract_entities, cmd_ingest, cmd_score_stance, cmd_train,
    label_names, PipelineConfig, PipelineError, RunOptions, RunReport,
};

#[derive(Parser)]
#[command(name = "stentconv", version, about = "User-entity stance graphs for agreement classification")]
struct Cli {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// train a single seed instead of the configured list
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum AblationArg {
    Full,
    TextOnly,
    GcnOnly,
}

impl From<AblationArg> for Ablation {
    fn from(a: AblationArg) -> Self {
        match a {
            AblationArg::Full => Ablation::Full,
            AblationArg::TextOnly => Ablation::TextOnly,
            AblationArg::GcnOnly => Ablation::GcnOnly,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SubsetArg {
    Both,
    Either,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    All,
    Positive,
    Negative,
}

impl From<SignArg> for SignFilter {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::All => SignFilter::All,
            SignArg::Positive => SignFilter::Positive,
            SignArg::Negative => SignFilter::Negative,
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    /// defaults to the configured ablation
    #[arg(long, value_enum)]
    ablation: Option<AblationArg>,
    /// defaults to the configured subset
    #[arg(long, value_enum)]
    subset: Option<SubsetArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the corpus and print label fractions per subreddit
    Ingest,
    /// Index entity mentions per post
    ExtractEntities,
    /// Score, centre and sign-split user-entity stances on the training split
    ScoreStance,
    /// Select target entities and build the signed graph
    BuildGraph {
        #[arg(long, value_enum, default_value = "all")]
        sign_filter: SignArg,
    },
    /// Train one model per seed and report test metrics
    Train(RunArgs),
    /// Re-evaluate saved checkpoints
    Eval(RunArgs),
    /// Write the graph as GEXF
    ExportGraph {
        #[arg(long, value_enum, default_value = "all")]
        sign_filter: SignArg,
        /// defaults to graph.gexf in the output directory
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(dir) = &cli.out_dir {
        config.paths.out_dir = Some(dir.clone());
    }
    if let Some(seed) = cli.seed {
        config.train.seeds = vec![seed];
    }
    config.validate()?;
    Ok(config)
}

fn run_options(config: &PipelineConfig, args: &RunArgs) -> RunOptions {
    RunOptions {
        ablation: args.ablation.map_or(config.train.ablation, Ablation::from),
        subset: match args.subset {
            Some(SubsetArg::Both) => SubsetMode::Both,
            Some(SubsetArg::Either) => SubsetMode::Either,
            None => config.subset,
        },
    }
}

fn print_run(report: &RunReport) {
    let s = &report.summary;
    println!(
        "{}: {} seeds, {} epochs, train/dev/test {}/{}/{}",
        report.ablation,
        report.seeds.len(),
        report.epochs,
        report.n_train,
        report.n_dev,
        report.n_test
    );
    println!("macro-F1 {:.4} (sd {:.4})", s.macro_f1.mean, s.macro_f1.sd);
    for (name, f1) in label_names().iter().zip(&s.per_class_f1) {
        println!("  f1 {name:<8} {:.4} (sd {:.4})", f1.mean, f1.sd);
    }
    for (sub, f1) in &s.by_subreddit {
        println!("  {sub:<20} {:.4} (sd {:.4})", f1.mean, f1.sd);
    }
}

fn execute(cli: &Cli) -> Result<(), PipelineError> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Ingest => print!("{}", cmd_ingest(&config)?.to_text()),
        Command::ExtractEntities => {
            let index = cmd_extract_entities(&config)?;
            let mut top: Vec<_> = index.counts.iter().collect();
            top.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
            println!("{} distinct entities, {} post mentions", index.counts.len(), index.mentions.len());
            for (key, n) in top.into_iter().take(20) {
                println!("  {n:>6}  {key}");
            }
        }
        Command::ScoreStance => {
            let s = cmd_score_stance(&config)?;
            println!(
                "{} stances (mu {:.6}): {} positive, {} negative, {} skipped",
                s.stats.count, s.stats.mu, s.n_positive, s.n_negative, s.skipped
            );
        }
        Command::BuildGraph { sign_filter } => {
            let g = cmd_build_graph(&config, (*sign_filter).into())?;
            let s = &g.stats;
            println!("{} target entities ({} without vectors)", g.targets.len(), g.missing_vectors);
            println!(
                "users {}  entities {}  positive {}  negative {}  density {:.4}",
                s.n_users, s.n_entities, s.n_pos, s.n_neg, s.density
            );
            println!(
                "avg degree users {:.3} entities {:.3}; avg common neighbours users {:.3} entities {:.3}",
                s.avg_degree_users, s.avg_degree_entities, s.avg_common_neighbors_users, s.avg_common_neighbors_entities
            );
        }
        Command::Train(args) => print_run(&cmd_train(&config, run_options(&config, args))?),
        Command::Eval(args) => print_run(&cmd_eval(&config, run_options(&config, args))?),
        Command::ExportGraph { sign_filter, output } => {
            let path = cmd_export_graph(&config, (*sign_filter).into(), output.as_deref())?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
