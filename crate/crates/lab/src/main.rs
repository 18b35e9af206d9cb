use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use embedlab::config::{ExperimentConfig, Overrides};
use embedlab::harness::{self, AnalyzeOptions};
use embedlab::synth::{write_synthetic, SynthSpec};
use embedlab::Result;
use embedlab_core::evaluation::UserDistance;
use embedlab_core::models::ModelKind;

#[derive(Parser)]
#[command(name = "embedlab", version, about = "Train rating models on MovieLens and score their user embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Link ML-100k with the ML-20M genome and write the dataset cache.
    Prepare {
        #[arg(long)]
        ml100k: PathBuf,
        #[arg(long)]
        ml20m: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate the kind × z × fold grid.
    Run(RunArgs),
    /// Grid-search learning rate and epochs on a split of fold 1.
    Tune(RunArgs),
    /// Rebuild the aggregate tables from a results directory.
    Report { results: PathBuf },
    /// Cluster a tensor model's user embeddings and profile sampled clusters.
    Analyze {
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        clusters: usize,
        #[arg(long, default_value_t = 3)]
        sample: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rank only the linked ML-100k movies.
        #[arg(long)]
        ml100k_only: bool,
    },
    /// PDC sweep of an embeddings CSV against a ratings file.
    Pdc {
        embeddings: PathBuf,
        ratings: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        thresholds: Vec<u32>,
        #[arg(long, default_value = "msd")]
        user_distance: UserDistance,
    },
    /// Write a small synthetic corpus in the MovieLens file formats.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 60)]
        users: usize,
        #[arg(long, default_value_t = 80)]
        items: usize,
        #[arg(long, default_value_t = 24)]
        tags: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<ModelKind>>,
    #[arg(long, value_delimiter = ',')]
    z: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    folds: Option<Vec<u32>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    activation: Option<String>,
}

impl RunArgs {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(&Overrides {
            data: self.data,
            out: self.out,
            kinds: self.kinds,
            z: self.z,
            folds: self.folds,
            seed: self.seed,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            activation: self.activation,
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn json_line(value: &impl serde::Serialize) -> String {
    serde_json::to_string(value).expect("serializable")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare { ml100k, ml20m, out } => {
            let (summary, _) = harness::cmd_prepare(&ml100k, &ml20m, &out)?;
            println!("{}", json_line(&summary));
        }
        Command::Run(args) => {
            let table = harness::cmd_run(&args.resolve()?)?;
            print!("{}", harness::render_table(&table));
        }
        Command::Tune(args) => {
            let cfg = args.resolve()?;
            for r in harness::cmd_tune(&cfg)? {
                println!(
                    "{} z={} learning_rate={} epochs={} rmse={}",
                    r.kind, r.z, r.best.learning_rate, r.best.epochs, r.best_rmse
                );
            }
        }
        Command::Report { results } => {
            let table = harness::cmd_report(&results)?;
            print!("{}", harness::render_table(&table));
        }
        Command::Analyze { model, data, out, clusters, sample, seed, ml100k_only } => {
            let opts = AnalyzeOptions { clusters, sample, seed, ml100k_only };
            let profiles = harness::cmd_analyze(&model, &data, &out, &opts)?;
            print!("{}", harness::render_profiles(&profiles));
        }
        Command::Pdc { embeddings, ratings, thresholds, user_distance } => {
            let sweep = harness::cmd_pdc(&embeddings, &ratings, &thresholds, user_distance)?;
            print!("{}", harness::sweep_csv(&sweep));
        }
        Command::Synth { out, seed, users, items, tags } => {
            let spec = SynthSpec { users, items, tags, seed, ..SynthSpec::default() };
            let summary = write_synthetic(&spec, &out.join("ml-100k"), &out.join("ml-20m"))?;
            println!("{{\"ratings\":{},\"expected_drops\":{}}}", summary.ratings, summary.expected_drops.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = serde_json::json!({
                "error": err.code(),
                "message": err.to_string(),
                "path": err.path().map(|p| p.display().to_string()),
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
