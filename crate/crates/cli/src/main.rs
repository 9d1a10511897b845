use clap::{Parser, Subcommand};
use risklab::pipeline::{
    finish_from_train, load_artifact, render_plot, run_cluster, run_ingest, run_pipeline, run_train, save_cluster,
    save_ingest, save_train, ClusterArtifact, IngestArtifact, PipelineConfig, PipelineError, PlotData, PlotError,
    PlotKind, Stage, TrainArtifact, CLUSTER_SCHEMA, INGEST_SCHEMA, TRAIN_SCHEMA,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "risklab", version, about = "County COVID-19 risk clustering, classification and attribution")]
struct Cli {
    /// Worker threads (defaults to the number of CPUs). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Read the county table named by a config and write stage_ingest.json.
    Ingest {
        /// Config file.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster counties from stage_ingest.json and write stage_cluster.json.
    Cluster {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit and evaluate every model from stage_cluster.json, writing stage_train.json.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Explain the best forest in stage_train.json and write the report files.
    Explain {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render one SVG from a CSV written by a run.
    Plot {
        #[arg(long)]
        kind: PlotKind,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated features for shap_dependence.
        #[arg(long, value_delimiter = ',')]
        features: Option<Vec<String>>,
    },
}

enum Failure {
    Pipeline(PipelineError),
    Plot(PlotError),
    Read(PathBuf, std::io::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Pipeline(e) => e.exit_code() as u8,
            Failure::Plot(PlotError::Write { .. }) => 4,
            Failure::Plot(_) | Failure::Read(..) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Pipeline(e) => e.to_string(),
            Failure::Plot(e) => format!("plot failed: {e}"),
            Failure::Read(p, e) => format!("cannot read {}: {e}", p.display()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Pipeline(e)
    }
}

fn load<T: serde::de::DeserializeOwned>(path: &Path, schema: &str, stage: Stage) -> Result<T, Failure> {
    load_artifact(path, schema).map_err(|f| Failure::Pipeline(PipelineError::new(stage, f)))
}

fn execute(command: Command) -> Result<Vec<PathBuf>, Failure> {
    Ok(match command {
        Command::Run { config } => {
            let cfg = PipelineConfig::from_file(&config).map_err(|e| PipelineError::new(Stage::Config, e))?;
            let outcome = run_pipeline(&cfg)?;
            let mut paths = outcome.artifacts;
            paths.extend(outcome.manifest.files.iter().map(|f| cfg.output_dir.join(&f.path)));
            paths.push(cfg.output_dir.join("manifest.json"));
            paths
        }
        Command::Ingest { input, out } => {
            let cfg = PipelineConfig::from_file(&input).map_err(|e| PipelineError::new(Stage::Config, e))?;
            vec![save_ingest(&run_ingest(&cfg)?, &out)?]
        }
        Command::Cluster { input, out } => {
            let ingest: IngestArtifact = load(&input, INGEST_SCHEMA, Stage::Cluster)?;
            vec![save_cluster(&run_cluster(ingest)?, &out)?]
        }
        Command::Train { input, out } => {
            let cluster: ClusterArtifact = load(&input, CLUSTER_SCHEMA, Stage::Train)?;
            vec![save_train(&run_train(cluster)?, &out)?]
        }
        Command::Explain { input, out } => {
            let train: TrainArtifact = load(&input, TRAIN_SCHEMA, Stage::Explain)?;
            let (_, manifest) = finish_from_train(&train, &out)?;
            let mut paths: Vec<PathBuf> = manifest.files.iter().map(|f| out.join(&f.path)).collect();
            paths.push(out.join("manifest.json"));
            paths
        }
        Command::Plot { kind, input, out, features } => {
            let file = std::fs::File::open(&input).map_err(|e| Failure::Read(input.clone(), e))?;
            let data = PlotData::from_csv(kind, std::io::BufReader::new(file), features.as_deref()).map_err(Failure::Plot)?;
            render_plot(&data, &out).map_err(Failure::Plot)?;
            vec![out]
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("risklab: cannot start {n} threads: {e}");
            return ExitCode::from(4);
        }
    }
    match execute(cli.command) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("risklab: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
