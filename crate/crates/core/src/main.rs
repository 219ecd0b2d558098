use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use octfeat::dataset::{self, Split};
use octfeat::pipeline::{self, PipelineError, RunConfig};
use octfeat::{store, Method};

#[derive(Parser)]
#[command(
    name = "octfeat",
    version,
    about = "Hand-crafted feature baselines for retinal OCT classification"
)]
struct Cli {
    /// TOML settings file; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a manifest from <root>/<split>/<class>/<image>.
    Scan {
        #[arg(long)]
        root: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Resample a manifest into reduced train/val subsets.
    Split {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long)]
        val_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write canonical 224x224 PNGs for one split.
    Preprocess {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        root: Option<PathBuf>,
        #[arg(long)]
        split: Split,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract HOG or LBP features for one split into a feature store.
    Extract {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        root: Option<PathBuf>,
        #[arg(long)]
        split: Split,
        #[arg(long)]
        method: Option<Method>,
        /// LBP preset: paper-dim or paper-table3.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a feature store against a manifest split.
    Validate {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        split: Split,
    },
    /// Train the softmax classifier on a feature store.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch metrics CSV.
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Feature source recorded with the model (defaults from the dimension).
        #[arg(long)]
        name: Option<String>,
    },
    /// Evaluate a model on a test store and write a JSON-lines report.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        name: Option<String>,
    },
    /// Combine reports into recall and accuracy comparison tables.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

fn need<T>(value: Option<T>, flag: &str) -> Result<T, PipelineError> {
    value.ok_or_else(|| PipelineError::Usage(format!("--{flag} is required (flag or config file)")))
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let manifest_or = |m: Option<PathBuf>| need(m.or(cfg.manifest_path.clone()), "manifest");
    let root_or = |r: Option<PathBuf>| need(r.or(cfg.dataset_root.clone()), "root");

    match cli.command {
        Command::Scan { root, out } => {
            let res = pipeline::cmd_scan(&root_or(root)?, &out)?;
            print!("{}", res.manifest.distribution_table());
        }
        Command::Split {
            manifest,
            out,
            train_fraction,
            val_fraction,
            seed,
        } => {
            let mut spec = cfg.resample.unwrap_or_default();
            spec.train_fraction = train_fraction.unwrap_or(spec.train_fraction);
            spec.val_fraction = val_fraction.unwrap_or(spec.val_fraction);
            spec.seed = seed.unwrap_or(spec.seed);
            let m = pipeline::cmd_split(&manifest_or(manifest)?, &spec, &out)?;
            print!("{}", m.distribution_table());
        }
        Command::Preprocess {
            manifest,
            root,
            split,
            out,
        } => {
            let m = dataset::load_manifest(manifest_or(manifest)?)?;
            let out = need(out.or(cfg.output_dir.clone()), "out")?;
            let n = pipeline::preprocess(&m, &root_or(root)?, split, &out)?;
            println!("wrote {n} images to {}", out.display());
        }
        Command::Extract {
            manifest,
            root,
            split,
            method,
            preset,
            out,
        } => {
            let method = need(method.or(cfg.method), "method")?;
            let ex = pipeline::build_extractor(method, preset.or(cfg.preset.clone()).as_deref(), cfg.hog)?;
            let matrix = pipeline::cmd_extract(&manifest_or(manifest)?, &root_or(root)?, split, &ex, &out)?;
            println!("{} rows x {} features -> {}", matrix.len(), matrix.dim(), out.display());
        }
        Command::Validate {
            store: path,
            manifest,
            split,
        } => {
            let m = dataset::load_manifest(manifest_or(manifest)?)?;
            let matrix = store::read_store(&path)?;
            let report = store::validate_against_manifest(&matrix, &m, split);
            print!("{report}");
            if !report.is_clean() {
                return Err(PipelineError::Data(format!(
                    "{} does not match the manifest",
                    path.display()
                )));
            }
        }
        Command::Train {
            train,
            val,
            out,
            history,
            epochs,
            lr,
            batch_size,
            seed,
            name,
        } => {
            let mut tc = cfg.train.clone().unwrap_or_default();
            tc.epochs = epochs.unwrap_or(tc.epochs);
            tc.learning_rate = lr.unwrap_or(tc.learning_rate);
            tc.batch_size = batch_size.unwrap_or(tc.batch_size);
            tc.shuffle_seed = seed.unwrap_or(tc.shuffle_seed);
            let res = pipeline::cmd_train(&train, val.as_deref(), &tc, name.as_deref(), &out, history.as_deref())?;
            if let Some(last) = res.history.epochs.last() {
                println!(
                    "epoch {}: train acc {:.4} loss {:.4}",
                    last.epoch, last.train_accuracy, last.train_loss
                );
            }
        }
        Command::Eval {
            model,
            test,
            out,
            csv,
            name,
        } => {
            let report = pipeline::cmd_eval(&model, &test, name.as_deref(), &out, csv.as_deref())?;
            print!("{}", report.to_text());
        }
        Command::Report { out, reports } => {
            let all = pipeline::cmd_report(&reports, &out)?;
            print!("{}", pipeline::accuracy_table(&all));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
