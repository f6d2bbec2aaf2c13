//! `dictmatch` command-line front end.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on configuration errors.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{
    load, BuildLibraryConfig, ClassifyCmdConfig, GlitchBenchConfig, GsIdentifyCmdConfig,
    MatchCmdConfig, SynthConfig, SynthKind,
};
use crate::error::{config_err, CliResult};

#[derive(Parser, Debug)]
#[command(
    name = "dictmatch",
    version,
    about = "Dictionary matching with compressed cluster libraries"
)]
struct Cli {
    /// Worker threads for per-vector parallelism (default: all cores).
    #[arg(long, global = true, env = "DICTMATCH_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic labelled dictionary and test batch.
    SynthDictionary {
        #[command(flatten)]
        common: Common,
        /// `clustered` or `cone`.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cluster, compress and fit noise models; writes a library bundle.
    BuildLibrary {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dictionary: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Full matching of test vectors against a library.
    Match {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        truth_coefficients: Option<PathBuf>,
    },
    /// Single-cluster classification by smallest DSSIM.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        truth_labels: Option<PathBuf>,
        #[arg(long)]
        noise_std: Option<f64>,
    },
    /// Group-sparse identification of the active clusters.
    GsIdentify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        truth_clusters: Option<PathBuf>,
        #[arg(long)]
        theta_star: Option<f64>,
    },
    /// Synthetic glitch classification experiment.
    GlitchBench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_train_per_class: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
        #[arg(long)]
        sigma_rel: Option<f64>,
    },
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_path(slot: &mut Option<PathBuf>, value: Option<PathBuf>) {
    if value.is_some() {
        *slot = value;
    }
}

fn run(cli: Cli) -> CliResult<Vec<String>> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(config_err("--workers must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_err(e.to_string()))?;
    }
    match cli.command {
        Command::SynthDictionary { common, kind, seed } => {
            let mut c: SynthConfig = load(common.config.as_deref())?;
            set_path(&mut c.out, common.out);
            if let Some(k) = kind {
                c.kind = match k.as_str() {
                    "clustered" => SynthKind::Clustered,
                    "cone" => SynthKind::Cone,
                    other => return Err(config_err(format!("unknown synth kind {other:?}"))),
                };
            }
            if let Some(s) = seed {
                c.clustered.seed = s;
                c.mixtures.seed = s.wrapping_add(1);
                c.cone.seed = s;
                c.cone_test_seed = s.wrapping_add(1);
            }
            commands::synth(&c)
        }
        Command::BuildLibrary {
            common,
            dictionary,
            labels,
        } => {
            let mut c: BuildLibraryConfig = load(common.config.as_deref())?;
            set_path(&mut c.out, common.out);
            set_path(&mut c.dictionary, dictionary);
            set_path(&mut c.labels, labels);
            commands::build(&c)
        }
        Command::Match {
            common,
            library,
            data,
            truth_coefficients,
        } => {
            let mut c: MatchCmdConfig = load(common.config.as_deref())?;
            set_path(&mut c.out, common.out);
            set_path(&mut c.library, library);
            set_path(&mut c.data, data);
            set_path(&mut c.truth_coefficients, truth_coefficients);
            commands::match_batch(&c)
        }
        Command::Classify {
            common,
            library,
            data,
            truth_labels,
            noise_std,
        } => {
            let mut c: ClassifyCmdConfig = load(common.config.as_deref())?;
            set_path(&mut c.out, common.out);
            set_path(&mut c.library, library);
            set_path(&mut c.data, data);
            set_path(&mut c.truth_labels, truth_labels);
            set(&mut c.noise_std, noise_std);
            commands::classify(&c)
        }
        Command::GsIdentify {
            common,
            library,
            data,
            truth_clusters,
            theta_star,
        } => {
            let mut c: GsIdentifyCmdConfig = load(common.config.as_deref())?;
            set_path(&mut c.out, common.out);
            set_path(&mut c.library, library);
            set_path(&mut c.data, data);
            set_path(&mut c.truth_clusters, truth_clusters);
            if let Some(t) = theta_star {
                c.identify.relevance = dictmatch::pipeline::Relevance::ThetaRatio { theta_star: t };
            }
            commands::gs_identify(&c)
        }
        Command::GlitchBench {
            common,
            n_train_per_class,
            n_test,
            sigma_rel,
        } => {
            let mut c: GlitchBenchConfig = load(common.config.as_deref())?;
            set_path(&mut c.out, common.out);
            set(&mut c.experiment.n_train_per_class, n_train_per_class);
            set(&mut c.experiment.n_test, n_test);
            set(&mut c.experiment.sigma_rel, sigma_rel);
            commands::glitch_bench(&c)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("dictmatch: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
