use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use esmd::experiments::{
    run_experiment, widthsweep::WidthSweepConfig, ExperimentConfig, ExperimentOutput,
};

#[derive(Parser)]
#[command(name = "esmd", version, about = "Early-stopped mirror descent simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Override the base seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to ESMD_THREADS or all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress the generated-at metadata line in CSV outputs.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the assumption checker over the default potential zoo.
    CheckPotentials {
        /// Dimensions to check.
        #[arg(long, value_delimiter = ',', default_values_t = vec![4usize, 16, 64])]
        d: Vec<usize>,
        /// Radii to check.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5f64, 1.0, 4.0])]
        tau: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sweep the localized Gaussian width over a radius grid.
    Width {
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 40)]
        d: usize,
        /// gaussian | identity | hard
        #[arg(long, default_value = "gaussian")]
        design: String,
        /// l1 | l2 | linf | lp
        #[arg(long, default_value = "l1")]
        body: String,
        #[arg(long, default_value_t = 1.5)]
        body_p: f64,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, default_value_t = 0.5)]
        r_min: f64,
        #[arg(long, default_value_t = 10.0)]
        r_max: f64,
        #[arg(long, default_value_t = 20)]
        r_steps: usize,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn thread_count(common: &CommonArgs) -> Option<usize> {
    common.threads.or_else(|| {
        std::env::var("ESMD_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn write_output(
    cfg: &ExperimentConfig,
    output: &ExperimentOutput,
    common: &CommonArgs,
) -> std::io::Result<()> {
    let dir = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    std::fs::create_dir_all(&dir)?;
    let stamp = if common.no_timestamp {
        String::new()
    } else {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        format!("# generated_at_unix = {secs}\n")
    };
    for (name, content) in &output.files {
        std::fs::write(dir.join(name), format!("{stamp}{content}"))?;
    }
    std::fs::write(dir.join("summary.json"), output.summary_json())?;
    for (k, v) in &output.summary {
        println!("{k} = {v}");
    }
    println!("wrote {} file(s) to {}", output.files.len() + 1, dir.display());
    Ok(())
}

fn execute(mut cfg: ExperimentConfig, common: &CommonArgs) -> ExitCode {
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    let run = || run_experiment(&cfg);
    let result = match thread_count(common) {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .expect("building thread pool");
            pool.install(run)
        }
        None => run(),
    };
    match result {
        Ok(output) => {
            if let Err(e) = write_output(&cfg, &output, common) {
                eprintln!("error writing output: {e}");
                return ExitCode::FAILURE;
            }
            if output.failed {
                eprintln!("one or more checks failed");
                return ExitCode::FAILURE;
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, common } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cannot read {}: {e}", config.display());
                    return ExitCode::FAILURE;
                }
            };
            match ExperimentConfig::from_toml(&text) {
                Ok(cfg) => execute(cfg, &common),
                Err(e) => {
                    eprintln!("config error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::CheckPotentials {
            d,
            tau,
            samples,
            common,
        } => {
            let mut cfg = ExperimentConfig::from_toml("experiment = \"check_potentials\"")
                .expect("static config");
            cfg.check_potentials.d = d;
            cfg.check_potentials.tau = tau;
            cfg.check_potentials.samples = samples;
            cfg.output_dir = "out/check_potentials".into();
            execute(cfg, &common)
        }
        Command::Width {
            n,
            d,
            design,
            body,
            body_p,
            tau,
            r_min,
            r_max,
            r_steps,
            samples,
            common,
        } => {
            let mut cfg = ExperimentConfig::from_toml("experiment = \"width_sweep\"")
                .expect("static config");
            cfg.width_sweep = WidthSweepConfig {
                n,
                d,
                design,
                body,
                body_p,
                tau,
                r_min,
                r_max,
                r_steps,
                samples,
                ..cfg.width_sweep
            };
            cfg.output_dir = "out/width_sweep".into();
            execute(cfg, &common)
        }
    }
}
