use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use toric_quench::experiment::{
    preset, preset_texts, resolve_output_dir, run_experiment, ExperimentConfig, Override, RunReport,
};
use toric_quench::{Error, Result};

#[derive(Parser)]
#[command(name = "toric-quench", version, about = "Quench dynamics of toric-code sector states")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
    /// Override `time.t_max`.
    #[arg(long, global = true, value_name = "T")]
    t_max: Option<f64>,
    /// Override `time.dt`.
    #[arg(long, global = true, value_name = "DT")]
    dt: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Write outputs here instead of the config's directory.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Run one of the built-in presets.
    Preset {
        #[arg(value_parser = ["fig1", "fig2", "fig3"])]
        name: String,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Check a config and print it with all defaults filled in.
    Validate { config: PathBuf },
}

fn overrides(g: &Global) -> Vec<Override> {
    let mut o = Vec::new();
    if let Some(t) = g.t_max {
        o.push(Override::new("time", "t_max", t));
    }
    if let Some(dt) = g.dt {
        o.push(Override::new("time", "dt", dt));
    }
    o
}

fn report(r: &RunReport) {
    for f in &r.files {
        println!("wrote {}", f.display());
    }
    println!("{}: {} lattice(s) in {:.2} s", r.config.name, r.lattices.len(), r.seconds);
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(k) = cli.global.threads {
        if k == 0 {
            return Err(Error::Config(vec!["--threads must be at least 1".into()]));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::Config(vec![format!("thread pool: {e}")]))?;
    }
    let ov = overrides(&cli.global);
    match cli.command {
        Command::Validate { config } => {
            let cfg = ExperimentConfig::from_file(&config, &ov)?;
            cfg.check_sizes()?;
            print!("{}", cfg.resolved());
        }
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::from_file(&config, &ov)?;
            cfg.check_sizes()?;
            let dir = resolve_output_dir(&cfg, out.as_deref());
            report(&run_experiment(&cfg, &dir)?);
        }
        Command::Preset { name, out } => {
            let subs: Vec<String> = preset_texts(&name)?.into_iter().map(|(sub, _)| sub).collect();
            let cfgs = preset(&name, &ov)?;
            for cfg in &cfgs {
                cfg.check_sizes()?;
            }
            for (cfg, sub) in cfgs.iter().zip(&subs) {
                let dir = match &out {
                    Some(base) => join_sub(base, sub),
                    None => resolve_output_dir(cfg, None),
                };
                report(&run_experiment(cfg, &dir)?);
            }
        }
    }
    Ok(())
}

fn join_sub(base: &Path, sub: &str) -> PathBuf {
    if sub.is_empty() {
        base.to_path_buf()
    } else {
        base.join(sub)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
