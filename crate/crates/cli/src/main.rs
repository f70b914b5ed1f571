use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crowdscan_cli::{
    cmd_detect, cmd_eval, cmd_features, cmd_synth, resolve_config, CliError, CliResult,
    DumpSelection,
};

#[derive(Parser)]
#[command(name = "crowdscan", version, about = "Frame-level crowd anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// `key = value` config file
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key (repeatable), e.g. `--set tau=0.4`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Score every frame of a sequence
    Detect {
        manifest: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short, default_value = "scores.csv")]
        out: PathBuf,
        /// Write the effective configuration here before running
        #[arg(long)]
        dump_config: Option<PathBuf>,
    },
    /// ROC curves and AUC from one or more scores files
    Eval {
        #[arg(required = true)]
        scores: Vec<PathBuf>,
        #[arg(long, default_value = "roc.csv")]
        roc_csv: PathBuf,
        #[arg(long, default_value = "roc.svg")]
        svg: PathBuf,
    },
    /// Render a synthetic scene
    Synth {
        /// walk, dispersal or counterflow
        preset: String,
        seed: u64,
        out_dir: PathBuf,
    },
    /// Dump per-frame intermediates (vectors, texture, features, scores)
    Features {
        manifest: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short, default_value = "features")]
        out_dir: PathBuf,
        /// Also write foreground masks as PGM
        #[arg(long)]
        masks: bool,
        /// Also write per-patch orientation histograms
        #[arg(long)]
        descriptors: bool,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Detect { manifest, config, out, dump_config } => {
            let cfg = resolve_config(config.config.as_deref(), &config.overrides)?;
            if let Some(path) = dump_config {
                std::fs::write(&path, cfg.to_text()).map_err(|source| {
                    CliError::from(crowdscan::Error::Io { path: path.clone(), source })
                })?;
            }
            let s = cmd_detect(&manifest, &cfg, &out)?;
            println!(
                "frames {}  atoms {}  {:.2} s  {:.1} frames/s  -> {}",
                s.frames,
                s.atoms,
                s.seconds,
                s.fps(),
                out.display()
            );
        }
        Command::Eval { scores, roc_csv, svg } => {
            for (name, curve) in cmd_eval(&scores, &roc_csv, &svg)? {
                println!("{name}: AUC {:.4}", curve.auc);
            }
        }
        Command::Synth { preset, seed, out_dir } => {
            let scene = cmd_synth(&preset, seed, &out_dir)?;
            println!(
                "{} frames -> {}",
                scene.frame_paths.len(),
                scene.manifest_path.display()
            );
        }
        Command::Features { manifest, config, out_dir, masks, descriptors } => {
            let cfg = resolve_config(config.config.as_deref(), &config.overrides)?;
            let d = cmd_features(&manifest, &cfg, &out_dir, DumpSelection { masks, descriptors })?;
            println!("{} frames -> {}", d.scores.len(), out_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
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
