//! Argument parsing and dispatch for the `samstar` binary.

use std::io::{self, BufReader};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use super::commands::{self, SceneKind};
use super::{cmd_tune, Mode, Overrides};
use crate::error::{Error, Result};
use crate::reward::RewardSpec;
use crate::segmenter::{self, protocol::PROTOCOL_VERSION, BuiltinSegmenter, WorkerOptions};

#[derive(Debug, Parser)]
#[command(name = "samstar", version, about = "Reward-guided hyperparameter tuning for segment-everything models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a tuning campaign.
    Tune(TuneArgs),
    /// Score a mask-set file with a reward spec.
    Score {
        masks: PathBuf,
        /// Reward spec document; overlap fidelity with default constants when absent.
        #[arg(long)]
        reward: Option<PathBuf>,
    },
    /// Paint a mask-set file into a 16-bit label PNG.
    Render { masks: PathBuf, out: PathBuf },
    /// Split a history file into front and dominated points for plotting.
    Pareto {
        history: PathBuf,
        /// Defaults to the history file's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic scene and its ground truth.
    Synth {
        /// disk, disks, overlap, bimodal or mixed.
        scene: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the builtin segmenter over the worker protocol (stdin/stdout, or TCP with --listen).
    Worker {
        #[arg(long)]
        listen: Option<String>,
        #[arg(long, default_value_t = PROTOCOL_VERSION)]
        protocol_version: u32,
    },
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Campaign config or a manifest from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Repeatable; replaces the config's images.
    #[arg(long)]
    pub image: Vec<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub pop: Option<usize>,
    #[arg(long)]
    pub gens: Option<usize>,
    /// Concurrent evaluations.
    #[arg(long)]
    pub workers: Option<usize>,
    /// builtin | cmd:<worker launch command> | tcp:<host:port>
    #[arg(long)]
    pub segmenter: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// single | multi
    #[arg(long)]
    pub mode: Option<String>,
}

impl TuneArgs {
    pub fn overrides(&self) -> Result<Overrides> {
        Ok(Overrides {
            images: self.image.clone(),
            seed: self.seed,
            population: self.pop,
            generations: self.gens,
            workers: self.workers,
            segmenter: self.segmenter.clone(),
            out: self.out.clone(),
            mode: self.mode.as_deref().map(str::parse::<Mode>).transpose()?,
        })
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Tune(args) => {
            let result = cmd_tune(args.config.as_deref(), &args.overrides()?)?;
            let t = &result.tradeoff;
            println!("trade-off {}", t.hash());
            for (name, value) in t.objectives.entries() {
                println!("  {name} = {value}");
            }
            if let Some((_, base)) = &result.baseline {
                for (name, value) in base.entries() {
                    println!("  baseline {name} = {value}");
                }
            }
            println!(
                "{} evaluations, front of {}, outputs in {}",
                result.evolution.evaluations,
                result.evolution.front.len(),
                result.out_dir.display()
            );
        }
        Command::Score { masks, reward } => {
            let spec = match reward {
                Some(p) => RewardSpec::load(&p)?,
                None => RewardSpec::default(),
            };
            print!("{}", commands::cmd_score(&masks, &spec)?);
        }
        Command::Render { masks, out } => {
            let rle = commands::cmd_render(&masks, &out)?;
            println!("{}\n{}", out.display(), rle.display());
        }
        Command::Pareto { history, out } => {
            let dir = out.unwrap_or_else(|| history.parent().map(PathBuf::from).unwrap_or_default());
            let report = commands::cmd_pareto(&history, &dir)?;
            println!(
                "{} rows: {} on the front, {} dominated, {} skipped",
                report.ranks.len(),
                report.front.len(),
                report.dominated().len(),
                report.table.skipped
            );
            for p in &report.written {
                println!("{}", p.display());
            }
        }
        Command::Synth { scene, seed, out } => {
            let kind: SceneKind = scene.parse()?;
            let s = commands::cmd_synth(kind, seed, &out)?;
            println!("{} instances, {}x{}", s.instances.len(), s.image.width(), s.image.height());
        }
        Command::Worker { listen, protocol_version } => {
            let opts = WorkerOptions {
                protocol: protocol_version,
                ..Default::default()
            };
            match listen {
                Some(addr) => {
                    let listener = TcpListener::bind(&addr).map_err(|e| Error::io(format!("binding {addr}"), e))?;
                    let local = listener.local_addr().map_err(|e| Error::io("reading bound address", e))?;
                    println!("listening on {local}");
                    segmenter::serve_tcp(listener, Arc::new(BuiltinSegmenter), opts)?;
                }
                None => segmenter::serve(BufReader::new(io::stdin().lock()), io::stdout().lock(), &BuiltinSegmenter, &opts)?,
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and maps failures to exit codes:
/// 2 config or input, 3 segmenter, 4 I/O, 5 unrepresentable output.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn tune_flags_parse() {
        let cli = Cli::try_parse_from([
            "samstar", "tune", "--image", "a.png", "--seed", "4", "--pop", "8", "--gens", "3", "--segmenter", "builtin",
            "--out", "o", "--mode", "single",
        ])
        .unwrap();
        let Command::Tune(args) = cli.command else { panic!("not tune") };
        let o = args.overrides().unwrap();
        assert_eq!(o.images, [PathBuf::from("a.png")]);
        assert_eq!((o.seed, o.population, o.generations), (Some(4), Some(8), Some(3)));
        assert_eq!(o.mode, Some(Mode::Single));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(["samstar", "bogus"]), 2);
        assert_eq!(main_with_args(["samstar", "tune", "--mode", "both", "--out", "x"]), 2);
        assert_eq!(main_with_args(["samstar", "score", "/nonexistent/m.rle"]), 4);
    }
}
