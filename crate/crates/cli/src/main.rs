use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use madelung_cli::config::parse_config;
use madelung_cli::presets::{self, PRESETS};
use madelung_cli::run::{run_scenario, RunOptions};
use madelung_cli::ScenarioConfig;
use madelung_core::field_io::inspect_field;

#[derive(Parser)]
#[command(name = "madelab", version, about = "Wave propagation, Madelung fields and Bohm trajectories")]
struct Cli {
    /// Directory for run artifacts (overrides `output.directory`).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Trajectory seed (overrides `trajectories.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the trajectory stage.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Only report errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a config file or a preset name.
    Run { config: String },
    /// Check a config file (or preset) without running it.
    Validate { config: String },
    /// Print the header of a field file.
    Inspect { file: PathBuf },
    /// List the built-in scenarios, or print one.
    Presets { name: Option<String> },
}

/// Configs are files; a bare name that is not a file is looked up as a preset.
fn load(arg: &str) -> Result<ScenarioConfig, (u8, String)> {
    let path = Path::new(arg);
    let text = if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| (3, format!("cannot read {arg}: {e}")))?
    } else if let Some(p) = presets::find(arg) {
        p.text.to_string()
    } else {
        return Err((3, format!("no config file or preset named `{arg}`")));
    };
    parse_config(&text).map_err(|e| (1, format!("{arg}: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Run { config } => load(&config).and_then(|c| {
            let options = RunOptions { output_dir: cli.output_dir.clone(), seed: cli.seed };
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(n) = cli.threads {
                builder = builder.num_threads(n.max(1));
            }
            let pool = builder.build().map_err(|e| (2, e.to_string()))?;
            let manifest = pool.install(|| run_scenario(&c, &options)).map_err(|e| (e.exit_code() as u8, e.to_string()))?;
            if !cli.quiet {
                let dir = cli.output_dir.clone().unwrap_or_else(|| PathBuf::from(&c.output.directory));
                println!("{} artifacts written to {}", manifest.outputs.len() + 2, dir.display());
                for w in &manifest.warnings {
                    println!("warning: {w}");
                }
            }
            Ok(())
        }),
        Command::Validate { config } => load(&config).map(|c| {
            if !cli.quiet {
                println!("ok: {}D grid {:?}", c.dims(), c.grid.points);
            }
        }),
        Command::Inspect { file } => inspect_field(&file)
            .map(|h| {
                println!("dtype   {}", h.dtype.name());
                println!("dims    {}", h.grid.dims());
                println!("points  {:?}", h.grid.points());
                println!("extents {:?}", h.grid.extents());
                println!("time    {}", h.time);
            })
            .map_err(|e| match e {
                madelung_core::Error::Io(_) => (3, format!("{}: {e}", file.display())),
                _ => (2, format!("{}: {e}", file.display())),
            }),
        Command::Presets { name: None } => {
            for p in PRESETS {
                println!("{:<18} {}", p.name, p.summary);
            }
            Ok(())
        }
        Command::Presets { name: Some(name) } => match presets::find(&name) {
            Some(p) => {
                print!("{}", p.text);
                Ok(())
            }
            None => Err((1, format!("unknown preset `{name}`"))),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
