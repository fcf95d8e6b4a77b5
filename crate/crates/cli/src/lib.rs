//! Command-line front end: `wind <subcommand> [flags]`.
//!
//! Every run writes into one directory: `trace.csv`, `summary.csv`,
//! `plot.dat` (when the command has curves), `config.resolved` and
//! `manifest.txt`.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Args, Parser, Subcommand};
use commands::{execute, CliError};
use config::{parse_config_file, Command, RunConfig};
use output::{new_run_id, write_csv, write_plot, RunManifest};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(
    name = "wind",
    version,
    about = "Best-of-n and WIND solvers on tabular preference games"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Iterative best-of-n without mixing against unregularized WIND
    Ibon(Flags),
    /// Solve the regularized game with exact WIND
    WindExact(Flags),
    /// Sample-based WIND on a tabular softmax policy
    WindSample(Flags),
    /// Distance between mixed iterative best-of-n and WIND across a beta grid
    SweepBeta(Flags),
    /// Compare the measured equilibrium gap with its upper bound
    BoundCheck(Flags),
    /// Duality gaps of the reference, WIND and iterative best-of-n policies
    NashGap(Flags),
    /// Run the built-in invariant checks
    Selftest(Flags),
}

#[derive(Args, Debug, Default)]
#[command(allow_negative_numbers = true)]
struct Flags {
    /// Flat `key = value` config file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "F")]
    beta: Option<f64>,
    #[arg(long, value_name = "F")]
    eta: Option<f64>,
    #[arg(long, value_name = "INT")]
    n: Option<usize>,
    /// Iterations or rounds
    #[arg(long = "T", value_name = "INT")]
    iters: Option<usize>,
    /// Samples per round
    #[arg(long = "M", value_name = "INT")]
    batch_size: Option<usize>,
    #[arg(long, value_parser = ["sq", "kl", "nce"])]
    loss: Option<String>,
    #[arg(long = "nce-p", value_name = "F")]
    nce_p: Option<f64>,
    /// `LO:HI:COUNT` or a comma-separated list
    #[arg(long, value_name = "LO:HI:COUNT")]
    grid: Option<String>,
    /// Output directory (default `$WIND_OUT/<run id>`)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["paper", "order", "mc"])]
    mode: Option<String>,
}

impl Flags {
    fn overrides(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("seed", self.seed.map(|v| v.to_string()));
        put("beta", self.beta.map(|v| format!("{v:?}")));
        put("eta", self.eta.map(|v| format!("{v:?}")));
        put("n", self.n.map(|v| v.to_string()));
        put("T", self.iters.map(|v| v.to_string()));
        put("M", self.batch_size.map(|v| v.to_string()));
        put("loss", self.loss.clone());
        put("nce_p", self.nce_p.map(|v| format!("{v:?}")));
        put("grid", self.grid.clone());
        put("mode", self.mode.clone());
        m
    }
}

/// Resolve defaults, then the config file, then flags.
fn resolve(cmd: Command, flags: &Flags) -> Result<RunConfig, CliError> {
    let mut values = match &flags.config {
        Some(path) => parse_config_file(path)?,
        None => BTreeMap::new(),
    };
    values.extend(flags.overrides());
    let mut cfg = RunConfig::defaults(cmd);
    cfg.apply(&values)?;
    Ok(cfg)
}

fn output_dir(flags: &Flags, run_id: &str) -> PathBuf {
    match &flags.out {
        Some(dir) => dir.clone(),
        None => {
            let base = std::env::var_os("WIND_OUT")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("wind-out"));
            base.join(run_id)
        }
    }
}

fn run_resolved(cmd: Command, flags: &Flags) -> Result<i32, CliError> {
    let cfg = resolve(cmd, flags)?;
    let arts = execute(cmd, &cfg)?;
    let run_id = new_run_id(cfg.seed);
    let dir = output_dir(flags, &run_id);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;

    let mut manifest = RunManifest::new(run_id, cmd.name(), cfg.to_pairs());
    let resolved_path = dir.join("config.resolved");
    let resolved: String = cfg
        .to_pairs()
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect();
    std::fs::write(&resolved_path, resolved)?;
    manifest.add_artifact(&resolved_path)?;
    let mut write_table = |name: &str, t: &Option<output::Table>| -> Result<(), CliError> {
        if let Some(t) = t {
            let p = dir.join(name);
            write_csv(t, &p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            manifest.add_artifact(&p)?;
        }
        Ok(())
    };
    write_table("trace.csv", &arts.trace)?;
    write_table("summary.csv", &arts.summary)?;
    if let Some(plot) = &arts.plot {
        let p = dir.join("plot.dat");
        write_plot(plot, &p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        manifest.add_artifact(&p)?;
    }
    manifest.write(&dir.join("manifest.txt"))?;

    print!("{}", arts.report);
    println!("output: {}", dir.display());
    Ok(if arts.ok { 0 } else { 2 })
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (cmd, flags) = match cli.command {
        Sub::Ibon(f) => (Command::Ibon, f),
        Sub::WindExact(f) => (Command::WindExact, f),
        Sub::WindSample(f) => (Command::WindSample, f),
        Sub::SweepBeta(f) => (Command::SweepBeta, f),
        Sub::BoundCheck(f) => (Command::BoundCheck, f),
        Sub::NashGap(f) => (Command::NashGap, f),
        Sub::Selftest(f) => (Command::Selftest, f),
    };
    match run_resolved(cmd, &flags) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

/// Resolved configuration for `cmd` as the config file would spell it.
pub fn resolved_config(cmd: Command, config: Option<&Path>) -> Result<RunConfig, CliError> {
    let flags = Flags {
        config: config.map(Path::to_path_buf),
        ..Default::default()
    };
    resolve(cmd, &flags)
}
