use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{Map, Value};

use super::{join_violations, parse_config, run, validate, Command, RunError, EXIT_CONFIG, EXIT_OK};

#[derive(Debug, Parser)]
#[command(
    name = "mwi",
    version,
    about = "Branching-state simulations: Schmidt spectra, branch measures, frequency operator, scenario Monte Carlo",
    after_help = "Every flag mirrors a config key. Flags override values loaded with --config.\n\
                  CSV columns: graham -> m,branch_count,count_mass,born_mass; \
                  branch -> id,parent,label,lam,log_weight,S_i; \
                  other commands -> [seed,streams,] followed by the scalar result fields.\n\
                  MWI_MAX_LEAVES overrides the branch-tree leaf cap (default 1048576)."
)]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Args)]
struct Global {
    /// JSON scenario config to start from.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for stochastic commands.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    /// Write the report here instead of standard output.
    #[arg(long, global = true, alias = "output_path")]
    out: Option<PathBuf>,

    /// Independent random streams for Monte Carlo (default 1).
    #[arg(long, global = true)]
    streams: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Check a config file and list every violation.
    Validate { file: PathBuf },
    /// Run a complete config file.
    Run { file: PathBuf },
    /// Schmidt spectrum, rank and entanglement entropy of a bipartite state.
    Schmidt(SchmidtArgs),
    /// Repeated uniform splitting of every branch; Born vs. count measure.
    Branch(BranchArgs),
    /// Frequency-operator deviation: explicit, binomial and closed form.
    Fhg(FhgArgs),
    /// Born vs. branch-count mass per outcome class.
    Graham(GrahamArgs),
    /// Haar-average of |<i|f>|^2 or |C_0|^2.
    Haar(HaarArgs),
    /// Polarizer or random-basis measurement chains.
    Zeno(ZenoArgs),
    /// Complexity random walk with a reflecting barrier at zero.
    Evolve(EvolveArgs),
    /// Diffusing ratio landing near exact coincidence.
    Coincidence(CoincidenceArgs),
    /// Number of worlds from T / t_P, in iterated log10.
    BranchCount(BranchCountArgs),
    /// Per-world expectation of a rare event vs. branch count.
    Ledger(LedgerArgs),
}

#[derive(Debug, Args, Serialize)]
struct SchmidtArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d1: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d2: Option<u64>,
    /// Real parts, row-major, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    re: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    im: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct BranchArgs {
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    splits: Option<u64>,
    #[arg(long, alias = "export_tree")]
    #[serde(skip_serializing_if = "Option::is_none")]
    export_tree: Option<bool>,
}

#[derive(Debug, Args, Serialize)]
struct FhgArgs {
    /// Two-outcome shorthand: amplitudes (sqrt p, sqrt(1-p)).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    amplitudes: Option<Vec<f64>>,
    #[arg(long, alias = "amplitudes_im", value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    amplitudes_im: Option<Vec<f64>>,
    /// Number of copies N.
    #[arg(long, alias = "N", allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    copies: Option<i64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    outcome: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
struct GrahamArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
struct HaarArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<u64>,
    /// "fidelity" (default) or "component".
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    statistic: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct ZenoArgs {
    /// "polarizer" (default) or "random".
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    intermediates: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
struct EvolveArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<u64>,
    #[arg(long, alias = "step_sigma")]
    #[serde(skip_serializing_if = "Option::is_none")]
    step_sigma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    branches: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    reflecting: Option<bool>,
}

#[derive(Debug, Args, Serialize)]
struct CoincidenceArgs {
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r0: Option<f64>,
    #[arg(long, alias = "drift_sigma")]
    #[serde(skip_serializing_if = "Option::is_none")]
    drift_sigma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    branches: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
struct BranchCountArgs {
    #[arg(long, alias = "universe_age_s")]
    #[serde(skip_serializing_if = "Option::is_none")]
    universe_age_s: Option<f64>,
    #[arg(long, alias = "planck_time_s")]
    #[serde(skip_serializing_if = "Option::is_none")]
    planck_time_s: Option<f64>,
    #[arg(long, alias = "branching_base")]
    #[serde(skip_serializing_if = "Option::is_none")]
    branching_base: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct LedgerArgs {
    #[arg(long, alias = "log10_event_prob", allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    log10_event_prob: Option<f64>,
    #[arg(long, alias = "log10_attempts", allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    log10_attempts: Option<f64>,
    #[arg(long, alias = "log10_log10_branches", allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    log10_log10_branches: Option<f64>,
}

fn flag_params<T: Serialize>(args: &T) -> Map<String, Value> {
    match serde_json::to_value(args).expect("flags serialise") {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

fn read_config(path: &PathBuf) -> Result<Map<String, Value>, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::config(format!("config: cannot read {}: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(RunError::config("$: config must be a JSON object")),
        Err(e) => Err(RunError::config(format!("$: malformed JSON: {e}"))),
    }
}

fn apply_globals(cfg: &mut Map<String, Value>, g: &Global) {
    if let Some(seed) = g.seed {
        cfg.insert("seed".into(), seed.into());
    }
    if let Some(f) = g.format {
        let name = match f {
            FormatArg::Json => "json",
            FormatArg::Csv => "csv",
        };
        cfg.insert("format".into(), name.into());
    }
    if let Some(out) = &g.out {
        cfg.insert("output_path".into(), out.display().to_string().into());
    }
    if let Some(streams) = g.streams {
        cfg.insert("streams".into(), streams.into());
    }
}

fn execute(cfg: Map<String, Value>, stdout: &mut dyn Write) -> Result<(), RunError> {
    let parsed = parse_config(&Value::Object(cfg)).map_err(|v| RunError::config(join_violations(&v)))?;
    let report = run(&parsed)?;
    let text = report.render(parsed.format);
    match &parsed.output_path {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| RunError::internal(format!("cannot write {}: {e}", path.display())))?,
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| RunError::internal(format!("cannot write report: {e}")))?,
    }
    Ok(())
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<(), RunError> {
    let (command, flags) = match &cli.command {
        Cmd::Validate { file } => {
            let text = std::fs::read_to_string(file)
                .map_err(|e| RunError::config(format!("cannot read {}: {e}", file.display())))?;
            let violations = validate(&text);
            if violations.is_empty() {
                let _ = writeln!(stdout, "ok");
                return Ok(());
            }
            return Err(RunError::config(join_violations(&violations)));
        }
        Cmd::Run { file } => {
            let mut cfg = read_config(file)?;
            apply_globals(&mut cfg, &cli.global);
            return execute(cfg, stdout);
        }
        Cmd::Schmidt(a) => (Command::Schmidt, flag_params(a)),
        Cmd::Branch(a) => (Command::Branch, flag_params(a)),
        Cmd::Fhg(a) => (Command::Fhg, flag_params(a)),
        Cmd::Graham(a) => (Command::Graham, flag_params(a)),
        Cmd::Haar(a) => (Command::Haar, flag_params(a)),
        Cmd::Zeno(a) => (Command::Zeno, flag_params(a)),
        Cmd::Evolve(a) => (Command::Evolve, flag_params(a)),
        Cmd::Coincidence(a) => (Command::Coincidence, flag_params(a)),
        Cmd::BranchCount(a) => (Command::BranchCount, flag_params(a)),
        Cmd::Ledger(a) => (Command::Ledger, flag_params(a)),
    };

    let mut cfg = match &cli.global.config {
        Some(path) => read_config(path)?,
        None => Map::new(),
    };
    if let Some(existing) = cfg.get("command").and_then(Value::as_str) {
        if existing != command.name() {
            return Err(RunError::config(format!(
                "command: config file is for \"{existing}\" but \"{command}\" was requested"
            )));
        }
    }
    cfg.insert("command".into(), command.name().into());
    let mut params = match cfg.remove("params") {
        Some(Value::Object(m)) => m,
        Some(_) => return Err(RunError::config("params: must be an object")),
        None => Map::new(),
    };
    params.extend(flags);
    cfg.insert("params".into(), Value::Object(params));
    apply_globals(&mut cfg, &cli.global);
    execute(cfg, stdout)
}

/// Entry point shared by the binary and in-process tests; returns the exit
/// code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
                EXIT_CONFIG
            } else {
                let _ = write!(stdout, "{rendered}");
                EXIT_OK
            };
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message.replace('\n', "\nerror: "));
            e.exit_code
        }
    }
}
