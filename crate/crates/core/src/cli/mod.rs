//! Batch front-end: configs in, deterministic JSON or CSV reports out.

mod args;
mod config;

pub use args::main_with_args;
pub use config::{
    parse_config, validate, Command, Format, HaarStatistic, Scenario, ScenarioConfig, Violation,
};

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use crate::anthropic::{self, CoincidenceConfig, EvolutionConfig, ZenoChainConfig, ZenoMode};
use crate::branching::{self, BranchTree};
use crate::error::Error;
use crate::fhg::{self, FrequencySpec};
use crate::linalg::Complex;
use crate::schmidt::{BipartiteState, Side};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct RunError {
    pub exit_code: i32,
    pub message: String,
}

impl RunError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            exit_code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            exit_code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        let exit_code = match &e {
            e if e.is_numeric() => EXIT_NUMERIC,
            Error::Structure(_) => EXIT_INTERNAL,
            _ => EXIT_CONFIG,
        };
        Self {
            exit_code,
            message: e.to_string(),
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// A rectangular table for CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: Command,
    pub params: Scenario,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub streams: Option<u64>,
    pub tool_version: &'static str,
    pub result: Value,
    #[serde(skip)]
    pub table: Option<Table>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let table = match &self.table {
            Some(t) => t.clone(),
            None => self.flat_table(),
        };
        let mut out = table.header.join(",");
        out.push('\n');
        for row in &table.rows {
            let cells: Vec<String> = row.iter().map(csv_cell).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }

    /// One-row table of the scalar result fields, prefixed by seed and
    /// stream count for stochastic commands.
    fn flat_table(&self) -> Table {
        let mut header = Vec::new();
        let mut row = Vec::new();
        if let (Some(seed), Some(streams)) = (self.seed, self.streams) {
            header.extend(["seed".to_string(), "streams".to_string()]);
            row.extend([json!(seed), json!(streams)]);
        }
        if let Value::Object(map) = &self.result {
            for (k, v) in map {
                if matches!(v, Value::Array(_) | Value::Object(_)) {
                    continue;
                }
                header.push(k.clone());
                row.push(v.clone());
            }
        }
        Table {
            header,
            rows: vec![row],
        }
    }
}

/// Reals with 17 significant digits, '.' decimal point, no locale.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                u.to_string()
            } else if let Some(i) = n.as_i64() {
                i.to_string()
            } else {
                format_real(n.as_f64().unwrap_or(f64::NAN))
            }
        }
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn to_value<T: Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("result serialises")
}

fn run_schmidt(p: &config::SchmidtParams) -> Result<Value, Error> {
    let amps: Vec<Complex> = p.re.iter().zip(&p.im).map(|(&a, &b)| Complex::new(a, b)).collect();
    let state = BipartiteState::from_vector(&amps, p.d1, p.d2)?;
    let d = state.schmidt()?;
    let rho1 = state.reduced_density(Side::First);
    let rho2 = state.reduced_density(Side::Second);
    Ok(json!({
        "lambdas": d.lambdas,
        "rank": d.rank,
        "entropy": d.entropy(),
        "is_factorized": d.lambdas.get(1).is_none_or(|&l| l <= p.tol),
        "purity": rho1.purity(),
        "spectrum_first": rho1.spectrum()?,
        "spectrum_second": rho2.spectrum()?,
    }))
}

fn run_branch(p: &config::BranchParams) -> Result<(Value, Option<Table>), Error> {
    let mut tree = BranchTree::with_max_leaves(branching::max_leaves_from_env());
    for _ in 0..p.splits {
        tree.split_all(&p.weights)?;
    }
    let all_first = |path: &[usize]| path.iter().all(|&x| x == 0);
    let mut result = json!({
        "leaves": tree.leaf_count(),
        "nodes": tree.nodes().len(),
        "born_all_first": tree.born_measure(all_first),
        "count_all_first": tree.count_measure(all_first)?,
        "born_total": tree.born_measure(|_| true),
        "root_split_entropy": tree.split_entropy(tree.root()),
    });
    let exported = tree.to_json();
    let table = Table {
        header: header(&["id", "parent", "label", "lam", "log_weight", "S_i"]),
        rows: exported
            .nodes
            .iter()
            .map(|n| vec![json!(n.id), json!(n.parent), json!(n.label), json!(n.lam), json!(n.log_weight), json!(n.s_i)])
            .collect(),
    };
    if p.export_tree {
        result["tree"] = to_value(exported);
    }
    Ok((result, Some(table)))
}

fn run_fhg(p: &config::FhgParams) -> Result<Value, Error> {
    let spec = FrequencySpec::new(p.complex_amplitudes(), p.copies, p.outcome)?;
    let explicit = match fhg::freq_deviation_explicit(&spec) {
        Ok(v) => Some(v),
        Err(Error::Capacity { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(json!({
        "explicit": explicit,
        "multinomial": fhg::freq_deviation_multinomial(&spec)?,
        "closed": fhg::freq_deviation_closed(spec.p_k(), spec.copies()),
        "p_k": spec.p_k(),
        "N": spec.copies(),
    }))
}

fn run_graham(p: &config::GrahamParams) -> Result<(Value, Option<Table>), Error> {
    let rows = fhg::graham_table(p.p, p.trials)?;
    let table = Table {
        header: header(&["m", "branch_count", "count_mass", "born_mass"]),
        rows: rows
            .iter()
            .map(|r| vec![json!(r.m), json!(r.branch_count), json!(r.count_mass), json!(r.born_mass)])
            .collect(),
    };
    Ok((json!({ "rows": rows }), Some(table)))
}

/// Executes a validated config and builds its report.
pub fn run(cfg: &ScenarioConfig) -> Result<Report, RunError> {
    let seed = cfg.seed.unwrap_or(0);
    let streams = cfg.streams;
    let mut table = None;
    let result = match &cfg.scenario {
        Scenario::Schmidt(p) => run_schmidt(p)?,
        Scenario::Branch(p) => {
            let (v, t) = run_branch(p)?;
            table = t;
            v
        }
        Scenario::Fhg(p) => run_fhg(p)?,
        Scenario::Graham(p) => {
            let (v, t) = run_graham(p)?;
            table = t;
            v
        }
        Scenario::Haar(p) => {
            let est = match p.statistic {
                HaarStatistic::Fidelity => anthropic::haar_fidelity_mean(p.dim, p.samples, seed, streams)?,
                HaarStatistic::Component => fhg::graham_average_check(p.dim, p.samples, seed, streams)?,
            };
            json!({
                "mean": est.mean,
                "std_error": est.std_error,
                "samples": est.samples,
                "expected": 1.0 / p.dim as f64,
                "mean_times_dim": est.mean * p.dim as f64,
            })
        }
        Scenario::Zeno(p) => match p.mode {
            ZenoMode::Polarizer => json!({
                "transmission": anthropic::zeno_polarizer_chain(p.intermediates),
                "simulated": anthropic::zeno_polarizer_simulation(p.intermediates),
            }),
            ZenoMode::Random => {
                let est = anthropic::zeno_random_chain(
                    &ZenoChainConfig {
                        dim: p.dim,
                        intermediates: p.intermediates,
                        mode: ZenoMode::Random,
                        samples: p.samples,
                        seed,
                        target: p.target,
                    },
                    streams,
                )?;
                json!({
                    "mean_transition": est.mean,
                    "std_error": est.std_error,
                    "samples": est.samples,
                    "expected": anthropic::zeno_random_chain_expectation(p.dim, p.intermediates, p.target),
                    "stationary": 1.0 / p.dim as f64,
                })
            }
        },
        Scenario::Evolve(p) => to_value(anthropic::evolve_complexity(
            &EvolutionConfig {
                steps: p.steps,
                step_sigma: p.step_sigma,
                threshold: p.threshold,
                branches: p.branches,
                seed,
                reflecting: p.reflecting,
            },
            streams,
        )?),
        Scenario::Coincidence(p) => to_value(anthropic::coincidence_scan(
            &CoincidenceConfig {
                r0: p.r0,
                drift_sigma: p.drift_sigma,
                steps: p.steps,
                epsilon: p.epsilon,
                branches: p.branches,
                seed,
            },
            streams,
        )?),
        Scenario::BranchCount(c) => to_value(anthropic::branch_count_estimate(c)?),
        Scenario::Ledger(l) => to_value(anthropic::life_ledger_verdict(l)?),
    };
    let stochastic = cfg.scenario.is_stochastic();
    Ok(Report {
        command: cfg.command(),
        params: cfg.scenario.clone(),
        seed: stochastic.then_some(seed),
        streams: stochastic.then_some(streams),
        tool_version: TOOL_VERSION,
        result,
        table,
    })
}

/// Validates a config text and runs it, returning the rendered report.
pub fn run_text(config_text: &str) -> Result<String, RunError> {
    let value: Value = serde_json::from_str(config_text)
        .map_err(|e| RunError::config(format!("$: malformed JSON: {e}")))?;
    let cfg = parse_config(&value).map_err(|v| RunError::config(join_violations(&v)))?;
    Ok(run(&cfg)?.render(cfg.format))
}

pub(crate) fn join_violations(v: &[Violation]) -> String {
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        let _ = write!(s, "{x}");
    }
    s
}
