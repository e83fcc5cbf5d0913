//! Scenario configs: parsing, validation and typed parameters.
//!
//! Validation never stops at the first problem; every violation is reported
//! as `<json path>: <constraint>`.

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::anthropic::{BranchCountConfig, LifeLedger, ZenoMode};
use crate::linalg::Complex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Schmidt,
    Branch,
    Fhg,
    Graham,
    Haar,
    Zeno,
    Evolve,
    Coincidence,
    BranchCount,
    Ledger,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Schmidt,
        Command::Branch,
        Command::Fhg,
        Command::Graham,
        Command::Haar,
        Command::Zeno,
        Command::Evolve,
        Command::Coincidence,
        Command::BranchCount,
        Command::Ledger,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Schmidt => "schmidt",
            Command::Branch => "branch",
            Command::Fhg => "fhg",
            Command::Graham => "graham",
            Command::Haar => "haar",
            Command::Zeno => "zeno",
            Command::Evolve => "evolve",
            Command::Coincidence => "coincidence",
            Command::BranchCount => "branch-count",
            Command::Ledger => "ledger",
        }
    }

    pub fn from_name(name: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HaarStatistic {
    /// |⟨i|f⟩|² for independent Haar pairs.
    Fidelity,
    /// |C_0|² of one Haar vector.
    Component,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchmidtParams {
    pub d1: usize,
    pub d2: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchParams {
    pub weights: Vec<f64>,
    pub splits: u32,
    pub export_tree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FhgParams {
    pub amplitudes: Vec<f64>,
    pub amplitudes_im: Vec<f64>,
    pub copies: u64,
    pub outcome: usize,
}

impl FhgParams {
    pub fn complex_amplitudes(&self) -> Vec<Complex> {
        self.amplitudes
            .iter()
            .zip(&self.amplitudes_im)
            .map(|(&re, &im)| Complex::new(re, im))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrahamParams {
    pub p: f64,
    pub trials: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HaarParams {
    pub dim: usize,
    pub samples: u64,
    pub statistic: HaarStatistic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZenoParams {
    pub mode: ZenoMode,
    pub intermediates: u32,
    pub dim: usize,
    pub samples: u64,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolveParams {
    pub steps: u64,
    pub step_sigma: f64,
    pub threshold: f64,
    pub branches: u64,
    pub reflecting: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoincidenceParams {
    pub r0: f64,
    pub drift_sigma: f64,
    pub steps: u64,
    pub epsilon: f64,
    pub branches: u64,
}

/// Fully validated, typed parameters of one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Scenario {
    Schmidt(SchmidtParams),
    Branch(BranchParams),
    Fhg(FhgParams),
    Graham(GrahamParams),
    Haar(HaarParams),
    Zeno(ZenoParams),
    Evolve(EvolveParams),
    Coincidence(CoincidenceParams),
    BranchCount(BranchCountConfig),
    Ledger(LifeLedger),
}

impl Scenario {
    pub fn command(&self) -> Command {
        match self {
            Scenario::Schmidt(_) => Command::Schmidt,
            Scenario::Branch(_) => Command::Branch,
            Scenario::Fhg(_) => Command::Fhg,
            Scenario::Graham(_) => Command::Graham,
            Scenario::Haar(_) => Command::Haar,
            Scenario::Zeno(_) => Command::Zeno,
            Scenario::Evolve(_) => Command::Evolve,
            Scenario::Coincidence(_) => Command::Coincidence,
            Scenario::BranchCount(_) => Command::BranchCount,
            Scenario::Ledger(_) => Command::Ledger,
        }
    }

    pub fn is_stochastic(&self) -> bool {
        match self {
            Scenario::Haar(_) | Scenario::Evolve(_) | Scenario::Coincidence(_) => true,
            Scenario::Zeno(z) => z.mode == ZenoMode::Random,
            _ => false,
        }
    }
}

/// A validated run request.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub seed: Option<u64>,
    pub streams: u64,
    pub output_path: Option<PathBuf>,
    pub format: Format,
}

impl ScenarioConfig {
    pub fn command(&self) -> Command {
        self.scenario.command()
    }
}

const MAX_STREAMS: u64 = 4096;

/// Reads typed parameters out of a JSON object, recording violations.
struct Reader<'a> {
    map: &'a Map<String, Value>,
    prefix: &'static str,
    seen: Vec<&'static str>,
    violations: &'a mut Vec<Violation>,
}

impl<'a> Reader<'a> {
    fn path(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.prefix)
        }
    }

    fn fail(&mut self, key: &str, message: impl Into<String>) {
        let path = self.path(key);
        self.violations.push(Violation::new(path, message));
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn uint(&mut self, key: &'static str, default: Option<u64>, min: u64, max: u64) -> u64 {
        let value = match self.get(key) {
            None => match default {
                Some(d) => return d,
                None => {
                    self.fail(key, "required");
                    return min;
                }
            },
            Some(v) => v,
        };
        let parsed = value.as_u64().or_else(|| {
            // integral floats such as 1e5
            value
                .as_f64()
                .filter(|x| x.fract() == 0.0 && *x >= 0.0 && *x <= u64::MAX as f64)
                .map(|x| x as u64)
        });
        match parsed {
            Some(n) if n < min => {
                self.fail(key, format!("must be ≥ {min}"));
                min
            }
            Some(n) if n > max => {
                self.fail(key, format!("must be ≤ {max}"));
                min
            }
            Some(n) => n,
            None if value.as_f64().is_some_and(|x| x < 0.0) => {
                self.fail(key, format!("must be ≥ {min}"));
                min
            }
            None => {
                self.fail(key, "must be a non-negative integer");
                min
            }
        }
    }

    fn real(&mut self, key: &'static str, default: Option<f64>) -> f64 {
        match self.get(key) {
            None => default.unwrap_or_else(|| {
                self.fail(key, "required");
                f64::NAN
            }),
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => x,
                _ => {
                    self.fail(key, "must be a finite number");
                    f64::NAN
                }
            },
        }
    }

    /// A real that must satisfy `ok`; `constraint` describes it.
    fn real_where(&mut self, key: &'static str, default: Option<f64>, constraint: &str, ok: impl Fn(f64) -> bool) -> f64 {
        let x = self.real(key, default);
        if x.is_finite() && !ok(x) {
            self.fail(key, format!("must be {constraint}"));
        }
        x
    }

    fn boolean(&mut self, key: &'static str, default: bool) -> bool {
        match self.get(key) {
            None => default,
            Some(Value::Bool(b)) => *b,
            Some(_) => {
                self.fail(key, "must be true or false");
                default
            }
        }
    }

    fn reals(&mut self, key: &'static str, required: bool) -> Option<Vec<f64>> {
        match self.get(key) {
            None => {
                if required {
                    self.fail(key, "required");
                }
                None
            }
            Some(Value::Array(items)) => {
                let parsed: Option<Vec<f64>> = items.iter().map(|v| v.as_f64().filter(|x| x.is_finite())).collect();
                if parsed.is_none() {
                    self.fail(key, "must be an array of finite numbers");
                }
                parsed
            }
            Some(_) => {
                self.fail(key, "must be an array of finite numbers");
                None
            }
        }
    }

    fn text(&mut self, key: &'static str) -> Option<&'a str> {
        match self.get(key) {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(_) => {
                self.fail(key, "must be a string");
                None
            }
        }
    }

    fn reject_unknown(&mut self) {
        let unknown: Vec<String> = self
            .map
            .keys()
            .filter(|k| !self.seen.contains(&k.as_str()))
            .cloned()
            .collect();
        for k in unknown {
            self.fail(&k, "unknown parameter");
        }
    }
}

fn parse_params(command: Command, params: &Map<String, Value>, violations: &mut Vec<Violation>) -> Scenario {
    let mut r = Reader {
        map: params,
        prefix: "params",
        seen: Vec::new(),
        violations,
    };
    let scenario = match command {
        Command::Schmidt => {
            let d1 = r.uint("d1", None, 1, 4096) as usize;
            let d2 = r.uint("d2", None, 1, 4096) as usize;
            let re = r.reals("re", true).unwrap_or_default();
            let im = r.reals("im", false).unwrap_or_else(|| vec![0.0; re.len()]);
            let tol = r.real_where("tol", Some(crate::schmidt::RANK_THRESHOLD), "> 0", |x| x > 0.0);
            if re.len() != d1 * d2 {
                r.fail("re", format!("must have d1*d2 = {} entries (got {})", d1 * d2, re.len()));
            }
            if im.len() != re.len() {
                r.fail("im", format!("must have the same length as re ({})", re.len()));
            }
            if re.len() == im.len() && re.iter().chain(&im).all(|&x| x == 0.0) {
                r.fail("re", "state vector must be nonzero");
            }
            Scenario::Schmidt(SchmidtParams { d1, d2, re, im, tol })
        }
        Command::Branch => {
            let weights = r.reals("weights", true).unwrap_or_default();
            let splits = r.uint("splits", Some(1), 0, 64) as u32;
            let export_tree = r.boolean("export_tree", false);
            if weights.is_empty() {
                r.fail("weights", "must be a non-empty list");
            } else if weights.iter().any(|&w| w < 0.0) {
                r.fail("weights", "must be non-negative");
            } else if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                r.fail("weights", "must sum to 1 within 1e-9");
            }
            Scenario::Branch(BranchParams {
                weights,
                splits,
                export_tree,
            })
        }
        Command::Fhg => {
            let p = r.get("p");
            let copies = r.uint("copies", None, 1, crate::fhg::MAX_MULTINOMIAL_COPIES);
            let outcome = r.uint("outcome", Some(0), 0, u64::MAX) as usize;
            let (amplitudes, amplitudes_im) = if p.is_some() {
                if r.map.contains_key("amplitudes") {
                    r.fail("p", "give either p or amplitudes, not both");
                }
                let p = r.real_where("p", None, "in [0, 1]", |x| (0.0..=1.0).contains(&x));
                let p = if (0.0..=1.0).contains(&p) { p } else { 0.0 };
                (vec![p.sqrt(), (1.0 - p).sqrt()], vec![0.0, 0.0])
            } else {
                let re = r.reals("amplitudes", true).unwrap_or_default();
                let im = r.reals("amplitudes_im", false).unwrap_or_else(|| vec![0.0; re.len()]);
                if im.len() != re.len() {
                    r.fail("amplitudes_im", "must have the same length as amplitudes");
                } else if re.is_empty() {
                    r.fail("amplitudes", "must be a non-empty list");
                } else {
                    let norm: f64 = re.iter().zip(&im).map(|(a, b)| a * a + b * b).sum();
                    if (norm - 1.0).abs() > 1e-10 {
                        r.fail(
                            "amplitudes",
                            format!("must be normalized (sum of |C_i|^2 = 1 within 1e-10, got {norm})"),
                        );
                    }
                }
                (re, im)
            };
            if !amplitudes.is_empty() && outcome >= amplitudes.len() {
                r.fail("outcome", format!("must be < {}", amplitudes.len()));
            }
            Scenario::Fhg(FhgParams {
                amplitudes,
                amplitudes_im,
                copies,
                outcome,
            })
        }
        Command::Graham => {
            let p = r.real_where("p", None, "in [0, 1]", |x| (0.0..=1.0).contains(&x));
            let trials = r.uint("trials", None, 1, crate::fhg::MAX_TRIALS as u64) as u32;
            Scenario::Graham(GrahamParams { p, trials })
        }
        Command::Haar => {
            let dim = r.uint("dim", None, 1, 4096) as usize;
            let samples = r.uint("samples", Some(100_000), 2, u64::MAX);
            let statistic = match r.text("statistic") {
                None | Some("fidelity") => HaarStatistic::Fidelity,
                Some("component") => HaarStatistic::Component,
                Some(_) => {
                    r.fail("statistic", "must be \"fidelity\" or \"component\"");
                    HaarStatistic::Fidelity
                }
            };
            Scenario::Haar(HaarParams { dim, samples, statistic })
        }
        Command::Zeno => {
            let mode = match r.text("mode") {
                None | Some("polarizer") => ZenoMode::Polarizer,
                Some("random") => ZenoMode::Random,
                Some(_) => {
                    r.fail("mode", "must be \"polarizer\" or \"random\"");
                    ZenoMode::Polarizer
                }
            };
            let intermediates = r.uint("intermediates", None, 0, u32::MAX as u64) as u32;
            let dim = r.uint("dim", Some(2), 2, 4096) as usize;
            let samples = r.uint("samples", Some(100_000), 1, u64::MAX);
            let target = r.uint("target", Some(1), 0, u64::MAX) as usize;
            if target >= dim {
                r.fail("target", format!("must be < dim ({dim})"));
            }
            Scenario::Zeno(ZenoParams {
                mode,
                intermediates,
                dim,
                samples,
                target,
            })
        }
        Command::Evolve => Scenario::Evolve(EvolveParams {
            steps: r.uint("steps", None, 1, u64::MAX),
            step_sigma: r.real_where("step_sigma", Some(1.0), "> 0", |x| x > 0.0),
            threshold: r.real_where("threshold", None, "≥ 0", |x| x >= 0.0),
            branches: r.uint("branches", None, 1, u64::MAX),
            reflecting: r.boolean("reflecting", true),
        }),
        Command::Coincidence => Scenario::Coincidence(CoincidenceParams {
            r0: r.real("r0", None),
            drift_sigma: r.real_where("drift_sigma", None, "> 0", |x| x > 0.0),
            steps: r.uint("steps", None, 0, u64::MAX),
            epsilon: r.real_where("epsilon", None, "> 0", |x| x > 0.0),
            branches: r.uint("branches", None, 1, u64::MAX),
        }),
        Command::BranchCount => {
            let d = BranchCountConfig::default();
            let cfg = BranchCountConfig {
                universe_age_s: r.real_where("universe_age_s", Some(d.universe_age_s), "> 0", |x| x > 0.0),
                planck_time_s: r.real_where("planck_time_s", Some(d.planck_time_s), "> 0", |x| x > 0.0),
                branching_base: r.real_where("branching_base", Some(d.branching_base), "> 1", |x| x > 1.0),
            };
            if cfg.universe_age_s < cfg.planck_time_s {
                r.fail("universe_age_s", "must be ≥ planck_time_s");
            }
            Scenario::BranchCount(cfg)
        }
        // Default attempts is +29 (a "small warm pond" count).
        Command::Ledger => Scenario::Ledger(LifeLedger {
            log10_event_prob: r.real("log10_event_prob", Some(-400.0)),
            log10_attempts: r.real("log10_attempts", Some(29.0)),
            log10_log10_branches: r.real("log10_log10_branches", Some(60.0)),
        }),
    };
    r.reject_unknown();
    scenario
}

/// Parses a config object (already merged with any flags).
pub fn parse_config(value: &Value) -> Result<ScenarioConfig, Vec<Violation>> {
    let mut violations = Vec::new();
    let Some(root) = value.as_object() else {
        return Err(vec![Violation::new("$", "config must be a JSON object")]);
    };

    let mut r = Reader {
        map: root,
        prefix: "",
        seen: Vec::new(),
        violations: &mut violations,
    };
    let command = match r.text("command") {
        None => {
            r.fail("command", "required");
            None
        }
        Some(name) => {
            let c = Command::from_name(name);
            if c.is_none() {
                let known: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
                r.fail("command", format!("unknown command \"{name}\" (expected one of {})", known.join(", ")));
            }
            c
        }
    };
    let seed = r.get("seed").is_some().then(|| r.uint("seed", None, 0, u64::MAX));
    let streams = r.uint("streams", Some(1), 1, MAX_STREAMS);
    let output_path = r.text("output_path").map(PathBuf::from);
    let format = match r.text("format") {
        None | Some("json") => Format::Json,
        Some("csv") => Format::Csv,
        Some(_) => {
            r.fail("format", "must be \"json\" or \"csv\"");
            Format::Json
        }
    };
    let params = match r.get("params") {
        None => Map::new(),
        Some(Value::Object(m)) => m.clone(),
        Some(_) => {
            r.fail("params", "must be an object");
            Map::new()
        }
    };
    r.reject_unknown();

    let scenario = command.map(|c| parse_params(c, &params, &mut violations));
    if let Some(s) = &scenario {
        if s.is_stochastic() && seed.is_none() {
            violations.push(Violation::new("seed", format!("required for stochastic command {}", s.command())));
        }
    }
    if !violations.is_empty() {
        return Err(violations);
    }
    Ok(ScenarioConfig {
        scenario: scenario.expect("command parsed"),
        seed,
        streams,
        output_path,
        format,
    })
}

/// Every violation in a config text; empty iff the config is runnable.
pub fn validate(config_text: &str) -> Vec<Violation> {
    match serde_json::from_str::<Value>(config_text) {
        Err(e) => vec![Violation::new("$", format!("malformed JSON: {e}"))],
        Ok(v) => parse_config(&v).err().unwrap_or_default(),
    }
}
