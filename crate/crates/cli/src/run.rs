//! Subcommand execution and report formatting.

use std::collections::BTreeMap;

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use decoupling_core::constants::{
    b_upper, bound_garling_lower, bound_hilbert_phi, bound_linf_upper, bound_prop32_c, bound_prop32_c_banach,
    bound_thm41_dq, bound_thm41_k, embed_labels, search_worst_case, witness_labels, ConstantEstimate, Direction,
    Evaluated, Factorized, Family, KhintchinePolicy, SearchConfig,
};
use decoupling_core::inequalities::Method;
use decoupling_core::parallel::with_workers;
use decoupling_core::stochint::{bdg_sweep, BdgConfig, BdgReport, BrownianDriver, ProcessFamily};
use decoupling_core::suites::{run_suite, Suite, SuiteConfig, SuiteSummary};

use crate::config::{Command, ExperimentConfig, Format, Formula};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config_hash: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub results: T,
}

/// Rendered report plus what `main` needs to pick an exit code.
#[derive(Debug)]
pub struct Output {
    pub body: String,
    pub violation: bool,
    pub warnings: Vec<String>,
}

/// One cell of an atlas sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasRow {
    pub space: String,
    pub p: f64,
    pub direction: Direction,
    pub ratio: f64,
    pub method: Method,
    pub samples: Option<usize>,
    pub seed: u64,
    pub witness_hash: String,
}

pub const ATLAS_HEADER: [&str; 8] = ["space", "p", "direction", "ratio", "method", "samples", "seed", "witness_hash"];

/// One row per `(space, p)`, in first-seen order. A repeated cell keeps
/// its position and takes the later value.
pub fn emit_plot_data(estimates: &[ConstantEstimate]) -> (Vec<AtlasRow>, Vec<String>) {
    let mut rows: Vec<AtlasRow> = Vec::new();
    let mut warnings = Vec::new();
    for e in estimates {
        let row = AtlasRow {
            space: e.space.to_string(),
            p: e.p,
            direction: e.direction,
            ratio: e.ratio,
            method: e.method,
            samples: e.samples,
            seed: e.seed,
            witness_hash: e.witness_hash.clone(),
        };
        match rows.iter_mut().find(|r| r.space == row.space && r.p == row.p) {
            Some(old) => {
                warnings.push(format!("duplicate atlas cell ({}, p={}); keeping the later report", row.space, row.p));
                *old = row;
            }
            None => rows.push(row),
        }
    }
    (rows, warnings)
}

/// CSV with an explicit header, so an empty table still has one.
pub fn to_csv<T: Serialize>(header: &[&str], rows: &[T]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundResult {
    pub formula: Formula,
    pub params: BTreeMap<String, f64>,
    pub symbolic: String,
    pub decimal: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factorized: Option<Factorized>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub applicable: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn trim(x: f64) -> String {
    let s = format!("{:.9}", x);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// `e^a·2^b`, dropping unit factors.
pub fn symbolic(log2_rest: f64, pow_e: f64) -> String {
    if log2_rest == f64::NEG_INFINITY {
        return "0".into();
    }
    let mut parts = Vec::new();
    match trim(pow_e).as_str() {
        "0" => {}
        "1" => parts.push("e".to_string()),
        a => parts.push(format!("e^{{{a}}}")),
    }
    let b = trim(log2_rest);
    if b != "0" || parts.is_empty() {
        parts.push(format!("2^{{{b}}}"));
    }
    parts.join("·")
}

/// Decimal text for a value given by its base-2 logarithm.
pub fn decimal(log2: f64, value: f64) -> String {
    if log2 == f64::NEG_INFINITY {
        return "0".into();
    }
    if value.is_finite() && value.abs() < 1e15 {
        return format!("{value}");
    }
    let l10 = log2 * std::f64::consts::LOG10_2;
    let e = l10.floor();
    format!("{:.12}e{}", 10f64.powf(l10 - e), e as i64)
}

fn evaluated(formula: Formula, params: BTreeMap<String, f64>, ev: Evaluated<TwoFloat>) -> BoundResult {
    let f = ev.factorized();
    let v = ev.to_f64();
    BoundResult {
        formula,
        params,
        symbolic: symbolic(ev.log2_rest.hi() + ev.log2_rest.lo(), ev.pow_e),
        decimal: decimal(if f.mantissa == 0.0 { f64::NEG_INFINITY } else { f.log2() }, v),
        value: v.is_finite().then_some(v),
        factorized: Some(f),
        applicable: None,
        notes: Vec::new(),
    }
}

const DR_PLACEHOLDER: &str = "D_R = 1 is a placeholder; only its finiteness is known";

fn bound(cfg: &ExperimentConfig, p: f64) -> Result<BoundResult> {
    let formula = cfg.formula.ok_or_else(|| anyhow!("missing formula"))?;
    let q = cfg.q.unwrap_or(p);
    let dp = cfg.dp.unwrap_or(1.0);
    let dr = cfg.dr.unwrap_or(1.0);
    let a = cfg.a.unwrap_or(1.0);
    let dim = cfg.dim.unwrap_or(cfg.space[0].dim() as u64);
    let mut params: BTreeMap<String, f64> = BTreeMap::new();
    let mut put = |k: &str, v: f64| {
        params.insert(k.to_string(), v);
    };
    let dr_note = |mut r: BoundResult| {
        if cfg.dr.is_none() {
            r.notes.push(DR_PLACEHOLDER.into());
        }
        r
    };
    Ok(match formula {
        Formula::Prop32C | Formula::Prop32CBanach => {
            let r = if formula == Formula::Prop32C { cfg.r.unwrap_or(1.0) } else { 1.0 };
            let b = cfg.b.unwrap_or(0.5 * b_upper(r, p));
            put("p", p);
            put("q", q);
            put("A", a);
            put("b", b);
            let ev = if formula == Formula::Prop32C {
                put("r", r);
                bound_prop32_c::<TwoFloat>(r, p, q, a, b)?
            } else {
                bound_prop32_c_banach::<TwoFloat>(p, q, a, b)?
            };
            evaluated(formula, params, ev)
        }
        Formula::Thm41K | Formula::Thm41Dq => {
            put("p", p);
            put("q", q);
            put("Dp", dp);
            let ev = if formula == Formula::Thm41K {
                bound_thm41_k::<TwoFloat>(p, q, dp)?
            } else {
                bound_thm41_dq::<TwoFloat>(p, q, dp)?
            };
            evaluated(formula, params, ev)
        }
        Formula::HilbertPhi => {
            put("q", q);
            put("DR", dr);
            dr_note(evaluated(formula, params, bound_hilbert_phi::<TwoFloat>(q, dr)?))
        }
        Formula::LinfUpper => {
            let lb = bound_linf_upper(dim, p, dr)?;
            put("d", dim as f64);
            put("p", p);
            put("DR", dr);
            put("kernel", lb.kernel);
            let (symbolic, decimal) = match lb.bound {
                Some(v) => (format!("2·{}", trim(dr)), format!("{v}")),
                None => ("n/a".to_string(), "n/a".to_string()),
            };
            let mut notes = Vec::new();
            if !lb.applicable {
                notes.push(format!("needs p ≥ log₂ d = {}", trim((dim as f64).log2())));
            }
            dr_note(BoundResult {
                formula,
                params,
                symbolic,
                decimal,
                value: lb.bound,
                factorized: None,
                applicable: Some(lb.applicable),
                notes,
            })
        }
        Formula::GarlingLower => {
            let policy = match cfg.k {
                Some(value) => KhintchinePolicy::Fixed { value },
                None => KhintchinePolicy::Orthogonality,
            };
            let v = bound_garling_lower(dim, p, policy)?;
            let k = policy.constant(p);
            put("d", dim as f64);
            put("p", p);
            put("K", k);
            BoundResult {
                formula,
                params,
                symbolic: format!("(log₂ {dim})^{{1/2}}/(4·{})", trim(k)),
                decimal: format!("{v}"),
                value: Some(v),
                factorized: None,
                applicable: None,
                notes: vec![format!("K_{{p,2}} policy: {}", policy.name())],
            }
        }
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BdgResult {
    pub space: String,
    pub h_dim: usize,
    pub reports: Vec<BdgReport>,
}

fn h_dim(process: &ProcessFamily) -> usize {
    match process {
        ProcessFamily::Zero { rank, .. }
        | ProcessFamily::SignFeedback { rank, .. }
        | ProcessFamily::CosineFeedback { rank, .. } => *rank,
        ProcessFamily::Constant { .. } => 1,
        ProcessFamily::Deterministic { values } => values.first().map_or(1, Vec::len),
    }
}

fn search_config(cfg: &ExperimentConfig, space: &decoupling_core::SpaceDescriptor, p: f64) -> Result<SearchConfig> {
    let family: Family = cfg.family.as_deref().unwrap_or("paley-walsh-multipliers").parse()?;
    let mut s = SearchConfig::new(space.clone(), p, cfg.direction, family);
    s.depth = cfg.depth;
    s.budget = cfg.budget;
    s.restarts = cfg.restarts;
    s.seed = cfg.seed;
    s.samples = cfg.samples;
    s.max_exponent = cfg.max_exponent;
    s.cap = cfg.cap;
    if let Some(path) = &cfg.warm_start {
        let seed = read_estimates(path)?
            .into_iter()
            .find(|e| e.family == family && e.depth == cfg.depth)
            .ok_or_else(|| anyhow!("{}: no {family} witness of depth {}", path.display(), cfg.depth))?;
        let labels =
            witness_labels(&seed.witness).ok_or_else(|| anyhow!("{}: witness has no label table", path.display()))?;
        s.warm_start = Some(embed_labels(labels, space.dim()));
    }
    Ok(s)
}

fn estimates(cfg: &ExperimentConfig) -> Result<Vec<ConstantEstimate>> {
    let mut out = Vec::new();
    for space in &cfg.space {
        for &p in &cfg.p {
            let s = search_config(cfg, space, p)?;
            out.push(search_worst_case(&s).with_context(|| format!("search on {space} at p={p}"))?);
        }
    }
    Ok(out)
}

fn read_estimates(path: &std::path::Path) -> Result<Vec<ConstantEstimate>> {
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    let env: Envelope<Vec<ConstantEstimate>> =
        serde_json::from_str(&text).with_context(|| format!("{}: not an estimate report", path.display()))?;
    Ok(env.results)
}

fn load_estimates(cfg: &ExperimentConfig) -> Result<Vec<ConstantEstimate>> {
    let mut out = Vec::new();
    for path in &cfg.input {
        out.extend(read_estimates(path)?);
    }
    Ok(out)
}

fn render<T: Serialize>(cfg: &ExperimentConfig, results: T) -> Result<String> {
    let env = Envelope {
        tool: TOOL.into(),
        version: VERSION.into(),
        command: cfg.command,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        config: cfg.canonical(),
        results,
    };
    Ok(serde_json::to_string_pretty(&env)? + "\n")
}

const VERIFY_HEADER: [&str; 12] = [
    "suite",
    "space",
    "p",
    "depth",
    "trials",
    "seed",
    "checks",
    "holds",
    "vacuous",
    "not_applicable",
    "violations",
    "exact_violations",
];

#[derive(Serialize)]
struct VerifyRow<'a> {
    suite: Suite,
    space: &'a str,
    p: f64,
    depth: usize,
    trials: usize,
    seed: u64,
    checks: usize,
    holds: usize,
    vacuous: usize,
    not_applicable: usize,
    violations: usize,
    exact_violations: usize,
}

const BOUNDS_HEADER: [&str; 5] = ["formula", "params", "symbolic", "decimal", "applicable"];

const BDG_HEADER: [&str; 13] = [
    "space",
    "p",
    "paths",
    "steps",
    "seed",
    "gamma_exact",
    "sup_ratio",
    "sup_ratio_se",
    "terminal_ratio",
    "terminal_ratio_se",
    "kappa",
    "kappa_over_p",
    "vacuous",
];

fn verify(cfg: &ExperimentConfig) -> Result<Output> {
    let suites: Vec<Suite> = cfg.suite.map_or_else(|| Suite::ALL.to_vec(), |s| vec![s]);
    let mut results: Vec<SuiteSummary> = Vec::new();
    for suite in suites {
        for space in &cfg.space {
            for &p in &cfg.p {
                let mut sc = SuiteConfig::new(space.clone(), p, cfg.depth, cfg.trials, cfg.seed);
                sc.min_depth = 1;
                results.push(run_suite(suite, &sc).with_context(|| format!("{suite} on {space} at p={p}"))?);
            }
        }
    }
    let violation = results.iter().any(|s| s.exact_violations > 0);
    let body = match cfg.format {
        Format::Json => render(cfg, &results)?,
        Format::Csv => {
            let rows: Vec<VerifyRow> = results
                .iter()
                .map(|s| VerifyRow {
                    suite: s.suite,
                    space: &s.space,
                    p: s.p,
                    depth: s.depth,
                    trials: s.trials,
                    seed: s.seed,
                    checks: s.checks,
                    holds: s.holds,
                    vacuous: s.vacuous,
                    not_applicable: s.not_applicable,
                    violations: s.violations,
                    exact_violations: s.exact_violations,
                })
                .collect();
            to_csv(&VERIFY_HEADER, &rows)?
        }
    };
    Ok(Output { body, violation, warnings: Vec::new() })
}

fn bounds(cfg: &ExperimentConfig) -> Result<Output> {
    let results = cfg.p.iter().map(|&p| bound(cfg, p)).collect::<Result<Vec<_>>>()?;
    let body = match cfg.format {
        Format::Json => render(cfg, &results)?,
        Format::Csv => {
            let rows: Vec<(String, String, String, String, Option<bool>)> = results
                .iter()
                .map(|r| {
                    let params = r.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
                    let name = serde_json::to_value(r.formula).unwrap().as_str().unwrap().to_string();
                    (name, params, r.symbolic.clone(), r.decimal.clone(), r.applicable)
                })
                .collect();
            to_csv(&BOUNDS_HEADER, &rows)?
        }
    };
    Ok(Output { body, violation: false, warnings: Vec::new() })
}

fn bdg(cfg: &ExperimentConfig) -> Result<Output> {
    let process = cfg.process.clone().ok_or_else(|| anyhow!("missing process family"))?;
    let h = h_dim(&process);
    let driver = BrownianDriver::new(h, cfg.steps, cfg.seed)?.with_horizon(cfg.horizon)?;
    let mut results = Vec::new();
    for space in &cfg.space {
        let mut bc = BdgConfig::new(space.clone(), process.clone(), driver, cfg.samples);
        bc.inner = cfg.inner;
        let reports = bdg_sweep(&bc, &cfg.p).with_context(|| format!("bdg on {space}"))?;
        results.push(BdgResult { space: space.to_string(), h_dim: h, reports });
    }
    let body = match cfg.format {
        Format::Json => render(cfg, &results)?,
        Format::Csv => {
            type Row<'a> = (
                &'a str,
                f64,
                usize,
                usize,
                u64,
                bool,
                Option<f64>,
                Option<f64>,
                Option<f64>,
                Option<f64>,
                Option<f64>,
                Option<f64>,
                bool,
            );
            let rows: Vec<Row> = results
                .iter()
                .flat_map(|b| {
                    b.reports.iter().map(move |r| {
                        (
                            b.space.as_str(),
                            r.p,
                            r.paths,
                            r.steps,
                            r.seed,
                            r.gamma_exact,
                            r.sup_ratio.map(|e| e.mean),
                            r.sup_ratio.map(|e| e.std_error),
                            r.terminal_ratio.map(|e| e.mean),
                            r.terminal_ratio.map(|e| e.std_error),
                            r.kappa,
                            r.kappa_over_p,
                            r.vacuous,
                        )
                    })
                })
                .collect();
            to_csv(&BDG_HEADER, &rows)?
        }
    };
    Ok(Output { body, violation: false, warnings: Vec::new() })
}

fn estimate(cfg: &ExperimentConfig) -> Result<Output> {
    let results = estimates(cfg)?;
    let (rows, warnings) = emit_plot_data(&results);
    let body = match cfg.format {
        Format::Json => render(cfg, &results)?,
        Format::Csv => to_csv(&ATLAS_HEADER, &rows)?,
    };
    Ok(Output { body, violation: false, warnings })
}

fn atlas(cfg: &ExperimentConfig) -> Result<Output> {
    let results = if cfg.input.is_empty() { estimates(cfg)? } else { load_estimates(cfg)? };
    let (rows, warnings) = emit_plot_data(&results);
    let body = match cfg.format {
        Format::Json => render(cfg, &rows)?,
        Format::Csv => to_csv(&ATLAS_HEADER, &rows)?,
    };
    Ok(Output { body, violation: false, warnings })
}

/// Runs the configured command on `cfg.workers` threads.
pub fn execute(cfg: &ExperimentConfig) -> Result<Output> {
    with_workers(cfg.workers, || match cfg.command {
        Command::Verify => verify(cfg),
        Command::Estimate => estimate(cfg),
        Command::Bounds => bounds(cfg),
        Command::Bdg => bdg(cfg),
        Command::Atlas => atlas(cfg),
    })
}
