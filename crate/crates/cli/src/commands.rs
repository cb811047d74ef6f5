use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use singfde::criteria::{region_boundary, solvable, solvable_nonsingular, solvable_weighted, RegionCase};
use singfde::model::Sign;
use singfde::sharpness::{build_witness, closed_form_minimum, delta1, extremal_config, minimize_delta1};
use singfde::solver::{collocation_diagnostic, solve_bvp_minus, solve_cauchy_plus, SolveReport};
use singfde::weighted::{
    choose_alpha, gain_near_origin, nu_condition_check, solve_weighted_minus, solve_weighted_plus, AlphaReport,
    WeightedReport,
};
use singfde::{Error, GridFunction, Mesh, SingularCoefficient};

use crate::config::{self, Built, ConfigError, Problem, ProblemConfig, Spans};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_REFUSED: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// Relative error below which `converge` reports no order.
pub const ROUNDING_FLOOR: f64 = 1e-13;

/// Witness widths reported by `sharpness`.
pub const WITNESS_EPS: [f64; 3] = [0.1, 0.05, 0.025];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Full-precision decimal (17 significant digits).
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_to(dest: Option<&Path>, content: &str, stderr: bool) -> CliResult<()> {
    match dest {
        Some(path) => std::fs::write(path, content).map_err(|source| CliError::Io { path: path.to_path_buf(), source }),
        None => {
            let res = if stderr {
                std::io::stderr().write_all(content.as_bytes())
            } else {
                std::io::stdout().write_all(content.as_bytes())
            };
            res.map_err(|source| CliError::Io { path: PathBuf::from(if stderr { "<stderr>" } else { "<stdout>" }), source })
        }
    }
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

pub fn solution_csv(x: &GridFunction) -> String {
    let mut s = String::from("t,x\n");
    for (t, v) in x.mesh().nodes().iter().zip(x.values()) {
        s.push_str(&format!("{},{}\n", fmt17(*t), fmt17(*v)));
    }
    s
}

// ------------------------------------------------------------------ solve

#[derive(Debug)]
pub enum Solved {
    Plain { kind: &'static str, report: SolveReport },
    Weighted { kind: &'static str, report: WeightedReport, alpha: Option<AlphaReport> },
}

#[derive(Debug)]
pub enum SolveFailure {
    Refused { criterion: String, largest_admissible_alpha: Option<f64> },
    Invalid(String),
}

impl From<Error> for SolveFailure {
    fn from(e: Error) -> Self {
        match e {
            Error::CriterionRefused { criterion, largest_admissible_alpha } => {
                SolveFailure::Refused { criterion, largest_admissible_alpha }
            }
            other => SolveFailure::Invalid(other.to_string()),
        }
    }
}

impl Solved {
    pub fn solution(&self) -> &GridFunction {
        match self {
            Solved::Plain { report, .. } => &report.solution,
            Solved::Weighted { report, .. } => &report.solution,
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            Solved::Plain { report, .. } => report.converged,
            Solved::Weighted { report, .. } => report.converged,
        }
    }

    pub fn to_json(&self) -> Value {
        let status = if self.converged() { "converged" } else { "not_converged" };
        match self {
            Solved::Plain { kind, report: r } => json!({
                "status": status,
                "problem": kind,
                "converged": r.converged,
                "residual_l1": r.residual_l1,
                "path": r.path,
                "min_singular_value": r.min_singular_value,
                "determinant_sign": r.determinant_sign,
                "space_tag": r.space_tag,
                "volterra": r.volterra,
                "spectral": r.spectral,
                "end_value": r.end_value,
                "picard_cap_hit": r.picard_cap_hit,
                "nodes": r.solution.mesh().len(),
            }),
            Solved::Weighted { kind, report, alpha } => json!({
                "status": status,
                "problem": kind,
                "report": report,
                "alpha_report": alpha,
                "nodes": report.solution.mesh().len(),
            }),
        }
    }
}

/// Runs the solver matching the problem type and the sign of `k`.
pub fn solve_built(b: &Built, alpha: Option<f64>) -> Result<Solved, SolveFailure> {
    match &b.problem {
        Problem::Plain { k, p, t, f, c } => {
            if *k > 0.0 {
                Ok(Solved::Plain { kind: "cauchy_plus", report: solve_cauchy_plus(*k, p, t, f, &b.options)? })
            } else {
                Ok(Solved::Plain { kind: "bvp_minus", report: solve_bvp_minus(*k, p, t, f, *c, &b.options)? })
            }
        }
        Problem::Weighted(w) => {
            if w.k > 0.0 {
                let report = solve_weighted_plus(w, &b.options)?;
                return Ok(Solved::Weighted { kind: "weighted_plus", report, alpha: None });
            }
            let (alpha, alpha_report) = match alpha {
                Some(a) => (a, None),
                None => match choose_alpha(w)? {
                    Some(r) => (r.alpha, Some(r)),
                    None => {
                        return Err(SolveFailure::Refused {
                            criterion: "no interval end alpha = 2^-m, m <= 40, makes the weighted map a contraction".into(),
                            largest_admissible_alpha: None,
                        })
                    }
                },
            };
            let report = solve_weighted_minus(w, alpha, &b.options)?;
            Ok(Solved::Weighted { kind: "weighted_minus", report, alpha: alpha_report })
        }
    }
}

fn refusal_json(criterion: &str, alpha: Option<f64>, weighted: bool) -> Value {
    let citation = if weighted {
        "weighted criterion: the gain sup (|T| nu)/nu must be strictly below |k|, and the interval [0, alpha] must give a contraction"
    } else {
        "solvability criterion"
    };
    json!({
        "status": "refused",
        "criterion": criterion,
        "citation": citation,
        "largest_admissible_alpha": alpha,
    })
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mesh: Option<usize>,
    pub grading: Option<f64>,
    pub tol: Option<f64>,
}

fn load_config(path: &Path, ov: &Overrides) -> CliResult<(ProblemConfig, Spans)> {
    let (mut cfg, spans) = config::load(path)?;
    if let Some(n) = ov.mesh {
        cfg.solver.mesh = n;
    }
    if let Some(g) = ov.grading {
        cfg.solver.grading = g;
    }
    if let Some(t) = ov.tol {
        cfg.solver.tol = t;
    }
    Ok((cfg, spans))
}

fn relative_to(config: &Path, p: &str) -> PathBuf {
    let p = PathBuf::from(p);
    if p.is_absolute() {
        p
    } else {
        config.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// `solve`: solution CSV and report JSON.
///
/// With `--format csv` the CSV goes to `out` (or `[output] solution`, or
/// stdout) and the report to `[output] report`, next to the CSV, or stderr.
/// With `--format json` the report goes to `out` (or `[output] report`, or
/// stdout) and the CSV only to `[output] solution`.
pub fn cmd_solve(config_path: &Path, out: Option<&Path>, format: Format, ov: &Overrides) -> CliResult<i32> {
    let (cfg, spans) = load_config(config_path, ov)?;
    let built = cfg.build(&spans)?;
    let cfg_solution = cfg.output.solution.as_deref().map(|p| relative_to(config_path, p));
    let cfg_report = cfg.output.report.as_deref().map(|p| relative_to(config_path, p));
    let (csv_dest, report_dest) = match format {
        Format::Csv => {
            let csv = out.map(Path::to_path_buf).or(cfg_solution);
            let report = cfg_report.or_else(|| csv.as_ref().map(|p| p.with_extension("json")));
            (csv, report)
        }
        Format::Json => (cfg_solution, out.map(Path::to_path_buf).or(cfg_report)),
    };
    let report_to_stderr = format == Format::Csv;
    let weighted = matches!(built.problem, Problem::Weighted(_));
    match solve_built(&built, cfg.solver.alpha) {
        Ok(solved) => {
            if format == Format::Csv || csv_dest.is_some() {
                write_to(csv_dest.as_deref(), &solution_csv(solved.solution()), false)?;
            }
            write_to(report_dest.as_deref(), &pretty(&solved.to_json()), report_to_stderr)?;
            Ok(if solved.converged() { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Err(SolveFailure::Refused { criterion, largest_admissible_alpha }) => {
            let v = refusal_json(&criterion, largest_admissible_alpha, weighted);
            write_to(report_dest.as_deref(), &pretty(&v), report_to_stderr)?;
            Ok(EXIT_REFUSED)
        }
        Err(SolveFailure::Invalid(msg)) => Err(CliError::Config(ConfigError { line: 0, message: msg })),
    }
}

// ----------------------------------------------------------------- region

pub fn parse_case(s: &str) -> CliResult<RegionCase> {
    match s {
        "plus" => Ok(RegionCase::Plus),
        "minus" => Ok(RegionCase::Minus),
        "nonsingular" => Ok(RegionCase::Nonsingular),
        other => Err(CliError::Usage(format!("unknown case '{other}' (plus, minus, nonsingular)"))),
    }
}

pub fn region_csv(case: RegionCase, samples: usize) -> CliResult<String> {
    let pts = region_boundary(case, samples).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut s = String::from("t_plus,t_minus,case\n");
    for (a, b) in pts {
        s.push_str(&format!("{},{},{}\n", fmt17(a), fmt17(b), case.name()));
    }
    Ok(s)
}

pub fn cmd_region(case: &str, samples: usize, out: Option<&Path>, format: Format) -> CliResult<i32> {
    let case = parse_case(case)?;
    let content = match format {
        Format::Csv => region_csv(case, samples)?,
        Format::Json => {
            let pts = region_boundary(case, samples).map_err(|e| CliError::Usage(e.to_string()))?;
            let rows: Vec<Value> = pts.iter().map(|(a, b)| json!({"t_plus": a, "t_minus": b})).collect();
            pretty(&json!({"case": case.name(), "boundary": rows}))
        }
    };
    write_to(out, &content, false)?;
    Ok(EXIT_OK)
}

// -------------------------------------------------------------- sharpness

#[derive(Debug, Clone, Serialize)]
pub struct ConditioningRow {
    pub eps: f64,
    pub min_singular_value: Option<f64>,
    pub determinant_sign: Option<i8>,
    pub delta: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SharpnessReport {
    pub case: &'static str,
    pub k: f64,
    pub t_plus: f64,
    pub t_minus: f64,
    pub resolution: usize,
    pub closed_form: f64,
    pub searched_min: f64,
    pub gap: f64,
    pub argmin: singfde::sharpness::TwoPointConfig,
    pub extremal: singfde::sharpness::TwoPointConfig,
    pub extremal_delta1: f64,
    pub witness_mesh_intervals: usize,
    pub conditioning: Vec<ConditioningRow>,
}

fn sign_of_case(case: &str) -> CliResult<(Sign, f64, &'static str)> {
    match case {
        "plus" => Ok((Sign::Plus, 1.0, "plus")),
        "minus" => Ok((Sign::Minus, -1.0, "minus")),
        other => Err(CliError::Usage(format!("unknown case '{other}' (plus, minus)"))),
    }
}

pub fn sharpness_report(case: &str, t_plus: f64, t_minus: f64, resolution: usize, mesh: &Mesh) -> CliResult<SharpnessReport> {
    let (sign, k, name) = sign_of_case(case)?;
    if !(t_plus >= 0.0 && t_minus >= 0.0 && t_plus.is_finite() && t_minus.is_finite()) {
        return Err(CliError::Usage(format!("norms must be finite and nonnegative, got ({t_plus}, {t_minus})")));
    }
    let usage = |e: Error| CliError::Usage(e.to_string());
    let m = minimize_delta1(sign, k, t_plus, t_minus, resolution).map_err(usage)?;
    let closed = closed_form_minimum(sign, t_plus, t_minus);
    let extremal = extremal_config(sign, t_plus, t_minus);
    let extremal_delta1 = delta1(sign, k, &extremal).map_err(usage)?;
    let p = SingularCoefficient::unit();
    let conditioning = WITNESS_EPS
        .iter()
        .map(|&eps| {
            let row = build_witness(sign, k, &extremal, eps).and_then(|w| {
                let d = collocation_diagnostic(sign, k, &p, &w.operator, mesh)?;
                Ok((d, w.delta_full(sign, k)?))
            });
            match row {
                Ok((d, delta)) => ConditioningRow {
                    eps,
                    min_singular_value: Some(d.min_singular_value),
                    determinant_sign: Some(d.determinant_sign),
                    delta: Some(delta),
                    error: None,
                },
                Err(e) => ConditioningRow { eps, min_singular_value: None, determinant_sign: None, delta: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    Ok(SharpnessReport {
        case: name,
        k,
        t_plus,
        t_minus,
        resolution,
        closed_form: closed,
        searched_min: m.min_value,
        gap: (m.min_value - closed).abs(),
        argmin: m.argmin,
        extremal,
        extremal_delta1,
        witness_mesh_intervals: mesh.intervals(),
        conditioning,
    })
}

pub fn cmd_sharpness(case: &str, t_plus: f64, t_minus: f64, resolution: usize, mesh: &Mesh, out: Option<&Path>) -> CliResult<i32> {
    let report = sharpness_report(case, t_plus, t_minus, resolution, mesh)?;
    write_to(out, &pretty(&report), false)?;
    Ok(EXIT_OK)
}

// --------------------------------------------------------------- converge

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergeRow {
    pub n: usize,
    pub error: f64,
    pub order: Option<f64>,
}

/// Sup-norm errors at the nodes against the analytic solution when the
/// configuration has one, otherwise against the finest mesh (which then has
/// no row of its own).
pub fn converge_rows(config_path: &Path, meshes: &[usize], ov: &Overrides) -> CliResult<Vec<ConvergeRow>> {
    if meshes.len() < 3 {
        return Err(CliError::Usage(format!("need at least 3 meshes, got {}", meshes.len())));
    }
    if meshes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Usage("mesh sizes must be strictly increasing".into()));
    }
    let (cfg, spans) = load_config(config_path, ov)?;
    let mut solutions = Vec::new();
    let mut exact = None;
    for &n in meshes {
        let built = cfg.build_on(&spans, n, cfg.solver.grading)?;
        let solved = match solve_built(&built, cfg.solver.alpha) {
            Ok(s) => s,
            Err(SolveFailure::Refused { criterion, .. }) => return Err(CliError::Usage(format!("N = {n}: refused: {criterion}"))),
            Err(SolveFailure::Invalid(msg)) => return Err(CliError::Usage(format!("N = {n}: {msg}"))),
        };
        solutions.push(solved.solution().clone());
        if built.has_exact() {
            exact = Some(built);
        }
    }
    let errors: Vec<(usize, f64)> = match &exact {
        Some(b) => meshes
            .iter()
            .zip(&solutions)
            .map(|(&n, x)| {
                let e = x
                    .mesh()
                    .nodes()
                    .iter()
                    .zip(x.values())
                    .map(|(&t, v)| (v - b.exact_at(t).expect("exact given")).abs())
                    .fold(0.0, f64::max);
                (n, e)
            })
            .collect(),
        None => {
            let reference = solutions.last().expect("at least 3 meshes");
            meshes[..meshes.len() - 1]
                .iter()
                .zip(&solutions)
                .map(|(&n, x)| {
                    let e = x.mesh().nodes().iter().zip(x.values()).map(|(&t, v)| (v - reference.eval(t)).abs()).fold(0.0, f64::max);
                    (n, e)
                })
                .collect()
        }
    };
    // errors at the rounding level carry no order information
    let scale = solutions.iter().map(GridFunction::sup_norm).fold(1.0, f64::max);
    let floor = ROUNDING_FLOOR * scale;
    let mut rows = Vec::with_capacity(errors.len());
    for (i, &(n, error)) in errors.iter().enumerate() {
        let order = if i == 0 {
            None
        } else {
            let (m, prev) = errors[i - 1];
            (prev > floor && error > floor).then(|| (prev / error).ln() / (n as f64 / m as f64).ln())
        };
        rows.push(ConvergeRow { n, error, order });
    }
    Ok(rows)
}

pub fn cmd_converge(config_path: &Path, meshes: &[usize], out: Option<&Path>, format: Format, ov: &Overrides) -> CliResult<i32> {
    let rows = converge_rows(config_path, meshes, ov)?;
    let content = match format {
        Format::Json => pretty(&rows),
        Format::Csv => {
            let mut s = String::from("N,error,order\n");
            for r in &rows {
                s.push_str(&format!("{},{},{}\n", r.n, fmt17(r.error), r.order.map(fmt17).unwrap_or_default()));
            }
            s
        }
    };
    write_to(out, &content, false)?;
    Ok(EXIT_OK)
}

// ------------------------------------------------------------------ check

/// Criteria and gains for a configuration, without solving.
pub fn check_json(config_path: &Path, ov: &Overrides) -> CliResult<(Value, bool)> {
    let (cfg, spans) = load_config(config_path, ov)?;
    let built = cfg.build(&spans)?;
    let t = built.problem.operator();
    let k = built.problem.k();
    let (t_plus, t_minus) = t.part_norms();
    let volterra = t.classify_volterra();
    let usage = |e: Error| CliError::Usage(e.to_string());
    let case = if k > 0.0 { RegionCase::Plus } else { RegionCase::Minus };
    let verdict = solvable(case, t_plus, t_minus).map_err(usage)?;
    let nonsingular = solvable_nonsingular(t_plus, t_minus).map_err(usage)?;
    let mut out = json!({
        "k": k,
        "p": built.problem.p().describe(),
        "t_plus": t_plus,
        "t_minus": t_minus,
        "volterra": volterra,
        "criterion": {"case": case.name(), "verdict": verdict},
        "nonsingular": nonsingular,
    });
    let guaranteed = match &built.problem {
        Problem::Plain { .. } => {
            verdict.solvable_for_all || (k > 0.0 && volterra.is_volterra()) || (k < 0.0 && volterra.is_anti_volterra())
        }
        Problem::Weighted(w) => {
            let gain = w.t.weighted_gain(&w.nu);
            let wv = solvable_weighted(gain, k).map_err(usage)?;
            let nu_condition = nu_condition_check(&w.p, &w.nu).ok();
            let mut ok = w.nu_on_operator || wv.solvable_for_all;
            let alpha = if k < 0.0 && ok {
                match choose_alpha(w) {
                    Ok(r) => {
                        ok &= r.is_some();
                        json!(r)
                    }
                    Err(e) => {
                        ok = false;
                        json!(e.to_string())
                    }
                }
            } else {
                Value::Null
            };
            out["weighted"] = json!({
                "nu": w.nu.describe(),
                "nu_on_operator": w.nu_on_operator,
                "gain": gain.to_f64(),
                "gain_near_origin": gain_near_origin(&w.t, &w.nu),
                "verdict": wv,
                "nu_condition": nu_condition,
                "alpha": alpha,
            });
            ok
        }
    };
    out["guaranteed"] = json!(guaranteed);
    Ok((out, guaranteed))
}

/// `check`: exit 0 when a criterion guarantees unique solvability, 2 otherwise.
pub fn cmd_check(config_path: &Path, out: Option<&Path>, ov: &Overrides) -> CliResult<i32> {
    let (v, guaranteed) = check_json(config_path, ov)?;
    write_to(out, &pretty(&v), false)?;
    Ok(if guaranteed { EXIT_OK } else { EXIT_REFUSED })
}
