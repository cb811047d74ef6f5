//! Problem description files.
//!
//! Line-oriented `key = value` text with bracketed section headers:
//!
//! ```text
//! # model problem
//! [equation]
//! k = 1
//! p = t^-1
//! nu = log              # optional: log, t^R or table:NAME
//! nu_on_operator = false
//!
//! [operator]            # repeatable keys
//! point = 0.5*t @ 0.25          # q(t) x(h(t)), h an expression or constant
//! kernel = 1 ; 0.5*t ; lower    # a(t) b(s) on full | lower | upper
//!
//! [data]
//! f = 1 + 2*t^2 - table:g
//! c = 0
//! exact = 0.5*t                 # optional analytic solution
//!
//! [solver]
//! mesh = 512
//! grading = 2
//! tol = 1e-8
//! mode = auto                   # auto | picard | collocation
//! max_iterations = 10000
//! alpha = auto                  # weighted minus problems: auto or a number
//!
//! [output]
//! solution = out.csv
//! report = out.json
//!
//! [table g]
//! t = 0, 0.5, 1
//! v = 0, 1, 0
//! ```
//!
//! Expressions are sums of terms `c`, `c*t`, `c*t^r` and `c*table:NAME`.
//! `p` is either `t^-MU` or `table:NAME`, optionally followed by `tail MU`.

use std::collections::BTreeMap;
use std::fmt;

use singfde::operator::KernelSupport;
use singfde::solver::{SolveMode, SolveOptions};
use singfde::weighted::WeightedProblem;
use singfde::{Deviation, GridFunction, KernelTerm, Mesh, PointTerm, RegularOperator, SingularCoefficient, WeightFunction};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    /// 1-based; 0 when no line applies.
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError { line, message: message.into() })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    One,
    /// `t^r`; `t` is `r = 1`.
    Pow(f64),
    Table(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub atom: Atom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr(pub Vec<Term>);

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr(vec![Term { coef: c, atom: Atom::One }])
    }

    /// The value when the expression does not depend on `t`.
    pub fn as_constant(&self) -> Option<f64> {
        self.0.iter().try_fold(0.0, |acc, term| match term.atom {
            Atom::One | Atom::Pow(0.0) => Some(acc + term.coef),
            _ => None,
        })
    }

    fn tables(&self) -> impl Iterator<Item = &str> {
        self.0.iter().filter_map(|t| match &t.atom {
            Atom::Table(name) => Some(name.as_str()),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PSpec {
    Power(f64),
    Table { name: String, tail: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum NuSpec {
    Log,
    Power(f64),
    Table(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorTerm {
    Point { q: Expr, h: Expr },
    Kernel { a: Expr, b: Expr, support: KernelSupport },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equation {
    pub k: f64,
    pub p: PSpec,
    pub nu: Option<NuSpec>,
    pub nu_on_operator: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Data {
    pub f: Expr,
    pub c: f64,
    pub exact: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solver {
    pub mesh: usize,
    pub grading: f64,
    pub tol: f64,
    pub mode: SolveMode,
    pub max_iterations: usize,
    /// `None` is `auto`.
    pub alpha: Option<f64>,
}

impl Default for Solver {
    fn default() -> Self {
        let o = SolveOptions::default();
        Self {
            mesh: singfde::mesh::DEFAULT_NODES,
            grading: singfde::mesh::DEFAULT_GRADING,
            tol: o.tol,
            mode: o.mode,
            max_iterations: o.max_iterations,
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Output {
    pub solution: Option<String>,
    pub report: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub equation: Equation,
    pub operator: Vec<OperatorTerm>,
    pub data: Data,
    pub solver: Solver,
    pub output: Output,
    pub tables: BTreeMap<String, Table>,
}

/// Line numbers of the keys, for validation messages.
#[derive(Debug, Clone, Default)]
pub struct Spans {
    keys: BTreeMap<String, usize>,
    operator: Vec<usize>,
}

impl Spans {
    fn line(&self, key: &str) -> usize {
        self.keys.get(key).copied().unwrap_or(0)
    }
}

// ---------------------------------------------------------------- parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(s: &str, line: usize) -> Result<Vec<Tok>, ConfigError> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            match text.parse::<f64>() {
                Ok(v) => out.push(Tok::Num(v)),
                Err(_) => return err(line, format!("bad number '{text}'")),
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*^:".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return err(line, format!("unexpected character '{c}'"));
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    toks: &'a [Tok],
    pos: usize,
    line: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn signed_number(&mut self) -> Result<f64, ConfigError> {
        let sign = if self.eat('-') {
            -1.0
        } else {
            self.eat('+');
            1.0
        };
        match self.next() {
            Some(Tok::Num(v)) => Ok(sign * v),
            _ => err(self.line, "expected a number"),
        }
    }

    fn atom(&mut self) -> Result<Atom, ConfigError> {
        match self.next() {
            Some(Tok::Ident(id)) if id == "t" => {
                if self.eat('^') {
                    Ok(Atom::Pow(self.signed_number()?))
                } else {
                    Ok(Atom::Pow(1.0))
                }
            }
            Some(Tok::Ident(id)) if id == "table" => {
                if !self.eat(':') {
                    return err(self.line, "expected ':' after 'table'");
                }
                match self.next() {
                    Some(Tok::Ident(name)) => Ok(Atom::Table(name)),
                    _ => err(self.line, "expected a table name"),
                }
            }
            Some(tok) => err(self.line, format!("unexpected {tok:?} in expression")),
            None => err(self.line, "unexpected end of expression"),
        }
    }

    fn term(&mut self, sign: f64) -> Result<Term, ConfigError> {
        let sign = if self.eat('-') {
            -sign
        } else {
            self.eat('+');
            sign
        };
        if let Some(Tok::Num(v)) = self.peek().cloned() {
            self.pos += 1;
            if self.eat('*') {
                Ok(Term { coef: sign * v, atom: self.atom()? })
            } else {
                Ok(Term { coef: sign * v, atom: Atom::One })
            }
        } else {
            Ok(Term { coef: sign, atom: self.atom()? })
        }
    }

    fn expr(&mut self) -> Result<Expr, ConfigError> {
        let mut terms = vec![self.term(1.0)?];
        loop {
            if self.eat('+') {
                terms.push(self.term(1.0)?);
            } else if self.eat('-') {
                terms.push(self.term(-1.0)?);
            } else {
                break;
            }
        }
        Ok(Expr(terms))
    }

    fn finish(&self) -> Result<(), ConfigError> {
        match self.peek() {
            None => Ok(()),
            Some(tok) => err(self.line, format!("trailing {tok:?}")),
        }
    }
}

pub fn parse_expr(s: &str, line: usize) -> Result<Expr, ConfigError> {
    let toks = tokenize(s, line)?;
    if toks.is_empty() {
        return err(line, "empty expression");
    }
    let mut c = Cursor { toks: &toks, pos: 0, line };
    let e = c.expr()?;
    c.finish()?;
    Ok(e)
}

fn parse_number(s: &str, line: usize, key: &str) -> Result<f64, ConfigError> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => err(line, format!("{key} must be a finite number, got '{s}'")),
    }
}

fn parse_list(s: &str, line: usize, key: &str) -> Result<Vec<f64>, ConfigError> {
    s.split(',').map(|x| parse_number(x, line, key)).collect()
}

fn parse_p(s: &str, line: usize) -> Result<PSpec, ConfigError> {
    let toks = tokenize(s, line)?;
    let mut c = Cursor { toks: &toks, pos: 0, line };
    let p = match c.atom()? {
        Atom::Pow(r) => {
            if r > 0.0 {
                return err(line, "p must be t^-MU with MU >= 1");
            }
            PSpec::Power(-r)
        }
        Atom::Table(name) => {
            let tail = match c.peek() {
                Some(Tok::Ident(id)) if id == "tail" => {
                    c.pos += 1;
                    c.signed_number()?
                }
                _ => 1.0,
            };
            PSpec::Table { name, tail }
        }
        Atom::One => unreachable!(),
    };
    c.finish()?;
    Ok(p)
}

fn parse_nu(s: &str, line: usize) -> Result<NuSpec, ConfigError> {
    if s.trim() == "log" {
        return Ok(NuSpec::Log);
    }
    let toks = tokenize(s, line)?;
    let mut c = Cursor { toks: &toks, pos: 0, line };
    let nu = match c.atom()? {
        Atom::Pow(r) => NuSpec::Power(r),
        Atom::Table(name) => NuSpec::Table(name),
        Atom::One => unreachable!(),
    };
    c.finish()?;
    Ok(nu)
}

fn parse_support(s: &str, line: usize) -> Result<KernelSupport, ConfigError> {
    match s.trim() {
        "full" => Ok(KernelSupport::Full),
        "lower" => Ok(KernelSupport::Lower),
        "upper" => Ok(KernelSupport::Upper),
        other => err(line, format!("unknown kernel support '{other}' (full, lower, upper)")),
    }
}

fn parse_mode(s: &str, line: usize) -> Result<SolveMode, ConfigError> {
    match s.trim() {
        "auto" => Ok(SolveMode::Auto),
        "picard" => Ok(SolveMode::Picard),
        "collocation" => Ok(SolveMode::Collocation),
        other => err(line, format!("unknown mode '{other}' (auto, picard, collocation)")),
    }
}

fn parse_bool(s: &str, line: usize, key: &str) -> Result<bool, ConfigError> {
    match s.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => err(line, format!("{key} must be true or false")),
    }
}

fn parse_usize(s: &str, line: usize, key: &str) -> Result<usize, ConfigError> {
    s.trim().parse().or_else(|_| err(line, format!("{key} must be a nonnegative integer, got '{s}'")))
}

fn parse_operator(key: &str, value: &str, line: usize) -> Result<OperatorTerm, ConfigError> {
    match key {
        "point" => {
            let Some((q, h)) = value.split_once('@') else {
                return err(line, "point term must read 'q @ h'");
            };
            Ok(OperatorTerm::Point { q: parse_expr(q, line)?, h: parse_expr(h, line)? })
        }
        "kernel" => {
            let parts: Vec<&str> = value.split(';').collect();
            if parts.len() != 3 {
                return err(line, "kernel term must read 'a(t) ; b(s) ; support'");
            }
            Ok(OperatorTerm::Kernel {
                a: parse_expr(parts[0], line)?,
                b: parse_expr(parts[1], line)?,
                support: parse_support(parts[2], line)?,
            })
        }
        other => err(line, format!("unknown key '{other}' in [operator]")),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Section {
    Equation,
    Operator,
    Data,
    Solver,
    Output,
    Table(String),
}

/// Parses a configuration; keys are checked but values are not yet validated.
pub fn parse(text: &str) -> Result<(ProblemConfig, Spans), ConfigError> {
    let mut spans = Spans::default();
    let mut section: Option<Section> = None;
    let mut k = None;
    let mut p = PSpec::Power(1.0);
    let mut nu = None;
    let mut nu_on_operator = false;
    let mut operator = Vec::new();
    let mut f = None;
    let mut c = 0.0;
    let mut exact = None;
    let mut solver = Solver::default();
    let mut output = Output::default();
    // name -> (t, v, header line)
    type Partial = (Option<Vec<f64>>, Option<Vec<f64>>, usize);
    let mut tables: BTreeMap<String, Partial> = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let Some(header) = header.strip_suffix(']') else {
                return err(line, "section header must end with ']'");
            };
            let words: Vec<&str> = header.split_whitespace().collect();
            let next = match words.as_slice() {
                ["equation"] => Section::Equation,
                ["operator"] => Section::Operator,
                ["data"] => Section::Data,
                ["solver"] => Section::Solver,
                ["output"] => Section::Output,
                ["table", name] => {
                    if tables.contains_key(*name) {
                        return err(line, format!("table '{name}' defined twice"));
                    }
                    tables.insert(name.to_string(), (None, None, line));
                    Section::Table(name.to_string())
                }
                _ => return err(line, format!("unknown section [{header}]")),
            };
            section = Some(next);
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return err(line, "expected 'key = value'");
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = &section else {
            return err(line, "key outside of any section");
        };
        let qualified = match sec {
            Section::Table(name) => format!("table {name}.{key}"),
            Section::Operator => String::new(),
            s => format!("{}.{key}", format!("{s:?}").to_lowercase()),
        };
        if !qualified.is_empty() && spans.keys.insert(qualified.clone(), line).is_some() {
            return err(line, format!("duplicate key '{key}'"));
        }
        match sec {
            Section::Equation => match key {
                "k" => k = Some(parse_number(value, line, "k")?),
                "p" => p = parse_p(value, line)?,
                "nu" => nu = Some(parse_nu(value, line)?),
                "nu_on_operator" => nu_on_operator = parse_bool(value, line, key)?,
                _ => return err(line, format!("unknown key '{key}' in [equation]")),
            },
            Section::Operator => {
                operator.push(parse_operator(key, value, line)?);
                spans.operator.push(line);
            }
            Section::Data => match key {
                "f" => f = Some(parse_expr(value, line)?),
                "c" => c = parse_number(value, line, "c")?,
                "exact" => exact = Some(parse_expr(value, line)?),
                _ => return err(line, format!("unknown key '{key}' in [data]")),
            },
            Section::Solver => match key {
                "mesh" => solver.mesh = parse_usize(value, line, key)?,
                "grading" => solver.grading = parse_number(value, line, key)?,
                "tol" => solver.tol = parse_number(value, line, key)?,
                "mode" => solver.mode = parse_mode(value, line)?,
                "max_iterations" => solver.max_iterations = parse_usize(value, line, key)?,
                "alpha" => solver.alpha = if value == "auto" { None } else { Some(parse_number(value, line, key)?) },
                _ => return err(line, format!("unknown key '{key}' in [solver]")),
            },
            Section::Output => match key {
                "solution" => output.solution = Some(value.to_string()),
                "report" => output.report = Some(value.to_string()),
                _ => return err(line, format!("unknown key '{key}' in [output]")),
            },
            Section::Table(name) => {
                let entry = tables.get_mut(name).expect("registered at the header");
                match key {
                    "t" => entry.0 = Some(parse_list(value, line, key)?),
                    "v" => entry.1 = Some(parse_list(value, line, key)?),
                    _ => return err(line, format!("unknown key '{key}' in [table {name}]")),
                }
            }
        }
    }

    let Some(k) = k else { return err(0, "missing [equation] k") };
    let Some(f) = f else { return err(0, "missing [data] f") };
    let mut out_tables = BTreeMap::new();
    for (name, (t, v, line)) in tables {
        let (Some(t), Some(v)) = (t, v) else {
            return err(line, format!("table '{name}' needs both t and v"));
        };
        spans.keys.insert(format!("table {name}"), line);
        out_tables.insert(name, Table { t, v });
    }
    let config = ProblemConfig {
        equation: Equation { k, p, nu, nu_on_operator },
        operator,
        data: Data { f, c, exact },
        solver,
        output,
        tables: out_tables,
    };
    Ok((config, spans))
}

// ------------------------------------------------------------- printing

fn num(v: f64) -> String {
    format!("{v:?}")
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::One => f.write_str("1"),
            Atom::Pow(r) => write!(f, "t^{}", num(*r)),
            Atom::Table(name) => write!(f, "table:{name}"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, term) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            match term.atom {
                Atom::One => f.write_str(&num(term.coef))?,
                _ => write!(f, "{}*{}", num(term.coef), term.atom)?,
            }
        }
        Ok(())
    }
}

fn support_name(s: KernelSupport) -> &'static str {
    match s {
        KernelSupport::Full => "full",
        KernelSupport::Lower => "lower",
        KernelSupport::Upper => "upper",
    }
}

fn mode_name(m: SolveMode) -> &'static str {
    match m {
        SolveMode::Auto => "auto",
        SolveMode::Picard => "picard",
        SolveMode::Collocation => "collocation",
    }
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for ProblemConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.equation;
        writeln!(f, "[equation]")?;
        writeln!(f, "k = {}", num(e.k))?;
        match &e.p {
            PSpec::Power(mu) => writeln!(f, "p = t^-{}", num(*mu))?,
            PSpec::Table { name, tail } => writeln!(f, "p = table:{name} tail {}", num(*tail))?,
        }
        match &e.nu {
            None => {}
            Some(NuSpec::Log) => writeln!(f, "nu = log")?,
            Some(NuSpec::Power(r)) => writeln!(f, "nu = t^{}", num(*r))?,
            Some(NuSpec::Table(name)) => writeln!(f, "nu = table:{name}")?,
        }
        writeln!(f, "nu_on_operator = {}", e.nu_on_operator)?;
        writeln!(f, "\n[operator]")?;
        for term in &self.operator {
            match term {
                OperatorTerm::Point { q, h } => writeln!(f, "point = {q} @ {h}")?,
                OperatorTerm::Kernel { a, b, support } => writeln!(f, "kernel = {a} ; {b} ; {}", support_name(*support))?,
            }
        }
        writeln!(f, "\n[data]")?;
        writeln!(f, "f = {}", self.data.f)?;
        writeln!(f, "c = {}", num(self.data.c))?;
        if let Some(x) = &self.data.exact {
            writeln!(f, "exact = {x}")?;
        }
        let s = &self.solver;
        writeln!(f, "\n[solver]")?;
        writeln!(f, "mesh = {}", s.mesh)?;
        writeln!(f, "grading = {}", num(s.grading))?;
        writeln!(f, "tol = {}", num(s.tol))?;
        writeln!(f, "mode = {}", mode_name(s.mode))?;
        writeln!(f, "max_iterations = {}", s.max_iterations)?;
        match s.alpha {
            None => writeln!(f, "alpha = auto")?,
            Some(a) => writeln!(f, "alpha = {}", num(a))?,
        }
        writeln!(f, "\n[output]")?;
        if let Some(p) = &self.output.solution {
            writeln!(f, "solution = {p}")?;
        }
        if let Some(p) = &self.output.report {
            writeln!(f, "report = {p}")?;
        }
        for (name, table) in &self.tables {
            writeln!(f, "\n[table {name}]")?;
            writeln!(f, "t = {}", list(&table.t))?;
            writeln!(f, "v = {}", list(&table.v))?;
        }
        Ok(())
    }
}

// ------------------------------------------------------------- building

/// A validated problem ready for the solvers.
#[derive(Debug, Clone)]
pub enum Problem {
    Plain {
        k: f64,
        p: SingularCoefficient,
        t: RegularOperator,
        f: GridFunction,
        c: f64,
    },
    Weighted(WeightedProblem),
}

impl Problem {
    pub fn k(&self) -> f64 {
        match self {
            Problem::Plain { k, .. } => *k,
            Problem::Weighted(w) => w.k,
        }
    }

    pub fn operator(&self) -> &RegularOperator {
        match self {
            Problem::Plain { t, .. } => t,
            Problem::Weighted(w) => &w.t,
        }
    }

    pub fn p(&self) -> &SingularCoefficient {
        match self {
            Problem::Plain { p, .. } => p,
            Problem::Weighted(w) => &w.p,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Built {
    pub problem: Problem,
    pub mesh: Mesh,
    pub options: SolveOptions,
    exact: Option<Expr>,
    functions: BTreeMap<String, GridFunction>,
}

impl Built {
    /// The analytic solution at `t`, when the configuration gives one.
    pub fn exact_at(&self, t: f64) -> Option<f64> {
        let e = self.exact.as_ref()?;
        Some(
            e.0.iter()
                .map(|term| {
                    term.coef
                        * match &term.atom {
                            Atom::One => 1.0,
                            Atom::Pow(r) if *r == 0.0 => 1.0,
                            Atom::Pow(r) => t.powf(*r),
                            Atom::Table(name) => self.functions[name].eval(t),
                        }
                })
                .sum(),
        )
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }
}

fn lib_err(line: usize) -> impl Fn(singfde::Error) -> ConfigError {
    move |e| ConfigError { line, message: e.to_string() }
}

struct Tables<'a> {
    functions: BTreeMap<&'a str, GridFunction>,
    spans: &'a Spans,
}

impl ProblemConfig {
    fn table_functions<'a>(&'a self, spans: &'a Spans) -> Result<Tables<'a>, ConfigError> {
        let mut functions = BTreeMap::new();
        for (name, table) in &self.tables {
            let line = spans.line(&format!("table {name}"));
            if table.t.len() != table.v.len() {
                return err(line, format!("table '{name}' has {} nodes but {} values", table.t.len(), table.v.len()));
            }
            // tables used for p start inside (0, 1) and are not grid functions
            if table.t.first() == Some(&0.0) {
                let mesh = Mesh::from_nodes(table.t.clone()).map_err(lib_err(line))?;
                if mesh.end() != 1.0 {
                    return err(line, format!("table '{name}' must end at t = 1"));
                }
                functions.insert(name.as_str(), GridFunction::new(mesh, table.v.clone()).map_err(lib_err(line))?);
            }
        }
        Ok(Tables { functions, spans })
    }

    /// Validates the configuration and builds the problem on the solver mesh.
    pub fn build(&self, spans: &Spans) -> Result<Built, ConfigError> {
        self.build_on(spans, self.solver.mesh, self.solver.grading)
    }

    /// As [`ProblemConfig::build`] with the mesh parameters overridden.
    pub fn build_on(&self, spans: &Spans, n: usize, grading: f64) -> Result<Built, ConfigError> {
        let eq = &self.equation;
        let k_line = spans.line("equation.k");
        if eq.k == 0.0 {
            return err(k_line, "k must be nonzero");
        }
        let mesh_line = spans.line("solver.mesh").max(spans.line("solver.grading"));
        let mesh = Mesh::graded(n, grading).map_err(lib_err(mesh_line))?;
        let tol_line = spans.line("solver.tol");
        if self.solver.tol <= 0.0 {
            return err(tol_line, "tol must be positive");
        }
        if let Some(a) = self.solver.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return err(spans.line("solver.alpha"), format!("alpha must lie in (0, 1], got {a}"));
            }
        }
        let tables = self.table_functions(spans)?;

        let p_line = spans.line("equation.p");
        let p = match &eq.p {
            PSpec::Power(mu) => SingularCoefficient::power_law(*mu).map_err(lib_err(p_line))?,
            PSpec::Table { name, tail } => {
                let table = self.tables.get(name).ok_or_else(|| ConfigError { line: p_line, message: format!("unknown table '{name}'") })?;
                SingularCoefficient::tabulated(table.t.clone(), table.v.clone(), *tail).map_err(lib_err(p_line))?
            }
        };

        let mut t = RegularOperator::zero();
        for (term, &line) in self.operator.iter().zip(&spans.operator) {
            match term {
                OperatorTerm::Point { q, h } => {
                    let q = tables.sample(q, &mesh, line)?;
                    let h = match h.as_constant() {
                        Some(c) => Deviation::Constant(c),
                        None => Deviation::Function(tables.sample(h, &mesh, line)?),
                    };
                    t = t.with_point(PointTerm::new(q, h).map_err(lib_err(line))?);
                }
                OperatorTerm::Kernel { a, b, support } => {
                    let a = tables.sample(a, &mesh, line)?;
                    let b = tables.sample(b, &mesh, line)?;
                    let (av, bv) = (a.values(), b.values());
                    let values = av.iter().flat_map(|x| bv.iter().map(move |y| x * y)).collect();
                    t = t.with_kernel(KernelTerm::new(mesh.clone(), values, *support).map_err(lib_err(line))?);
                }
            }
        }

        let f_line = spans.line("data.f");
        let f = tables.sample(&self.data.f, &mesh, f_line)?;
        if let Some(x) = &self.data.exact {
            tables.sample(x, &mesh, spans.line("data.exact"))?;
        }
        if self.data.c != 0.0 && eq.k > 0.0 {
            return err(spans.line("data.c"), "c applies only to k < 0 (for k > 0 the solution starts at 0)");
        }

        let nu_line = spans.line("equation.nu");
        let nu = match &eq.nu {
            None => None,
            Some(NuSpec::Log) => Some(WeightFunction::Log),
            Some(NuSpec::Power(r)) => Some(WeightFunction::power(*r).map_err(lib_err(nu_line))?),
            Some(NuSpec::Table(name)) => {
                let g = tables.get(name, nu_line)?;
                Some(WeightFunction::tabulated(g.clone()).map_err(lib_err(nu_line))?)
            }
        };
        if eq.nu_on_operator && nu.is_none() {
            return err(spans.line("equation.nu_on_operator"), "nu_on_operator needs a weight nu");
        }
        if nu.is_none() && self.solver.alpha.is_some() {
            return err(spans.line("solver.alpha"), "alpha only applies to weighted problems");
        }

        let problem = match nu {
            None => Problem::Plain { k: eq.k, p, t, f, c: self.data.c },
            Some(nu) => Problem::Weighted(WeightedProblem {
                k: eq.k,
                p,
                nu,
                t,
                f,
                c: self.data.c,
                nu_on_operator: eq.nu_on_operator,
            }),
        };
        let options = SolveOptions { tol: self.solver.tol, mode: self.solver.mode, max_iterations: self.solver.max_iterations };
        let functions = tables.functions.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        Ok(Built { problem, mesh, options, exact: self.data.exact.clone(), functions })
    }
}

impl Tables<'_> {
    fn get(&self, name: &str, line: usize) -> Result<&GridFunction, ConfigError> {
        match self.functions.get(name) {
            Some(g) => Ok(g),
            None if self.spans.keys.contains_key(&format!("table {name}")) => {
                err(line, format!("table '{name}' must start at t = 0 to be used as a function"))
            }
            None => err(line, format!("unknown table '{name}'")),
        }
    }

    /// Samples `e` at the nodes of `mesh`, adding table nodes as breakpoints.
    fn sample(&self, e: &Expr, mesh: &Mesh, line: usize) -> Result<GridFunction, ConfigError> {
        let mut breaks = Vec::new();
        for name in e.tables() {
            breaks.extend_from_slice(self.get(name, line)?.mesh().nodes());
        }
        for term in &e.0 {
            if let Atom::Pow(r) = term.atom {
                if r < 0.0 {
                    return err(line, format!("t^{r} is unbounded at 0; only p may be singular"));
                }
            }
        }
        let mesh = if breaks.is_empty() { mesh.clone() } else { mesh.merged_with(&breaks) };
        let mut values = vec![0.0; mesh.len()];
        for term in &e.0 {
            match &term.atom {
                Atom::One => values.iter_mut().for_each(|v| *v += term.coef),
                Atom::Pow(r) => {
                    for (v, &t) in values.iter_mut().zip(mesh.nodes()) {
                        *v += term.coef * if *r == 0.0 { 1.0 } else { t.powf(*r) };
                    }
                }
                Atom::Table(name) => {
                    let g = self.get(name, line)?;
                    for (v, &t) in values.iter_mut().zip(mesh.nodes()) {
                        *v += term.coef * g.eval(t);
                    }
                }
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return err(line, "expression is not finite on [0, 1]");
        }
        GridFunction::new(mesh, values).map_err(lib_err(line))
    }
}

/// Reads and parses a configuration file.
pub fn load(path: &std::path::Path) -> Result<(ProblemConfig, Spans), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError { line: 0, message: format!("{}: {e}", path.display()) })?;
    parse(&text)
}
