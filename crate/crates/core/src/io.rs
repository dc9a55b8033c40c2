//! System files, the example catalog, the observable grammar and report rendering.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};
use crate::linalg::{cplx, identity, psd_power, CMatrix};
use crate::popescu::PopescuSystem;
use crate::state::WindowObservable;

/// A Popescu system as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemFile {
    pub name: String,
    pub d: usize,
    pub bond_dim: usize,
    pub matrices: Vec<CMatrix>,
    pub metadata: Option<Map<String, Value>>,
}

fn parse_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::ParseError { path: path.into(), message: message.into() }
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| parse_err(key, "missing field"))
}

fn as_dim(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .filter(|&n| n > 0)
        .map(|n| n as usize)
        .ok_or_else(|| parse_err(path, "expected a positive integer"))
}

fn as_array<'a>(v: &'a Value, path: &str, len: usize) -> Result<&'a Vec<Value>> {
    let arr = v.as_array().ok_or_else(|| parse_err(path, "expected an array"))?;
    if arr.len() != len {
        return Err(parse_err(path, format!("expected {len} entries, found {}", arr.len())));
    }
    Ok(arr)
}

impl SystemFile {
    pub fn new(name: &str, matrices: Vec<CMatrix>) -> Self {
        SystemFile {
            name: name.to_string(),
            d: matrices.len(),
            bond_dim: matrices.first().map_or(0, |m| m.nrows()),
            matrices,
            metadata: None,
        }
    }

    pub fn with_metadata(mut self, key: &str, value: Value) -> Self {
        self.metadata.get_or_insert_with(Map::new).insert(key.to_string(), value);
        self
    }

    pub fn from_value(value: &Value) -> Result<Self> {
        let obj = value.as_object().ok_or_else(|| parse_err("$", "expected an object"))?;
        if let Some(key) = obj.keys().find(|k| !["name", "d", "bond_dim", "matrices", "metadata"].contains(&k.as_str())) {
            return Err(parse_err(key.as_str(), "unknown field"));
        }
        let name = field(obj, "name")?
            .as_str()
            .ok_or_else(|| parse_err("name", "expected a string"))?
            .to_string();
        let d = as_dim(field(obj, "d")?, "d")?;
        let k = as_dim(field(obj, "bond_dim")?, "bond_dim")?;
        let mats = as_array(field(obj, "matrices")?, "matrices", d)?;
        let mut matrices = Vec::with_capacity(d);
        for (a, m) in mats.iter().enumerate() {
            let path = format!("matrices[{a}]");
            let rows = as_array(m, &path, k)?;
            let mut out = CMatrix::zeros(k, k);
            for (r, row) in rows.iter().enumerate() {
                let path = format!("{path}[{r}]");
                let entries = as_array(row, &path, k)?;
                for (c, e) in entries.iter().enumerate() {
                    let path = format!("{path}[{c}]");
                    let pair = as_array(e, &path, 2)?;
                    let re = pair[0].as_f64().ok_or_else(|| parse_err(format!("{path}[0]"), "expected a number"))?;
                    let im = pair[1].as_f64().ok_or_else(|| parse_err(format!("{path}[1]"), "expected a number"))?;
                    out[(r, c)] = cplx(re, im);
                }
            }
            matrices.push(out);
        }
        let metadata = match obj.get("metadata") {
            None | Some(Value::Null) => None,
            Some(Value::Object(m)) => Some(m.clone()),
            Some(_) => return Err(parse_err("metadata", "expected an object")),
        };
        Ok(SystemFile { name, d, bond_dim: k, matrices, metadata })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| parse_err(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        SystemFile::from_value(&value)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        SystemFile::from_json_str(&text).map_err(|e| match e {
            Error::ParseError { path: field, message } => {
                Error::ParseError { path: format!("{}: {field}", path.display()), message }
            }
            other => other,
        })
    }

    pub fn to_value(&self) -> Value {
        let matrices: Vec<Value> = self
            .matrices
            .iter()
            .map(|m| {
                Value::Array(
                    (0..m.nrows())
                        .map(|r| Value::Array((0..m.ncols()).map(|c| complex_value(m[(r, c)])).collect()))
                        .collect(),
                )
            })
            .collect();
        let mut obj = Map::new();
        obj.insert("name".into(), Value::String(self.name.clone()));
        obj.insert("d".into(), Value::from(self.d));
        obj.insert("bond_dim".into(), Value::from(self.bond_dim));
        obj.insert("matrices".into(), Value::Array(matrices));
        if let Some(m) = &self.metadata {
            obj.insert("metadata".into(), Value::Object(m.clone()));
        }
        Value::Object(obj)
    }

    /// Pretty JSON with full round-trip precision.
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("system file serializes");
        s.push('\n');
        s
    }

    pub fn to_system(&self, cuntz_tol: f64) -> Result<PopescuSystem> {
        PopescuSystem::new(self.matrices.clone(), cuntz_tol)
    }

    /// Site basis declared in the metadata, defaulting to the spin-z basis.
    pub fn site_basis(&self) -> Result<SiteBasis> {
        match self.metadata.as_ref().and_then(|m| m.get("site_basis")) {
            None => Ok(SiteBasis::SpinZ),
            Some(Value::String(s)) if s == "spin_z" => Ok(SiteBasis::SpinZ),
            Some(Value::String(s)) if s == "cartesian" => Ok(SiteBasis::Cartesian),
            Some(other) => Err(parse_err("metadata.site_basis", format!("unknown site basis {other}"))),
        }
    }
}

fn complex_value(z: Complex64) -> Value {
    Value::Array(vec![float_value(z.re), float_value(z.im)])
}

fn float_value(x: f64) -> Value {
    Number::from_f64(if x == 0.0 { 0.0 } else { x }).map_or(Value::Null, Value::Number)
}

pub const CATALOG_NAMES: [&str; 6] = ["aklt", "neel_flip", "product_pure", "ghz_mixture", "markov_chain", "random_ergodic:SEED"];

/// Catalog entries with no parameter.
pub const FIXED_EXAMPLES: [&str; 5] = ["aklt", "neel_flip", "product_pure", "ghz_mixture", "markov_chain"];

fn real(rows: usize, entries: &[f64]) -> CMatrix {
    CMatrix::from_iterator(rows, rows, entries.iter().map(|&x| cplx(x, 0.0))).transpose()
}

/// Stochastic matrix of the `markov_chain` example, rows summing to one.
/// It is irreducible and aperiodic but neither doubly stochastic nor reversible.
pub const MARKOV_P: [[f64; 3]; 3] = [[0.5, 0.3, 0.2], [0.2, 0.5, 0.3], [0.6, 0.1, 0.3]];

/// `d` Kraus operators `v = S^{-1/2} G` with uniform random complex entries in `G`
/// and `S = Σ G G*`.
pub fn random_popescu_matrices(d: usize, k: usize, seed: u64) -> Vec<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g: Vec<CMatrix> = (0..d)
        .map(|_| CMatrix::from_fn(k, k, |_, _| cplx(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)))
        .collect();
    let mut s = CMatrix::zeros(k, k);
    for m in &g {
        s += m * m.adjoint();
    }
    let (s_inv_half, _) = psd_power(&s, -0.5, 0.0);
    g.iter().map(|m| &s_inv_half * m).collect()
}

fn parse_seed(name: &str) -> Option<u64> {
    let rest = name.strip_prefix("random_ergodic")?;
    let seed = rest
        .strip_prefix(':')
        .or_else(|| rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')))?;
    seed.trim().parse().ok()
}

pub fn examples_catalog(name: &str) -> Result<SystemFile> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let file = match name {
        "aklt" => {
            // spin-1 in the Cartesian basis |x⟩, |y⟩, |z⟩: v_a = σ_a/√3
            let s = 1.0 / 3f64.sqrt();
            let x = real(2, &[0.0, s, s, 0.0]);
            let y = CMatrix::from_row_slice(2, 2, &[cplx(0.0, 0.0), cplx(0.0, -s), cplx(0.0, s), cplx(0.0, 0.0)]);
            let z = real(2, &[s, 0.0, 0.0, -s]);
            SystemFile::new("aklt", vec![x, y, z]).with_metadata("site_basis", Value::from("cartesian"))
        }
        "neel_flip" => SystemFile::new("neel_flip", vec![real(2, &[0.0, 1.0, 0.0, 0.0]), real(2, &[0.0, 0.0, 1.0, 0.0])]),
        "product_pure" => SystemFile::new("product_pure", vec![real(1, &[h]), real(1, &[h])]),
        "ghz_mixture" => SystemFile::new("ghz_mixture", vec![real(2, &[h, 0.0, 0.0, h]), real(2, &[0.0, h, h, 0.0])]),
        "markov_chain" => {
            // v_a = Σ_b √P(a→b) |a⟩⟨b|, so τ acts on diagonal x as P
            let v = MARKOV_P
                .iter()
                .enumerate()
                .map(|(a, row)| {
                    let mut m = CMatrix::zeros(3, 3);
                    for (b, p) in row.iter().enumerate() {
                        m[(a, b)] = cplx(p.sqrt(), 0.0);
                    }
                    m
                })
                .collect();
            SystemFile::new("markov_chain", v)
        }
        _ => {
            let seed = parse_seed(name).ok_or_else(|| Error::UnknownExample(name.to_string()))?;
            SystemFile::new(&format!("random_ergodic:{seed}"), random_popescu_matrices(2, 2, seed))
                .with_metadata("seed", Value::from(seed))
        }
    };
    Ok(file)
}

/// Basis of a single site's Hilbert space used to interpret named spin operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteBasis {
    /// `|s⟩, |s−1⟩, …, |−s⟩` for `d = 2s + 1`.
    SpinZ,
    /// `|x⟩, |y⟩, |z⟩` for spin 1, with `(S_a)_{bc} = −i ε_{abc}`.
    Cartesian,
}

/// Spin operator `Sx`, `Sy`, `Sz`, `Sp` or `Sm` on a `d`-dimensional site.
pub fn spin_operator(name: &str, d: usize, basis: SiteBasis) -> Result<CMatrix> {
    if basis == SiteBasis::Cartesian {
        if d != 3 {
            return Err(Error::ShapeMismatch("the Cartesian site basis needs d = 3".into()));
        }
        let eps = |a: usize, b: usize, c: usize| -> f64 {
            if a == b || b == c || a == c {
                0.0
            } else if (a, b, c) == (0, 1, 2) || (a, b, c) == (1, 2, 0) || (a, b, c) == (2, 0, 1) {
                1.0
            } else {
                -1.0
            }
        };
        let cart = |a: usize| CMatrix::from_fn(3, 3, |b, c| cplx(0.0, -eps(a, b, c)));
        let i = cplx(0.0, 1.0);
        return match name {
            "Sx" => Ok(cart(0)),
            "Sy" => Ok(cart(1)),
            "Sz" => Ok(cart(2)),
            "Sp" => Ok(cart(0) + cart(1) * i),
            "Sm" => Ok(cart(0) - cart(1) * i),
            _ => Err(parse_err(name, "unknown operator")),
        };
    }
    let s = (d as f64 - 1.0) / 2.0;
    let mz = |m: usize| s - m as f64;
    let mut plus = CMatrix::zeros(d, d);
    for c in 1..d {
        let m = mz(c);
        plus[(c - 1, c)] = cplx((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let minus = plus.adjoint();
    match name {
        "Sz" => Ok(CMatrix::from_fn(d, d, |r, c| if r == c { cplx(mz(r), 0.0) } else { cplx(0.0, 0.0) })),
        "Sx" => Ok((&plus + &minus) * cplx(0.5, 0.0)),
        "Sy" => Ok((&plus - &minus) * cplx(0.0, -0.5)),
        "Sp" => Ok(plus),
        "Sm" => Ok(minus),
        _ => Err(parse_err(name, "unknown operator")),
    }
}

/// A term of an observable: scalar times a product of single-site operators.
struct Term {
    scalar: Complex64,
    sites: BTreeMap<i64, CMatrix>,
}

struct ObsParser<'a> {
    chars: Vec<char>,
    pos: usize,
    d: usize,
    basis: SiteBasis,
    src: &'a str,
}

impl ObsParser<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        parse_err(format!("observable '{}' at offset {}", self.src, self.pos), message)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}'")))
        }
    }

    fn integer(&mut self) -> Result<i64> {
        let start = self.pos;
        if !self.eat('-') {
            self.eat('+');
        }
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse().map_err(|_| self.err("expected an integer"))
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        // exponent only when followed by a digit or a signed digit, so `2e(1,2)` stays an operator
        if matches!(self.peek(), Some('e' | 'E')) {
            let next = self.chars.get(self.pos + 1).copied();
            let after = self.chars.get(self.pos + 2).copied();
            let digit = |c: Option<char>| c.is_some_and(|c| c.is_ascii_digit());
            if digit(next) || (matches!(next, Some('+' | '-')) && digit(after)) {
                self.pos += 2;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse().map_err(|_| self.err(format!("bad number '{text}'")))
    }

    fn site(&mut self) -> Result<i64> {
        self.expect('@')?;
        self.integer()
    }

    fn factor(&mut self, term: &mut Term) -> Result<()> {
        let c = self.peek().ok_or_else(|| self.err("unexpected end of input"))?;
        if c.is_ascii_digit() || c == '.' {
            let x = self.number()?;
            term.scalar *= if self.eat('i') { cplx(0.0, x) } else { cplx(x, 0.0) };
            return Ok(());
        }
        if self.eat('i') {
            term.scalar *= cplx(0.0, 1.0);
            return Ok(());
        }
        if self.eat('(') {
            let inner = self.expr()?;
            self.expect(')')?;
            if inner.iter().any(|t| !t.sites.is_empty()) {
                return Err(self.err("parentheses may only enclose scalars"));
            }
            term.scalar *= inner.iter().map(|t| t.scalar).sum::<Complex64>();
            return Ok(());
        }
        let op = if self.eat('e') {
            self.expect('(')?;
            let i = self.integer()?;
            self.expect(',')?;
            let j = self.integer()?;
            self.expect(')')?;
            let d = self.d as i64;
            if !(1..=d).contains(&i) || !(1..=d).contains(&j) {
                return Err(self.err(format!("matrix unit indices must lie in 1..={d}")));
            }
            let mut m = CMatrix::zeros(self.d, self.d);
            m[((i - 1) as usize, (j - 1) as usize)] = cplx(1.0, 0.0);
            m
        } else if self.eat('I') {
            identity(self.d)
        } else if self.eat('S') {
            let axis = self.peek().ok_or_else(|| self.err("expected spin component"))?;
            self.pos += 1;
            let name = format!("S{axis}");
            spin_operator(&name, self.d, self.basis).map_err(|_| self.err(format!("unknown operator '{name}'")))?
        } else {
            return Err(self.err(format!("unexpected '{c}'")));
        };
        let site = self.site()?;
        let entry = term.sites.entry(site).or_insert_with(|| identity(self.d));
        *entry = &*entry * op;
        Ok(())
    }

    fn term(&mut self) -> Result<Term> {
        let mut term = Term { scalar: cplx(1.0, 0.0), sites: BTreeMap::new() };
        self.factor(&mut term)?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    self.factor(&mut term)?;
                }
                Some(c) if c != '+' && c != '-' && c != ')' => self.factor(&mut term)?,
                _ => return Ok(term),
            }
        }
    }

    fn expr(&mut self) -> Result<Vec<Term>> {
        let mut terms = Vec::new();
        let mut sign = if self.eat('-') { -1.0 } else { self.eat('+'); 1.0 };
        loop {
            let mut t = self.term()?;
            t.scalar *= sign;
            terms.push(t);
            sign = if self.eat('+') {
                1.0
            } else if self.eat('-') {
                -1.0
            } else {
                return Ok(terms);
            };
        }
    }
}

/// Parses an observable such as `Sz@0 * Sz@1`, `0.5 e(1,2)@0 - 2i Sy@3`.
pub fn parse_observable(src: &str, d: usize, basis: SiteBasis) -> Result<WindowObservable> {
    let chars: Vec<char> = src.chars().filter(|c| !c.is_whitespace()).collect();
    if chars.is_empty() {
        return Err(parse_err("observable", "empty observable"));
    }
    let mut p = ObsParser { chars, pos: 0, d, basis, src };
    let terms = p.expr()?;
    if p.pos != p.chars.len() {
        return Err(p.err("trailing input"));
    }
    let sites = terms.iter().flat_map(|t| t.sites.keys().copied());
    let first = sites.clone().min().unwrap_or(0);
    let last = sites.max().unwrap_or(0);
    let n = (last - first + 1) as usize;
    let mut total: Option<CMatrix> = None;
    for t in terms {
        let mut m = CMatrix::from_element(1, 1, t.scalar);
        for site in first..=last {
            let op = t.sites.get(&site).cloned().unwrap_or_else(|| identity(d));
            m = m.kronecker(&op);
        }
        crate::state::WindowObservable::new(first, n, d, m.clone())?;
        total = Some(match total {
            None => m,
            Some(acc) => acc + m,
        });
    }
    WindowObservable::new(first, n, d, total.expect("at least one term"))
}

/// Header fields shared by every report.
#[derive(Debug, Clone, Serialize)]
pub struct ReportHeader {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub input_name: String,
    pub input_hash: String,
    pub parameters: Value,
}

pub const SCHEMA_VERSION: u32 = 1;

/// Significant digits kept for floating-point fields in reports.
pub const REPORT_DIGITS: usize = 12;

fn round_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let rounded: f64 = format!("{:.*e}", REPORT_DIGITS - 1, x).parse().expect("formatted float parses");
    if rounded == 0.0 {
        0.0
    } else {
        rounded
    }
}

/// Rounds every float to [`REPORT_DIGITS`] significant digits and folds `−0` into `0`.
pub fn normalize_numbers(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            *value = float_value(round_significant(x));
        }
        Value::Array(items) => items.iter_mut().for_each(normalize_numbers),
        Value::Object(map) => map.values_mut().for_each(normalize_numbers),
        _ => {}
    }
}

/// Header merged with the body's fields, numbers normalized.
pub fn report_value<T: Serialize>(header: &ReportHeader, body: &T) -> Result<Value> {
    let mut out = serde_json::to_value(header).map_err(|e| Error::NumericalFailure(e.to_string()))?;
    let body = serde_json::to_value(body).map_err(|e| Error::NumericalFailure(e.to_string()))?;
    match (&mut out, body) {
        (Value::Object(o), Value::Object(b)) => o.extend(b),
        (Value::Object(o), other) => {
            o.insert("result".into(), other);
        }
        _ => unreachable!("header serializes to an object"),
    }
    normalize_numbers(&mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn text_lines(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, item) in map {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                text_lines(&p, item, out);
            }
        }
        Value::Array(items) if items.iter().all(|x| is_scalar(x) || x.as_array().is_some_and(|a| a.iter().all(is_scalar))) => {
            let body: Vec<String> = items.iter().map(|x| match x {
                Value::Array(a) => format!("({})", a.iter().map(scalar_text).collect::<Vec<_>>().join(", ")),
                other => scalar_text(other),
            }).collect();
            out.push_str(&format!("{prefix:<40} [{}]\n", body.join(", ")));
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                text_lines(&format!("{prefix}[{i}]"), item, out);
            }
        }
        scalar => out.push_str(&format!("{prefix:<40} {}\n", scalar_text(scalar))),
    }
}

/// Renders a normalized report value.
pub fn render_report(value: &Value, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(value).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Text => {
            let mut s = String::new();
            text_lines("", value, &mut s);
            s
        }
    }
}

/// Writes a rendered report to `dest`, or to `stdout` when `dest` is `None`.
pub fn emit_report(value: &Value, format: ReportFormat, dest: Option<&Path>, stdout: &mut dyn std::io::Write) -> Result<()> {
    let text = render_report(value, format);
    match dest {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(Error::from),
    }
}
