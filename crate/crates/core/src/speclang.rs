//! Accuracy specifications and hardware error models.
//!
//! ```text
//! spec {
//!     codebook interactions(2), relations(3), concepts(5);
//!     abs-data query = prod(interactions, relations, concepts);
//!     abs-data ds = sum(4, prod(interactions, relations, concepts));
//!     require-accuracy(query, ds, 1, 0.99, 0.01, 0.003);
//! }
//!
//! hardware-model {
//!     mem item-mem = 0.0215;
//!     op bind = 0.0;
//! }
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Pos, Result};

/// HD expression over codebooks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expr {
    Code { name: String, pos: Pos },
    Perm { shift: i64, name: String, pos: Pos },
    Sum { bound: usize, terms: Vec<Expr>, pos: Pos },
    Prod { factors: Vec<Expr>, pos: Pos },
    Var { name: String, pos: Pos },
}

impl Expr {
    pub fn code(name: impl Into<String>) -> Expr {
        Expr::Code {
            name: name.into(),
            pos: Pos::default(),
        }
    }

    pub fn perm(shift: i64, name: impl Into<String>) -> Expr {
        Expr::Perm {
            shift,
            name: name.into(),
            pos: Pos::default(),
        }
    }

    pub fn sum(bound: usize, terms: Vec<Expr>) -> Expr {
        Expr::Sum {
            bound,
            terms,
            pos: Pos::default(),
        }
    }

    pub fn prod(factors: Vec<Expr>) -> Expr {
        Expr::Prod {
            factors,
            pos: Pos::default(),
        }
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var {
            name: name.into(),
            pos: Pos::default(),
        }
    }

    pub fn pos(&self) -> Pos {
        match self {
            Expr::Code { pos, .. }
            | Expr::Perm { pos, .. }
            | Expr::Sum { pos, .. }
            | Expr::Prod { pos, .. }
            | Expr::Var { pos, .. } => *pos,
        }
    }

    /// Code or permuted code.
    pub fn is_simple(&self) -> bool {
        matches!(self, Expr::Code { .. } | Expr::Perm { .. })
    }

    fn has_var(&self) -> bool {
        match self {
            Expr::Var { .. } => true,
            Expr::Code { .. } | Expr::Perm { .. } => false,
            Expr::Sum { terms: xs, .. } | Expr::Prod { factors: xs, .. } => xs.iter().any(Expr::has_var),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Code { name, .. } | Expr::Var { name, .. } => f.write_str(name),
            Expr::Perm { shift, name, .. } => write!(f, "perm({shift}, {name})"),
            Expr::Sum { bound, terms, .. } => {
                write!(f, "sum({bound}")?;
                for t in terms {
                    write!(f, ", {t}")?;
                }
                f.write_str(")")
            }
            Expr::Prod { factors, .. } => {
                f.write_str("prod(")?;
                for (i, x) in factors.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// `require-accuracy(query, ds, k, acc, fp, fn)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Requirement {
    pub query: Expr,
    pub ds: Expr,
    pub k: usize,
    pub acc: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub pos: Pos,
}

impl Requirement {
    /// Short label used in diagnostics and reports.
    pub fn label(&self) -> String {
        format!(
            "require-accuracy({}, {}, {}, {}, {}, {})",
            self.query, self.ds, self.k, self.acc, self.fp, self.fn_
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracySpec {
    pub codebooks: IndexMap<String, usize>,
    pub bindings: IndexMap<String, Expr>,
    pub requirements: Vec<Requirement>,
}

const KEYWORDS: &[&str] = &[
    "spec",
    "codebook",
    "abs-data",
    "require-accuracy",
    "sum",
    "prod",
    "perm",
];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Punct(char),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(s) => write!(f, "number {s}"),
            Tok::Punct(c) => write!(f, "`{c}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let bump = |i: &mut usize, line: &mut usize, col: &mut usize| {
        if chars[*i] == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
        *i += 1;
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump(&mut i, &mut line, &mut col);
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump(&mut i, &mut line, &mut col);
            }
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '-') {
                bump(&mut i, &mut line, &mut col);
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
        } else if c.is_ascii_digit() || ((c == '-' || c == '.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            bump(&mut i, &mut line, &mut col);
            while i < chars.len() {
                let d = chars[i];
                let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    bump(&mut i, &mut line, &mut col);
                } else {
                    break;
                }
            }
            out.push((Tok::Num(chars[start..i].iter().collect()), pos));
        } else if "{}(),;=".contains(c) {
            out.push((Tok::Punct(c), pos));
            bump(&mut i, &mut line, &mut col);
        } else {
            return Err(Error::Syntax {
                pos,
                expected: "a token".into(),
                found: format!("{c:?}"),
            });
        }
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self> {
        Ok(Parser { toks: lex(src)?, at: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn next(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &str) -> Result<T> {
        Err(Error::Syntax {
            pos: self.pos(),
            expected: expected.into(),
            found: self.peek().to_string(),
        })
    }

    fn punct(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Punct(c) {
            self.next();
            Ok(())
        } else {
            self.fail(&format!("`{c}`"))
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Punct(c) {
            self.next();
            true
        } else {
            false
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.next();
                Ok(())
            }
            _ => self.fail(&format!("`{kw}`")),
        }
    }

    fn ident(&mut self) -> Result<(String, Pos)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let pos = self.pos();
                if KEYWORDS.contains(&s.as_str()) {
                    return self.fail("a name");
                }
                self.next();
                Ok((s, pos))
            }
            _ => self.fail("a name"),
        }
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        match self.peek().clone() {
            Tok::Num(s) => match s.parse::<T>() {
                Ok(v) => {
                    self.next();
                    Ok(v)
                }
                Err(_) => self.fail(what),
            },
            _ => self.fail(what),
        }
    }

    fn rate(&mut self, name: &str) -> Result<f64> {
        let pos = self.pos();
        let v: f64 = self.number("a real number")?;
        if !(0.0..1.0).contains(&v) && !(name == "acc" && v == 1.0) {
            return Err(Error::RateRange {
                pos,
                name: name.into(),
                value: v,
            });
        }
        Ok(v)
    }

    fn positive(&mut self, what: &str) -> Result<usize> {
        let pos = self.pos();
        let v: usize = self.number(what)?;
        if v == 0 {
            return Err(Error::Syntax {
                pos,
                expected: what.into(),
                found: "0".into(),
            });
        }
        Ok(v)
    }

    fn expr(&mut self) -> Result<Expr> {
        let pos = self.pos();
        let head = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return self.fail("an expression"),
        };
        match head.as_str() {
            "perm" => {
                self.next();
                self.punct('(')?;
                let shift: i64 = self.number("an integer shift")?;
                self.punct(',')?;
                if !matches!(self.peek(), Tok::Ident(s) if !KEYWORDS.contains(&s.as_str())) {
                    return Err(Error::Shape {
                        pos: self.pos(),
                        reason: "perm applies only to a codebook name".into(),
                    });
                }
                let (name, _) = self.ident()?;
                self.punct(')')?;
                Ok(Expr::Perm { shift, name, pos })
            }
            "sum" => {
                self.next();
                self.punct('(')?;
                let bound = self.positive("a positive bound")?;
                let mut terms = Vec::new();
                while self.eat(',') {
                    terms.push(self.expr()?);
                }
                self.punct(')')?;
                if terms.is_empty() {
                    return Err(Error::Shape {
                        pos,
                        reason: "sum needs at least one term".into(),
                    });
                }
                Ok(Expr::Sum { bound, terms, pos })
            }
            "prod" => {
                self.next();
                self.punct('(')?;
                let mut factors = vec![self.expr()?];
                while self.eat(',') {
                    factors.push(self.expr()?);
                }
                self.punct(')')?;
                Ok(Expr::Prod { factors, pos })
            }
            _ => {
                let (name, pos) = self.ident()?;
                // classified as code or variable once all statements are seen
                Ok(Expr::Var { name, pos })
            }
        }
    }
}

/// Parses and resolves a specification. Names are classified into codebook
/// references and variable references; variables are not yet substituted.
pub fn parse_spec(src: &str) -> Result<AccuracySpec> {
    let mut p = Parser::new(src)?;
    p.keyword("spec")?;
    p.punct('{')?;
    let mut spec = AccuracySpec::default();
    let mut declared: HashMap<String, Pos> = HashMap::new();
    let mut declare = |name: String, pos: Pos| -> Result<String> {
        if declared.insert(name.clone(), pos).is_some() {
            return Err(Error::DuplicateName { pos, name });
        }
        Ok(name)
    };
    loop {
        let (tok, pos) = p.next();
        match tok {
            Tok::Punct('}') => break,
            Tok::Ident(kw) if kw == "codebook" => loop {
                let (name, npos) = p.ident()?;
                p.punct('(')?;
                let size = p.positive("a positive codebook size")?;
                p.punct(')')?;
                let name = declare(name, npos)?;
                spec.codebooks.insert(name, size);
                if !p.eat(',') {
                    p.punct(';')?;
                    break;
                }
            },
            Tok::Ident(kw) if kw == "abs-data" => {
                let (name, npos) = p.ident()?;
                p.punct('=')?;
                let e = p.expr()?;
                p.punct(';')?;
                let name = declare(name, npos)?;
                spec.bindings.insert(name, e);
            }
            Tok::Ident(kw) if kw == "require-accuracy" => {
                p.punct('(')?;
                let query = p.expr()?;
                p.punct(',')?;
                let ds = p.expr()?;
                p.punct(',')?;
                let k = p.positive("a positive k")?;
                p.punct(',')?;
                let acc = p.rate("acc")?;
                p.punct(',')?;
                let fp = p.rate("fp")?;
                p.punct(',')?;
                let fn_ = p.rate("fn")?;
                p.punct(')')?;
                p.punct(';')?;
                spec.requirements.push(Requirement {
                    query,
                    ds,
                    k,
                    acc,
                    fp,
                    fn_,
                    pos,
                });
            }
            Tok::Ident(name) => return Err(Error::UnknownStatement { pos, name }),
            _ => {
                p.at -= 1;
                return p.fail("a statement or `}`");
            }
        }
    }
    if *p.peek() != Tok::Eof {
        return p.fail("end of input");
    }
    resolve(&mut spec)?;
    Ok(spec)
}

fn resolve(spec: &mut AccuracySpec) -> Result<()> {
    fn walk(e: &mut Expr, codebooks: &IndexMap<String, usize>, vars: &HashSet<String>) -> Result<()> {
        match e {
            Expr::Var { name, pos } | Expr::Code { name, pos } => {
                if codebooks.contains_key(name) {
                    *e = Expr::Code {
                        name: std::mem::take(name),
                        pos: *pos,
                    };
                } else if vars.contains(name) {
                    *e = Expr::Var {
                        name: std::mem::take(name),
                        pos: *pos,
                    };
                } else {
                    return Err(Error::Unresolved {
                        pos: *pos,
                        name: name.clone(),
                    });
                }
            }
            Expr::Perm { name, pos, .. } => {
                if !codebooks.contains_key(name) {
                    if vars.contains(name) {
                        return Err(Error::Shape {
                            pos: *pos,
                            reason: format!("perm applies only to a codebook, `{name}` is a variable"),
                        });
                    }
                    return Err(Error::Unresolved {
                        pos: *pos,
                        name: name.clone(),
                    });
                }
            }
            Expr::Sum { terms: xs, .. } | Expr::Prod { factors: xs, .. } => {
                for x in xs {
                    walk(x, codebooks, vars)?;
                }
            }
        }
        Ok(())
    }
    let vars: HashSet<String> = spec.bindings.keys().cloned().collect();
    for e in spec.bindings.values_mut() {
        walk(e, &spec.codebooks, &vars)?;
    }
    for r in &mut spec.requirements {
        walk(&mut r.query, &spec.codebooks, &vars)?;
        walk(&mut r.ds, &spec.codebooks, &vars)?;
    }
    Ok(())
}

/// Canonical text form; `parse_spec(&print_spec(s))` equals `s`.
pub fn print_spec(spec: &AccuracySpec) -> String {
    if spec.codebooks.is_empty() && spec.bindings.is_empty() && spec.requirements.is_empty() {
        return "spec { }".to_string();
    }
    let mut out = String::from("spec {\n");
    if !spec.codebooks.is_empty() {
        let list: Vec<String> = spec.codebooks.iter().map(|(n, s)| format!("{n}({s})")).collect();
        let _ = writeln!(out, "    codebook {};", list.join(", "));
    }
    for (name, e) in &spec.bindings {
        let _ = writeln!(out, "    abs-data {name} = {e};");
    }
    for r in &spec.requirements {
        let _ = writeln!(out, "    {};", r.label());
    }
    out.push('}');
    out
}

/// Substitutes every variable, flattens nested products and checks that each
/// requirement has a shape the analyzer understands.
pub fn expand_vars(spec: &AccuracySpec) -> Result<AccuracySpec> {
    let mut done: HashMap<String, Expr> = HashMap::new();
    let mut stack: Vec<String> = Vec::new();
    let mut bindings = IndexMap::new();
    for name in spec.bindings.keys() {
        let e = expand_binding(name, spec, &mut done, &mut stack)?;
        bindings.insert(name.clone(), e);
    }
    let mut requirements = Vec::with_capacity(spec.requirements.len());
    for r in &spec.requirements {
        let query = expand(&r.query, spec, &mut done, &mut stack)?;
        let ds = expand(&r.ds, spec, &mut done, &mut stack)?;
        check_shape(&query)?;
        check_shape(&ds)?;
        requirements.push(Requirement { query, ds, ..r.clone() });
    }
    Ok(AccuracySpec {
        codebooks: spec.codebooks.clone(),
        bindings,
        requirements,
    })
}

fn expand_binding(
    name: &str,
    spec: &AccuracySpec,
    done: &mut HashMap<String, Expr>,
    stack: &mut Vec<String>,
) -> Result<Expr> {
    if let Some(e) = done.get(name) {
        return Ok(e.clone());
    }
    let body = spec.bindings.get(name).ok_or_else(|| Error::Unresolved {
        pos: Pos::default(),
        name: name.into(),
    })?;
    if stack.iter().any(|s| s == name) {
        return Err(Error::CyclicBinding {
            pos: body.pos(),
            name: name.into(),
        });
    }
    stack.push(name.into());
    let e = expand(body, spec, done, stack)?;
    stack.pop();
    done.insert(name.into(), e.clone());
    Ok(e)
}

fn expand(e: &Expr, spec: &AccuracySpec, done: &mut HashMap<String, Expr>, stack: &mut Vec<String>) -> Result<Expr> {
    Ok(match e {
        Expr::Var { name, .. } => expand_binding(name, spec, done, stack)?,
        Expr::Code { .. } | Expr::Perm { .. } => e.clone(),
        Expr::Sum { bound, terms, pos } => Expr::Sum {
            bound: *bound,
            terms: terms
                .iter()
                .map(|t| expand(t, spec, done, stack))
                .collect::<Result<_>>()?,
            pos: *pos,
        },
        Expr::Prod { factors, pos } => {
            let mut flat = Vec::new();
            for f in factors {
                match expand(f, spec, done, stack)? {
                    Expr::Prod { factors: inner, .. } => flat.extend(inner),
                    other => flat.push(other),
                }
            }
            Expr::Prod {
                factors: flat,
                pos: *pos,
            }
        }
    })
}

fn is_tuple(e: &Expr) -> bool {
    match e {
        Expr::Prod { factors, .. } => factors.iter().all(Expr::is_simple),
        other => other.is_simple(),
    }
}

fn is_tuple_set(e: &Expr) -> bool {
    match e {
        Expr::Sum { terms, .. } => terms.iter().all(is_tuple),
        _ => false,
    }
}

/// Accepted forms after expansion: a code, a tuple, a sum of tuples, or a
/// product whose factors are codes or sums of tuples.
pub fn check_shape(e: &Expr) -> Result<()> {
    if e.has_var() {
        return Err(Error::Shape {
            pos: e.pos(),
            reason: "unexpanded variable".into(),
        });
    }
    let ok = match e {
        Expr::Code { .. } | Expr::Perm { .. } => true,
        Expr::Sum { .. } => is_tuple_set(e),
        Expr::Prod { factors, .. } => factors.iter().all(|f| f.is_simple() || is_tuple_set(f)),
        Expr::Var { .. } => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Shape {
            pos: e.pos(),
            reason: format!("`{e}` is neither a product of sums nor a sum of products"),
        })
    }
}

/// Operators that may corrupt bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HwOp {
    Bind,
    Bundle,
    Perm,
}

/// Storage locations that may corrupt bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemLoc {
    Codebook,
    ItemMem,
    Query,
}

impl HwOp {
    pub const ALL: [HwOp; 3] = [HwOp::Bind, HwOp::Bundle, HwOp::Perm];

    pub fn name(self) -> &'static str {
        match self {
            HwOp::Bind => "bind",
            HwOp::Bundle => "bundle",
            HwOp::Perm => "perm",
        }
    }
}

impl MemLoc {
    pub const ALL: [MemLoc; 3] = [MemLoc::Codebook, MemLoc::ItemMem, MemLoc::Query];

    pub fn name(self) -> &'static str {
        match self {
            MemLoc::Codebook => "codebook",
            MemLoc::ItemMem => "item-mem",
            MemLoc::Query => "query",
        }
    }
}

/// Per-bit error rates; omitted entries are zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HardwareModel {
    pub bind: f64,
    pub bundle: f64,
    pub perm: f64,
    pub codebook: f64,
    pub item_mem: f64,
    pub query: f64,
}

impl HardwareModel {
    /// Model with a single item-memory error rate.
    pub fn item_mem(rate: f64) -> Self {
        HardwareModel {
            item_mem: rate,
            ..Default::default()
        }
    }

    pub fn op(&self, op: HwOp) -> f64 {
        match op {
            HwOp::Bind => self.bind,
            HwOp::Bundle => self.bundle,
            HwOp::Perm => self.perm,
        }
    }

    pub fn mem(&self, loc: MemLoc) -> f64 {
        match loc {
            MemLoc::Codebook => self.codebook,
            MemLoc::ItemMem => self.item_mem,
            MemLoc::Query => self.query,
        }
    }

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "bind" => &mut self.bind,
            "bundle" => &mut self.bundle,
            "perm" => &mut self.perm,
            "codebook" => &mut self.codebook,
            "item-mem" => &mut self.item_mem,
            "query" => &mut self.query,
            _ => return None,
        })
    }

    /// All six rates in a fixed order: three operators, then three locations.
    pub fn rates(&self) -> [f64; 6] {
        [
            self.bind,
            self.bundle,
            self.perm,
            self.codebook,
            self.item_mem,
            self.query,
        ]
    }
}

/// Parses `hardware-model { ... }`. Operator lines may carry an optional
/// `op` prefix; memory lines need `mem`.
pub fn parse_hw_model(src: &str) -> Result<HardwareModel> {
    let mut p = Parser::new(src)?;
    p.keyword("hardware-model")?;
    p.punct('{')?;
    let mut hw = HardwareModel::default();
    let mut seen = HashSet::new();
    loop {
        let (tok, pos) = p.next();
        let word = match tok {
            Tok::Punct('}') => break,
            Tok::Ident(w) => w,
            _ => {
                p.at -= 1;
                return p.fail("a rate statement or `}`");
            }
        };
        let (name, npos) = match word.as_str() {
            "mem" => match p.next() {
                (Tok::Ident(loc), lpos) if MemLoc::ALL.iter().any(|m| m.name() == loc) => (loc, lpos),
                _ => {
                    p.at -= 1;
                    return p.fail("`codebook`, `item-mem` or `query`");
                }
            },
            "op" => match p.next() {
                (Tok::Ident(op), opos) if HwOp::ALL.iter().any(|o| o.name() == op) => (op, opos),
                _ => {
                    p.at -= 1;
                    return p.fail("`bind`, `bundle` or `perm`");
                }
            },
            w if HwOp::ALL.iter().any(|o| o.name() == w) => (word.clone(), pos),
            _ => return Err(Error::UnknownStatement { pos, name: word }),
        };
        p.punct('=')?;
        let vpos = p.pos();
        let v: f64 = p.number("a rate")?;
        p.punct(';')?;
        if !(0.0..0.5).contains(&v) {
            return Err(Error::RateRange {
                pos: vpos,
                name,
                value: v,
            });
        }
        if !seen.insert(name.clone()) {
            return Err(Error::DuplicateName { pos: npos, name });
        }
        *hw.slot(&name).expect("validated name") = v;
    }
    if *p.peek() != Tok::Eof {
        return p.fail("end of input");
    }
    Ok(hw)
}

pub fn print_hw_model(hw: &HardwareModel) -> String {
    let mut out = String::from("hardware-model {\n");
    for op in HwOp::ALL {
        let _ = writeln!(out, "    op {} = {};", op.name(), hw.op(op));
    }
    for loc in MemLoc::ALL {
        let _ = writeln!(out, "    mem {} = {};", loc.name(), hw.mem(loc));
    }
    out.push('}');
    out
}
