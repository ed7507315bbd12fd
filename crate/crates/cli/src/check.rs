//! Concrete tuple expressions for `heim check`.
//!
//! `a*b + c` is a set of tuples, `(a+b)*(c+d)` a product of sets. Names are
//! single codes; `*` binds and `+` bundles.

use heim_core::{check_independent_product, check_independent_set, CodeId, CodeTuple, Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Code(String),
    Sum(Vec<Node>),
    Prod(Vec<Node>),
}

struct Parser<'a> {
    src: &'a str,
    at: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, expected: &str) -> Error {
        let found = self.src[self.at..]
            .chars()
            .next()
            .map_or("end of line".into(), |c| format!("`{c}`"));
        Error::Syntax {
            pos: heim_core::Pos {
                line: 1,
                col: self.at + 1,
            },
            expected: expected.into(),
            found,
        }
    }

    fn skip_ws(&mut self) {
        while self.src[self.at..].starts_with(char::is_whitespace) {
            self.at += self.src[self.at..].chars().next().unwrap().len_utf8();
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.src[self.at..].starts_with(c) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Node> {
        let mut terms = vec![self.prod()?];
        while self.eat('+') {
            terms.push(self.prod()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Node::Sum(terms)
        })
    }

    fn prod(&mut self) -> Result<Node> {
        let mut factors = vec![self.atom()?];
        while self.eat('*') {
            factors.push(self.atom()?);
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            Node::Prod(factors)
        })
    }

    fn atom(&mut self) -> Result<Node> {
        if self.eat('(') {
            let inner = self.sum()?;
            if !self.eat(')') {
                return Err(self.err("`)`"));
            }
            return Ok(inner);
        }
        self.skip_ws();
        let rest = &self.src[self.at..];
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || "_@.-".contains(c)))
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(self.err("a code name or `(`"));
        }
        self.at += len;
        Ok(Node::Code(rest[..len].to_string()))
    }
}

fn parse(src: &str) -> Result<Node> {
    let mut p = Parser { src, at: 0 };
    let node = p.sum()?;
    p.skip_ws();
    if p.at < src.len() {
        return Err(p.err("`+`, `*` or end of line"));
    }
    Ok(node)
}

/// Codes of a bound product of names; `None` if it contains a sum.
fn tuple(node: &Node) -> Option<CodeTuple> {
    match node {
        Node::Code(name) => Some(vec![CodeId::new(name.clone(), 0)]),
        Node::Prod(fs) => fs.iter().map(tuple).collect::<Option<Vec<_>>>().map(|v| v.concat()),
        Node::Sum(_) => None,
    }
}

/// Tuples of a set: a sum of tuples, or a single tuple.
fn tuple_set(node: &Node) -> Result<Vec<CodeTuple>> {
    let terms = match node {
        Node::Sum(ts) => ts.as_slice(),
        other => std::slice::from_ref(other),
    };
    terms
        .iter()
        .map(|t| tuple(t).ok_or_else(|| Error::InvalidArgument("a set member may not contain a sum".into())))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    IndependentSet,
    DependentSet,
    IndependentProduct,
    DependentProduct,
}

impl Verdict {
    pub fn independent(self) -> bool {
        matches!(self, Verdict::IndependentSet | Verdict::IndependentProduct)
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::IndependentSet => "independent",
            Verdict::DependentSet => "dependent",
            Verdict::IndependentProduct => "independent product",
            Verdict::DependentProduct => "dependent product",
        }
    }
}

pub fn check_expr(src: &str) -> Result<Verdict> {
    let node = parse(src)?;
    match &node {
        // a product with at least one sum factor is a product of sets
        Node::Prod(fs) if fs.iter().any(|f| tuple(f).is_none()) => {
            let factors = fs.iter().map(tuple_set).collect::<Result<Vec<_>>>()?;
            Ok(if check_independent_product(&factors)? {
                Verdict::IndependentProduct
            } else {
                Verdict::DependentProduct
            })
        }
        _ => Ok(if check_independent_set(&tuple_set(&node)?)? {
            Verdict::IndependentSet
        } else {
            Verdict::DependentSet
        }),
    }
}

/// Non-empty lines of a check file, without `#` and `//` comments.
pub fn expressions(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("");
        let line = line.split("//").next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}
