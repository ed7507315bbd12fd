//! Mutual independence of concrete tuple sets over GF(2).
//!
//! A tuple is a bound product of codes; binding is XOR, so a tuple is the
//! GF(2) sum of its codes and a set of tuples is independent exactly when
//! their incidence vectors are linearly independent.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identity of one code: codebook (after permute elimination) and index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CodeId {
    pub codebook: String,
    pub index: usize,
}

impl CodeId {
    pub fn new(codebook: impl Into<String>, index: usize) -> Self {
        CodeId {
            codebook: codebook.into(),
            index,
        }
    }
}

pub type CodeTuple = Vec<CodeId>;

/// One packed row per tuple, one column per distinct code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    rows: Vec<Vec<u64>>,
    cols: usize,
    code_index: HashMap<CodeId, usize>,
}

impl IncidenceMatrix {
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, code: &CodeId) -> Option<usize> {
        self.code_index.get(code).copied()
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.rows[row][col / 64] >> (col % 64) & 1 == 1
    }

    /// Row as a `0`/`1` string in column order.
    pub fn row_string(&self, row: usize) -> String {
        (0..self.cols)
            .map(|c| if self.get(row, c) { '1' } else { '0' })
            .collect()
    }
}

/// Codes that survive XOR cancellation inside one tuple.
fn reduce(tuple: &[CodeId]) -> BTreeSet<&CodeId> {
    let mut odd = BTreeSet::new();
    for c in tuple {
        if !odd.remove(c) {
            odd.insert(c);
        }
    }
    odd
}

pub fn tuple_incidence(tuples: &[CodeTuple]) -> Result<IncidenceMatrix> {
    let mut code_index: HashMap<CodeId, usize> = HashMap::new();
    let reduced: Vec<BTreeSet<&CodeId>> = tuples.iter().map(|t| reduce(t)).collect();
    for (t, r) in tuples.iter().zip(&reduced) {
        if r.is_empty() {
            return Err(Error::DegenerateTuple);
        }
        // columns in order of first appearance
        for c in t {
            if r.contains(c) {
                let next = code_index.len();
                code_index.entry(c.clone()).or_insert(next);
            }
        }
    }
    let cols = code_index.len();
    let words = cols.div_ceil(64).max(1);
    let rows = reduced
        .iter()
        .map(|r| {
            let mut row = vec![0u64; words];
            for c in r {
                let j = code_index[*c];
                row[j / 64] |= 1 << (j % 64);
            }
            row
        })
        .collect();
    Ok(IncidenceMatrix { rows, cols, code_index })
}

/// Rank over GF(2) by elimination, pivoting on each row's lowest set bit.
pub fn gf2_rank(m: &IncidenceMatrix) -> usize {
    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
    for row in &m.rows {
        let mut r = row.clone();
        for (pivot, b) in &basis {
            if r[pivot / 64] >> (pivot % 64) & 1 == 1 {
                r.iter_mut().zip(b).for_each(|(x, y)| *x ^= y);
            }
        }
        if let Some(p) = lowest_bit(&r) {
            // keep the basis reduced so later pivots stay valid
            for (_, b) in basis.iter_mut() {
                if b[p / 64] >> (p % 64) & 1 == 1 {
                    b.iter_mut().zip(&r).for_each(|(x, y)| *x ^= y);
                }
            }
            basis.push((p, r));
        }
    }
    basis.len()
}

fn lowest_bit(r: &[u64]) -> Option<usize> {
    r.iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

pub fn check_independent_set(tuples: &[CodeTuple]) -> Result<bool> {
    let m = tuple_incidence(tuples)?;
    Ok(gf2_rank(&m) == tuples.len())
}

/// Factors must be pairwise disjoint and their union an independent set.
pub fn check_independent_product(factors: &[Vec<CodeTuple>]) -> Result<bool> {
    if factors.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "a product needs at least 2 factors, got {}",
            factors.len()
        )));
    }
    let mut seen: HashSet<Vec<CodeId>> = HashSet::new();
    for f in factors {
        let own: HashSet<Vec<CodeId>> = f.iter().map(|t| reduce(t).into_iter().cloned().collect()).collect();
        if own.iter().any(|t| seen.contains(t)) {
            return Ok(false);
        }
        seen.extend(own);
    }
    let union: Vec<CodeTuple> = factors.iter().flatten().cloned().collect();
    check_independent_set(&union)
}

/// Growing independent tuple set with a reduced GF(2) basis, so each insertion
/// costs one elimination pass instead of a full rank computation.
#[derive(Debug, Clone, Default)]
pub struct IndependentSet {
    cols: HashMap<CodeId, usize>,
    basis: Vec<(usize, Vec<u64>)>,
}

impl IndependentSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Row of `tuple` with unseen codes given fresh columns, reduced against
    /// the basis. `None` means the tuple lies in the span.
    fn residual(&self, tuple: &[CodeId]) -> Result<(Option<Vec<u64>>, Vec<CodeId>)> {
        let r = reduce(tuple);
        if r.is_empty() {
            return Err(Error::DegenerateTuple);
        }
        let fresh: Vec<CodeId> = r
            .iter()
            .filter(|c| !self.cols.contains_key(**c))
            .map(|c| (*c).clone())
            .collect();
        let ncols = self.cols.len() + fresh.len();
        let mut row = vec![0u64; ncols.div_ceil(64).max(1)];
        for c in &r {
            let j = match self.cols.get(*c) {
                Some(&j) => j,
                None => self.cols.len() + fresh.iter().position(|f| f == *c).unwrap(),
            };
            row[j / 64] |= 1 << (j % 64);
        }
        for (pivot, b) in &self.basis {
            if row[pivot / 64] >> (pivot % 64) & 1 == 1 {
                row.iter_mut().zip(b).for_each(|(x, y)| *x ^= y);
            }
        }
        let nonzero = row.iter().any(|w| *w != 0);
        Ok((nonzero.then_some(row), fresh))
    }

    /// Whether `tuple` could be added without creating a dependency.
    pub fn accepts(&self, tuple: &[CodeId]) -> Result<bool> {
        Ok(self.residual(tuple)?.0.is_some())
    }

    /// Adds `tuple` if the set stays independent; returns whether it was added.
    pub fn try_insert(&mut self, tuple: &[CodeId]) -> Result<bool> {
        let (row, fresh) = self.residual(tuple)?;
        let Some(row) = row else {
            return Ok(false);
        };
        for c in fresh {
            let next = self.cols.len();
            self.cols.insert(c, next);
        }
        let p = lowest_bit(&row).expect("residual is nonzero");
        for (_, b) in self.basis.iter_mut() {
            if b.len() < row.len() {
                b.resize(row.len(), 0);
            }
            if b[p / 64] >> (p % 64) & 1 == 1 {
                b.iter_mut().zip(&row).for_each(|(x, y)| *x ^= y);
            }
        }
        self.basis.push((p, row));
        Ok(true)
    }
}
