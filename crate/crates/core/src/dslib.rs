//! Set, analogical database, knowledge graph and NFA built on statically
//! optimized query parameters.
//!
//! Each structure has a declaration (`*Decl`) that fixes its shape and the
//! queries it will answer. The declaration emits an accuracy specification and
//! turns an optimizer result into a [`ParamTable`]; the runtime structure is
//! then built over an [`ItemSpace`] of codebooks at the table's dimension.

use std::collections::BTreeMap;
use std::fs;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::sync::{Arc, OnceLock};

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{derive_p, virtual_codebook};
use crate::error::{Error, Pos, Result};
use crate::hdvec::{bind, bundle, distance, flip_bits, partial_distance, permute, Codebook, Hypervector, RngStream};
use crate::indcheck::{check_independent_product, check_independent_set, CodeId, CodeTuple, IndependentSet};
use crate::optimizer::{optimize, thresholds_by_size, OptimizationResult, RequirementModel};
use crate::speclang::{expand_vars, AccuracySpec, Expr, HardwareModel, Requirement};

/// Accuracy targets of one declared query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub acc: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
}

impl Targets {
    pub fn new(acc: f64, fp: f64, fn_: f64) -> Self {
        Targets { acc, fp, fn_ }
    }

    /// Equal error budget on both sides of `acc`.
    pub fn symmetric(acc: f64) -> Self {
        // keep 1 - 0.99 printing as 0.01
        let e = ((1.0 - acc) * 1e12).round() / 1e12;
        Targets::new(acc, e, e)
    }
}

/// Dimension and threshold used by one query kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuerySetting {
    pub n: usize,
    pub thr: f64,
}

/// Per-query settings in declaration order, plus the stored-vector dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTable {
    pub dim: usize,
    pub settings: Vec<QuerySetting>,
}

impl ParamTable {
    pub fn from_result(r: &OptimizationResult) -> Self {
        ParamTable {
            dim: r.n_opt,
            settings: r
                .per_query
                .iter()
                .map(|q| QuerySetting {
                    n: q.n,
                    thr: q.threshold,
                })
                .collect(),
        }
    }

    /// Every requirement at dimension `n` with its model threshold at `n`,
    /// whether or not the targets are met there.
    pub fn at_dimension(hw: &HardwareModel, spec: &AccuracySpec, n: usize) -> Result<Self> {
        let p = derive_p(hw)?;
        let spec = expand_vars(spec)?;
        let settings = spec
            .requirements
            .iter()
            .map(|r| {
                let rep = RequirementModel::from_requirement(p, r)?.evaluate(n)?;
                Ok(QuerySetting {
                    n,
                    thr: rep.threshold.thr,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ParamTable { dim: n, settings })
    }

    /// One threshold and dimension for `count` query kinds.
    pub fn uniform(n: usize, thr: f64, count: usize) -> Self {
        ParamTable {
            dim: n,
            settings: vec![QuerySetting { n, thr }; count],
        }
    }

    fn get(&self, i: usize) -> Result<QuerySetting> {
        self.settings.get(i).copied().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "parameter table has {} entries, query {i} requested",
                self.settings.len()
            ))
        })
    }

    fn check(&self, expected: usize, space: &ItemSpace) -> Result<()> {
        if self.settings.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "expected {expected} query settings, got {}",
                self.settings.len()
            )));
        }
        if let Some(s) = self.settings.iter().find(|s| s.n == 0 || s.n > space.dim()) {
            return Err(Error::InvalidArgument(format!(
                "query dimension {} outside item space of dimension {}",
                s.n,
                space.dim()
            )));
        }
        Ok(())
    }
}

/// Codebooks of one common dimension. Codes named `cb@k` are the codes of
/// `cb` permuted by `k`.
#[derive(Debug, Clone)]
pub struct ItemSpace {
    dim: usize,
    books: IndexMap<String, Codebook>,
}

fn split_virtual(name: &str) -> (&str, i64) {
    if let Some((base, shift)) = name.rsplit_once('@') {
        if let Ok(s) = shift.parse() {
            return (base, s);
        }
    }
    (name, 0)
}

impl ItemSpace {
    /// Fresh random codebooks; codebook `i` draws from `rng.child(i)`.
    pub fn generate(decl: &IndexMap<String, usize>, dim: usize, rng: &RngStream) -> Result<Self> {
        let books = decl
            .iter()
            .enumerate()
            .map(|(i, (name, &size))| {
                let cb = Codebook::new(name.clone(), size, dim, &mut rng.child(i as u64))?;
                Ok((name.clone(), cb))
            })
            .collect::<Result<IndexMap<_, _>>>()?;
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        Ok(ItemSpace { dim, books })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn codebook(&self, name: &str) -> Option<&Codebook> {
        self.books.get(name)
    }

    fn base_code(&self, id: &CodeId) -> Result<(&Hypervector, i64)> {
        let (base, shift) = split_virtual(&id.codebook);
        let cb = self
            .books
            .get(base)
            .ok_or_else(|| Error::OutsideSpace(format!("unknown codebook `{base}`")))?;
        if id.index >= cb.size() {
            return Err(Error::OutsideSpace(format!(
                "code {} of `{base}` (size {})",
                id.index,
                cb.size()
            )));
        }
        Ok((cb.code(id.index), shift))
    }

    pub fn code(&self, id: &CodeId) -> Result<Hypervector> {
        let (v, shift) = self.base_code(id)?;
        Ok(if shift == 0 { v.clone() } else { permute(v, shift) })
    }

    /// Bound product of the tuple's codes.
    pub fn tuple(&self, t: &[CodeId]) -> Result<Hypervector> {
        let (first, rest) = t
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("empty tuple".into()))?;
        let mut out = self.code(first)?;
        for id in rest {
            let (v, shift) = self.base_code(id)?;
            if shift == 0 {
                out.bind_assign(v)?;
            } else {
                out.bind_assign(&permute(v, shift))?;
            }
        }
        Ok(out)
    }
}

/// A single distance test: `distance <= thr` is a match.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub distance: f64,
    pub thr: f64,
}

impl Probe {
    pub fn hit(&self) -> bool {
        self.distance <= self.thr
    }
}

fn probe(a: &Hypervector, b: &Hypervector, s: QuerySetting) -> Result<Probe> {
    Ok(Probe {
        distance: partial_distance(a, b, s.n)?,
        thr: s.thr,
    })
}

/// Bit flips on query vectors at distance time. A probe's corruption depends
/// only on its key, so repeated or parallel probes stay reproducible.
#[derive(Debug, Clone)]
pub struct QueryNoise {
    p: f64,
    rng: RngStream,
}

impl QueryNoise {
    pub fn new(p: f64, rng: RngStream) -> Result<Self> {
        if !(0.0..0.5).contains(&p) {
            return Err(Error::InvalidArgument(format!("query flip rate {p} not in [0, 0.5)")));
        }
        Ok(QueryNoise { p, rng })
    }

    pub fn rate(&self) -> f64 {
        self.p
    }
}

fn noisy_probe(
    noise: Option<&QueryNoise>,
    key: impl Hash,
    q: &Hypervector,
    v: &Hypervector,
    s: QuerySetting,
) -> Result<Probe> {
    let Some(noise) = noise.filter(|x| x.p > 0.0) else {
        return probe(q, v, s);
    };
    let mut h = DefaultHasher::new();
    key.hash(&mut h);
    let mut q = q.prefix(s.n)?;
    flip_bits(&mut q, noise.p, &mut noise.rng.child(h.finish()))?;
    Ok(Probe {
        distance: distance(&q, &v.prefix(s.n)?)?,
        thr: s.thr,
    })
}

fn requirement(query: Expr, ds: Expr, k: usize, t: Targets) -> Requirement {
    Requirement {
        query,
        ds,
        k,
        acc: t.acc,
        fp: t.fp,
        fn_: t.fn_,
        pos: Pos::default(),
    }
}

/// Codebook names making up one tuple of `space` (a code, permuted code or
/// product of those).
fn space_factors(space: &Expr, codebooks: &IndexMap<String, usize>) -> Result<Vec<String>> {
    let one = |e: &Expr| -> Result<String> {
        let (name, cb) = match e {
            Expr::Code { name, .. } => (name.clone(), name),
            Expr::Perm { shift, name, .. } => (virtual_codebook(name, *shift), name),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "element space must be a tuple of codebooks, found `{other}`"
                )))
            }
        };
        if !codebooks.contains_key(cb) {
            return Err(Error::InvalidArgument(format!("undeclared codebook `{cb}`")));
        }
        Ok(name)
    };
    match space {
        Expr::Prod { factors, .. } => factors.iter().map(one).collect(),
        e => Ok(vec![one(e)?]),
    }
}

fn check_member(factors: &[String], t: &[CodeId]) -> Result<()> {
    if t.len() != factors.len() || t.iter().zip(factors).any(|(c, f)| &c.codebook != f) {
        let got: Vec<&str> = t.iter().map(|c| c.codebook.as_str()).collect();
        return Err(Error::OutsideSpace(format!(
            "tuple over ({}) is not in ({})",
            got.join(", "),
            factors.join(", ")
        )));
    }
    Ok(())
}

/// Bundle of tuple vectors, tie-broken from `tiebreak`.
fn bundle_tuples(space: &ItemSpace, tuples: &[CodeTuple], tiebreak: &RngStream) -> Result<Hypervector> {
    let vs = tuples.iter().map(|t| space.tuple(t)).collect::<Result<Vec<_>>>()?;
    bundle(&vs, &mut tiebreak.clone())
}

/// Stored vectors with enough metadata to reload them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub dim: usize,
    pub entries: Vec<ManifestEntry>,
    pub params: ParamTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: usize,
    /// Elements bundled into the vector (set size, record size or degree).
    pub size: usize,
}

/// Exported item memory: `vectors[i]` belongs to `manifest.entries[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemMemory {
    pub manifest: Manifest,
    pub vectors: Vec<Hypervector>,
}

impl ItemMemory {
    pub const VECTORS: &'static str = "item_memory.bin";
    pub const MANIFEST: &'static str = "manifest.json";

    pub fn save(&self, dir: &Path) -> Result<()> {
        if self.vectors.len() != self.manifest.entries.len() {
            return Err(Error::Format("manifest and vector counts differ".into()));
        }
        fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(fs::File::create(dir.join(Self::VECTORS))?);
        for v in &self.vectors {
            v.write_to(&mut w)?;
        }
        let m = BufWriter::new(fs::File::create(dir.join(Self::MANIFEST))?);
        serde_json::to_writer_pretty(m, &self.manifest)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_reader(BufReader::new(fs::File::open(dir.join(Self::MANIFEST))?))?;
        let mut r = BufReader::new(fs::File::open(dir.join(Self::VECTORS))?);
        let vectors = (0..manifest.entries.len())
            .map(|_| Hypervector::read_from(&mut r))
            .collect::<Result<Vec<_>>>()?;
        if let Some(v) = vectors.iter().find(|v| v.len() != manifest.dim) {
            return Err(Error::Format(format!(
                "vector of {} bits in a {}-bit item memory",
                v.len(),
                manifest.dim
            )));
        }
        Ok(ItemMemory { manifest, vectors })
    }
}

// ---------------------------------------------------------------- set

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetQuery {
    pub max_query: usize,
    pub k: usize,
    pub targets: Targets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetDecl {
    pub codebooks: IndexMap<String, usize>,
    pub space: Expr,
    pub max_size: usize,
    pub in_set: Option<Targets>,
    pub subsets: Vec<SubsetQuery>,
}

impl SetDecl {
    pub fn new(codebooks: IndexMap<String, usize>, space: Expr, max_size: usize) -> Result<Self> {
        space_factors(&space, &codebooks)?;
        if max_size == 0 {
            return Err(Error::InvalidArgument("set capacity must be positive".into()));
        }
        Ok(SetDecl {
            codebooks,
            space,
            max_size,
            in_set: None,
            subsets: Vec::new(),
        })
    }

    pub fn with_in_set(mut self, t: Targets) -> Self {
        self.in_set = Some(t);
        self
    }

    pub fn with_subset(mut self, max_query: usize, k: usize, t: Targets) -> Result<Self> {
        if k == 0 || k > max_query || k > self.max_size {
            return Err(Error::InvalidK {
                k,
                reason: format!(
                    "subset queries of up to {max_query} elements on a set of {}",
                    self.max_size
                ),
            });
        }
        self.subsets.push(SubsetQuery {
            max_query,
            k,
            targets: t,
        });
        Ok(self)
    }

    pub fn emit_spec(&self) -> AccuracySpec {
        let mut bindings = IndexMap::new();
        bindings.insert("ds".to_string(), Expr::sum(self.max_size, vec![self.space.clone()]));
        let mut requirements = Vec::new();
        if let Some(t) = self.in_set {
            requirements.push(requirement(self.space.clone(), Expr::var("ds"), 1, t));
        }
        for s in &self.subsets {
            for j in (s.k..=s.max_query).rev() {
                let q = Expr::sum(j, vec![self.space.clone()]);
                requirements.push(requirement(q, Expr::var("ds"), s.k, s.targets));
            }
        }
        AccuracySpec {
            codebooks: self.codebooks.clone(),
            bindings,
            requirements,
        }
    }

    pub fn plan(&self, hw: &HardwareModel, max_n: usize) -> Result<ParamTable> {
        Ok(ParamTable::from_result(&optimize(hw, &self.emit_spec(), max_n)?))
    }

    pub fn plan_at(&self, hw: &HardwareModel, n: usize) -> Result<ParamTable> {
        ParamTable::at_dimension(hw, &self.emit_spec(), n)
    }

    fn query_count(&self) -> usize {
        usize::from(self.in_set.is_some()) + self.subsets.iter().map(|s| s.max_query - s.k + 1).sum::<usize>()
    }

    fn subset_index(&self, size: usize, k: usize) -> Option<usize> {
        let mut i = usize::from(self.in_set.is_some());
        for s in &self.subsets {
            if s.k == k && (k..=s.max_query).contains(&size) {
                return Some(i + (s.max_query - size));
            }
            i += s.max_query - s.k + 1;
        }
        None
    }
}

/// Bounded set of mutually independent tuples stored as one bundle.
#[derive(Debug)]
pub struct SetDs {
    decl: SetDecl,
    factors: Vec<String>,
    space: Arc<ItemSpace>,
    params: ParamTable,
    elements: Vec<CodeTuple>,
    basis: IndependentSet,
    vector: OnceLock<Hypervector>,
    tiebreak: RngStream,
    query_noise: Option<QueryNoise>,
}

impl SetDs {
    pub fn new(decl: SetDecl, params: ParamTable, space: Arc<ItemSpace>, tiebreak: RngStream) -> Result<Self> {
        params.check(decl.query_count(), &space)?;
        let factors = space_factors(&decl.space, &decl.codebooks)?;
        Ok(SetDs {
            decl,
            factors,
            space,
            params,
            elements: Vec::new(),
            basis: IndependentSet::new(),
            vector: OnceLock::new(),
            tiebreak,
            query_noise: None,
        })
    }

    pub fn decl(&self) -> &SetDecl {
        &self.decl
    }

    pub fn set_query_noise(&mut self, noise: QueryNoise) {
        self.query_noise = Some(noise);
    }

    pub fn emit_spec(&self) -> AccuracySpec {
        self.decl.emit_spec()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CodeTuple] {
        &self.elements
    }

    pub fn add(&mut self, elem: CodeTuple) -> Result<()> {
        check_member(&self.factors, &elem)?;
        self.space.tuple(&elem)?;
        if self.elements.len() >= self.decl.max_size {
            return Err(Error::Capacity(self.decl.max_size));
        }
        if !self.basis.try_insert(&elem)? {
            return Err(Error::Independence(format!("{elem:?} depends on the set")));
        }
        self.elements.push(elem);
        self.vector = OnceLock::new();
        Ok(())
    }

    /// The stored hypervector, `None` while empty.
    pub fn vector(&self) -> Result<Option<&Hypervector>> {
        if self.elements.is_empty() {
            return Ok(None);
        }
        if let Some(v) = self.vector.get() {
            return Ok(Some(v));
        }
        let v = bundle_tuples(&self.space, &self.elements, &self.tiebreak)?;
        Ok(Some(self.vector.get_or_init(|| v)))
    }

    /// Stored vector for in-place corruption.
    pub fn item_memory_mut(&mut self) -> Result<Option<&mut Hypervector>> {
        self.vector()?;
        Ok(self.vector.get_mut())
    }

    pub fn in_set_probe(&self, elem: &[CodeId]) -> Result<Option<Probe>> {
        if self.decl.in_set.is_none() {
            return Err(Error::InvalidArgument("in_set was not declared".into()));
        }
        check_member(&self.factors, elem)?;
        let q = self.space.tuple(elem)?;
        match self.vector()? {
            Some(v) => Ok(Some(noisy_probe(
                self.query_noise.as_ref(),
                ("in", elem),
                &q,
                v,
                self.params.get(0)?,
            )?)),
            None => Ok(None),
        }
    }

    pub fn in_set(&self, elem: &[CodeId]) -> Result<bool> {
        Ok(self.in_set_probe(elem)?.is_some_and(|p| p.hit()))
    }

    /// Whether at least `k` of `query` are in the set.
    pub fn subset(&self, query: &[CodeTuple], k: usize) -> Result<bool> {
        let i = self.decl.subset_index(query.len(), k).ok_or_else(|| {
            Error::InvalidArgument(format!("no subset query of size {} with k = {k} declared", query.len()))
        })?;
        for t in query {
            check_member(&self.factors, t)?;
        }
        if !check_independent_set(query)? {
            return Err(Error::Independence("subset query is not an independent set".into()));
        }
        let Some(v) = self.vector()? else {
            return Ok(false);
        };
        let q = bundle_tuples(&self.space, query, &self.tiebreak.child(query.len() as u64))?;
        Ok(noisy_probe(
            self.query_noise.as_ref(),
            ("subset", query, k),
            &q,
            v,
            self.params.get(i)?,
        )?
        .hit())
    }

    pub fn item_memory(&self) -> Result<ItemMemory> {
        let vectors: Vec<Hypervector> = self.vector()?.into_iter().cloned().collect();
        let entries = if vectors.is_empty() {
            vec![]
        } else {
            vec![ManifestEntry {
                id: 0,
                size: self.len(),
            }]
        };
        Ok(ItemMemory {
            manifest: Manifest {
                kind: "set".into(),
                dim: self.space.dim(),
                entries,
                params: self.params.clone(),
            },
            vectors,
        })
    }
}

// ---------------------------------------------------------------- database

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbDecl {
    pub keys: (String, usize),
    pub vals: (String, usize),
    pub max_fields: usize,
    pub matches: Vec<SubsetQuery>,
    pub analogy: Option<Targets>,
}

impl DbDecl {
    pub fn new(keys: (&str, usize), vals: (&str, usize), max_fields: usize) -> Result<Self> {
        if keys.0 == vals.0 {
            return Err(Error::InvalidArgument("keys and values need distinct codebooks".into()));
        }
        if max_fields == 0 {
            return Err(Error::InvalidArgument("record capacity must be positive".into()));
        }
        Ok(DbDecl {
            keys: (keys.0.into(), keys.1),
            vals: (vals.0.into(), vals.1),
            max_fields,
            matches: Vec::new(),
            analogy: None,
        })
    }

    pub fn with_matches(mut self, max_query: usize, k: usize, t: Targets) -> Result<Self> {
        if k == 0 || k > max_query || k > self.max_fields {
            return Err(Error::InvalidK {
                k,
                reason: format!(
                    "match queries of up to {max_query} pairs on records of {}",
                    self.max_fields
                ),
            });
        }
        self.matches.push(SubsetQuery {
            max_query,
            k,
            targets: t,
        });
        Ok(self)
    }

    pub fn with_analogy(mut self, t: Targets) -> Self {
        self.analogy = Some(t);
        self
    }

    fn codebooks(&self) -> IndexMap<String, usize> {
        IndexMap::from([self.keys.clone(), self.vals.clone()])
    }

    pub fn emit_spec(&self) -> AccuracySpec {
        let (k, v) = (Expr::code(&self.keys.0), Expr::code(&self.vals.0));
        let mut bindings = IndexMap::new();
        bindings.insert(
            "ds".to_string(),
            Expr::sum(self.max_fields, vec![Expr::prod(vec![k.clone(), v.clone()])]),
        );
        bindings.insert("ds2".to_string(), Expr::prod(vec![Expr::var("ds"), Expr::var("ds")]));
        bindings.insert("kv".to_string(), Expr::prod(vec![k, v.clone()]));
        bindings.insert("val2".to_string(), Expr::prod(vec![v.clone(), v]));
        let mut requirements = Vec::new();
        for m in &self.matches {
            for j in (m.k..=m.max_query).rev() {
                let q = Expr::sum(j, vec![Expr::var("kv")]);
                requirements.push(requirement(q, Expr::var("ds"), m.k, m.targets));
            }
        }
        if let Some(t) = self.analogy {
            requirements.push(requirement(Expr::var("val2"), Expr::var("ds2"), 1, t));
        }
        AccuracySpec {
            codebooks: self.codebooks(),
            bindings,
            requirements,
        }
    }

    pub fn plan(&self, hw: &HardwareModel, max_n: usize) -> Result<ParamTable> {
        Ok(ParamTable::from_result(&optimize(hw, &self.emit_spec(), max_n)?))
    }

    pub fn plan_at(&self, hw: &HardwareModel, n: usize) -> Result<ParamTable> {
        ParamTable::at_dimension(hw, &self.emit_spec(), n)
    }

    fn match_count(&self) -> usize {
        self.matches.iter().map(|s| s.max_query - s.k + 1).sum()
    }

    fn query_count(&self) -> usize {
        self.match_count() + usize::from(self.analogy.is_some())
    }

    fn match_index(&self, size: usize, k: usize) -> Option<usize> {
        let mut i = 0;
        for s in &self.matches {
            if s.k == k && (k..=s.max_query).contains(&size) {
                return Some(i + (s.max_query - size));
            }
            i += s.max_query - s.k + 1;
        }
        None
    }
}

#[derive(Debug, Default)]
struct Record {
    entries: IndexMap<usize, usize>,
    basis: IndependentSet,
    vector: OnceLock<Hypervector>,
}

/// Records of key-value tuples, one bundled hypervector per record.
#[derive(Debug)]
pub struct Database {
    decl: DbDecl,
    space: Arc<ItemSpace>,
    params: ParamTable,
    records: BTreeMap<usize, Record>,
    tiebreak: RngStream,
    query_noise: Option<QueryNoise>,
}

impl Database {
    pub fn new(decl: DbDecl, params: ParamTable, space: Arc<ItemSpace>, tiebreak: RngStream) -> Result<Self> {
        params.check(decl.query_count(), &space)?;
        for (name, size) in [&decl.keys, &decl.vals] {
            match space.codebook(name) {
                Some(cb) if cb.size() >= *size => {}
                _ => return Err(Error::InvalidArgument(format!("item space lacks codebook `{name}`"))),
            }
        }
        Ok(Database {
            decl,
            space,
            params,
            records: BTreeMap::new(),
            tiebreak,
            query_noise: None,
        })
    }

    pub fn decl(&self) -> &DbDecl {
        &self.decl
    }

    pub fn set_query_noise(&mut self, noise: QueryNoise) {
        self.query_noise = Some(noise);
    }

    pub fn emit_spec(&self) -> AccuracySpec {
        self.decl.emit_spec()
    }

    pub fn add_record(&mut self, id: usize) -> Result<()> {
        if self.records.contains_key(&id) {
            return Err(Error::InvalidArgument(format!("record {id} already exists")));
        }
        self.records.insert(id, Record::default());
        Ok(())
    }

    fn kv(&self, key: usize, val: usize) -> CodeTuple {
        vec![CodeId::new(&self.decl.keys.0, key), CodeId::new(&self.decl.vals.0, val)]
    }

    pub fn add_entry(&mut self, id: usize, key: usize, val: usize) -> Result<()> {
        if key >= self.decl.keys.1 || val >= self.decl.vals.1 {
            return Err(Error::OutsideSpace(format!("entry ({key}, {val})")));
        }
        let t = self.kv(key, val);
        let max = self.decl.max_fields;
        let rec = self.records.get_mut(&id).ok_or(Error::UnknownRecord(id))?;
        if rec.entries.contains_key(&key) {
            return Err(Error::DuplicateKey(format!("key {key} in record {id}")));
        }
        if rec.entries.len() >= max {
            return Err(Error::Capacity(max));
        }
        if !rec.basis.try_insert(&t)? {
            return Err(Error::Independence(format!("entry ({key}, {val}) in record {id}")));
        }
        rec.entries.insert(key, val);
        rec.vector = OnceLock::new();
        Ok(())
    }

    pub fn record_ids(&self) -> Vec<usize> {
        self.records.keys().copied().collect()
    }

    pub fn record(&self, id: usize) -> Result<&IndexMap<usize, usize>> {
        Ok(&self.records.get(&id).ok_or(Error::UnknownRecord(id))?.entries)
    }

    fn record_tuples(&self, rec: &Record) -> Vec<CodeTuple> {
        rec.entries.iter().map(|(&k, &v)| self.kv(k, v)).collect()
    }

    fn record_vector(&self, id: usize) -> Result<Option<&Hypervector>> {
        let rec = self.records.get(&id).ok_or(Error::UnknownRecord(id))?;
        if rec.entries.is_empty() {
            return Ok(None);
        }
        if let Some(v) = rec.vector.get() {
            return Ok(Some(v));
        }
        let v = bundle_tuples(&self.space, &self.record_tuples(rec), &self.tiebreak.child(id as u64))?;
        Ok(Some(rec.vector.get_or_init(|| v)))
    }

    /// Stored record vectors for in-place corruption, in id order.
    pub fn item_memory_mut(&mut self) -> Result<Vec<&mut Hypervector>> {
        for id in self.record_ids() {
            self.record_vector(id)?;
        }
        Ok(self.records.values_mut().filter_map(|r| r.vector.get_mut()).collect())
    }

    pub fn match_probe(&self, id: usize, pairs: &[(usize, usize)], k: usize) -> Result<Option<Probe>> {
        let i = self.decl.match_index(pairs.len(), k).ok_or_else(|| {
            Error::InvalidArgument(format!("no match query of {} pairs with k = {k} declared", pairs.len()))
        })?;
        let tuples: Vec<CodeTuple> = pairs.iter().map(|&(k, v)| self.kv(k, v)).collect();
        if pairs
            .iter()
            .any(|&(k, v)| k >= self.decl.keys.1 || v >= self.decl.vals.1)
        {
            return Err(Error::OutsideSpace("match query pair".into()));
        }
        if !check_independent_set(&tuples)? {
            return Err(Error::Independence("match query is not an independent set".into()));
        }
        let Some(r) = self.record_vector(id)? else {
            return Ok(None);
        };
        let q = bundle_tuples(
            &self.space,
            &tuples,
            &self.tiebreak.child(u64::MAX - pairs.len() as u64),
        )?;
        let key = ("match", id, pairs, k);
        Ok(Some(noisy_probe(
            self.query_noise.as_ref(),
            key,
            &q,
            r,
            self.params.get(i)?,
        )?))
    }

    /// Records sharing at least `k` of `pairs`, ascending.
    pub fn matches(&self, pairs: &[(usize, usize)], k: usize) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for id in self.record_ids() {
            if self.match_probe(id, pairs, k)?.is_some_and(|p| p.hit()) {
                out.push(id);
            }
        }
        Ok(out)
    }

    fn analogy_setting(&self) -> Result<QuerySetting> {
        if self.decl.analogy.is_none() {
            return Err(Error::InvalidArgument("analogy was not declared".into()));
        }
        self.params.get(self.decl.match_count())
    }

    /// `R_from ⊙ R_to` after checking the pair forms an independent product.
    fn analogy_base(&self, from: usize, to: usize) -> Result<Option<Hypervector>> {
        let (a, b) = (
            self.records.get(&from).ok_or(Error::UnknownRecord(from))?,
            self.records.get(&to).ok_or(Error::UnknownRecord(to))?,
        );
        if !check_independent_product(&[self.record_tuples(a), self.record_tuples(b)])? {
            return Err(Error::Independence(format!("records {from} and {to} share tuples")));
        }
        match (self.record_vector(from)?, self.record_vector(to)?) {
            (Some(x), Some(y)) => Ok(Some(bind(x, y)?)),
            _ => Ok(None),
        }
    }

    fn val_code(&self, v: usize) -> Result<Hypervector> {
        self.space.code(&CodeId::new(&self.decl.vals.0, v))
    }

    /// Distance test of `val ⊙ candidate` against `R_from ⊙ R_to`.
    pub fn analogy_probe(&self, from: usize, to: usize, val: usize, candidate: usize) -> Result<Option<Probe>> {
        let s = self.analogy_setting()?;
        let Some(base) = self.analogy_base(from, to)? else {
            return Ok(None);
        };
        let q = bind(&self.val_code(val)?, &self.val_code(candidate)?)?;
        let key = ("analogy", from, to, val, candidate);
        Ok(Some(noisy_probe(self.query_noise.as_ref(), key, &q, &base, s)?))
    }

    /// The value playing `val`'s role of record `from` in record `to`.
    pub fn analogy(&self, from: usize, to: usize, val: usize) -> Result<Option<usize>> {
        let s = self.analogy_setting()?;
        let Some(base) = self.analogy_base(from, to)? else {
            return Ok(None);
        };
        let v = self.val_code(val)?;
        let mut hits = Vec::new();
        for c in 0..self.decl.vals.1 {
            if c == val {
                continue;
            }
            let q = bind(&v, &self.val_code(c)?)?;
            if noisy_probe(self.query_noise.as_ref(), ("analogy", from, to, val, c), &q, &base, s)?.hit() {
                hits.push(c);
            }
        }
        match hits.len() {
            0 => Ok(None),
            1 => Ok(Some(hits[0])),
            n => Err(Error::AmbiguousAnalogy(n)),
        }
    }

    pub fn item_memory(&self) -> Result<ItemMemory> {
        let mut entries = Vec::new();
        let mut vectors = Vec::new();
        for (&id, rec) in &self.records {
            if let Some(v) = self.record_vector(id)? {
                entries.push(ManifestEntry {
                    id,
                    size: rec.entries.len(),
                });
                vectors.push(v.clone());
            }
        }
        Ok(ItemMemory {
            manifest: Manifest {
                kind: "database".into(),
                dim: self.space.dim(),
                entries,
                params: self.params.clone(),
            },
            vectors,
        })
    }
}

// ---------------------------------------------------------------- knowledge graph

/// Edge as (interaction, relation, concept) indices.
pub type Edge = (usize, usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgDecl {
    pub interactions: (String, usize),
    pub relations: (String, usize),
    pub concepts: (String, usize),
    pub max_degree: usize,
    pub has_edge: Option<Targets>,
}

impl KgDecl {
    pub fn new(interactions: usize, relations: usize, concepts: usize, max_degree: usize) -> Result<Self> {
        if max_degree == 0 || interactions == 0 || relations == 0 || concepts == 0 {
            return Err(Error::InvalidArgument("knowledge graph sizes must be positive".into()));
        }
        Ok(KgDecl {
            interactions: ("interactions".into(), interactions),
            relations: ("relations".into(), relations),
            concepts: ("concepts".into(), concepts),
            max_degree,
            has_edge: None,
        })
    }

    pub fn with_has_edge(mut self, t: Targets) -> Self {
        self.has_edge = Some(t);
        self
    }

    fn edge_space(&self) -> Expr {
        Expr::prod(vec![
            Expr::code(&self.interactions.0),
            Expr::code(&self.relations.0),
            Expr::code(&self.concepts.0),
        ])
    }

    pub fn emit_spec(&self) -> AccuracySpec {
        let codebooks = IndexMap::from([self.interactions.clone(), self.relations.clone(), self.concepts.clone()]);
        let mut bindings = IndexMap::new();
        bindings.insert("query".to_string(), self.edge_space());
        bindings.insert("ds".to_string(), Expr::sum(self.max_degree, vec![self.edge_space()]));
        let requirements = self
            .has_edge
            .map(|t| requirement(Expr::var("query"), Expr::var("ds"), 1, t))
            .into_iter()
            .collect();
        AccuracySpec {
            codebooks,
            bindings,
            requirements,
        }
    }

    /// Node vectors at the optimized dimension; one threshold per degree
    /// `1..=max_degree` at that dimension.
    pub fn plan(&self, hw: &HardwareModel, max_n: usize) -> Result<ParamTable> {
        let spec = self.emit_spec();
        let n = optimize(hw, &spec, max_n)?.n_opt;
        self.plan_at_spec(hw, &spec, n)
    }

    pub fn plan_at(&self, hw: &HardwareModel, n: usize) -> Result<ParamTable> {
        self.plan_at_spec(hw, &self.emit_spec(), n)
    }

    fn plan_at_spec(&self, hw: &HardwareModel, spec: &AccuracySpec, n: usize) -> Result<ParamTable> {
        let spec = expand_vars(spec)?;
        let r = spec
            .requirements
            .first()
            .ok_or_else(|| Error::InvalidArgument("has_edge was not declared".into()))?;
        let settings = thresholds_by_size(hw, r, n)?
            .into_iter()
            .map(|rep| QuerySetting {
                n,
                thr: rep.threshold.thr,
            })
            .collect();
        Ok(ParamTable { dim: n, settings })
    }
}

#[derive(Debug)]
struct Node {
    edges: Vec<Edge>,
    vector: OnceLock<Hypervector>,
}

/// Directed labelled graph with one bundled edge-list vector per node.
#[derive(Debug)]
pub struct KnowledgeGraph {
    decl: KgDecl,
    space: Arc<ItemSpace>,
    params: ParamTable,
    nodes: Vec<Node>,
    tiebreak: RngStream,
    query_noise: Option<QueryNoise>,
}

impl KnowledgeGraph {
    pub fn new(decl: KgDecl, params: ParamTable, space: Arc<ItemSpace>, tiebreak: RngStream) -> Result<Self> {
        params.check(decl.max_degree, &space)?;
        Ok(KnowledgeGraph {
            decl,
            space,
            params,
            nodes: Vec::new(),
            tiebreak,
            query_noise: None,
        })
    }

    pub fn decl(&self) -> &KgDecl {
        &self.decl
    }

    pub fn set_query_noise(&mut self, noise: QueryNoise) {
        self.query_noise = Some(noise);
    }

    pub fn emit_spec(&self) -> AccuracySpec {
        self.decl.emit_spec()
    }

    pub fn edge_tuple(&self, e: Edge) -> CodeTuple {
        vec![
            CodeId::new(&self.decl.interactions.0, e.0),
            CodeId::new(&self.decl.relations.0, e.1),
            CodeId::new(&self.decl.concepts.0, e.2),
        ]
    }

    fn check_edge(&self, e: Edge) -> Result<()> {
        if e.0 >= self.decl.interactions.1 || e.1 >= self.decl.relations.1 || e.2 >= self.decl.concepts.1 {
            return Err(Error::OutsideSpace(format!("edge {e:?}")));
        }
        Ok(())
    }

    /// Adds a node with the given outgoing edges and returns its id.
    pub fn add_vertex(&mut self, edges: &[Edge]) -> Result<usize> {
        if edges.len() > self.decl.max_degree {
            return Err(Error::Capacity(self.decl.max_degree));
        }
        let mut basis = IndependentSet::new();
        for &e in edges {
            self.check_edge(e)?;
            if !basis.try_insert(&self.edge_tuple(e))? {
                return Err(Error::Independence(format!(
                    "edge {e:?} depends on the node's other edges"
                )));
            }
        }
        self.nodes.push(Node {
            edges: edges.to_vec(),
            vector: OnceLock::new(),
        });
        Ok(self.nodes.len() - 1)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self, node: usize) -> Result<&[Edge]> {
        Ok(&self.nodes.get(node).ok_or(Error::UnknownRecord(node))?.edges)
    }

    fn node_vector(&self, id: usize) -> Result<Option<&Hypervector>> {
        let node = self.nodes.get(id).ok_or(Error::UnknownRecord(id))?;
        if node.edges.is_empty() {
            return Ok(None);
        }
        if let Some(v) = node.vector.get() {
            return Ok(Some(v));
        }
        let tuples: Vec<CodeTuple> = node.edges.iter().map(|&e| self.edge_tuple(e)).collect();
        let v = bundle_tuples(&self.space, &tuples, &self.tiebreak.child(id as u64))?;
        Ok(Some(node.vector.get_or_init(|| v)))
    }

    pub fn item_memory_mut(&mut self) -> Result<Vec<&mut Hypervector>> {
        for id in 0..self.nodes.len() {
            self.node_vector(id)?;
        }
        Ok(self.nodes.iter_mut().filter_map(|n| n.vector.get_mut()).collect())
    }

    /// Edge test against one node, using the threshold of its degree.
    pub fn edge_probe(&self, node: usize, e: Edge) -> Result<Option<Probe>> {
        self.check_edge(e)?;
        let Some(v) = self.node_vector(node)? else {
            return Ok(None);
        };
        let degree = self.nodes[node].edges.len();
        let q = self.space.tuple(&self.edge_tuple(e))?;
        Ok(Some(noisy_probe(
            self.query_noise.as_ref(),
            (node, e),
            &q,
            v,
            self.params.get(degree - 1)?,
        )?))
    }

    /// Nodes holding edge `e`, ascending.
    pub fn has_edge(&self, e: Edge) -> Result<Vec<usize>> {
        for id in 0..self.nodes.len() {
            self.node_vector(id)?;
        }
        let hits = (0..self.nodes.len())
            .into_par_iter()
            .map(|id| Ok(self.edge_probe(id, e)?.is_some_and(|p| p.hit()).then_some(id)))
            .collect::<Result<Vec<_>>>()?;
        Ok(hits.into_iter().flatten().collect())
    }

    pub fn item_memory(&self) -> Result<ItemMemory> {
        let mut entries = Vec::new();
        let mut vectors = Vec::new();
        for (id, n) in self.nodes.iter().enumerate() {
            if let Some(v) = self.node_vector(id)? {
                entries.push(ManifestEntry {
                    id,
                    size: n.edges.len(),
                });
                vectors.push(v.clone());
            }
        }
        Ok(ItemMemory {
            manifest: Manifest {
                kind: "knowledge-graph".into(),
                dim: self.space.dim(),
                entries,
                params: self.params.clone(),
            },
            vectors,
        })
    }
}

// ---------------------------------------------------------------- NFA

/// Transition as (from state, symbol, to state).
pub type Transition = (usize, usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NfaDecl {
    pub states: (String, usize),
    pub symbols: (String, usize),
    pub max_transitions: usize,
    pub execute: Option<Targets>,
}

impl NfaDecl {
    pub fn new(states: usize, symbols: usize, max_transitions: usize) -> Result<Self> {
        if states == 0 || symbols == 0 || max_transitions == 0 {
            return Err(Error::InvalidArgument("NFA sizes must be positive".into()));
        }
        Ok(NfaDecl {
            states: ("states".into(), states),
            symbols: ("symbols".into(), symbols),
            max_transitions,
            execute: None,
        })
    }

    /// Per-recall targets, see [`NfaDecl::recall_targets`].
    pub fn with_execute(mut self, t: Targets) -> Self {
        self.execute = Some(t);
        self
    }

    /// Targets for a single state recall so that a `steps`-long string
    /// meets `acc`. Each step is `acc^(1/steps)` and recalls every state once,
    /// so a step is only right when all of its recalls are.
    pub fn recall_targets(&self, acc: f64, steps: usize) -> Targets {
        let per_step = acc.powf(1.0 / steps.max(1) as f64);
        Targets::symmetric(per_step.powf(1.0 / self.states.1 as f64))
    }

    /// One recall requirement per current state-set size `1..=states`.
    pub fn emit_spec(&self) -> AccuracySpec {
        let (s, c) = (Expr::code(&self.states.0), Expr::code(&self.symbols.0));
        let mut bindings = IndexMap::new();
        bindings.insert(
            "ds".to_string(),
            Expr::sum(
                self.max_transitions,
                vec![Expr::prod(vec![s.clone(), c.clone(), Expr::perm(1, &self.states.0)])],
            ),
        );
        let mut requirements = Vec::new();
        if let Some(t) = self.execute {
            for size in 1..=self.states.1 {
                let step = Expr::prod(vec![Expr::sum(size, vec![s.clone()]), c.clone(), Expr::var("ds")]);
                requirements.push(requirement(Expr::perm(1, &self.states.0), step, 1, t));
            }
        }
        AccuracySpec {
            codebooks: IndexMap::from([self.states.clone(), self.symbols.clone()]),
            bindings,
            requirements,
        }
    }

    pub fn plan(&self, hw: &HardwareModel, max_n: usize) -> Result<ParamTable> {
        Ok(ParamTable::from_result(&optimize(hw, &self.emit_spec(), max_n)?))
    }

    pub fn plan_at(&self, hw: &HardwareModel, n: usize) -> Result<ParamTable> {
        ParamTable::at_dimension(hw, &self.emit_spec(), n)
    }
}

/// Automaton whose transition relation is one bundled hypervector; the
/// current state set is carried as a bundle and cleaned up after every step.
#[derive(Debug)]
pub struct Nfa {
    decl: NfaDecl,
    space: Arc<ItemSpace>,
    params: ParamTable,
    transitions: Vec<Transition>,
    transition_vector: Option<Hypervector>,
    shifted: Vec<Hypervector>,
    current: Vec<usize>,
    state_vector: Option<Hypervector>,
    tiebreak: RngStream,
    steps: u64,
    executions: u64,
    query_noise: Option<QueryNoise>,
}

impl Nfa {
    pub fn new(decl: NfaDecl, params: ParamTable, space: Arc<ItemSpace>, tiebreak: RngStream) -> Result<Self> {
        let expected = if decl.execute.is_some() { decl.states.1 } else { 0 };
        params.check(expected, &space)?;
        let states = space
            .codebook(&decl.states.0)
            .ok_or_else(|| Error::InvalidArgument("item space lacks the state codebook".into()))?;
        let shifted = states.codes()[..decl.states.1].iter().map(|v| permute(v, 1)).collect();
        Ok(Nfa {
            decl,
            space,
            params,
            transitions: Vec::new(),
            transition_vector: None,
            shifted,
            current: Vec::new(),
            state_vector: None,
            tiebreak,
            steps: 0,
            executions: 0,
            query_noise: None,
        })
    }

    pub fn decl(&self) -> &NfaDecl {
        &self.decl
    }

    pub fn set_query_noise(&mut self, noise: QueryNoise) {
        self.query_noise = Some(noise);
    }

    pub fn emit_spec(&self) -> AccuracySpec {
        self.decl.emit_spec()
    }

    fn transition_tuple(&self, t: Transition) -> CodeTuple {
        vec![
            CodeId::new(&self.decl.states.0, t.0),
            CodeId::new(&self.decl.symbols.0, t.1),
            CodeId::new(virtual_codebook(&self.decl.states.0, 1), t.2),
        ]
    }

    pub fn set_transitions(&mut self, ts: &[Transition]) -> Result<()> {
        if ts.is_empty() {
            return Err(Error::InvalidArgument("an NFA needs at least one transition".into()));
        }
        if ts.len() > self.decl.max_transitions {
            return Err(Error::Capacity(self.decl.max_transitions));
        }
        let (ns, nc) = (self.decl.states.1, self.decl.symbols.1);
        if let Some(t) = ts.iter().find(|t| t.0 >= ns || t.2 >= ns || t.1 >= nc) {
            return Err(Error::OutsideSpace(format!("transition {t:?}")));
        }
        let tuples: Vec<CodeTuple> = ts.iter().map(|&t| self.transition_tuple(t)).collect();
        if !check_independent_set(&tuples)? {
            return Err(Error::Independence("transitions are not an independent set".into()));
        }
        self.transition_vector = Some(bundle_tuples(&self.space, &tuples, &self.tiebreak.child(u64::MAX))?);
        self.transitions = ts.to_vec();
        Ok(())
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Stored transition vector for in-place corruption.
    pub fn item_memory_mut(&mut self) -> Option<&mut Hypervector> {
        self.transition_vector.as_mut()
    }

    fn setting(&self, size: usize) -> Result<QuerySetting> {
        if self.decl.execute.is_none() {
            return Err(Error::InvalidArgument("execute was not declared".into()));
        }
        self.params.get(size - 1)
    }

    /// Clean bundle of `states` at the dimension of their set size.
    fn rebuild(&mut self) -> Result<()> {
        if self.current.is_empty() {
            self.state_vector = None;
            return Ok(());
        }
        let n = self.setting(self.current.len())?.n;
        let states = self.space.codebook(&self.decl.states.0).expect("checked in new");
        let vs = self
            .current
            .iter()
            .map(|&s| states.code(s).prefix(n))
            .collect::<Result<Vec<_>>>()?;
        self.state_vector = Some(bundle(&vs, &mut self.tiebreak.child(self.steps))?);
        Ok(())
    }

    pub fn start_states(&mut self, states: &[usize]) -> Result<()> {
        if let Some(s) = states.iter().find(|&&s| s >= self.decl.states.1) {
            return Err(Error::OutsideSpace(format!("state {s}")));
        }
        let tuples: Vec<CodeTuple> = states
            .iter()
            .map(|&s| vec![CodeId::new(&self.decl.states.0, s)])
            .collect();
        if !states.is_empty() && !check_independent_set(&tuples)? {
            return Err(Error::Independence("start states repeat".into()));
        }
        self.current = states.to_vec();
        self.current.sort_unstable();
        self.steps = 0;
        self.rebuild()
    }

    /// Current state-set estimate, ascending.
    pub fn current(&self) -> &[usize] {
        &self.current
    }

    /// Applies one symbol and returns the recalled next states.
    pub fn execute(&mut self, sym: usize) -> Result<&[usize]> {
        if sym >= self.decl.symbols.1 {
            return Err(Error::OutsideSpace(format!("symbol {sym}")));
        }
        let a = self
            .transition_vector
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("transitions not set".into()))?;
        self.steps += 1;
        self.executions += 1;
        let Some(css) = &self.state_vector else {
            return Ok(&self.current);
        };
        let s = self.setting(self.current.len())?;
        let n = css.len();
        let symbols = self.space.codebook(&self.decl.symbols.0).expect("checked in new");
        let mut noisy = css.clone();
        noisy.bind_assign(&symbols.code(sym).prefix(n)?)?;
        noisy.bind_assign(&a.prefix(n)?)?;
        let mut next = Vec::new();
        for (st, code) in self.shifted.iter().enumerate() {
            if noisy_probe(self.query_noise.as_ref(), (self.executions, st), code, &noisy, s)?.hit() {
                next.push(st);
            }
        }
        self.current = next;
        self.rebuild()?;
        Ok(&self.current)
    }

    pub fn item_memory(&self) -> ItemMemory {
        let vectors: Vec<Hypervector> = self.transition_vector.iter().cloned().collect();
        let entries = if vectors.is_empty() {
            vec![]
        } else {
            vec![ManifestEntry {
                id: 0,
                size: self.transitions.len(),
            }]
        };
        ItemMemory {
            manifest: Manifest {
                kind: "nfa".into(),
                dim: self.space.dim(),
                entries,
                params: self.params.clone(),
            },
            vectors,
        }
    }
}

/// Linear string automaton: state `i` steps to `i + 1` on `s[i]`.
pub fn string_transitions(s: &[usize]) -> Vec<Transition> {
    s.iter().enumerate().map(|(i, &c)| (i, c, i + 1)).collect()
}

/// Occurrence end positions of `q` in `s`, i.e. the exact final state set
/// of the string automaton started at every state.
pub fn occurrences(s: &[usize], q: &[usize]) -> Vec<usize> {
    if q.is_empty() {
        return (0..=s.len()).collect();
    }
    if q.len() > s.len() {
        return Vec::new();
    }
    (0..=s.len() - q.len())
        .filter(|&i| s[i..i + q.len()] == *q)
        .map(|i| i + q.len())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::speclang::{parse_hw_model, print_spec};

    const KG: &str = include_str!("../../../specs/knowledge_graph.heim");
    const HW2: &str = include_str!("../../../specs/rram_2bpc.hw");

    fn squash(s: &str) -> String {
        s.lines()
            .filter(|l| !l.trim_start().starts_with("//"))
            .flat_map(|l| l.chars())
            .filter(|c| !c.is_whitespace())
            .collect()
    }

    fn nominal() -> HardwareModel {
        HardwareModel::default()
    }

    fn space(decl: &IndexMap<String, usize>, dim: usize, seed: u64) -> Arc<ItemSpace> {
        Arc::new(ItemSpace::generate(decl, dim, &RngStream::new(seed, 0)).unwrap())
    }

    fn letters(s: &str) -> Vec<usize> {
        s.bytes().map(|b| (b - b'A') as usize).collect()
    }

    fn set_decl(m: usize) -> SetDecl {
        SetDecl::new(IndexMap::from([("x".to_string(), 64)]), Expr::code("x"), m)
            .unwrap()
            .with_in_set(Targets::symmetric(0.99))
    }

    fn x(i: usize) -> CodeTuple {
        vec![CodeId::new("x", i)]
    }

    #[test]
    fn kg_spec_matches_fixture() {
        let decl = KgDecl::new(2, 3, 5, 4)
            .unwrap()
            .with_has_edge(Targets::new(0.99, 0.01, 0.003));
        assert_eq!(squash(&print_spec(&decl.emit_spec())), squash(KG));
    }

    #[test]
    fn set_spec_fragments() {
        let text = print_spec(&set_decl(3).emit_spec());
        assert_eq!(
            text,
            "spec {\n    codebook x(64);\n    abs-data ds = sum(3, x);\n    require-accuracy(x, ds, 1, 0.99, 0.01, 0.01);\n}"
        );
        let sub = SetDecl::new(IndexMap::from([("x".to_string(), 8)]), Expr::code("x"), 5)
            .unwrap()
            .with_subset(3, 2, Targets::symmetric(0.99))
            .unwrap();
        let reqs: Vec<String> = sub
            .emit_spec()
            .requirements
            .iter()
            .map(|r| r.query.to_string())
            .collect();
        assert_eq!(reqs, ["sum(3, x)", "sum(2, x)"]);
        assert!(sub.emit_spec().requirements.iter().all(|r| r.k == 2));
    }

    #[test]
    fn emitted_specs_parse_and_optimize() {
        let specs = [
            set_decl(7).emit_spec(),
            DbDecl::new(("keys", 4), ("vals", 8), 4)
                .unwrap()
                .with_matches(3, 2, Targets::symmetric(0.99))
                .unwrap()
                .with_analogy(Targets::symmetric(0.99))
                .emit_spec(),
            NfaDecl::new(5, 4, 4)
                .unwrap()
                .with_execute(Targets::symmetric(0.99))
                .emit_spec(),
        ];
        for s in specs {
            let reparsed = crate::speclang::parse_spec(&print_spec(&s)).unwrap();
            let r = optimize(&nominal(), &reparsed, 1_000_000).unwrap();
            assert_eq!(r.per_query.len(), s.requirements.len());
        }
    }

    #[test]
    fn set_stores_bundle_of_elements() {
        let decl = set_decl(4);
        let params = decl.plan(&nominal(), 1_000_000).unwrap();
        let sp = space(&decl.codebooks, params.dim, 1);
        let tb = RngStream::new(9, 9);
        let mut s = SetDs::new(decl, params, sp.clone(), tb.clone()).unwrap();
        assert!(!s.in_set(&x(0)).unwrap());
        for i in 0..4 {
            s.add(x(i)).unwrap();
        }
        let vs: Vec<Hypervector> = (0..4).map(|i| sp.tuple(&x(i)).unwrap()).collect();
        assert_eq!(s.vector().unwrap().unwrap(), &bundle(&vs, &mut tb.clone()).unwrap());
        assert!(matches!(s.add(x(5)), Err(Error::Capacity(4))));
    }

    #[test]
    fn set_rejects_bad_elements() {
        let decl = SetDecl::new(
            IndexMap::from([("a".to_string(), 4), ("b".to_string(), 4)]),
            Expr::prod(vec![Expr::code("a"), Expr::code("b")]),
            8,
        )
        .unwrap()
        .with_in_set(Targets::symmetric(0.99));
        let params = decl.plan(&nominal(), 1_000_000).unwrap();
        let sp = space(&decl.codebooks, params.dim, 2);
        let mut s = SetDs::new(decl, params, sp, RngStream::new(0, 0)).unwrap();
        let ab = |i, j| vec![CodeId::new("a", i), CodeId::new("b", j)];
        s.add(ab(0, 0)).unwrap();
        s.add(ab(0, 1)).unwrap();
        s.add(ab(1, 0)).unwrap();
        assert!(matches!(s.add(ab(1, 1)), Err(Error::Independence(_))));
        assert!(matches!(
            s.add(vec![CodeId::new("b", 0), CodeId::new("a", 0)]),
            Err(Error::OutsideSpace(_))
        ));
        assert!(matches!(s.add(ab(9, 0)), Err(Error::OutsideSpace(_))));
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn subset_of_identical_set() {
        let decl = SetDecl::new(IndexMap::from([("x".to_string(), 16)]), Expr::code("x"), 5)
            .unwrap()
            .with_subset(5, 5, Targets::symmetric(0.99))
            .unwrap();
        let params = decl.plan(&nominal(), 1_000_000).unwrap();
        let sp = space(&decl.codebooks, params.dim, 3);
        let mut s = SetDs::new(decl, params, sp, RngStream::new(1, 1)).unwrap();
        let elems: Vec<CodeTuple> = (0..5).map(x).collect();
        for e in &elems {
            s.add(e.clone()).unwrap();
        }
        assert!(s.subset(&elems, 5).unwrap());
        let other: Vec<CodeTuple> = (10..15).map(x).collect();
        assert!(!s.subset(&other, 5).unwrap());
        assert!(s.subset(&elems[..3], 5).is_err());
    }

    #[test]
    fn inserted_elements_are_found() {
        // acc - 3 sd over T trials
        let (acc, t) = (0.99, 400usize);
        let decl = set_decl(21);
        let params = decl.plan(&nominal(), 1_000_000).unwrap();
        let hits = (0..t)
            .filter(|&trial| {
                let sp = space(&decl.codebooks, params.dim, 100 + trial as u64);
                let mut s = SetDs::new(decl.clone(), params.clone(), sp, RngStream::new(trial as u64, 7)).unwrap();
                for i in 0..21 {
                    s.add(x(i)).unwrap();
                }
                s.in_set(&x(trial % 21)).unwrap()
            })
            .count();
        let bound = acc - 3.0 * (acc * (1.0 - acc) / t as f64).sqrt();
        assert!(hits as f64 / t as f64 >= bound, "{hits}/{t}");
    }

    fn student_graph(seed: u64) -> KnowledgeGraph {
        let hw = parse_hw_model(HW2).unwrap();
        let decl = KgDecl::new(2, 3, 5, 4)
            .unwrap()
            .with_has_edge(Targets::new(0.99, 0.01, 0.003));
        let params = decl.plan(&hw, 1_000_000).unwrap();
        let sp = space(&decl.emit_spec().codebooks, params.dim, seed);
        let mut g = KnowledgeGraph::new(decl, params, sp, RngStream::new(seed, 1)).unwrap();
        // act, target / likes, hates, plays / jack, mary, banana, apple, tennis
        let (act, target) = (0, 1);
        let (likes, plays) = (0, 2);
        let (jack, mary, banana, apple, tennis) = (0, 1, 2, 3, 4);
        g.add_vertex(&[
            (act, likes, banana),
            (act, likes, apple),
            (act, likes, mary),
            (act, plays, tennis),
        ])
        .unwrap();
        g.add_vertex(&[(target, likes, jack), (target, likes, mary)]).unwrap();
        g.add_vertex(&[(act, likes, apple), (target, likes, jack)]).unwrap();
        g.add_vertex(&[(target, plays, jack), (target, plays, mary)]).unwrap();
        g.add_vertex(&[(target, likes, jack)]).unwrap();
        g
    }

    #[test]
    fn students_who_like_apples() {
        let g = student_graph(3);
        assert_eq!(g.has_edge((0, 0, 3)).unwrap(), vec![0, 2]);
        assert!(g.has_edge((1, 1, 2)).unwrap().is_empty());
    }

    #[test]
    fn kg_validates_vertices() {
        let mut g = student_graph(4);
        assert!(matches!(g.add_vertex(&[(0, 0, 0); 5]), Err(Error::Capacity(4))));
        assert!(matches!(
            g.add_vertex(&[(0, 0, 0), (0, 0, 1), (1, 0, 0), (1, 0, 1)]),
            Err(Error::Independence(_))
        ));
        assert!(matches!(g.add_vertex(&[(2, 0, 0)]), Err(Error::OutsideSpace(_))));
        assert_eq!(g.node_count(), 5);
    }

    // strict targets: these tests check exact answers, not error rates
    fn database(seed: u64, thr: Option<f64>) -> Database {
        let decl = DbDecl::new(("keys", 3), ("vals", 6), 3)
            .unwrap()
            .with_matches(2, 2, Targets::symmetric(0.9999))
            .unwrap()
            .with_analogy(Targets::symmetric(0.9999));
        let mut params = decl.plan(&nominal(), 1_000_000).unwrap();
        if let Some(t) = thr {
            params.settings.iter_mut().for_each(|s| s.thr = t);
        }
        let sp = space(&decl.codebooks(), params.dim, seed);
        let mut db = Database::new(decl, params, sp, RngStream::new(seed, 2)).unwrap();
        // name, capital, currency
        db.add_record(0).unwrap();
        db.add_record(1).unwrap();
        for (k, v) in [(0, 0), (1, 1), (2, 2)] {
            db.add_entry(0, k, v).unwrap();
        }
        for (k, v) in [(0, 3), (1, 4), (2, 5)] {
            db.add_entry(1, k, v).unwrap();
        }
        db
    }

    #[test]
    fn dollar_of_mexico() {
        let db = database(5, None);
        assert_eq!(db.analogy(0, 1, 2).unwrap(), Some(5));
        assert_eq!(db.analogy(1, 0, 4).unwrap(), Some(1));
        let loose = database(5, Some(0.75));
        assert!(matches!(loose.analogy(0, 1, 2), Err(Error::AmbiguousAnalogy(_))));
    }

    #[test]
    fn db_matches() {
        let mut db = database(6, None);
        db.add_record(2).unwrap();
        db.add_entry(2, 0, 0).unwrap();
        db.add_entry(2, 1, 1).unwrap();
        assert_eq!(db.matches(&[(0, 0), (1, 1)], 2).unwrap(), vec![0, 2]);
        assert!(db.matches(&[(0, 0), (1, 4)], 2).unwrap().is_empty());
        assert!(matches!(db.add_entry(2, 1, 3), Err(Error::DuplicateKey(_))));
        db.add_entry(2, 2, 2).unwrap();
        assert!(matches!(db.add_record(2), Err(Error::InvalidArgument(_))));
        assert!(matches!(db.add_entry(7, 0, 0), Err(Error::UnknownRecord(7))));
    }

    fn string_nfa(base: &str, steps: usize, seed: u64) -> Nfa {
        let s = letters(base);
        let decl = NfaDecl::new(s.len() + 1, 26, s.len()).unwrap();
        let t = decl.recall_targets(0.9999, steps);
        let decl = decl.with_execute(t);
        let params = decl.plan(&nominal(), 1_000_000).unwrap();
        let sp = space(&decl.emit_spec().codebooks, params.dim, seed);
        let mut nfa = Nfa::new(decl, params, sp, RngStream::new(seed, 3)).unwrap();
        nfa.set_transitions(&string_transitions(&s)).unwrap();
        nfa.start_states(&(0..=s.len()).collect::<Vec<_>>()).unwrap();
        nfa
    }

    #[test]
    fn nfa_finds_every_occurrence() {
        let mut nfa = string_nfa("PINAPI", 2, 11);
        assert_eq!(nfa.execute(letters("P")[0]).unwrap(), &[1, 5]);
        assert_eq!(nfa.execute(letters("I")[0]).unwrap(), &[2, 6]);
        assert_eq!(occurrences(&letters("PINAPI"), &letters("PI")), vec![2, 6]);
    }

    #[test]
    fn nfa_dead_symbol() {
        let mut nfa = string_nfa("PINAPI", 2, 12);
        assert!(nfa.execute(letters("Z")[0]).unwrap().is_empty());
        assert!(nfa.execute(letters("P")[0]).unwrap().is_empty());
        assert!(nfa.execute(26).is_err());
    }

    #[test]
    fn nfa_state_sets_shrink() {
        let mut rng = RngStream::new(77, 0);
        use rand::Rng;
        for trial in 0..40 {
            let base: String = (0..8).map(|_| (b'A' + rng.random_range(0..26u8)) as char).collect();
            let q = letters(&base[2..6]);
            let mut nfa = string_nfa(&base, q.len(), 1000 + trial);
            let mut last = nfa.current().len();
            for &c in &q {
                let now = nfa.execute(c).unwrap().len();
                assert!(now <= last, "{base}: {now} > {last}");
                last = now;
            }
            assert_eq!(nfa.current(), occurrences(&letters(&base), &q).as_slice(), "{base}");
        }
    }

    #[test]
    fn nfa_rejects_bad_setup() {
        let decl = NfaDecl::new(3, 2, 2).unwrap().with_execute(Targets::symmetric(0.99));
        let params = decl.plan(&nominal(), 1_000_000).unwrap();
        let sp = space(&decl.emit_spec().codebooks, params.dim, 1);
        let mut nfa = Nfa::new(decl, params, sp, RngStream::new(1, 1)).unwrap();
        assert!(matches!(nfa.set_transitions(&[(0, 0, 1); 3]), Err(Error::Capacity(2))));
        assert!(matches!(
            nfa.set_transitions(&[(0, 0, 1), (0, 0, 1)]),
            Err(Error::Independence(_))
        ));
        assert!(matches!(nfa.start_states(&[0, 0]), Err(Error::Independence(_))));
        assert!(matches!(nfa.start_states(&[3]), Err(Error::OutsideSpace(_))));
    }

    #[test]
    fn item_memory_round_trip() {
        let g = student_graph(8);
        let mem = g.item_memory().unwrap();
        let dir = tempfile::tempdir().unwrap();
        mem.save(dir.path()).unwrap();
        let back = ItemMemory::load(dir.path()).unwrap();
        assert_eq!(back, mem);
        assert_eq!(
            back.manifest.entries.iter().map(|e| e.size).collect::<Vec<_>>(),
            [4, 2, 2, 2, 1]
        );
        assert_eq!(back.manifest.params.settings.len(), 4);
    }
}
