//! Monte-Carlo validation: generated benchmark programs, item-memory bit-flip
//! injection, balanced accuracy, and the grid-search threshold baseline.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dslib::{
    occurrences, string_transitions, Database, DbDecl, Edge, ItemSpace, KgDecl, KnowledgeGraph, Nfa, NfaDecl,
    ParamTable, QueryNoise, SetDecl, SetDs, Targets,
};
use crate::error::{Error, Result};
use crate::hdvec::{flip_bits, Hypervector, RngStream};
use crate::indcheck::{CodeId, IndependentSet};
use crate::optimizer::DEFAULT_MAX_N;
use crate::speclang::{AccuracySpec, Expr, HardwareModel};

/// Copy of `v` with each bit flipped with probability `p`.
pub fn inject_bitflips(v: &Hypervector, p: f64, rng: &mut RngStream) -> Result<Hypervector> {
    let mut out = v.clone();
    flip_bits(&mut out, p, rng)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkKind {
    Set,
    DbMatch,
    DbAnalogy,
    Graph,
    Nfa,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 5] = [
        BenchmarkKind::Set,
        BenchmarkKind::DbMatch,
        BenchmarkKind::DbAnalogy,
        BenchmarkKind::Graph,
        BenchmarkKind::Nfa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Set => "set",
            BenchmarkKind::DbMatch => "db-match",
            BenchmarkKind::DbAnalogy => "db-analogy",
            BenchmarkKind::Graph => "graph",
            BenchmarkKind::Nfa => "nfa",
        }
    }

    /// Name of the knob swept across instances.
    pub fn knob(self) -> &'static str {
        match self {
            BenchmarkKind::Set => "set-size",
            BenchmarkKind::DbMatch => "query-size",
            BenchmarkKind::DbAnalogy => "records",
            BenchmarkKind::Graph => "max-degree",
            BenchmarkKind::Nfa => "query-len",
        }
    }

    fn id(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchmarkKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown benchmark `{s}`")))
    }
}

/// Generator sizes. `lo..=hi` is the swept knob of the benchmark (see
/// [`BenchmarkKind::knob`]); the rest are fixed per benchmark.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Knobs {
    pub lo: usize,
    pub hi: usize,
    /// Set codebook size per stored element.
    pub codebook_factor: usize,
    /// Key-value pairs per db-match record.
    pub pairs: usize,
    /// Keys per db-analogy record.
    pub fields: usize,
    pub vertices: usize,
    pub concepts: usize,
    pub relations: usize,
    pub interactions: usize,
    pub base_len: usize,
    pub symbols: usize,
}

impl Knobs {
    fn base(lo: usize, hi: usize) -> Self {
        Knobs {
            lo,
            hi,
            codebook_factor: 2,
            pairs: 20,
            fields: 15,
            vertices: 20,
            concepts: 100,
            relations: 5,
            interactions: 2,
            base_len: 8,
            symbols: 26,
        }
    }

    /// Desk-scale sizes for accuracy experiments.
    pub fn desk(kind: BenchmarkKind) -> Self {
        match kind {
            BenchmarkKind::Set => Knobs::base(20, 200),
            BenchmarkKind::DbMatch => Knobs::base(1, 10),
            BenchmarkKind::DbAnalogy => Knobs::base(2, 20),
            BenchmarkKind::Graph => Knobs::base(1, 38),
            BenchmarkKind::Nfa => Knobs::base(1, 8),
        }
    }

    /// Sizes for the fixed 10,000-bit comparison against threshold tuning.
    pub fn compare(kind: BenchmarkKind) -> Self {
        match kind {
            BenchmarkKind::Set => Knobs::base(500, 500),
            BenchmarkKind::DbMatch => Knobs {
                pairs: 100,
                ..Knobs::base(1, 19)
            },
            BenchmarkKind::DbAnalogy => Knobs {
                fields: 20,
                ..Knobs::base(10, 20)
            },
            BenchmarkKind::Graph => Knobs {
                vertices: 10,
                concepts: 500,
                ..Knobs::base(100, 400)
            },
            BenchmarkKind::Nfa => Knobs {
                base_len: 20,
                ..Knobs::base(2, 10)
            },
        }
    }

    pub fn validate(&self, kind: BenchmarkKind) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidArgument(format!("{kind}: {why}")));
        if self.lo == 0 || self.lo > self.hi {
            return bad("knob range must satisfy 1 <= lo <= hi");
        }
        match kind {
            BenchmarkKind::Set if self.codebook_factor < 2 => bad("codebook factor must be at least 2"),
            BenchmarkKind::DbMatch if self.hi > self.pairs => bad("query size exceeds record size"),
            BenchmarkKind::DbAnalogy if self.lo < 2 => bad("analogies need at least 2 records"),
            BenchmarkKind::DbAnalogy if self.fields < 2 => bad("records need at least 2 keys"),
            BenchmarkKind::Graph if self.vertices == 0 || self.relations == 0 || self.interactions == 0 => {
                bad("graph codebooks must be non-empty")
            }
            BenchmarkKind::Graph if self.hi > self.concepts => bad("max degree exceeds concept count"),
            BenchmarkKind::Nfa if self.hi > self.base_len => bad("query longer than the base string"),
            BenchmarkKind::Nfa if self.symbols < 2 => bad("need at least 2 symbols"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub benchmark: BenchmarkKind,
    pub knobs: Knobs,
    /// Instances spread evenly over the knob range.
    pub instances: usize,
    /// Trials per instance; each draws fresh codebooks, contents and errors.
    pub trials: usize,
    pub seed: u64,
    /// Bit-flip rate injected into item memory.
    pub inject_p: f64,
    /// Bit-flip rate applied to every query vector.
    #[serde(default)]
    pub query_p: f64,
    /// End-to-end target accuracy of every query.
    pub acc: f64,
    pub max_n: usize,
}

impl TrialConfig {
    pub fn desk(benchmark: BenchmarkKind) -> Self {
        TrialConfig {
            benchmark,
            knobs: Knobs::desk(benchmark),
            instances: 100,
            trials: 100,
            seed: 0,
            inject_p: 0.0,
            query_p: 0.0,
            acc: 0.99,
            max_n: DEFAULT_MAX_N,
        }
    }

    fn validate(&self) -> Result<()> {
        self.knobs.validate(self.benchmark)?;
        if self.instances == 0 || self.trials == 0 {
            return Err(Error::InvalidArgument("instances and trials must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.inject_p) {
            return Err(Error::InvalidArgument(format!(
                "inject rate {} not in [0, 0.5)",
                self.inject_p
            )));
        }
        if !(0.0..0.5).contains(&self.query_p) {
            return Err(Error::InvalidArgument(format!(
                "query flip rate {} not in [0, 0.5)",
                self.query_p
            )));
        }
        if !(0.5..1.0).contains(&self.acc) {
            return Err(Error::InvalidArgument(format!(
                "target accuracy {} not in [0.5, 1)",
                self.acc
            )));
        }
        Ok(())
    }

    /// Knob value of each instance.
    pub fn instance_values(&self) -> Vec<usize> {
        let (lo, span) = (self.knobs.lo, self.knobs.hi - self.knobs.lo + 1);
        (0..self.instances).map(|i| lo + i * span / self.instances).collect()
    }
}

/// Classification counts; merging is addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    #[serde(rename = "P")]
    pub p: u64,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "TP")]
    pub tp: u64,
    #[serde(rename = "TN")]
    pub tn: u64,
}

impl Counts {
    pub fn record(&mut self, truth: bool, predicted: bool) {
        if truth {
            self.p += 1;
            self.tp += u64::from(predicted);
        } else {
            self.n += 1;
            self.tn += u64::from(!predicted);
        }
    }

    pub fn merge(self, o: Counts) -> Counts {
        Counts {
            p: self.p + o.p,
            n: self.n + o.n,
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
        }
    }

    /// Mean of the true-positive and true-negative rates; the available rate
    /// alone when one class is empty, 0 when both are.
    pub fn accuracy(&self) -> f64 {
        match (self.p, self.n) {
            (0, 0) => 0.0,
            (0, n) => self.tn as f64 / n as f64,
            (p, 0) => self.tp as f64 / p as f64,
            (p, n) => 0.5 * (self.tp as f64 / p as f64 + self.tn as f64 / n as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub value: usize,
    pub instances: usize,
    /// Largest query dimension of the instance.
    pub n: usize,
    /// Threshold of the query with that dimension.
    pub thr: f64,
    pub counts: Counts,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub benchmark: BenchmarkKind,
    pub knobs: Knobs,
    pub instances: usize,
    pub trials: usize,
    pub seed: u64,
    pub inject_p: f64,
    #[serde(default)]
    pub query_p: f64,
    pub counts: Counts,
    pub accuracy: f64,
    pub rows: Vec<SizeRow>,
}

impl BenchmarkResult {
    /// Dimension and threshold of the row with the largest dimension.
    pub fn widest(&self) -> Option<&SizeRow> {
        self.rows.iter().max_by_key(|r| r.n)
    }
}

/// How query parameters are chosen.
#[derive(Debug, Clone, Copy)]
pub enum Planner<'a> {
    /// Minimal dimension and model thresholds.
    Optimized { hw: &'a HardwareModel, max_n: usize },
    /// Model thresholds at a fixed dimension.
    AtDimension { hw: &'a HardwareModel, n: usize },
    /// One dimension and threshold for every query.
    Fixed { n: usize, thr: f64 },
}

/// Declaration of one benchmark instance.
#[derive(Debug, Clone)]
pub enum BenchDecl {
    Set(SetDecl),
    Db(DbDecl),
    Graph(KgDecl),
    Nfa(NfaDecl),
}

const SET_CODES: &str = "codes";

pub fn benchmark_decl(kind: BenchmarkKind, k: &Knobs, value: usize, acc: f64) -> Result<BenchDecl> {
    let t = Targets::symmetric(acc);
    Ok(match kind {
        BenchmarkKind::Set => {
            let codebooks = [(SET_CODES.to_string(), value * k.codebook_factor)]
                .into_iter()
                .collect();
            BenchDecl::Set(SetDecl::new(codebooks, Expr::code(SET_CODES), value)?.with_in_set(t))
        }
        BenchmarkKind::DbMatch => BenchDecl::Db(
            DbDecl::new(("keys", k.pairs + 1), ("vals", 2 * k.pairs), k.pairs)?.with_matches(value, value, t)?,
        ),
        BenchmarkKind::DbAnalogy => {
            BenchDecl::Db(DbDecl::new(("keys", k.fields), ("vals", k.fields * value), k.fields)?.with_analogy(t))
        }
        BenchmarkKind::Graph => {
            BenchDecl::Graph(KgDecl::new(k.interactions, k.relations, k.concepts, value)?.with_has_edge(t))
        }
        BenchmarkKind::Nfa => {
            let d = NfaDecl::new(k.base_len + 1, k.symbols, k.base_len)?;
            let t = d.recall_targets(acc, value);
            BenchDecl::Nfa(d.with_execute(t))
        }
    })
}

impl BenchDecl {
    pub fn emit_spec(&self) -> AccuracySpec {
        match self {
            BenchDecl::Set(d) => d.emit_spec(),
            BenchDecl::Db(d) => d.emit_spec(),
            BenchDecl::Graph(d) => d.emit_spec(),
            BenchDecl::Nfa(d) => d.emit_spec(),
        }
    }

    fn query_count(&self) -> usize {
        match self {
            BenchDecl::Graph(d) => d.max_degree,
            other => other.emit_spec().requirements.len(),
        }
    }

    pub fn plan(&self, planner: Planner<'_>) -> Result<ParamTable> {
        match planner {
            Planner::Fixed { n, thr } => Ok(ParamTable::uniform(n, thr, self.query_count())),
            Planner::Optimized { hw, max_n } => match self {
                BenchDecl::Set(d) => d.plan(hw, max_n),
                BenchDecl::Db(d) => d.plan(hw, max_n),
                BenchDecl::Graph(d) => d.plan(hw, max_n),
                BenchDecl::Nfa(d) => d.plan(hw, max_n),
            },
            Planner::AtDimension { hw, n } => match self {
                BenchDecl::Set(d) => d.plan_at(hw, n),
                BenchDecl::Db(d) => d.plan_at(hw, n),
                BenchDecl::Graph(d) => d.plan_at(hw, n),
                BenchDecl::Nfa(d) => d.plan_at(hw, n),
            },
        }
    }
}

fn fresh_space(spec: &AccuracySpec, dim: usize, rng: &RngStream) -> Result<Arc<ItemSpace>> {
    Ok(Arc::new(ItemSpace::generate(&spec.codebooks, dim, rng)?))
}

/// One trial of one instance: fresh codebooks and contents, item memory
/// corrupted once, then balanced positive and negative queries.
fn run_trial(
    cfg: &TrialConfig,
    value: usize,
    decl: &BenchDecl,
    params: &ParamTable,
    rng: &RngStream,
) -> Result<Counts> {
    let k = &cfg.knobs;
    let mut draw = rng.child(0);
    let mut flips = rng.child(1);
    let tiebreak = rng.child(2);
    let space = fresh_space(&decl.emit_spec(), params.dim, &rng.child(3))?;
    let noise = (cfg.query_p > 0.0)
        .then(|| QueryNoise::new(cfg.query_p, rng.child(4)))
        .transpose()?;
    let mut c = Counts::default();
    match (cfg.benchmark, decl) {
        (BenchmarkKind::Set, BenchDecl::Set(d)) => {
            let pool = value * k.codebook_factor;
            let mut s = SetDs::new(d.clone(), params.clone(), space, tiebreak)?;
            if let Some(q) = &noise {
                s.set_query_noise(q.clone());
            }
            let chosen = sample(&mut draw, pool, pool).into_vec();
            let code = |i: usize| vec![CodeId::new(SET_CODES, i)];
            for &i in &chosen[..value] {
                s.add(code(i))?;
            }
            if let Some(v) = s.item_memory_mut()? {
                flip_bits(v, cfg.inject_p, &mut flips)?;
            }
            let member = chosen[draw.random_range(0..value)];
            let other = chosen[draw.random_range(value..pool)];
            c.record(true, s.in_set(&code(member))?);
            c.record(false, s.in_set(&code(other))?);
        }
        (BenchmarkKind::DbMatch, BenchDecl::Db(d)) => {
            let r = k.pairs;
            let mut db = Database::new(d.clone(), params.clone(), space, tiebreak)?;
            if let Some(q) = &noise {
                db.set_query_noise(q.clone());
            }
            let vals: Vec<usize> = (0..=r).map(|_| draw.random_range(0..2 * r)).collect();
            db.add_record(0)?;
            db.add_record(1)?;
            for key in 0..r {
                db.add_entry(0, key, vals[key])?;
                db.add_entry(1, key + 1, vals[key + 1])?;
            }
            for v in db.item_memory_mut()? {
                flip_bits(v, cfg.inject_p, &mut flips)?;
            }
            // record 0 holds all `value` pairs, record 1 one fewer
            let query: Vec<(usize, usize)> = (0..value).map(|key| (key, vals[key])).collect();
            for (id, truth) in [(0, true), (1, false)] {
                let hit = db.match_probe(id, &query, value)?.is_some_and(|p| p.hit());
                c.record(truth, hit);
            }
        }
        (BenchmarkKind::DbAnalogy, BenchDecl::Db(d)) => {
            let f = k.fields;
            let mut db = Database::new(d.clone(), params.clone(), space, tiebreak)?;
            if let Some(q) = &noise {
                db.set_query_noise(q.clone());
            }
            for rec in 0..value {
                db.add_record(rec)?;
                for key in 0..f {
                    db.add_entry(rec, key, rec * f + key)?;
                }
            }
            for v in db.item_memory_mut()? {
                flip_bits(v, cfg.inject_p, &mut flips)?;
            }
            let pair = sample(&mut draw, value, 2).into_vec();
            let (from, to) = (pair[0], pair[1]);
            let key = draw.random_range(0..f);
            let (val, answer) = (from * f + key, to * f + key);
            let wrong = loop {
                let w = draw.random_range(0..value * f);
                if w != val && w != answer {
                    break w;
                }
            };
            for (cand, truth) in [(answer, true), (wrong, false)] {
                let hit = db.analogy_probe(from, to, val, cand)?.is_some_and(|p| p.hit());
                c.record(truth, hit);
            }
        }
        (BenchmarkKind::Graph, BenchDecl::Graph(d)) => {
            let mut g = KnowledgeGraph::new(d.clone(), params.clone(), space, tiebreak)?;
            if let Some(q) = &noise {
                g.set_query_noise(q.clone());
            }
            for _ in 0..k.vertices {
                let degree = draw.random_range(0..=value);
                let edges = independent_edges(&g, k, degree, &mut draw)?;
                g.add_vertex(&edges)?;
            }
            for v in g.item_memory_mut()? {
                flip_bits(v, cfg.inject_p, &mut flips)?;
            }
            let holders: Vec<usize> = (0..g.node_count())
                .filter(|&i| !g.edges(i).unwrap().is_empty())
                .collect();
            if holders.is_empty() {
                return Ok(c);
            }
            let node = holders[draw.random_range(0..holders.len())];
            let es = g.edges(node)?;
            let e = es[draw.random_range(0..es.len())];
            for id in 0..g.node_count() {
                let truth = g.edges(id)?.contains(&e);
                let hit = g.edge_probe(id, e)?.is_some_and(|p| p.hit());
                c.record(truth, hit);
            }
        }
        (BenchmarkKind::Nfa, BenchDecl::Nfa(d)) => {
            let base: Vec<usize> = (0..k.base_len).map(|_| draw.random_range(0..k.symbols)).collect();
            let mut nfa = Nfa::new(d.clone(), params.clone(), space, tiebreak)?;
            if let Some(q) = &noise {
                nfa.set_query_noise(q.clone());
            }
            nfa.set_transitions(&string_transitions(&base))?;
            if let Some(v) = nfa.item_memory_mut() {
                flip_bits(v, cfg.inject_p, &mut flips)?;
            }
            let start = draw.random_range(0..=k.base_len - value);
            let pos = base[start..start + value].to_vec();
            let neg = loop {
                let q: Vec<usize> = (0..value).map(|_| draw.random_range(0..k.symbols)).collect();
                if occurrences(&base, &q).is_empty() {
                    break q;
                }
            };
            let all: Vec<usize> = (0..=k.base_len).collect();
            for (q, truth) in [(pos, true), (neg, false)] {
                nfa.start_states(&all)?;
                for &sym in &q {
                    nfa.execute(sym)?;
                }
                let expected = occurrences(&base, &q).len();
                let got = nfa.current().len();
                // a positive counts when every occurrence is recovered exactly
                let predicted = if truth { got == expected } else { got > 0 };
                c.record(truth, predicted);
            }
        }
        _ => unreachable!("declaration built for this benchmark"),
    }
    Ok(c)
}

/// `degree` random edges that keep the node's edge set independent; fewer
/// when the edge space runs out of independent candidates.
fn independent_edges(g: &KnowledgeGraph, k: &Knobs, degree: usize, rng: &mut RngStream) -> Result<Vec<Edge>> {
    let mut basis = IndependentSet::new();
    let mut edges = Vec::with_capacity(degree);
    let mut misses = 0;
    while edges.len() < degree && misses < 64 * (degree + 1) {
        let e = (
            rng.random_range(0..k.interactions),
            rng.random_range(0..k.relations),
            rng.random_range(0..k.concepts),
        );
        if basis.try_insert(&g.edge_tuple(e))? {
            edges.push(e);
        } else {
            misses += 1;
        }
    }
    Ok(edges)
}

fn plans(cfg: &TrialConfig, planner: Planner<'_>) -> Result<BTreeMap<usize, (BenchDecl, ParamTable)>> {
    let mut values = cfg.instance_values();
    values.dedup();
    values
        .into_par_iter()
        .map(|v| {
            let d = benchmark_decl(cfg.benchmark, &cfg.knobs, v, cfg.acc)?;
            let p = d.plan(planner)?;
            Ok((v, (d, p)))
        })
        .collect()
}

/// Runs every (instance, trial) pair on streams derived from `(seed, stream)`.
fn run_on_stream(
    cfg: &TrialConfig,
    planned: &BTreeMap<usize, (BenchDecl, ParamTable)>,
    stream: u64,
) -> Result<BenchmarkResult> {
    let values = cfg.instance_values();
    let root = RngStream::new(cfg.seed, stream);
    let per_instance = values
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let (decl, params) = &planned[v];
            let inst = root.child(i as u64);
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(cfg, *v, decl, params, &inst.child(t as u64)))
                .try_reduce(Counts::default, |a, b| Ok(a.merge(b)))
                .map(|c| (*v, c))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows: BTreeMap<usize, SizeRow> = BTreeMap::new();
    for (v, c) in per_instance {
        let params = &planned[&v].1;
        let widest = params
            .settings
            .iter()
            .enumerate()
            .max_by_key(|(i, s)| (s.n, *i))
            .map(|(_, s)| *s);
        let row = rows.entry(v).or_insert(SizeRow {
            value: v,
            instances: 0,
            n: widest.map_or(params.dim, |s| s.n),
            thr: widest.map_or(0.0, |s| s.thr),
            counts: Counts::default(),
            accuracy: 0.0,
        });
        row.instances += 1;
        row.counts = row.counts.merge(c);
    }
    let mut total = Counts::default();
    let rows: Vec<SizeRow> = rows
        .into_values()
        .map(|mut r| {
            r.accuracy = r.counts.accuracy();
            total = total.merge(r.counts);
            r
        })
        .collect();
    Ok(BenchmarkResult {
        benchmark: cfg.benchmark,
        knobs: cfg.knobs.clone(),
        instances: cfg.instances,
        trials: cfg.trials,
        seed: cfg.seed,
        inject_p: cfg.inject_p,
        query_p: cfg.query_p,
        counts: total,
        accuracy: total.accuracy(),
        rows,
    })
}

const HELD_OUT: u64 = 1 << 32;
const TUNING: u64 = 2 << 32;

/// Benchmark run with parameters from `planner`.
pub fn run_with(cfg: &TrialConfig, planner: Planner<'_>) -> Result<BenchmarkResult> {
    cfg.validate()?;
    let planned = plans(cfg, planner)?;
    run_on_stream(cfg, &planned, cfg.benchmark.id())
}

/// Benchmark run with statically optimized parameters for `hw`.
pub fn run_benchmark(cfg: &TrialConfig, hw: &HardwareModel) -> Result<BenchmarkResult> {
    run_with(cfg, Planner::Optimized { hw, max_n: cfg.max_n })
}

/// Same instances and seeds as [`tune_threshold_baseline`]'s held-out run.
pub fn run_held_out(cfg: &TrialConfig, planner: Planner<'_>) -> Result<BenchmarkResult> {
    cfg.validate()?;
    let planned = plans(cfg, planner)?;
    run_on_stream(cfg, &planned, cfg.benchmark.id() | HELD_OUT)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub thr: f64,
    /// Accuracy on the tuning trials at `thr`.
    pub tuned_accuracy: f64,
    /// Accuracy at `thr` on the held-out stream.
    pub accuracy: f64,
    pub held_out: BenchmarkResult,
}

/// Grid search over one shared threshold at a fixed dimension. Each of the
/// `grid` thresholds in `[0, 0.5]` is scored on `tune_trials` fresh trials;
/// the best one (middle of the best-scoring run on ties) is then scored on
/// `cfg.trials` held-out trials.
pub fn tune_threshold_baseline(cfg: &TrialConfig, n_fixed: usize, grid: usize, tune_trials: usize) -> Result<Baseline> {
    cfg.validate()?;
    if grid < 2 || tune_trials == 0 || n_fixed == 0 {
        return Err(Error::InvalidArgument(
            "grid must be >= 2, trials and dimension positive".into(),
        ));
    }
    let thr_at = |j: usize| 0.5 * j as f64 / (grid - 1) as f64;
    let tune_cfg = TrialConfig {
        trials: tune_trials,
        ..cfg.clone()
    };
    let scores = (0..grid)
        .into_par_iter()
        .map(|j| {
            let planned = plans(
                &tune_cfg,
                Planner::Fixed {
                    n: n_fixed,
                    thr: thr_at(j),
                },
            )?;
            Ok(run_on_stream(&tune_cfg, &planned, cfg.benchmark.id() | TUNING | (j as u64) << 8)?.accuracy)
        })
        .collect::<Result<Vec<f64>>>()?;
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // longest run of best scores
    let (mut run_start, mut best_run) = (None::<usize>, (0usize, 0usize));
    for (j, &s) in scores.iter().enumerate() {
        if s == best {
            let st = *run_start.get_or_insert(j);
            if j + 1 - st > best_run.1 - best_run.0 {
                best_run = (st, j + 1);
            }
        } else {
            run_start = None;
        }
    }
    let pick = (best_run.0 + best_run.1 - 1) / 2;
    let thr = thr_at(pick);
    let held_out = run_held_out(cfg, Planner::Fixed { n: n_fixed, thr })?;
    Ok(Baseline {
        thr,
        tuned_accuracy: best,
        accuracy: held_out.accuracy,
        held_out,
    })
}

/// One knob value compared at a fixed dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub benchmark: BenchmarkKind,
    pub value: usize,
    pub n: usize,
    pub heim_accuracy: f64,
    pub heim_ms: f64,
    pub baseline_thr: f64,
    pub baseline_accuracy: f64,
    pub baseline_ms: f64,
}

impl ComparisonRow {
    pub fn time_ratio(&self) -> f64 {
        self.baseline_ms / self.heim_ms.max(1e-6)
    }
}

/// Model thresholds versus grid-tuned thresholds at dimension `n`, per knob
/// value, on identical held-out instances.
pub fn compare(
    cfg: &TrialConfig,
    hw: &HardwareModel,
    n: usize,
    grid: usize,
    tune_trials: usize,
) -> Result<Vec<ComparisonRow>> {
    cfg.validate()?;
    let mut values = cfg.instance_values();
    values.dedup();
    values
        .into_iter()
        .map(|v| {
            let one = TrialConfig {
                knobs: Knobs {
                    lo: v,
                    hi: v,
                    ..cfg.knobs.clone()
                },
                instances: 1,
                ..cfg.clone()
            };
            let t0 = Instant::now();
            let planned = plans(&one, Planner::AtDimension { hw, n })?;
            let heim_ms = t0.elapsed().as_secs_f64() * 1e3;
            let heim = run_on_stream(&one, &planned, one.benchmark.id() | HELD_OUT)?;
            let t1 = Instant::now();
            let bl = tune_threshold_baseline(&one, n, grid, tune_trials)?;
            let baseline_ms = t1.elapsed().as_secs_f64() * 1e3;
            Ok(ComparisonRow {
                benchmark: cfg.benchmark,
                value: v,
                n,
                heim_accuracy: heim.accuracy,
                heim_ms,
                baseline_thr: bl.thr,
                baseline_accuracy: bl.accuracy,
                baseline_ms,
            })
        })
        .collect()
}

/// A result with its optional wall time, which is kept apart so results stay
/// reproducible. Reports leave the time empty when it is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub result: BenchmarkResult,
    pub wall_ms: Option<f64>,
}

pub const CSV_COLUMNS: [&str; 14] = [
    "benchmark",
    "knob",
    "lo",
    "hi",
    "inject_p",
    "query_p",
    "n",
    "thr",
    "P",
    "N",
    "TP",
    "TN",
    "accuracy",
    "wall_ms",
];

fn csv_row(
    r: &BenchmarkResult,
    lo: usize,
    hi: usize,
    n: usize,
    thr: f64,
    c: Counts,
    wall_ms: Option<f64>,
) -> Vec<String> {
    vec![
        r.benchmark.name().into(),
        r.benchmark.knob().into(),
        lo.to_string(),
        hi.to_string(),
        r.inject_p.to_string(),
        r.query_p.to_string(),
        n.to_string(),
        format!("{thr:.6}"),
        c.p.to_string(),
        c.n.to_string(),
        c.tp.to_string(),
        c.tn.to_string(),
        format!("{:.6}", c.accuracy()),
        wall_ms.map_or(String::new(), |ms| format!("{ms:.3}")),
    ]
}

fn write_csv(rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// One row per result; `n` and `thr` are those of its widest instance and
/// accuracy is recomputed from the counts.
pub fn report_csv(records: &[RunRecord]) -> Result<String> {
    write_csv(records.iter().map(|rec| {
        let r = &rec.result;
        let (n, thr) = r.widest().map_or((0, 0.0), |w| (w.n, w.thr));
        csv_row(r, r.knobs.lo, r.knobs.hi, n, thr, r.counts, rec.wall_ms)
    }))
}

/// One row per knob value of every result, without wall time.
pub fn breakdown_csv(records: &[RunRecord]) -> Result<String> {
    write_csv(records.iter().flat_map(|rec| {
        let r = &rec.result;
        r.rows
            .iter()
            .map(move |row| csv_row(r, row.value, row.value, row.n, row.thr, row.counts, None))
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub results: Vec<RunRecord>,
    pub counts: Counts,
    pub accuracy: f64,
}

pub fn report_json(records: &[RunRecord]) -> Summary {
    let counts = records.iter().fold(Counts::default(), |a, r| a.merge(r.result.counts));
    Summary {
        results: records.to_vec(),
        counts,
        accuracy: counts.accuracy(),
    }
}
