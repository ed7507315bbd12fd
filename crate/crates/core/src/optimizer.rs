//! Threshold placement and dimension minimization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    classify_qds, derive_p, eliminate_permutes, hw_err, mean_distances, to_normal, DistanceDistribution,
    IndependenceConstraint, QdsClass,
};
use crate::error::{Error, Result};
use crate::speclang::{expand_vars, AccuracySpec, Expr, HardwareModel, Requirement};

pub const DEFAULT_MAX_N: usize = 1_000_000;

/// `P(X <= x)` for `X ~ N(mu, sigma)`; a step at `mu` when `sigma == 0`.
pub fn normal_cdf(x: f64, d: DistanceDistribution) -> f64 {
    if d.sigma == 0.0 {
        return if x < d.mu { 0.0 } else { 1.0 };
    }
    let z = (x - d.mu) / (d.sigma * std::f64::consts::SQRT_2);
    0.5 * libm::erfc(-z)
}

/// Smallest `x` with `normal_cdf(x, d) >= q`, found by bisection.
fn normal_quantile(q: f64, d: DistanceDistribution) -> f64 {
    if d.sigma == 0.0 {
        return d.mu;
    }
    if q <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if q >= 1.0 {
        return f64::INFINITY;
    }
    let std = DistanceDistribution { mu: 0.0, sigma: 1.0 };
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid, std) < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    d.mu + d.sigma * hi
}

/// Point strictly between the means where both densities are equal.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN means
pub fn intersect_distributions(s: DistanceDistribution, ns: DistanceDistribution) -> Result<f64> {
    if !(s.mu < ns.mu) {
        return Err(Error::NoIntersection);
    }
    match (s.sigma == 0.0, ns.sigma == 0.0) {
        (true, true) => return Ok(0.5 * (s.mu + ns.mu)),
        (true, false) => return Ok(s.mu),
        (false, true) => return Ok(ns.mu),
        _ => {}
    }
    let (v1, v2) = (s.sigma * s.sigma, ns.sigma * ns.sigma);
    let a = 1.0 / v1 - 1.0 / v2;
    let b = -2.0 * (s.mu / v1 - ns.mu / v2);
    let c = s.mu * s.mu / v1 - ns.mu * ns.mu / v2 + 2.0 * (s.sigma / ns.sigma).ln();
    let inside = |x: f64| x > s.mu && x < ns.mu;
    if a.abs() <= 1e-12 * (1.0 / v1).max(1.0 / v2) {
        let x = if c.abs() < f64::EPSILON && a == 0.0 {
            0.5 * (s.mu + ns.mu)
        } else {
            -c / b
        };
        return if inside(x) { Ok(x) } else { Err(Error::NoIntersection) };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(Error::NoIntersection);
    }
    // numerically stable pair of roots
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let roots = [q / a, c / q];
    roots
        .into_iter()
        .filter(|x| x.is_finite() && inside(*x))
        .min_by(|x, y| {
            let mid = 0.5 * (s.mu + ns.mu);
            (x - mid).abs().total_cmp(&(y - mid).abs())
        })
        .ok_or(Error::NoIntersection)
}

/// Outcome of placing a threshold between two distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub thr: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    /// `false` when no threshold meets both error bounds; `thr` is then the
    /// density intersection.
    pub feasible: bool,
}

impl Threshold {
    pub fn accuracy(&self) -> f64 {
        1.0 - (self.fp + self.fn_) / 2.0
    }
}

/// Clamps the density intersection into the window allowed by the
/// false-negative and false-positive bounds.
pub fn optimize_threshold(
    s: DistanceDistribution,
    ns: DistanceDistribution,
    req_fp: f64,
    req_fn: f64,
) -> Result<Threshold> {
    let x = intersect_distributions(s, ns)?;
    let thr_l = normal_quantile(1.0 - req_fn, s);
    let thr_h = if ns.sigma == 0.0 {
        ns.mu
    } else {
        normal_quantile(req_fp, ns)
    };
    let feasible = thr_l <= thr_h;
    let thr = if feasible { x.clamp(thr_l, thr_h) } else { x };
    Ok(Threshold {
        thr,
        fp: normal_cdf(thr, ns),
        fn_: 1.0 - normal_cdf(thr, s),
        feasible,
    })
}

/// `get_accuracy` outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub success: bool,
    pub constraint: IndependenceConstraint,
    pub threshold: Threshold,
    pub in_set: DistanceDistribution,
    pub not_in_set: DistanceDistribution,
}

/// A requirement with its classification and noisy means fixed; only the
/// dimension varies.
#[derive(Debug, Clone)]
pub struct RequirementModel {
    pub class: QdsClass,
    pub constraint: IndependenceConstraint,
    pub mean_in: f64,
    pub mean_out: f64,
    pub acc: f64,
    pub fp: f64,
    pub fn_: f64,
}

impl RequirementModel {
    pub fn new(p: f64, query: &Expr, ds: &Expr, k: usize, acc: f64, fp: f64, fn_: f64) -> Result<Self> {
        let (class, constraint) = classify_qds(&eliminate_permutes(query), &eliminate_permutes(ds), k)?;
        let m = mean_distances(&class)?;
        Ok(RequirementModel {
            class,
            constraint,
            mean_in: hw_err(p, m.mean_in),
            mean_out: hw_err(p, m.mean_out),
            acc,
            fp,
            fn_,
        })
    }

    pub fn from_requirement(p: f64, r: &Requirement) -> Result<Self> {
        Self::new(p, &r.query, &r.ds, r.k, r.acc, r.fp, r.fn_)
    }

    pub fn evaluate(&self, n: usize) -> Result<AccuracyReport> {
        if n == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let s = to_normal(self.mean_in, n);
        let ns = to_normal(self.mean_out, n);
        let t = optimize_threshold(s, ns, self.fp, self.fn_)?;
        let success = t.feasible && t.fp <= self.fp && t.fn_ <= self.fn_ && t.accuracy() >= self.acc;
        Ok(AccuracyReport {
            success,
            constraint: self.constraint.clone(),
            threshold: t,
            in_set: s,
            not_in_set: ns,
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn get_accuracy(
    hw: &HardwareModel,
    query: &Expr,
    ds: &Expr,
    n: usize,
    k: usize,
    req_acc: f64,
    req_fp: f64,
    req_fn: f64,
) -> Result<AccuracyReport> {
    let p = derive_p(hw)?;
    RequirementModel::new(p, query, ds, k, req_acc, req_fp, req_fn)?.evaluate(n)
}

/// Smallest `v` in `[min, max]` with `pred(v)`, or `max + 1`. `pred` must be
/// monotone.
pub fn bin_search(min: usize, max: usize, mut pred: impl FnMut(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (min, max + 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryParams {
    pub requirement_id: usize,
    pub requirement: String,
    pub n: usize,
    pub threshold: f64,
    pub achieved_fp: f64,
    pub achieved_fn: f64,
    pub achieved_acc: f64,
    pub constraint: IndependenceConstraint,
    pub class: QdsClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub n_opt: usize,
    pub per_query: Vec<QueryParams>,
}

fn optimize_requirement(p: f64, id: usize, r: &Requirement, max_n: usize) -> Result<QueryParams> {
    let model = RequirementModel::from_requirement(p, r)?;
    let mut failure = None;
    let n = bin_search(1, max_n, |n| match model.evaluate(n) {
        Ok(rep) => rep.success,
        Err(e) => {
            failure.get_or_insert(e);
            false
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if n > max_n {
        return Err(Error::DimensionalConstraint(r.label()));
    }
    let rep = model.evaluate(n)?;
    let t = rep.threshold;
    Ok(QueryParams {
        requirement_id: id,
        requirement: r.label(),
        n,
        threshold: t.thr,
        achieved_fp: t.fp,
        achieved_fn: t.fn_,
        achieved_acc: t.accuracy(),
        constraint: rep.constraint,
        class: model.class,
    })
}

/// Per-requirement minimal dimension and threshold, and their maximum.
/// Variables are expanded here, so raw parsed specs are accepted.
pub fn optimize(hw: &HardwareModel, spec: &AccuracySpec, max_n: usize) -> Result<OptimizationResult> {
    let p = derive_p(hw)?;
    let spec = expand_vars(spec)?;
    let per_query = spec
        .requirements
        .par_iter()
        .enumerate()
        .map(|(id, r)| optimize_requirement(p, id, r, max_n))
        .collect::<Result<Vec<_>>>()?;
    let n_opt = per_query.iter().map(|q| q.n).max().unwrap_or(1);
    Ok(OptimizationResult { n_opt, per_query })
}

/// Threshold for each data-structure size `1..=bound` of a requirement whose
/// data structure is a bounded sum, evaluated at a fixed dimension. Index 0
/// holds size 1.
pub fn thresholds_by_size(hw: &HardwareModel, r: &Requirement, n: usize) -> Result<Vec<AccuracyReport>> {
    let p = derive_p(hw)?;
    let bound = match &r.ds {
        Expr::Sum { bound, .. } => *bound,
        other => return Err(Error::InvalidArgument(format!("`{other}` has no size bound to vary"))),
    };
    (1..=bound)
        .map(|size| {
            let ds = match &r.ds {
                Expr::Sum { terms, pos, .. } => Expr::Sum {
                    bound: size,
                    terms: terms.clone(),
                    pos: *pos,
                },
                _ => unreachable!(),
            };
            RequirementModel::new(p, &r.query, &ds, r.k, r.acc, r.fp, r.fn_)?.evaluate(n)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::mean_set_recall;
    use crate::speclang::{parse_hw_model, parse_spec};
    use proptest::prelude::*;

    const KG: &str = include_str!("../../../specs/knowledge_graph.heim");
    const HW2: &str = include_str!("../../../specs/rram_2bpc.hw");

    fn nd(mu: f64, sigma: f64) -> DistanceDistribution {
        DistanceDistribution { mu, sigma }
    }

    fn density(x: f64, d: DistanceDistribution) -> f64 {
        let z = (x - d.mu) / d.sigma;
        (-0.5 * z * z).exp() / (d.sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    #[test]
    fn cdf_values() {
        let d = nd(0.3, 0.02);
        assert!((normal_cdf(0.3, d) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(0.36, d) - 0.998_650_101_968_37).abs() < 1e-9);
        assert_eq!(normal_cdf(0.29, nd(0.3, 0.0)), 0.0);
        assert_eq!(normal_cdf(0.3, nd(0.3, 0.0)), 1.0);
        // tabulated standard normal values
        let std = nd(0.0, 1.0);
        for (x, v) in [
            (-1.96, 0.024_997_895_148_220_4),
            (1.0, 0.841_344_746_068_542_9),
            (-5.0, 2.866_515_718_791_939e-7),
        ] {
            assert!((normal_cdf(x, std) - v).abs() < 1e-12, "{x}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let d = nd(0.4, 0.03);
        for q in [1e-9, 0.003, 0.01, 0.5, 0.99, 0.997] {
            let x = normal_quantile(q, d);
            assert!((normal_cdf(x, d) - q).abs() < 1e-12 * q.max(1e-3) * 1e3, "{q}");
        }
    }

    #[test]
    fn intersection_examples() {
        assert!((intersect_distributions(nd(0.3, 0.02), nd(0.5, 0.02)).unwrap() - 0.4).abs() < 1e-12);
        let (s, ns) = (nd(0.25, 0.01), nd(0.5, 0.02));
        let x = intersect_distributions(s, ns).unwrap();
        assert!(x > 0.25 && x < 0.5);
        assert!((density(x, s) - density(x, ns)).abs() < 1e-10 * density(x, s).max(1.0));
        assert_eq!(intersect_distributions(nd(0.0, 0.0), nd(0.5, 0.01)).unwrap(), 0.0);
        assert!(intersect_distributions(nd(0.5, 0.01), nd(0.3, 0.01)).is_err());
    }

    #[test]
    fn threshold_examples() {
        let t = optimize_threshold(nd(0.3, 0.005), nd(0.5, 0.005), 0.01, 0.01).unwrap();
        assert!((t.thr - 0.4).abs() < 1e-12);
        assert!(t.fp + t.fn_ < 1e-20);
        let t = optimize_threshold(nd(0.45, 0.05), nd(0.5, 0.05), 1e-12, 1e-12).unwrap();
        assert!(!t.feasible);
    }

    #[test]
    fn knowledge_graph_degree_four_threshold() {
        // effective set size 5, n = 175, 2 bits-per-cell noise
        let p = 0.0215;
        let s = to_normal(hw_err(p, mean_set_recall(5).unwrap()), 175);
        let ns = to_normal(hw_err(p, 0.5), 175);
        let x = intersect_distributions(s, ns).unwrap();
        assert!((x - 0.4119).abs() < 0.005, "{x}");
    }

    #[test]
    fn get_accuracy_examples() {
        let spec = expand_vars(&parse_spec(KG).unwrap()).unwrap();
        let hw = parse_hw_model(HW2).unwrap();
        let r = &spec.requirements[0];
        let at = |n, acc, fp, fn_| get_accuracy(&hw, &r.query, &r.ds, n, r.k, acc, fp, fn_).unwrap();
        assert!(!at(10, r.acc, r.fp, r.fn_).success);
        assert!(at(175, 0.99, 0.01, 0.01).success);
        assert!(at(100_000, 0.5, 0.5, 0.5).success);
    }

    #[test]
    fn bin_search_examples() {
        assert_eq!(bin_search(0, 100, |n| n >= 7), 7);
        assert_eq!(bin_search(0, 100, |_| false), 101);
        assert_eq!(bin_search(3, 100, |_| true), 3);
    }

    #[test]
    fn optimize_empty_and_impossible() {
        let r = optimize(&HardwareModel::default(), &parse_spec("spec { }").unwrap(), 100).unwrap();
        assert_eq!(r.n_opt, 1);
        assert!(r.per_query.is_empty());
        let hard = parse_spec(
            "spec { codebook a(9); require-accuracy(a, sum(9, a), 1, 0.999999999, 0.000000001, 0.000000001); }",
        )
        .unwrap();
        let err = optimize(&HardwareModel::default(), &hard, 8).unwrap_err();
        assert!(matches!(err, Error::DimensionalConstraint(_)));
        assert!(err.to_string().contains("violation of dimensional constraints"));
    }

    #[test]
    fn optimize_knowledge_graph_relaxed_fn() {
        // with a 1% false-negative budget the degree-4 bound is met at 175
        let relaxed = KG.replace("0.003", "0.01");
        let r = optimize(
            &parse_hw_model(HW2).unwrap(),
            &parse_spec(&relaxed).unwrap(),
            DEFAULT_MAX_N,
        )
        .unwrap();
        assert_eq!(r.n_opt, 175);
        let q = &r.per_query[0];
        assert!(q.achieved_fp <= 0.01 && q.achieved_fn <= 0.01 && q.achieved_acc >= 0.99);
        assert_eq!(q.achieved_acc, 1.0 - (q.achieved_fp + q.achieved_fn) / 2.0);
    }

    #[test]
    fn per_size_thresholds() {
        let spec = expand_vars(&parse_spec(&KG.replace("0.003", "0.01")).unwrap()).unwrap();
        let hw = parse_hw_model(HW2).unwrap();
        let reps = thresholds_by_size(&hw, &spec.requirements[0], 175).unwrap();
        let thr: Vec<f64> = reps.iter().rev().map(|r| r.threshold.thr).collect();
        for (got, want) in thr.iter().zip([0.4119, 0.3794, 0.3794, 0.1744]) {
            assert!((got - want).abs() < 0.0005, "{thr:?}");
        }
    }

    fn set_spec(m: usize, acc: f64, fp: f64, fn_: f64) -> AccuracySpec {
        parse_spec(&format!(
            "spec {{ codebook c(1000); require-accuracy(c, sum({m}, c), 1, {acc}, {fp}, {fn_}); }}"
        ))
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn success_is_monotone_in_n(m in 1usize..200, p in 0.0f64..0.2, req in 0.001f64..0.05, n in 1usize..20_000) {
            let s = expand_vars(&set_spec(m, 1.0 - req, req, req)).unwrap();
            let model = RequirementModel::from_requirement(p, &s.requirements[0]).unwrap();
            if model.evaluate(n).unwrap().success {
                for dn in [1usize, 7, 100, 1000] {
                    prop_assert!(model.evaluate(n + dn).unwrap().success);
                }
            }
        }

        #[test]
        fn threshold_within_bounds(m in 1usize..100, p in 0.0f64..0.2, n in 50usize..5000) {
            let s = expand_vars(&set_spec(m, 0.99, 0.01, 0.01)).unwrap();
            let model = RequirementModel::from_requirement(p, &s.requirements[0]).unwrap();
            let rep = model.evaluate(n).unwrap();
            if rep.threshold.feasible {
                let thr_l = normal_quantile(0.99, rep.in_set);
                let thr_h = normal_quantile(0.01, rep.not_in_set);
                prop_assert!(rep.threshold.thr >= thr_l - 1e-12 && rep.threshold.thr <= thr_h + 1e-12);
                prop_assert!(rep.threshold.thr >= rep.in_set.mu && rep.threshold.thr < rep.not_in_set.mu);
            }
        }

        #[test]
        fn noise_never_shrinks_dimension(m in 1usize..300, p in 0.001f64..0.2) {
            let spec = set_spec(m, 0.99, 0.01, 0.01);
            let clean = optimize(&HardwareModel::default(), &spec, DEFAULT_MAX_N).unwrap();
            let noisy = optimize(&HardwareModel::item_mem(p), &spec, DEFAULT_MAX_N).unwrap();
            prop_assert!(clean.n_opt <= noisy.n_opt);
        }

        #[test]
        fn accuracy_identity(m in 1usize..300, p in 0.0f64..0.2) {
            let r = optimize(&HardwareModel::item_mem(p), &set_spec(m, 0.99, 0.01, 0.01), DEFAULT_MAX_N).unwrap();
            for q in &r.per_query {
                prop_assert_eq!(q.achieved_acc, 1.0 - (q.achieved_fp + q.achieved_fn) / 2.0);
                prop_assert!(q.achieved_fp <= 0.01 && q.achieved_fn <= 0.01 && q.achieved_acc >= 0.99);
                prop_assert!(q.n <= r.n_opt);
            }
        }
    }
}
