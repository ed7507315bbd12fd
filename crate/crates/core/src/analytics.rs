//! Analytical distance model: query/data-structure classification, mean
//! distances of the three membership predicates, bit-flip noise and the
//! normal approximation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::speclang::{Expr, HardwareModel};

/// Largest product width evaluated by parity enumeration.
pub const W_MAX: usize = 4;

/// Membership predicate family with its size parameters (as declared, before
/// odd augmentation).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum QdsClass {
    /// Single code or tuple against a set of `m` tuples.
    TypeI { m: usize },
    /// Set of `s` tuples against a set of `m` tuples, at least `k` shared.
    TypeII { k: usize, s: usize, m: usize },
    /// Single tuple against a product of sets with the given sizes.
    TypeIII { sizes: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "expr", rename_all = "snake_case")]
pub enum IndependenceConstraint {
    Iset(Expr),
    Iproduct(Expr),
    /// `iset(ds) ∧ iset(query)`.
    IsetBoth(Expr, Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanDistances {
    pub mean_in: f64,
    pub mean_out: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceDistribution {
    pub mu: f64,
    pub sigma: f64,
}

/// Name of the virtual codebook that stands for `perm(shift, cb)`.
pub fn virtual_codebook(cb: &str, shift: i64) -> String {
    format!("{cb}@{shift}")
}

/// Replaces every permuted code by a reference to a virtual codebook keyed on
/// `(codebook, shift)`. A zero shift is the codebook itself.
pub fn eliminate_permutes(e: &Expr) -> Expr {
    match e {
        Expr::Perm { shift: 0, name, pos } => Expr::Code {
            name: name.clone(),
            pos: *pos,
        },
        Expr::Perm { shift, name, pos } => Expr::Code {
            name: virtual_codebook(name, *shift),
            pos: *pos,
        },
        Expr::Code { .. } | Expr::Var { .. } => e.clone(),
        Expr::Sum { bound, terms, pos } => Expr::Sum {
            bound: *bound,
            terms: terms.iter().map(eliminate_permutes).collect(),
            pos: *pos,
        },
        Expr::Prod { factors, pos } => Expr::Prod {
            factors: factors.iter().map(eliminate_permutes).collect(),
            pos: *pos,
        },
    }
}

fn is_tuple(e: &Expr) -> bool {
    match e {
        Expr::Prod { factors, .. } => factors.iter().all(Expr::is_simple),
        other => other.is_simple(),
    }
}

fn is_tuple_set(e: &Expr) -> bool {
    matches!(e, Expr::Sum { terms, .. } if terms.iter().all(is_tuple))
}

pub fn classify_qds(query: &Expr, ds: &Expr, k: usize) -> Result<(QdsClass, IndependenceConstraint)> {
    if k == 0 {
        return Err(Error::InvalidK {
            k,
            reason: "k must be positive".into(),
        });
    }
    let single = |k: usize, what: &str| -> Result<()> {
        if k != 1 {
            return Err(Error::InvalidK {
                k,
                reason: format!("a single-tuple query against {what} can share at most one element"),
            });
        }
        Ok(())
    };

    // product of sums with at least one real set factor
    if let Expr::Prod { factors, .. } = ds {
        if factors.len() >= 2
            && factors.iter().any(is_tuple_set)
            && factors.iter().all(|f| f.is_simple() || is_tuple_set(f))
        {
            if !is_tuple(query) {
                return Err(Error::UnsupportedQds(format!(
                    "query `{query}` must be a single tuple against product `{ds}`"
                )));
            }
            single(k, "a product of sets")?;
            let sizes = factors
                .iter()
                .map(|f| match f {
                    Expr::Sum { bound, .. } => *bound,
                    _ => 1,
                })
                .collect();
            return Ok((
                QdsClass::TypeIII { sizes },
                IndependenceConstraint::Iproduct(ds.clone()),
            ));
        }
    }

    let m = match ds {
        Expr::Sum { bound, .. } if is_tuple_set(ds) => *bound,
        d if is_tuple(d) => 1,
        _ => {
            return Err(Error::UnsupportedQds(format!(
                "data structure `{ds}` is neither a product of sums nor a sum of products"
            )))
        }
    };
    if is_tuple(query) {
        single(k, "a set")?;
        return Ok((QdsClass::TypeI { m }, IndependenceConstraint::Iset(ds.clone())));
    }
    if let Expr::Sum { bound: s, .. } = query {
        if is_tuple_set(query) {
            let s = *s;
            if k > s || k > m {
                return Err(Error::InvalidK {
                    k,
                    reason: format!("query holds {s} and data structure {m} elements"),
                });
            }
            return Ok((
                QdsClass::TypeII { k, s, m },
                IndependenceConstraint::IsetBoth(ds.clone(), query.clone()),
            ));
        }
    }
    Err(Error::UnsupportedQds(format!(
        "query `{query}` cannot be compared with `{ds}`"
    )))
}

/// Normalized binomial pmf and prefix CDF for one `n`, i.e. `C(n,i)/2^n`.
struct Binomial {
    cdf: Vec<f64>,
}

impl Binomial {
    fn new(n: usize) -> Self {
        let mut cdf = Vec::with_capacity(n + 1);
        let mut lf = -(n as f64) * std::f64::consts::LN_2;
        let mut acc = 0.0;
        for i in 0..=n {
            acc += lf.exp();
            cdf.push(acc.min(1.0));
            if i < n {
                lf += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
            }
        }
        Binomial { cdf }
    }

    fn pmf(&self, i: usize) -> f64 {
        if i == 0 {
            self.cdf[0]
        } else {
            self.cdf[i] - self.cdf[i - 1]
        }
    }

    /// `P(X <= t)`, zero for negative `t`.
    fn g(&self, t: i64) -> f64 {
        if t < 0 {
            0.0
        } else {
            self.cdf[(t as usize).min(self.cdf.len() - 1)]
        }
    }
}

fn require_odd(x: usize) -> Result<()> {
    if x.is_multiple_of(2) {
        return Err(Error::EvenSetSize(x));
    }
    Ok(())
}

/// Size the analysis uses for a declared bound: even bounds gain the
/// tie-breaker vector.
pub fn odd_size(bound: usize) -> usize {
    bound | 1
}

pub fn mean_independent() -> f64 {
    0.5
}

/// Distance between a member and a bundle of `m` codes.
pub fn mean_set_recall(m: usize) -> Result<f64> {
    require_odd(m)?;
    // C(2h, h) / 4^h as a product of factors near one; never underflows
    let h = (m - 1) / 2;
    let central: f64 = (1..=h).map(|j| 1.0 - 0.5 / j as f64).product();
    Ok(0.5 - central / 2.0)
}

/// Distance between a bundle of `l` members plus `p` outsiders and a bundle of
/// `m` codes.
pub fn mean_partial_subset(l: usize, p: usize, m: usize) -> Result<f64> {
    require_odd(m)?;
    if l + p == 0 || (l + p).is_multiple_of(2) {
        return Err(Error::Parity(format!("query size l + p = {} must be odd", l + p)));
    }
    if l > m {
        return Err(Error::InvalidArgument(format!("l = {l} exceeds m = {m}")));
    }
    let fl = Binomial::new(l);
    let gp = Binomial::new(p);
    let gr = Binomial::new(m - l);
    let a = ((l + p - 1) / 2) as i64;
    let b = ((m - 1) / 2) as i64;
    let top = a.min(b).min(l as i64);
    let s: f64 = (0..=top).map(|i| fl.pmf(i as usize) * gp.g(a - i) * gr.g(b - i)).sum();
    Ok((1.0 - 2.0 * s).max(0.0))
}

// P(member and set disagree in a bit), P(agree), for a set of odd size l
fn factor_probs(l: usize) -> (f64, f64) {
    let t = Binomial::new(l - 1);
    let h = ((l - 1) / 2) as i64;
    (t.g(h - 1), t.g(h))
}

/// Distance between a tuple and the product of two sets of sizes `l` and `m`.
pub fn mean_two_way_product(l: usize, m: usize) -> Result<f64> {
    require_odd(l)?;
    require_odd(m)?;
    let (dl, sl) = factor_probs(l);
    let (dm, sm) = factor_probs(m);
    Ok(sl * dm + dl * sm)
}

/// Distance between a tuple and a product of `sizes.len()` sets; sums over
/// all odd-parity disagreement patterns.
pub fn mean_n_way_product(sizes: &[usize]) -> Result<f64> {
    let w = sizes.len();
    if w > W_MAX {
        return Err(Error::UnsupportedWidth(w, W_MAX));
    }
    if w < 2 {
        return Err(Error::InvalidArgument(format!("product width {w} below 2")));
    }
    for &l in sizes {
        require_odd(l)?;
    }
    let probs: Vec<(f64, f64)> = sizes.iter().map(|&l| factor_probs(l)).collect();
    let mut total = 0.0;
    for pattern in 0u32..(1 << w) {
        if pattern.count_ones() % 2 == 0 {
            continue;
        }
        total += probs
            .iter()
            .enumerate()
            .map(|(i, &(d, s))| if pattern >> i & 1 == 1 { d } else { s })
            .product::<f64>();
    }
    Ok(total)
}

/// Per-bit corruption probability of the whole pipeline.
pub fn derive_p(hw: &HardwareModel) -> Result<f64> {
    for r in hw.rates() {
        if !(0.0..0.5).contains(&r) {
            return Err(Error::NoiseTooHigh(r));
        }
    }
    let keep: f64 = hw.rates().iter().map(|r| 1.0 - r).product();
    let p = 1.0 - keep;
    if p >= 0.5 {
        return Err(Error::NoiseTooHigh(p));
    }
    Ok(p)
}

/// Mean distance after independent bit flips with probability `p` on the
/// stored vector.
pub fn hw_err(p: f64, mean: f64) -> f64 {
    let q = 1.0 - p;
    (p * p + q * q) * mean + 2.0 * p * q * (1.0 - mean)
}

pub fn to_normal(mean: f64, n: usize) -> DistanceDistribution {
    DistanceDistribution {
        mu: mean,
        sigma: (mean * (1.0 - mean) / n as f64).sqrt(),
    }
}

/// Noise-free mean distances of a classified predicate. Even sizes are
/// modeled with their tie-breaker.
pub fn mean_distances(class: &QdsClass) -> Result<MeanDistances> {
    match class {
        QdsClass::TypeI { m } => Ok(MeanDistances {
            mean_in: mean_set_recall(odd_size(*m))?,
            mean_out: mean_independent(),
        }),
        QdsClass::TypeII { k, s, m } => {
            let (k, s, m) = (*k, odd_size(*s), odd_size(*m));
            if k > s || k > m {
                return Err(Error::InvalidK {
                    k,
                    reason: format!("query holds {s} and data structure {m} elements"),
                });
            }
            Ok(MeanDistances {
                mean_in: mean_partial_subset(k, s - k, m)?,
                mean_out: mean_partial_subset(k - 1, s - k + 1, m)?,
            })
        }
        QdsClass::TypeIII { sizes } => {
            // singleton factors are plain codes and do not blur the match
            let eff: Vec<usize> = sizes.iter().map(|&l| odd_size(l)).filter(|&l| l > 1).collect();
            let mean_in = match eff.len() {
                0 => 0.0,
                1 => mean_set_recall(eff[0])?,
                2 => mean_two_way_product(eff[0], eff[1])?,
                _ => mean_n_way_product(&eff)?,
            };
            Ok(MeanDistances {
                mean_in,
                mean_out: mean_independent(),
            })
        }
    }
}

/// Full model: classification, means, noise and normal approximation at
/// dimension `n`. Expects expanded expressions; permutes are eliminated here.
pub fn analytical_model(
    query: &Expr,
    ds: &Expr,
    k: usize,
    n: usize,
    p: f64,
) -> Result<(IndependenceConstraint, DistanceDistribution, DistanceDistribution)> {
    let (class, cstr) = classify_qds(&eliminate_permutes(query), &eliminate_permutes(ds), k)?;
    let m = mean_distances(&class)?;
    Ok((
        cstr,
        to_normal(hw_err(p, m.mean_in), n),
        to_normal(hw_err(p, m.mean_out), n),
    ))
}
