//! Binary hypervectors and the four HD operators.
//!
//! Bits are packed little-endian into `u64` words: bit `i` lives in word
//! `i / 64` at position `i % 64`. Bits past `len` in the last word are always
//! zero, so popcounts and equality can work on whole words.
//!
//! * **bind** is bitwise XOR,
//! * **bundle** is bitwise majority (even arities get one random tie-breaker),
//! * **permute** is a circular shift toward higher indices,
//! * **distance** is the normalized Hamming distance.

use std::fmt;
use std::io::{Read, Write};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const WORD: usize = 64;

fn words_for(len: usize) -> usize {
    len.div_ceil(WORD)
}

fn tail_mask(len: usize) -> u64 {
    match len % WORD {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

/// Fixed-length binary vector.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Hypervector {
    words: Vec<u64>,
    len: usize,
}

impl Hypervector {
    pub fn zeros(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidDimension(len));
        }
        Ok(Hypervector {
            words: vec![0; words_for(len)],
            len,
        })
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Result<Self> {
        let mut words = Vec::new();
        let mut len = 0;
        for b in bits {
            if len % WORD == 0 {
                words.push(0);
            }
            if b {
                words[len / WORD] |= 1 << (len % WORD);
            }
            len += 1;
        }
        if len == 0 {
            return Err(Error::InvalidDimension(0));
        }
        Ok(Hypervector { words, len })
    }

    /// Parses a string of `0`/`1` characters; character `i` becomes bit `i`.
    pub fn from_bitstr(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidArgument(format!("not a bit: {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(bits)
    }

    pub(crate) fn from_words(mut words: Vec<u64>, len: usize) -> Self {
        debug_assert_eq!(words.len(), words_for(len));
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(len);
        }
        Hypervector { words, len }
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        let mask = 1u64 << (i % WORD);
        if bit {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn complement(&self) -> Hypervector {
        let words = self.words.iter().map(|w| !w).collect();
        Hypervector::from_words(words, self.len)
    }

    /// First `n` bits as a new vector.
    pub fn prefix(&self, n: usize) -> Result<Hypervector> {
        if n == 0 || n > self.len {
            return Err(Error::InvalidArgument(format!(
                "prefix length {n} not in 1..={}",
                self.len
            )));
        }
        let words = self.words[..words_for(n)].to_vec();
        Ok(Hypervector::from_words(words, n))
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// In-place XOR; lengths must match.
    pub fn bind_assign(&mut self, other: &Hypervector) -> Result<()> {
        check_len(self, other)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
        Ok(())
    }

    /// Writes `magic, version, len` followed by the packed bits.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&(self.len as u64).to_le_bytes())?;
        let nbytes = self.len.div_ceil(8);
        let bytes: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).take(nbytes).collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Hypervector> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }
        let mut v = [0u8; 4];
        r.read_exact(&mut v)?;
        let version = u32::from_le_bytes(v);
        if version != DUMP_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let mut l = [0u8; 8];
        r.read_exact(&mut l)?;
        let len = u64::from_le_bytes(l) as usize;
        if len == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let mut bytes = vec![0u8; len.div_ceil(8)];
        r.read_exact(&mut bytes)?;
        bytes.resize(words_for(len) * 8, 0);
        let words = bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let hv = Hypervector::from_words(words, len);
        Ok(hv)
    }
}

const DUMP_MAGIC: &[u8; 4] = b"HDVB";
const DUMP_VERSION: u32 = 1;

impl fmt::Debug for Hypervector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 64 {
            write!(f, "Hypervector({self})")
        } else {
            write!(f, "Hypervector(len={}, ones={})", self.len, self.count_ones())
        }
    }
}

impl fmt::Display for Hypervector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

fn check_len(a: &Hypervector, b: &Hypervector) -> Result<()> {
    if a.len != b.len {
        return Err(Error::DimensionMismatch {
            left: a.len,
            right: b.len,
        });
    }
    Ok(())
}

/// Seeded random stream. Identical `(seed, stream_id)` pairs reproduce the
/// same bits; parallel consumers take children with distinct ids.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Independent stream keyed by this stream's identity and `id`; does not
    /// advance `self`.
    pub fn child(&self, id: u64) -> RngStream {
        RngStream::new(splitmix(self.seed ^ splitmix(self.stream_id)), id)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Uniform random code of `len` bits.
pub fn rand_code(len: usize, rng: &mut RngStream) -> Result<Hypervector> {
    if len == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let words = (0..words_for(len)).map(|_| rng.next_u64()).collect();
    Ok(Hypervector::from_words(words, len))
}

/// Flips each bit in place with probability `p`.
pub fn flip_bits(v: &mut Hypervector, p: f64, rng: &mut RngStream) -> Result<()> {
    if !(0.0..0.5).contains(&p) {
        return Err(Error::InvalidArgument(format!("flip rate {p} not in [0, 0.5)")));
    }
    if p == 0.0 {
        return Ok(());
    }
    // geometric gaps between flips
    let log_q = (1.0 - p).ln();
    let mut i = 0usize;
    loop {
        let u: f64 = rng.random();
        let gap = ((1.0 - u).ln() / log_q).floor();
        if gap >= (v.len() - i) as f64 {
            return Ok(());
        }
        i += gap as usize;
        v.set(i, !v.get(i));
        i += 1;
    }
}

pub fn bind(a: &Hypervector, b: &Hypervector) -> Result<Hypervector> {
    let mut out = a.clone();
    out.bind_assign(b)?;
    Ok(out)
}

/// Bitwise majority. An even number of inputs gets one extra random vector
/// from `tiebreak` so that no position ties.
pub fn bundle(vs: &[Hypervector], tiebreak: &mut RngStream) -> Result<Hypervector> {
    let first = vs
        .first()
        .ok_or_else(|| Error::InvalidArgument("bundle of an empty sequence".into()))?;
    for v in vs {
        check_len(first, v)?;
    }
    if vs.len() % 2 == 1 {
        return Ok(majority(vs.iter(), vs.len(), first.len));
    }
    let extra = rand_code(first.len, tiebreak)?;
    Ok(majority(
        vs.iter().chain(std::iter::once(&extra)),
        vs.len() + 1,
        first.len,
    ))
}

/// Majority of exactly `count` equal-length vectors (count odd), using
/// bit-sliced counters so each word position costs O(count * log count).
pub(crate) fn majority<'a, I>(vs: I, count: usize, len: usize) -> Hypervector
where
    I: Iterator<Item = &'a Hypervector> + Clone,
{
    debug_assert!(count % 2 == 1);
    let threshold = count / 2; // majority means count of ones > threshold
    let planes_n = usize::BITS as usize - count.leading_zeros() as usize;
    let nwords = words_for(len);
    let mut planes = vec![0u64; planes_n];
    let mut out = vec![0u64; nwords];
    for (w, slot) in out.iter_mut().enumerate() {
        planes.iter_mut().for_each(|p| *p = 0);
        for v in vs.clone() {
            let mut carry = v.words[w];
            for p in planes.iter_mut() {
                let c = *p & carry;
                *p ^= carry;
                carry = c;
                if carry == 0 {
                    break;
                }
            }
        }
        // per-bit "counter > threshold", MSB first
        let mut gt = 0u64;
        let mut eq = u64::MAX;
        for (bit, p) in planes.iter().enumerate().rev() {
            if threshold >> bit & 1 == 1 {
                eq &= *p;
            } else {
                gt |= eq & *p;
                eq &= !*p;
            }
        }
        *slot = gt;
    }
    Hypervector::from_words(out, len)
}

/// Circular shift by `i` positions toward higher indices; negative `i`
/// shifts back.
pub fn permute(v: &Hypervector, i: i64) -> Hypervector {
    let n = v.len as i64;
    let s = i.rem_euclid(n) as usize;
    if s == 0 {
        return v.clone();
    }
    let up = shift_up(&v.words, s, v.len);
    let down = shift_down(&v.words, v.len - s, v.len);
    let words = up.iter().zip(&down).map(|(a, b)| a | b).collect();
    Hypervector::from_words(words, v.len)
}

// bit j -> bit j + s, truncated to len
fn shift_up(words: &[u64], s: usize, len: usize) -> Vec<u64> {
    let n = words_for(len);
    let (ws, bs) = (s / WORD, s % WORD);
    let mut out = vec![0u64; n];
    for k in (ws..n).rev() {
        let src = k - ws;
        let mut x = words[src] << bs;
        if bs != 0 && src > 0 {
            x |= words[src - 1] >> (WORD - bs);
        }
        out[k] = x;
    }
    if let Some(last) = out.last_mut() {
        *last &= tail_mask(len);
    }
    out
}

// bit j -> bit j - s
fn shift_down(words: &[u64], s: usize, len: usize) -> Vec<u64> {
    let n = words_for(len);
    let (ws, bs) = (s / WORD, s % WORD);
    let mut out = vec![0u64; n];
    for (k, slot) in out.iter_mut().enumerate().take(n.saturating_sub(ws)) {
        let src = k + ws;
        let mut x = words[src] >> bs;
        if bs != 0 && src + 1 < n {
            x |= words[src + 1] << (WORD - bs);
        }
        *slot = x;
    }
    out
}

/// Normalized Hamming distance.
pub fn distance(a: &Hypervector, b: &Hypervector) -> Result<f64> {
    check_len(a, b)?;
    Ok(differing_bits(&a.words, &b.words) as f64 / a.len as f64)
}

fn differing_bits(a: &[u64], b: &[u64]) -> usize {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones() as usize).sum()
}

/// Hamming distance over the first `nq` bits only.
pub fn partial_distance(a: &Hypervector, b: &Hypervector, nq: usize) -> Result<f64> {
    if nq == 0 || nq > a.len || nq > b.len {
        return Err(Error::InvalidArgument(format!(
            "prefix {nq} not in 1..={}",
            a.len.min(b.len)
        )));
    }
    let full = nq / WORD;
    let mut d = differing_bits(&a.words[..full], &b.words[..full]);
    if !nq.is_multiple_of(WORD) {
        let m = tail_mask(nq);
        d += ((a.words[full] ^ b.words[full]) & m).count_ones() as usize;
    }
    Ok(d as f64 / nq as f64)
}

/// Named collection of independent random codes of one dimension.
#[derive(Clone, Debug)]
pub struct Codebook {
    name: String,
    codes: Vec<Hypervector>,
    seed: u64,
}

impl Codebook {
    pub fn new(name: impl Into<String>, size: usize, len: usize, rng: &mut RngStream) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument("codebook size must be positive".into()));
        }
        let seed = rng.seed();
        let codes = (0..size).map(|_| rand_code(len, rng)).collect::<Result<Vec<_>>>()?;
        Ok(Codebook {
            name: name.into(),
            codes,
            seed,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn size(&self) -> usize {
        self.codes.len()
    }

    pub fn dim(&self) -> usize {
        self.codes[0].len()
    }

    pub fn rng_seed(&self) -> u64 {
        self.seed
    }

    pub fn code(&self, i: usize) -> &Hypervector {
        &self.codes[i]
    }

    pub fn codes(&self) -> &[Hypervector] {
        &self.codes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hv(s: &str) -> Hypervector {
        Hypervector::from_bitstr(s).unwrap()
    }

    #[test]
    fn rand_code_is_deterministic() {
        let a = rand_code(8, &mut RngStream::new(42, 0)).unwrap();
        let b = rand_code(8, &mut RngStream::new(42, 0)).unwrap();
        assert_eq!(a, b);
        let c = rand_code(8, &mut RngStream::new(42, 1)).unwrap();
        let d = rand_code(300, &mut RngStream::new(42, 1)).unwrap();
        assert_eq!(c.len(), 8);
        assert_eq!(d.len(), 300);
    }

    #[test]
    fn rand_code_rejects_zero_len() {
        assert!(matches!(
            rand_code(0, &mut RngStream::new(1, 0)),
            Err(Error::InvalidDimension(0))
        ));
    }

    #[test]
    fn rand_code_balance() {
        // Binomial(10000, 1/2) has sd 50, so [4700, 5300] is a 6-sigma band.
        let mut rng = RngStream::new(7, 3);
        for _ in 0..20 {
            let v = rand_code(10_000, &mut rng).unwrap();
            let frac = v.count_ones() as f64 / 10_000.0;
            assert!((0.47..=0.53).contains(&frac), "{frac}");
        }
    }

    #[test]
    fn independent_codes_are_half_apart() {
        let mut rng = RngStream::new(11, 0);
        for _ in 0..20 {
            let a = rand_code(10_000, &mut rng).unwrap();
            let b = rand_code(10_000, &mut rng).unwrap();
            let d = distance(&a, &b).unwrap();
            assert!((0.485..=0.515).contains(&d), "{d}");
        }
    }

    #[test]
    fn bind_examples() {
        let x = hv("1011001");
        assert_eq!(bind(&x, &x).unwrap(), hv("0000000"));
        assert_eq!(bind(&x, &hv("0000000")).unwrap(), x);
        assert_eq!(bind(&hv("1010"), &hv("0110")).unwrap(), hv("1100"));
        assert!(matches!(
            bind(&hv("10"), &hv("101")),
            Err(Error::DimensionMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn bundle_examples() {
        let mut tb = RngStream::new(0, 99);
        let x = hv("1100101");
        let y = hv("0011010");
        assert_eq!(bundle(std::slice::from_ref(&x), &mut tb).unwrap(), x);
        assert_eq!(bundle(&[hv("110"), hv("101"), hv("011")], &mut tb).unwrap(), hv("111"));
        assert_eq!(bundle(&[x.clone(), x.clone(), y], &mut tb).unwrap(), x);
        assert!(matches!(bundle(&[], &mut tb), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn bundle_even_arity_uses_tiebreak() {
        let a = hv("1100");
        let b = hv("1010");
        // agreeing positions are fixed regardless of the tie-breaker
        let out = bundle(&[a, b], &mut RngStream::new(5, 5)).unwrap();
        assert!(out.get(0));
        assert!(!out.get(3));
        let again = bundle(&[hv("1100"), hv("1010")], &mut RngStream::new(5, 5)).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn majority_matches_naive_count() {
        let mut rng = RngStream::new(3, 0);
        for count in [1usize, 3, 5, 7, 15, 33, 65] {
            let vs: Vec<_> = (0..count).map(|_| rand_code(130, &mut rng).unwrap()).collect();
            let fast = majority(vs.iter(), count, 130);
            for i in 0..130 {
                let ones = vs.iter().filter(|v| v.get(i)).count();
                assert_eq!(fast.get(i), ones > count / 2, "count={count} bit={i}");
            }
        }
    }

    #[test]
    fn permute_examples() {
        let v = hv("1000");
        assert_eq!(permute(&v, 1), hv("0100"));
        assert_eq!(permute(&v, 0), v);
        assert_eq!(permute(&v, -1), hv("0001"));
        assert_eq!(permute(&v, 5), hv("0100"));
        let mut rng = RngStream::new(1, 1);
        for len in [1usize, 63, 64, 65, 200] {
            let x = rand_code(len, &mut rng).unwrap();
            for s in [-130i64, -3, 1, 3, 64, 77] {
                let y = permute(&x, s);
                for j in 0..len {
                    let to = (j as i64 + s).rem_euclid(len as i64) as usize;
                    assert_eq!(y.get(to), x.get(j));
                }
                assert_eq!(permute(&y, -s), x);
            }
        }
    }

    #[test]
    fn distance_examples() {
        let x = hv("10110");
        assert_eq!(distance(&x, &x).unwrap(), 0.0);
        assert_eq!(distance(&x, &x.complement()).unwrap(), 1.0);
        assert_eq!(distance(&hv("0000"), &hv("0101")).unwrap(), 0.5);
    }

    #[test]
    fn partial_distance_examples() {
        let a = hv("11001010");
        let b = hv("10001111");
        assert_eq!(partial_distance(&a, &b, 8).unwrap(), distance(&a, &b).unwrap());
        assert_eq!(partial_distance(&a, &b, 2).unwrap(), 0.5);
        for k in 1..=8 {
            assert_eq!(partial_distance(&a, &a, k).unwrap(), 0.0);
        }
        assert!(partial_distance(&a, &b, 0).is_err());
        assert!(partial_distance(&a, &b, 9).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let v = rand_code(77, &mut RngStream::new(9, 9)).unwrap();
        let mut buf = Vec::new();
        v.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 8 + 10);
        assert_eq!(Hypervector::read_from(&buf[..]).unwrap(), v);
        buf[0] = b'X';
        assert!(Hypervector::read_from(&buf[..]).is_err());
    }

    #[test]
    fn dump_bit_order_is_little_endian() {
        let v = hv("100000001");
        let mut buf = Vec::new();
        v.write_to(&mut buf).unwrap();
        assert_eq!(&buf[16..], &[0b0000_0001, 0b0000_0001]);
    }

    #[test]
    fn child_streams_differ() {
        let root = RngStream::new(1, 0);
        let a = rand_code(64, &mut root.child(0)).unwrap();
        let b = rand_code(64, &mut root.child(1)).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, rand_code(64, &mut root.child(0)).unwrap());
    }

    fn arb_hv(len: usize) -> impl Strategy<Value = Hypervector> {
        prop::collection::vec(any::<bool>(), len).prop_map(|b| Hypervector::from_bits(b).unwrap())
    }

    fn arb_pair() -> impl Strategy<Value = (Hypervector, Hypervector, Hypervector)> {
        (1usize..300).prop_flat_map(|n| (arb_hv(n), arb_hv(n), arb_hv(n)))
    }

    proptest! {
        #[test]
        fn bind_is_an_abelian_involution((a, b, c) in arb_pair()) {
            let ab = bind(&a, &b).unwrap();
            prop_assert_eq!(&ab, &bind(&b, &a).unwrap());
            prop_assert_eq!(&bind(&ab, &b).unwrap(), &a);
            prop_assert_eq!(bind(&ab, &c).unwrap(), bind(&a, &bind(&b, &c).unwrap()).unwrap());
            prop_assert_eq!(bind(&a, &a).unwrap().count_ones(), 0);
        }

        #[test]
        fn bind_preserves_distance((a, b, c) in arb_pair()) {
            let d = distance(&a, &b).unwrap();
            prop_assert_eq!(distance(&bind(&a, &c).unwrap(), &bind(&b, &c).unwrap()).unwrap(), d);
        }

        #[test]
        fn permute_composes_and_inverts((a, b, _) in arb_pair(), i in -700i64..700, j in -700i64..700) {
            prop_assert_eq!(permute(&permute(&a, i), -i), a.clone());
            prop_assert_eq!(permute(&permute(&a, i), j), permute(&a, i + j));
            prop_assert_eq!(permute(&a, a.len() as i64), a.clone());
            prop_assert_eq!(permute(&bind(&a, &b).unwrap(), i), bind(&permute(&a, i), &permute(&b, i)).unwrap());
            prop_assert_eq!(distance(&permute(&a, i), &permute(&b, i)).unwrap(), distance(&a, &b).unwrap());
        }

        #[test]
        fn bundle_is_order_free_and_bind_distributes((a, b, c) in arb_pair(), seed in any::<u64>()) {
            let mut r = RngStream::new(seed, 0);
            let abc = bundle(&[a.clone(), b.clone(), c.clone()], &mut r).unwrap();
            prop_assert_eq!(&abc, &bundle(&[c.clone(), a.clone(), b.clone()], &mut r).unwrap());
            prop_assert_eq!(bundle(std::slice::from_ref(&a), &mut r).unwrap(), a.clone());
            // binding commutes with an odd majority
            let x = bind(&abc, &a).unwrap();
            let y = bundle(&[bind(&a, &a).unwrap(), bind(&b, &a).unwrap(), bind(&c, &a).unwrap()], &mut r).unwrap();
            prop_assert_eq!(x, y);
            prop_assert_eq!(permute(&abc, 5), bundle(&[permute(&a, 5), permute(&b, 5), permute(&c, 5)], &mut r).unwrap());
        }

        #[test]
        fn prefix_distance_matches_truncation((a, b, _) in arb_pair(), cut in 1usize..300) {
            let nq = cut.min(a.len());
            let want = distance(&a.prefix(nq).unwrap(), &b.prefix(nq).unwrap()).unwrap();
            prop_assert_eq!(partial_distance(&a, &b, nq).unwrap(), want);
        }
    }
}
