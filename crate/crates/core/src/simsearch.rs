//! Bit-packed binary vectors and similarity search.
//!
//! Each comparison touches every word of both vectors once, so its cost is
//! linear in the feature count. Population counts are cached per vector.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const WORD_BITS: usize = 64;

/// Packed binary feature vector with a cached population count.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    width: usize,
    words: Vec<u64>,
    ones: u32,
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits: String = (0..self.width).map(|i| if self.get(i) { '1' } else { '0' }).collect();
        f.debug_struct("BitVector")
            .field("width", &self.width)
            .field("bits", &bits)
            .finish()
    }
}

impl BitVector {
    pub fn zeros(width: usize) -> Self {
        Self {
            width,
            words: vec![0; width.div_ceil(WORD_BITS)],
            ones: 0,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
            }
        }
        v.ones = v.recount();
        v
    }

    /// Vector of `width` bits with the given positions set (0-based).
    pub fn from_indices(width: usize, active: &[usize]) -> Result<Self> {
        let mut v = Self::zeros(width);
        for &i in active {
            if i >= width {
                return Err(Error::InvalidArgument(format!(
                    "bit index {i} out of range for width {width}"
                )));
            }
            v.words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
        }
        v.ones = v.recount();
        Ok(v)
    }

    fn recount(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Number of set bits.
    #[inline]
    pub fn count_ones(&self) -> u32 {
        self.ones
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        i < self.width && (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.width, "bit {i} out of range for width {}", self.width);
        let mask = 1u64 << (i % WORD_BITS);
        let w = &mut self.words[i / WORD_BITS];
        let was = *w & mask != 0;
        if value && !was {
            *w |= mask;
            self.ones += 1;
        } else if !value && was {
            *w &= !mask;
            self.ones -= 1;
        }
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(move |&i| self.get(i))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.width).map(|i| if self.get(i) { 1.0 } else { 0.0 }).collect()
    }

    /// Checks the padding and cached-count invariants.
    pub fn is_consistent(&self) -> bool {
        let tail = self.width % WORD_BITS;
        let padding_clear = tail == 0 || self.words.last().is_none_or(|w| w >> tail == 0);
        padding_clear
            && self.words.len() == self.width.div_ceil(WORD_BITS)
            && self.ones == self.recount()
    }

    fn check_width(&self, other: &Self) -> Result<()> {
        if self.width != other.width {
            return Err(Error::dim(
                "similarity",
                format!("widths {} and {}", self.width, other.width),
            ));
        }
        Ok(())
    }

    /// `|A ∩ B|`.
    pub fn intersection_count(&self, other: &Self) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    /// Number of positions where the vectors differ.
    pub fn hamming_distance(&self, other: &Self) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityMetric {
    /// Normalized matching 1s: `|A ∩ B| / max(|A|, |B|)`.
    #[default]
    Nm1,
    Jaccard,
    Dice,
    /// Fraction of agreeing positions, zeros included.
    Hamming,
    /// `|A ∩ B| / √(|A|·|B|)`.
    Cosine,
}

impl SimilarityMetric {
    pub const ALL: [SimilarityMetric; 5] = [
        SimilarityMetric::Nm1,
        SimilarityMetric::Jaccard,
        SimilarityMetric::Dice,
        SimilarityMetric::Hamming,
        SimilarityMetric::Cosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SimilarityMetric::Nm1 => "nm1",
            SimilarityMetric::Jaccard => "jaccard",
            SimilarityMetric::Dice => "dice",
            SimilarityMetric::Hamming => "hamming",
            SimilarityMetric::Cosine => "cosine",
        }
    }
}

impl fmt::Display for SimilarityMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SimilarityMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SimilarityMetric::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown similarity metric {s:?}")))
    }
}

/// Similarity from the set sizes. Two empty sets are identical (1.0); an empty
/// set against a non-empty one scores 0.0, except under Hamming, which counts
/// agreeing zeros.
pub(crate) fn similarity_from_counts(
    metric: SimilarityMetric,
    inter: u32,
    a: u32,
    b: u32,
    differing: u32,
    width: usize,
) -> f64 {
    if metric == SimilarityMetric::Hamming {
        if width == 0 {
            return 1.0;
        }
        return (width - differing as usize) as f64 / width as f64;
    }
    if a == 0 && b == 0 {
        return 1.0;
    }
    if a == 0 || b == 0 {
        return 0.0;
    }
    let union = a + b - inter;
    let inter = inter as f64;
    match metric {
        SimilarityMetric::Nm1 => inter / a.max(b) as f64,
        SimilarityMetric::Jaccard => inter / union as f64,
        SimilarityMetric::Dice => 2.0 * inter / (a + b) as f64,
        SimilarityMetric::Cosine => inter / ((a as f64) * (b as f64)).sqrt(),
        SimilarityMetric::Hamming => unreachable!(),
    }
}

/// `|A ∩ B| / max(|A|, |B|)`.
pub fn sim_nm1(a: &BitVector, b: &BitVector) -> Result<f64> {
    sim_metric(a, b, SimilarityMetric::Nm1)
}

pub fn sim_metric(a: &BitVector, b: &BitVector, metric: SimilarityMetric) -> Result<f64> {
    a.check_width(b)?;
    let differing = if metric == SimilarityMetric::Hamming {
        a.hamming_distance(b)
    } else {
        0
    };
    Ok(similarity_from_counts(
        metric,
        a.intersection_count(b),
        a.count_ones(),
        b.count_ones(),
        differing,
        a.width(),
    ))
}

/// Nearest-rank percentile: the element at index `⌈(p/100)·n⌉ − 1` of the
/// ascending sort, clamped to `[0, n − 1]`.
pub fn percentile_threshold(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("percentile of an empty sequence".into()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("percentile must be in [0, 100], got {p}")));
    }
    if let Some(v) = values.iter().find(|v| v.is_nan()) {
        return Err(Error::InvalidArgument(format!("percentile over non-comparable value {v}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    Ok(sorted[rank.saturating_sub(1).min(n - 1)])
}

/// All `(row index, similarity)` pairs with similarity `≥ threshold`, in input order.
pub fn similar_above<'a, I>(
    query: &BitVector,
    rows: I,
    metric: SimilarityMetric,
    threshold: f64,
) -> Result<Vec<(usize, f64)>>
where
    I: IntoIterator<Item = (usize, &'a BitVector)>,
{
    let mut out = Vec::new();
    for (i, row) in rows {
        let s = sim_metric(query, row, metric)?;
        if s >= threshold {
            out.push((i, s));
        }
    }
    Ok(out)
}

/// The `k` most similar rows by descending similarity, ties by ascending index.
pub fn topk_similar<'a, I>(
    query: &BitVector,
    rows: I,
    metric: SimilarityMetric,
    k: usize,
) -> Result<Vec<(usize, f64)>>
where
    I: IntoIterator<Item = (usize, &'a BitVector)>,
{
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut all = similar_above(query, rows, metric, f64::NEG_INFINITY)?;
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Row1 = {1,3,4}, Row3 = {1,2,3} with 1-based feature numbers, width 5.
    fn worked_rows() -> (BitVector, BitVector) {
        (
            BitVector::from_indices(5, &[0, 2, 3]).unwrap(),
            BitVector::from_indices(5, &[0, 1, 2]).unwrap(),
        )
    }

    #[test]
    fn nm1_worked_example() {
        let (r1, r3) = worked_rows();
        assert_eq!(sim_nm1(&r1, &r3).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn comparison_metrics_on_example_rows() {
        let (r1, r3) = worked_rows();
        assert_eq!(sim_metric(&r1, &r3, SimilarityMetric::Jaccard).unwrap(), 0.5);
        assert_eq!(sim_metric(&r1, &r3, SimilarityMetric::Dice).unwrap(), 4.0 / 6.0);
        assert_eq!(sim_metric(&r1, &r3, SimilarityMetric::Cosine).unwrap(), 2.0 / 3.0);
        // differ at positions 1 and 3 → 3 of 5 agree
        assert_eq!(sim_metric(&r1, &r3, SimilarityMetric::Hamming).unwrap(), 0.6);
    }

    #[test]
    fn empty_vector_conventions() {
        let z = BitVector::zeros(7);
        let one = BitVector::from_indices(7, &[3]).unwrap();
        for m in SimilarityMetric::ALL {
            assert_eq!(sim_metric(&z, &z, m).unwrap(), 1.0, "{m}");
        }
        for m in [
            SimilarityMetric::Nm1,
            SimilarityMetric::Jaccard,
            SimilarityMetric::Dice,
            SimilarityMetric::Cosine,
        ] {
            assert_eq!(sim_metric(&z, &one, m).unwrap(), 0.0, "{m}");
        }
    }

    #[test]
    fn disjoint_and_width_mismatch() {
        let a = BitVector::from_indices(4, &[0, 1]).unwrap();
        let b = BitVector::from_indices(4, &[2, 3]).unwrap();
        assert_eq!(sim_nm1(&a, &b).unwrap(), 0.0);
        assert!(sim_nm1(&a, &BitVector::zeros(5)).is_err());
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile_threshold(&v, 80.0).unwrap(), 8.0);
        assert_eq!(percentile_threshold(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile_threshold(&v, 100.0).unwrap(), 10.0);
        assert_eq!(percentile_threshold(&[4.2], 37.0).unwrap(), 4.2);
        assert!(percentile_threshold(&[], 50.0).is_err());
    }

    #[test]
    fn percentile_matches_sort_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(1000);
        let v: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>()).collect();
        let mut sorted = v.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // ⌈0.8 · 1000⌉ − 1 = 799
        assert_eq!(percentile_threshold(&v, 80.0).unwrap(), sorted[799]);
    }

    #[test]
    fn threshold_extremes() {
        let q = BitVector::from_indices(6, &[0, 1]).unwrap();
        let rows: Vec<BitVector> = (0..6).map(|i| BitVector::from_indices(6, &[i]).unwrap()).collect();
        let all = similar_above(&q, rows.iter().enumerate(), SimilarityMetric::Nm1, 0.0).unwrap();
        assert_eq!(all.len(), 6);
        let none = similar_above(&q, rows.iter().enumerate(), SimilarityMetric::Nm1, 1.01).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn topk_cases() {
        let rows: Vec<BitVector> = vec![
            BitVector::from_indices(4, &[0]).unwrap(),
            BitVector::from_indices(4, &[0, 1]).unwrap(),
            BitVector::from_indices(4, &[2]).unwrap(),
            BitVector::from_indices(4, &[0, 1]).unwrap(),
        ];
        let q = rows[1].clone();
        assert!(topk_similar(&q, rows.iter().enumerate(), SimilarityMetric::Nm1, 0)
            .unwrap()
            .is_empty());
        let top = topk_similar(&q, rows.iter().enumerate(), SimilarityMetric::Nm1, 3).unwrap();
        assert_eq!(top, vec![(1, 1.0), (3, 1.0), (0, 0.5)]);
        let over = topk_similar(&q, rows.iter().enumerate(), SimilarityMetric::Nm1, 10).unwrap();
        assert_eq!(over.len(), 4);
    }

    #[test]
    fn set_updates_cached_count() {
        let mut v = BitVector::zeros(70);
        v.set(69, true);
        v.set(69, true);
        v.set(3, true);
        assert_eq!(v.count_ones(), 2);
        v.set(3, false);
        assert_eq!(v.count_ones(), 1);
        assert!(v.is_consistent());
    }

    fn arb_pair() -> impl Strategy<Value = (Vec<bool>, Vec<bool>)> {
        (1usize..=128).prop_flat_map(|w| {
            (
                proptest::collection::vec(any::<bool>(), w),
                proptest::collection::vec(any::<bool>(), w),
            )
        })
    }

    proptest! {
        #[test]
        fn metrics_symmetric_and_bounded((a, b) in arb_pair()) {
            let (va, vb) = (BitVector::from_bools(&a), BitVector::from_bools(&b));
            prop_assert!(va.is_consistent() && vb.is_consistent());
            for m in SimilarityMetric::ALL {
                let ab = sim_metric(&va, &vb, m).unwrap();
                let ba = sim_metric(&vb, &va, m).unwrap();
                prop_assert_eq!(ab, ba);
                prop_assert!((0.0..=1.0).contains(&ab));
                prop_assert_eq!(sim_metric(&va, &va, m).unwrap(), 1.0);
            }
            let nm1 = sim_metric(&va, &vb, SimilarityMetric::Nm1).unwrap();
            let jac = sim_metric(&va, &vb, SimilarityMetric::Jaccard).unwrap();
            prop_assert!(nm1 >= jac);
        }
    }
}
