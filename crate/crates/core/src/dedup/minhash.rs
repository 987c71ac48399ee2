use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DedupError;
use crate::hash::seeded_hash;
use crate::retriever::tokenize;

/// Mersenne prime 2^61 - 1, the modulus of the permutation family.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

/// Sorted, distinct shingle hashes of one document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShingleSet {
    hashes: Vec<u64>,
}

impl ShingleSet {
    pub fn from_hashes(mut hashes: Vec<u64>) -> Self {
        hashes.sort_unstable();
        hashes.dedup();
        ShingleSet { hashes }
    }

    pub fn hashes(&self) -> &[u64] {
        &self.hashes
    }

    pub fn len(&self) -> usize {
        self.hashes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hashes.is_empty()
    }
}

/// Word n-gram shingles. Windows are joined with single spaces before
/// hashing, so whitespace and case differences do not matter. Texts shorter
/// than `n` tokens give one shingle of all their tokens; no tokens gives the
/// empty set.
pub fn shingles(text: &str, n: usize, seed: u64) -> ShingleSet {
    let tokens = tokenize(text);
    let n = n.max(1);
    if tokens.is_empty() {
        return ShingleSet::default();
    }
    if tokens.len() < n {
        return ShingleSet::from_hashes(vec![seeded_hash(tokens.join(" ").as_bytes(), seed)]);
    }
    let mut buf = String::new();
    let hashes = tokens
        .windows(n)
        .map(|w| {
            buf.clear();
            for (i, t) in w.iter().enumerate() {
                if i > 0 {
                    buf.push(' ');
                }
                buf.push_str(t);
            }
            seeded_hash(buf.as_bytes(), seed)
        })
        .collect();
    ShingleSet::from_hashes(hashes)
}

/// |A ∩ B| / |A ∪ B|. Two empty sets count as identical.
pub fn exact_jaccard(a: &ShingleSet, b: &ShingleSet) -> f64 {
    let (x, y) = (a.hashes(), b.hashes());
    if x.is_empty() && y.is_empty() {
        return 1.0;
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter as f64 / (x.len() + y.len() - inter) as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    seed: u64,
    values: Vec<u64>,
}

impl MinHashSignature {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn num_perm(&self) -> usize {
        self.values.len()
    }
}

/// Fraction of equal components.
pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64, DedupError> {
    if a.seed != b.seed || a.values.len() != b.values.len() || a.values.is_empty() {
        return Err(DedupError::SignatureMismatch(a.values.len(), b.values.len()));
    }
    let eq = a.values.iter().zip(&b.values).filter(|(x, y)| x == y).count();
    Ok(eq as f64 / a.values.len() as f64)
}

#[inline]
fn mod_mersenne(x: u128) -> u64 {
    let p = MERSENNE_61 as u128;
    let mut r = (x & p) + (x >> 61);
    r = (r & p) + (r >> 61);
    if r >= p {
        r -= p;
    }
    r as u64
}

/// Family of `num_perm` universal hashes h -> (a*h + b) mod (2^61 - 1),
/// coefficients drawn from ChaCha8 seeded with the global seed.
#[derive(Debug, Clone)]
pub struct MinHasher {
    seed: u64,
    coeffs: Vec<(u64, u64)>,
}

impl MinHasher {
    pub fn new(num_perm: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..num_perm)
            .map(|_| (rng.random_range(1..MERSENNE_61), rng.random_range(0..MERSENNE_61)))
            .collect();
        MinHasher { seed, coeffs }
    }

    pub fn num_perm(&self) -> usize {
        self.coeffs.len()
    }

    pub fn signature(&self, set: &ShingleSet) -> Result<MinHashSignature, DedupError> {
        if set.is_empty() {
            return Err(DedupError::NoShingles);
        }
        let mut values = vec![u64::MAX; self.coeffs.len()];
        for &h in set.hashes() {
            let h = mod_mersenne(h as u128) as u128;
            for (v, &(a, b)) in values.iter_mut().zip(&self.coeffs) {
                let p = mod_mersenne(a as u128 * h + b as u128);
                if p < *v {
                    *v = p;
                }
            }
        }
        Ok(MinHashSignature { seed: self.seed, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn window_counts() {
        let ten = "a b c d e f g h i j";
        assert_eq!(shingles(ten, 10, 0).len(), 1);
        assert_eq!(shingles("a b c d e f g h i j k l", 10, 0).len(), 3);
        assert_eq!(shingles("a b c", 10, 0).len(), 1);
        assert!(shingles("  ,, ", 10, 0).is_empty());
    }

    #[test]
    fn whitespace_runs_do_not_matter() {
        let a = "the quick brown fox jumps over the lazy dog again and again";
        let b = "the  quick\tbrown\n\nfox jumps   over the lazy dog again and  again";
        assert_eq!(shingles(a, 10, 3), shingles(b, 10, 3));
        // Independent oracle: windows built from a plain whitespace split.
        let words: Vec<&str> = a.split_whitespace().collect();
        let oracle: Vec<u64> = words.windows(10).map(|w| seeded_hash(w.join(" ").as_bytes(), 3)).collect();
        assert_eq!(shingles(b, 10, 3), ShingleSet::from_hashes(oracle));
    }

    #[test]
    fn empty_set_has_no_signature() {
        let h = MinHasher::new(16, 0);
        assert_eq!(h.signature(&ShingleSet::default()), Err(DedupError::NoShingles));
    }

    #[test]
    fn mersenne_reduction_matches_modulo() {
        for x in [0u128, 1, MERSENNE_61 as u128, MERSENNE_61 as u128 + 5, u64::MAX as u128, (u64::MAX as u128) * (u64::MAX as u128 >> 3)] {
            assert_eq!(mod_mersenne(x) as u128, x % MERSENNE_61 as u128);
        }
    }

    #[test]
    fn mismatched_signatures_error() {
        let s = ShingleSet::from_hashes(vec![1, 2, 3]);
        let a = MinHasher::new(8, 1).signature(&s).unwrap();
        let b = MinHasher::new(8, 2).signature(&s).unwrap();
        let c = MinHasher::new(16, 1).signature(&s).unwrap();
        assert!(estimate_jaccard(&a, &b).is_err());
        assert!(estimate_jaccard(&a, &c).is_err());
        assert_eq!(estimate_jaccard(&a, &a), Ok(1.0));
    }

    #[test]
    fn disjoint_sets_estimate_zero() {
        let h = MinHasher::new(128, 9);
        let a = h.signature(&ShingleSet::from_hashes((0..200).map(|i| seeded_hash(&[i as u8, 1], 0)).collect())).unwrap();
        let b = h.signature(&ShingleSet::from_hashes((0..200).map(|i| seeded_hash(&[i as u8, 2], 0)).collect())).unwrap();
        assert_eq!(estimate_jaccard(&a, &b).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn jaccard_bounds_and_symmetry(a in proptest::collection::vec(0u64..64, 1..40), b in proptest::collection::vec(0u64..64, 1..40)) {
            let (sa, sb) = (ShingleSet::from_hashes(a), ShingleSet::from_hashes(b));
            let j = exact_jaccard(&sa, &sb);
            prop_assert!((0.0..=1.0).contains(&j));
            prop_assert_eq!(j, exact_jaccard(&sb, &sa));
            prop_assert_eq!(exact_jaccard(&sa, &sa), 1.0);
            let h = MinHasher::new(32, 5);
            let e = estimate_jaccard(&h.signature(&sa).unwrap(), &h.signature(&sb).unwrap()).unwrap();
            prop_assert!((0.0..=1.0).contains(&e));
        }

        #[test]
        fn signature_is_deterministic(a in proptest::collection::vec(any::<u64>(), 1..30), seed in any::<u64>()) {
            let s = ShingleSet::from_hashes(a);
            prop_assert_eq!(MinHasher::new(16, seed).signature(&s).unwrap(), MinHasher::new(16, seed).signature(&s).unwrap());
        }

        #[test]
        fn identical_sets_estimate_one(a in proptest::collection::vec(any::<u64>(), 1..30)) {
            let s = ShingleSet::from_hashes(a);
            let h = MinHasher::new(16, 0);
            prop_assert_eq!(estimate_jaccard(&h.signature(&s).unwrap(), &h.signature(&s.clone()).unwrap()).unwrap(), 1.0);
        }
    }
}
