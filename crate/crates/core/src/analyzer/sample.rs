use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Algorithm R over a stream: a uniform sample of `min(k, n)` items, returned
/// in input order. Depends only on (stream, k, seed).
pub fn reservoir<T, I: IntoIterator<Item = T>>(items: I, k: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slots: Vec<(usize, T)> = Vec::with_capacity(k.min(1 << 16));
    if k == 0 {
        return Vec::new();
    }
    for (i, item) in items.into_iter().enumerate() {
        if i < k {
            slots.push((i, item));
        } else {
            let j = rng.random_range(0..=i);
            if j < k {
                slots[j] = (i, item);
            }
        }
    }
    slots.sort_unstable_by_key(|(i, _)| *i);
    slots.into_iter().map(|(_, t)| t).collect()
}

/// Sorted indices of a reservoir sample over `n` items.
pub fn sample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    reservoir(0..n, k, seed)
}

/// Reservoir sample of a slice, cloned, in input order.
pub fn sample<T: Clone>(items: &[T], k: usize, seed: u64) -> Vec<T> {
    sample_indices(items.len(), k, seed).into_iter().map(|i| items[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whole_population_when_k_is_large() {
        assert_eq!(sample(&[3, 1, 2], 5, 9), [3, 1, 2]);
        assert_eq!(sample(&[3, 1, 2], 3, 9), [3, 1, 2]);
        assert!(sample::<u8>(&[], 3, 9).is_empty());
    }

    #[test]
    fn same_seed_same_sample() {
        let items: Vec<u32> = (0..500).collect();
        assert_eq!(sample(&items, 20, 4), sample(&items, 20, 4));
        assert_ne!(sample(&items, 20, 4), sample(&items, 20, 5));
        let s = sample(&items, 20, 4);
        assert_eq!(s.len(), 20);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn inclusion_frequency_is_k_over_n() {
        let (n, k, trials) = (50usize, 10usize, 1000u64);
        let mut hits = vec![0u32; n];
        for seed in 0..trials {
            for i in sample_indices(n, k, seed) {
                hits[i] += 1;
            }
        }
        let expected = k as f64 / n as f64;
        for (i, h) in hits.iter().enumerate() {
            let freq = f64::from(*h) / trials as f64;
            assert!((freq - expected).abs() <= 0.05, "item {i}: {freq}");
        }
    }
}
