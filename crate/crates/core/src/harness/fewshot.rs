use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// 64-bit FNV-1a, used to give every category its own sampling stream.
fn fnv1a(text: &str) -> u64 {
    text.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Uniform draw of `min(k, n)` ids without replacement, deterministic per
/// `(seed, category)`. Draws for different `k` are independent.
pub fn few_shot_subset(train_ids: &[String], k: usize, seed: u64, category: &str) -> Result<Vec<String>> {
    if k == 0 {
        return Err(Error::Argument("few-shot size must be at least 1".into()));
    }
    if train_ids.is_empty() {
        return Err(Error::Argument(format!("category '{category}' has no training samples")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(category));
    let mut ids = train_ids.to_vec();
    ids.shuffle(&mut rng);
    ids.truncate(k);
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("good_{i:03}")).collect()
    }

    #[test]
    fn exhausts_small_sets() {
        let all = ids(4);
        let mut got = few_shot_subset(&all, 10, 0, "bagel").unwrap();
        got.sort();
        assert_eq!(got, all);
    }

    #[test]
    fn deterministic_and_unique() {
        let all = ids(100);
        for k in [5, 10, 50] {
            let a = few_shot_subset(&all, k, 3, "bagel").unwrap();
            assert_eq!(a, few_shot_subset(&all, k, 3, "bagel").unwrap());
            assert_eq!(a.iter().collect::<HashSet<_>>().len(), k);
        }
    }

    #[test]
    fn golden_subsets() {
        let all = ids(100);
        assert_eq!(
            few_shot_subset(&all, 5, 0, "bagel").unwrap(),
            GOLDEN_SEED_0.iter().map(|s| s.to_string()).collect::<Vec<_>>()
        );
        assert_eq!(
            few_shot_subset(&all, 5, 1, "bagel").unwrap(),
            GOLDEN_SEED_1.iter().map(|s| s.to_string()).collect::<Vec<_>>()
        );
        assert_ne!(
            few_shot_subset(&all, 5, 0, "bagel").unwrap(),
            few_shot_subset(&all, 5, 0, "cable_gland").unwrap()
        );
    }

    const GOLDEN_SEED_0: [&str; 5] = ["good_097", "good_011", "good_091", "good_001", "good_042"];
    const GOLDEN_SEED_1: [&str; 5] = ["good_080", "good_065", "good_087", "good_063", "good_046"];

    #[test]
    fn rejects_bad_input() {
        assert!(few_shot_subset(&ids(3), 0, 0, "a").is_err());
        assert!(few_shot_subset(&[], 5, 0, "a").is_err());
    }
}
