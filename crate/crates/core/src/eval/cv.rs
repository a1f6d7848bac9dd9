//! Cross-validation fold assignment.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::child_rng;

/// Fold label in `0..k` for each of `n` rows: a seeded shuffle, then
/// position modulo `k`.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || n < k {
        return Err(Error::invalid(format!("cannot split {n} rows into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut child_rng(seed, &[0x6b66_6f6c_64]));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    Ok(fold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_and_deterministic() {
        let f = kfold_split(23, 5, 3).unwrap();
        assert_eq!(f, kfold_split(23, 5, 3).unwrap());
        assert_ne!(f, kfold_split(23, 5, 4).unwrap());
        for k in 0..5 {
            let c = f.iter().filter(|&&x| x == k).count();
            assert!(c == 4 || c == 5);
        }
        assert!(kfold_split(4, 5, 0).is_err());
        assert!(kfold_split(10, 1, 0).is_err());
    }
}
