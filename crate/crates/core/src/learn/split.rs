use super::LearnError;
use crate::rng::{rng_for, stream};
use rand::seq::SliceRandom;
use std::collections::BTreeMap;

fn members(y: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in y.iter().enumerate() {
        m.entry(c).or_default().push(i);
    }
    m
}

/// Per class, `round(count · test_fraction)` rows (at least one, and never the
/// whole class) go to the test set. Both index lists are sorted.
pub fn stratified_split(y: &[usize], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), LearnError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(LearnError::InvalidHyperparameter(format!("test_fraction {test_fraction} outside (0,1)")));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut idx) in members(y) {
        if idx.len() < 2 {
            return Err(LearnError::ClassTooSmall { class, count: idx.len(), needed: 2 });
        }
        idx.shuffle(&mut rng_for(seed, stream::SPLIT, class as u64));
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Fold id for each row: each class is shuffled and dealt round-robin, the
/// deal continuing across classes so fold sizes differ by at most one.
pub fn stratified_folds(y: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>, LearnError> {
    if folds < 2 {
        return Err(LearnError::InvalidHyperparameter(format!("folds must be ≥ 2, got {folds}")));
    }
    let mut fold_of = vec![0; y.len()];
    let mut next = 0;
    for (class, mut idx) in members(y) {
        if idx.len() < folds {
            return Err(LearnError::ClassTooSmall { class, count: idx.len(), needed: folds });
        }
        idx.shuffle(&mut rng_for(seed, stream::FOLDS, class as u64));
        for i in idx {
            fold_of[i] = next;
            next = (next + 1) % folds;
        }
    }
    Ok(fold_of)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_counts_per_class() {
        let y: Vec<usize> = (0..30).map(|i| usize::from(i >= 10)).collect();
        let (train, test) = stratified_split(&y, 0.2, 1).unwrap();
        let t0 = test.iter().filter(|&&i| y[i] == 0).count();
        let t1 = test.iter().filter(|&&i| y[i] == 1).count();
        assert_eq!((t0, t1), (2, 4));
        assert_eq!(train.len() + test.len(), 30);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort();
        assert_eq!(all, (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_seeded() {
        let y: Vec<usize> = (0..50).map(|i| i % 3).collect();
        assert_eq!(stratified_split(&y, 0.2, 7).unwrap(), stratified_split(&y, 0.2, 7).unwrap());
        assert_ne!(stratified_split(&y, 0.2, 7).unwrap(), stratified_split(&y, 0.2, 8).unwrap());
    }

    #[test]
    fn split_errors() {
        assert!(matches!(stratified_split(&[0, 0, 1], 0.2, 0), Err(LearnError::ClassTooSmall { class: 1, .. })));
        assert!(stratified_split(&[0, 0, 1, 1], 1.0, 0).is_err());
    }

    #[test]
    fn folds_partition_rows() {
        let y: Vec<usize> = (0..97).map(|i| i % 3).collect();
        let f = stratified_folds(&y, 10, 3).unwrap();
        let mut sizes = [0; 10];
        for &k in &f {
            sizes[k] += 1;
        }
        assert_eq!(sizes.iter().sum::<usize>(), 97);
        assert!(sizes.iter().all(|&s| (9..=11).contains(&s)));
        assert!(stratified_folds(&[0, 0, 1, 1], 3, 0).is_err());
    }
}
