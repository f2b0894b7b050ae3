//! Stratified, patient-level train/validation splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::label::DiagnosisLabel;

/// Validation patients per class.
///
/// Each class first gets `⌊n_c · f⌋`; the shortfall against `round(N · f)` is
/// then handed out one patient at a time to the classes with the largest
/// fractional remainders (ties to the lower class index).
pub fn val_counts(class_counts: [usize; 3], val_fraction: f64) -> [usize; 3] {
    let total: usize = class_counts.iter().sum();
    let target = (total as f64 * val_fraction).round() as usize;
    let exact = class_counts.map(|n| n as f64 * val_fraction);
    let mut counts = exact.map(|x| x.floor() as usize);
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut missing = target.saturating_sub(counts.iter().sum());
    for c in order {
        if missing == 0 {
            break;
        }
        if counts[c] < class_counts[c] {
            counts[c] += 1;
            missing -= 1;
        }
    }
    counts
}

/// Splits item indices into `(train, val)`, both in ascending order.
///
/// Classes absent from `labels` are ignored; a class with a single patient
/// cannot be stratified and is an error.
pub fn split_indices(
    labels: &[DiagnosisLabel],
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "val_fraction must lie in (0, 1), got {val_fraction}"
        )));
    }
    let mut by_class: [Vec<usize>; 3] = Default::default();
    for (i, l) in labels.iter().enumerate() {
        by_class[l.index()].push(i);
    }
    for label in DiagnosisLabel::ALL {
        let n = by_class[label.index()].len();
        if n == 1 {
            return Err(Error::Unstratifiable {
                class: label.name(),
                count: n,
            });
        }
    }
    let quotas = val_counts(std::array::from_fn(|c| by_class[c].len()), val_fraction);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (members, quota) in by_class.iter_mut().zip(quotas) {
        members.shuffle(&mut rng);
        val.extend_from_slice(&members[..quota]);
        train.extend_from_slice(&members[quota..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Partitions owned items using [`split_indices`].
pub fn split_dataset<T>(
    items: Vec<T>,
    label_of: impl Fn(&T) -> DiagnosisLabel,
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    let labels: Vec<_> = items.iter().map(&label_of).collect();
    let (_, val_idx) = split_indices(&labels, val_fraction, seed)?;
    let mut is_val = vec![false; items.len()];
    for i in val_idx {
        is_val[i] = true;
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (item, v) in items.into_iter().zip(is_val) {
        if v {
            val.push(item);
        } else {
            train.push(item);
        }
    }
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use DiagnosisLabel::*;

    #[test]
    fn dataset_composition_quota() {
        assert_eq!(val_counts([171, 60, 76], 0.3), [51, 18, 23]);
        assert_eq!(val_counts([40, 40, 40], 0.3), [12, 12, 12]);
    }

    #[test]
    fn rejects_singleton_class_and_bad_fraction() {
        let labels = [Covid, Covid, Cap];
        assert!(matches!(
            split_indices(&labels, 0.3, 0),
            Err(Error::Unstratifiable { class: "CAP", count: 1 })
        ));
        assert!(split_indices(&[Covid, Covid], 0.0, 0).is_err());
        assert!(split_indices(&[Covid, Covid], 1.0, 0).is_err());
    }

    #[test]
    fn absent_class_is_fine() {
        let labels = vec![Normal; 10];
        let (t, v) = split_indices(&labels, 0.3, 1).unwrap();
        assert_eq!((t.len(), v.len()), (7, 3));
    }
}
