//! Partition agreement and feature-selection error rates.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Result, SccError};

/// Plain Rand index: fraction of observation pairs on which two labelings agree.
pub fn rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SccError::ShapeMismatch { expected: format!("{} labels", a.len()), found: format!("{}", b.len()) });
    }
    let n = a.len();
    if n < 2 {
        return Err(SccError::InvalidInput("rand index needs at least two observations".into()));
    }
    let pairs = |c: u64| c * c.saturating_sub(1) / 2;
    let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
    let mut ra: HashMap<usize, u64> = HashMap::new();
    let mut rb: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let both: u64 = joint.values().map(|&c| pairs(c)).sum();
    let in_a: u64 = ra.values().map(|&c| pairs(c)).sum();
    let in_b: u64 = rb.values().map(|&c| pairs(c)).sum();
    let total = pairs(n as u64);
    // agreeing = together in both + apart in both
    let agree = total + 2 * both - in_a - in_b;
    Ok(agree as f64 / total as f64)
}

/// `(FNR, FPR)` of a selected feature set against the informative set.
pub fn fnr_fpr(selected: &[usize], truth: &[usize], p: usize) -> Result<(f64, f64)> {
    let sel: BTreeSet<usize> = selected.iter().copied().collect();
    let tru: BTreeSet<usize> = truth.iter().copied().collect();
    if tru.is_empty() || tru.len() >= p {
        return Err(SccError::InvalidInput("informative set must be non-empty and smaller than p".into()));
    }
    if let Some(&j) = sel.iter().chain(&tru).find(|&&j| j >= p) {
        return Err(SccError::InvalidInput(format!("feature index {j} out of range for p = {p}")));
    }
    let missed = tru.difference(&sel).count();
    let false_pos = sel.difference(&tru).count();
    Ok((missed as f64 / tru.len() as f64, false_pos as f64 / (p - tru.len()) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rand_examples() {
        assert_eq!(rand_index(&[1, 1, 2, 2], &[1, 1, 2, 2]).unwrap(), 1.0);
        assert!((rand_index(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(rand_index(&[1, 1, 2, 3], &[7, 7, 9, 4]).unwrap(), 1.0);
        assert!(rand_index(&[1, 2], &[1]).is_err());
        assert!(rand_index(&[1], &[1]).is_err());
    }

    #[test]
    fn selection_rates() {
        assert_eq!(fnr_fpr(&[0, 1], &[0, 1], 5).unwrap(), (0.0, 0.0));
        assert_eq!(fnr_fpr(&[0, 1, 2, 3, 4], &[0, 1], 5).unwrap(), (0.0, 1.0));
        assert_eq!(fnr_fpr(&[], &[0, 1], 5).unwrap(), (1.0, 0.0));
        assert!(fnr_fpr(&[], &[], 5).is_err());
        assert!(fnr_fpr(&[], &[0, 1], 2).is_err());
        assert!(fnr_fpr(&[7], &[0], 5).is_err());
    }
}
