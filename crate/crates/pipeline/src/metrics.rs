//! Disaggregation accuracy measures.
//!
//! State labels are compared after putting states in canonical order: state
//! `j` gets the rank of its posterior-mean power among the device's states.

use anyhow::{ensure, Result};

pub fn rmse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    ensure!(estimate.len() == truth.len(), "series lengths differ ({} vs {})", estimate.len(), truth.len());
    ensure!(!truth.is_empty(), "empty series");
    let ss: f64 = estimate.iter().zip(truth).map(|(e, t)| (e - t) * (e - t)).sum();
    Ok((ss / truth.len() as f64).sqrt())
}

/// `rank[j]`: position of state `j` when states are sorted by increasing
/// level; ties keep index order.
pub fn canonical_rank(levels: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]).then(a.cmp(&b)));
    let mut rank = vec![0; levels.len()];
    for (r, &j) in order.iter().enumerate() {
        rank[j] = r;
    }
    rank
}

/// Rank of the level closest to `y`.
pub fn nearest_rank(y: f64, levels: &[f64]) -> usize {
    let rank = canonical_rank(levels);
    let mut best = 0;
    for j in 1..levels.len() {
        if (y - levels[j]).abs() < (y - levels[best]).abs() {
            best = j;
        }
    }
    rank[best]
}

pub fn state_accuracy(estimate: &[usize], truth: &[usize]) -> Result<f64> {
    ensure!(estimate.len() == truth.len(), "label lengths differ ({} vs {})", estimate.len(), truth.len());
    ensure!(!truth.is_empty(), "empty label series");
    Ok(estimate.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_by_hand() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 4.0]).unwrap(), 2f64.sqrt());
        assert!(rmse(&[1.0], &[]).is_err());
    }

    #[test]
    fn rank_orders_by_level() {
        assert_eq!(canonical_rank(&[300.0, 0.0, 150.0]), vec![2, 0, 1]);
        assert_eq!(canonical_rank(&[1.0, 1.0]), vec![0, 1]);
        assert_eq!(nearest_rank(140.0, &[300.0, 0.0, 150.0]), 1);
        assert_eq!(nearest_rank(1e6, &[300.0, 0.0, 150.0]), 2);
    }

    #[test]
    fn relabelled_states_score_perfectly_after_ranking() {
        let levels = [50.0, 0.0];
        let raw = [0, 1, 1, 0];
        let rank = canonical_rank(&levels);
        let est: Vec<usize> = raw.iter().map(|&j| rank[j]).collect();
        assert_eq!(state_accuracy(&est, &[1, 0, 0, 1]).unwrap(), 1.0);
        assert_eq!(state_accuracy(&est, &[0, 0, 0, 0]).unwrap(), 0.5);
    }
}
