use super::{EvalError, LabeledScores};

/// Mann-Whitney AUC with average ranks for tied scores.
///
/// `(sum of positive ranks - n+(n+ + 1)/2) / (n+ * n-)`, which equals the
/// fraction of (positive, negative) pairs ordered correctly with ties
/// counting one half.
pub fn rank_auc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            ids: scores.len(),
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut positive_rank_sum = 0.0f64;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start..end (0-based) share the mean 1-based rank.
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let tied_pos = order[start..end].iter().filter(|&&i| labels[i]).count();
        positive_rank_sum += avg_rank * tied_pos as f64;
        start = end;
    }
    let n_pos_f = n_pos as f64;
    Ok((positive_rank_sum - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

pub fn roc_auc(data: &LabeledScores) -> Result<f64, EvalError> {
    rank_auc(data.scores(), data.labels())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn auc(scores: &[f64], labels: &[u8]) -> f64 {
        let labels: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
        roc_auc(&LabeledScores::from_pairs(scores.to_vec(), labels).unwrap()).unwrap()
    }

    #[test]
    fn perfect_separation() {
        assert_eq!(auc(&[0.9, 0.8, 0.3, 0.2], &[1, 1, 0, 0]), 1.0);
    }

    #[test]
    fn three_of_four_pairs() {
        assert_eq!(auc(&[0.9, 0.8, 0.7, 0.1], &[1, 0, 1, 0]), 0.75);
    }

    #[test]
    fn all_tied_is_half() {
        assert_eq!(auc(&[0.4; 6], &[1, 0, 1, 0, 0, 1]), 0.5);
    }

    #[test]
    fn inverted_scores() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[1, 1, 0, 0]), 0.0);
    }

    #[test]
    fn single_class_is_an_error() {
        let d = LabeledScores::from_pairs(vec![0.1, 0.2], vec![true, true]).unwrap();
        assert!(matches!(roc_auc(&d), Err(EvalError::SingleClass)));
    }
}
