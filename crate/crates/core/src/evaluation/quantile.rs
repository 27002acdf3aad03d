use serde::{Deserialize, Serialize};

use super::{pearson, EvalError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileBin {
    pub bin: usize,
    pub n: usize,
    pub n_toxic: usize,
    pub score_min: f64,
    pub score_max: f64,
    pub toxic_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileReport {
    pub n: usize,
    pub bins: Vec<QuantileBin>,
    /// Pearson r between score and the 0/1 verdict; `None` when either is constant.
    pub pearson_r: Option<f64>,
}

/// Equal-count score bins in ascending order; the first `n % q` bins hold
/// one extra item.
pub fn quantile_report(annotated: &[(f64, bool)], n_quantiles: usize) -> Result<QuantileReport, EvalError> {
    if n_quantiles < 2 {
        return Err(EvalError::InvalidQuantiles(n_quantiles));
    }
    if annotated.len() < n_quantiles {
        return Err(EvalError::TooFewItems {
            items: annotated.len(),
            quantiles: n_quantiles,
        });
    }
    if annotated.iter().any(|(s, _)| !s.is_finite()) {
        return Err(EvalError::NonFinite("quantile input".into()));
    }
    let mut sorted = annotated.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let base = sorted.len() / n_quantiles;
    let extra = sorted.len() % n_quantiles;
    let mut bins = Vec::with_capacity(n_quantiles);
    let mut start = 0;
    for bin in 0..n_quantiles {
        let len = base + usize::from(bin < extra);
        let slice = &sorted[start..start + len];
        let n_toxic = slice.iter().filter(|(_, t)| *t).count();
        bins.push(QuantileBin {
            bin,
            n: len,
            n_toxic,
            score_min: slice[0].0,
            score_max: slice[len - 1].0,
            toxic_fraction: n_toxic as f64 / len as f64,
        });
        start += len;
    }
    let scores: Vec<f64> = annotated.iter().map(|(s, _)| *s).collect();
    let verdicts: Vec<f64> = annotated.iter().map(|(_, t)| f64::from(u8::from(*t))).collect();
    Ok(QuantileReport {
        n: annotated.len(),
        bins,
        pearson_r: pearson(&scores, &verdicts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfectly_ordered_two_bins() {
        let data = [(0.0, false), (1.0, true), (0.0, false), (1.0, true)];
        let r = quantile_report(&data, 2).unwrap();
        let fractions: Vec<f64> = r.bins.iter().map(|b| b.toxic_fraction).collect();
        assert_eq!(fractions, vec![0.0, 1.0]);
        assert!((r.pearson_r.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn remainder_goes_to_lower_bins() {
        let data: Vec<(f64, bool)> = (0..11).map(|i| (i as f64, i % 2 == 0)).collect();
        let sizes: Vec<usize> = quantile_report(&data, 4).unwrap().bins.iter().map(|b| b.n).collect();
        assert_eq!(sizes, vec![3, 3, 3, 2]);
    }

    #[test]
    fn too_few_items() {
        assert!(matches!(
            quantile_report(&[(0.1, true)], 2),
            Err(EvalError::TooFewItems { items: 1, quantiles: 2 })
        ));
        assert!(matches!(quantile_report(&[(0.1, true)], 1), Err(EvalError::InvalidQuantiles(1))));
    }
}
