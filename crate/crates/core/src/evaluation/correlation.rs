use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Column order for well-known providers; any others follow alphabetically.
pub const CANONICAL_PROVIDER_ORDER: [&str; 4] = ["etox", "detoxify", "mutox", "asr-mutox"];

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn has_variance(v: &[f64]) -> bool {
    v.iter().any(|x| *x != v[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub providers: Vec<String>,
    pub n: usize,
    /// Row-major, `providers.len()` squared.
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.providers.iter().position(|p| p == a)?;
        let j = self.providers.iter().position(|p| p == b)?;
        Some(self.values[i][j])
    }
}

fn canonical_rank(provider: &str) -> (usize, String) {
    let rank = CANONICAL_PROVIDER_ORDER
        .iter()
        .position(|p| *p == provider)
        .unwrap_or(CANONICAL_PROVIDER_ORDER.len());
    (rank, provider.to_string())
}

/// Pearson matrix over id-aligned score vectors, one per provider.
pub fn pearson_matrix(score_sets: &[(String, Vec<f64>)]) -> Result<CorrelationMatrix, EvalError> {
    if score_sets.len() < 2 {
        return Err(EvalError::TooFewProviders);
    }
    let n = score_sets[0].1.len();
    for (provider, v) in score_sets {
        if v.len() != n {
            return Err(EvalError::MisalignedProvider {
                provider: provider.clone(),
                expected: n,
                found: v.len(),
            });
        }
        if v.iter().any(|s| !s.is_finite()) {
            return Err(EvalError::NonFinite(provider.clone()));
        }
    }
    if n == 0 {
        return Err(EvalError::NoSharedIds);
    }
    for (provider, v) in score_sets {
        if !has_variance(v) {
            return Err(EvalError::ZeroVariance(provider.clone()));
        }
    }
    let mut order: Vec<usize> = (0..score_sets.len()).collect();
    order.sort_by_key(|&i| canonical_rank(&score_sets[i].0));
    let k = order.len();
    let mut values = vec![vec![0.0; k]; k];
    for a in 0..k {
        values[a][a] = 1.0;
        for b in a + 1..k {
            let r = pearson(&score_sets[order[a]].1, &score_sets[order[b]].1).ok_or_else(|| {
                EvalError::ZeroVariance(score_sets[order[a]].0.clone())
            })?;
            values[a][b] = r;
            values[b][a] = r;
        }
    }
    Ok(CorrelationMatrix {
        providers: order.iter().map(|&i| score_sets[i].0.clone()).collect(),
        n,
        values,
    })
}

/// Restricts each provider's scores to the ids scored by every provider,
/// in ascending id order.
pub fn align_scores(providers: &[(String, HashMap<String, f64>)]) -> Result<Vec<(String, Vec<f64>)>, EvalError> {
    let Some((_, first)) = providers.first() else {
        return Err(EvalError::TooFewProviders);
    };
    let shared: BTreeSet<&String> = first
        .keys()
        .filter(|id| providers.iter().all(|(_, m)| m.contains_key(*id)))
        .collect();
    if shared.is_empty() {
        return Err(EvalError::NoSharedIds);
    }
    Ok(providers
        .iter()
        .map(|(p, m)| (p.clone(), shared.iter().map(|id| m[*id]).collect()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_and_negation() {
        let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let z: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &z).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn matrix_layout_follows_canonical_order() {
        let sets = vec![
            ("mutox".to_string(), vec![0.1, 0.5, 0.9, 0.3]),
            ("zeta".to_string(), vec![0.2, 0.1, 0.4, 0.3]),
            ("asr-mutox".to_string(), vec![0.2, 0.4, 0.8, 0.3]),
            ("etox".to_string(), vec![0.0, 1.0, 1.0, 0.0]),
            ("detoxify".to_string(), vec![0.3, 0.6, 0.7, 0.1]),
        ];
        let m = pearson_matrix(&sets).unwrap();
        assert_eq!(m.providers, ["etox", "detoxify", "mutox", "asr-mutox", "zeta"]);
        for i in 0..5 {
            assert_eq!(m.values[i][i], 1.0);
            for j in 0..5 {
                assert_eq!(m.values[i][j], m.values[j][i]);
            }
        }
    }

    #[test]
    fn zero_variance_names_provider() {
        let sets = vec![("a".to_string(), vec![0.1, 0.2]), ("flat".to_string(), vec![0.5, 0.5])];
        assert!(matches!(pearson_matrix(&sets), Err(EvalError::ZeroVariance(p)) if p == "flat"));
    }

    #[test]
    fn alignment_uses_intersection() {
        let a: HashMap<String, f64> = [("x".into(), 0.1), ("y".into(), 0.2), ("z".into(), 0.3)].into();
        let b: HashMap<String, f64> = [("z".into(), 0.9), ("x".into(), 0.8)].into();
        let aligned = align_scores(&[("a".into(), a), ("b".into(), b)]).unwrap();
        assert_eq!(aligned[0].1, vec![0.1, 0.3]);
        assert_eq!(aligned[1].1, vec![0.8, 0.9]);
    }
}
