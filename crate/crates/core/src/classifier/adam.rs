use serde::{Deserialize, Serialize};

use super::{ClassifierError, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, one slot per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub m: Vec<F>,
    pub v: Vec<F>,
}

impl<F: Real> AdamState<F> {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![F::zero(); len],
            v: vec![F::zero(); len],
        }
    }
}

/// One bias-corrected Adam step at step index `t >= 1`.
pub fn adam_update<F: Real>(
    state: &mut AdamState<F>,
    params: &mut [F],
    grads: &[F],
    t: u64,
    config: &AdamConfig,
) -> Result<(), ClassifierError> {
    if t == 0 {
        return Err(ClassifierError::InvalidStep);
    }
    for len in [grads.len(), state.m.len(), state.v.len()] {
        if len != params.len() {
            return Err(ClassifierError::ShapeMismatch {
                expected: params.len(),
                found: len,
            });
        }
    }
    let b1 = F::lit(config.beta1);
    let b2 = F::lit(config.beta2);
    let one = F::one();
    let lr = F::lit(config.learning_rate);
    let eps = F::lit(config.epsilon);
    let exp = i32::try_from(t).unwrap_or(i32::MAX);
    let c1 = one - F::lit(config.beta1.powi(exp));
    let c2 = one - F::lit(config.beta2.powi(exp));
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut state = AdamState::<f64>::new(3);
        let mut params = vec![0.5, -1.0, 2.0];
        adam_update(&mut state, &mut params, &[0.0; 3], 1, &AdamConfig::default()).unwrap();
        assert_eq!(params, vec![0.5, -1.0, 2.0]);
        assert_eq!(state, AdamState::new(3));
    }

    #[test]
    fn first_step_bias_correction() {
        let mut state = AdamState::<f64>::new(1);
        let mut params = vec![0.0];
        adam_update(&mut state, &mut params, &[1.0], 1, &AdamConfig::default()).unwrap();
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((params[0] - expected).abs() < 1e-15, "{}", params[0]);
        assert!((params[0] + 0.000_999_999_990).abs() < 1e-14);
    }

    #[test]
    fn coordinates_are_independent() {
        let mut state = AdamState::<f64>::new(2);
        let mut params = vec![1.0, 1.0];
        adam_update(&mut state, &mut params, &[1.0, 0.0], 1, &AdamConfig::default()).unwrap();
        assert!(params[0] < 1.0);
        assert_eq!(params[1], 1.0);
    }

    #[test]
    fn step_zero_and_shape_errors() {
        let mut state = AdamState::<f64>::new(2);
        let mut params = vec![0.0; 2];
        assert!(matches!(
            adam_update(&mut state, &mut params, &[0.0; 2], 0, &AdamConfig::default()),
            Err(ClassifierError::InvalidStep)
        ));
        assert!(matches!(
            adam_update(&mut state, &mut params, &[0.0; 3], 1, &AdamConfig::default()),
            Err(ClassifierError::ShapeMismatch { .. })
        ));
    }
}
