use super::Real;

/// `ln(1 + e^x)` without overflow.
pub fn softplus<F: Real>(x: F) -> F {
    x.max(F::zero()) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid<F: Real>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// Binary cross-entropy on a logit.
///
/// Equals `max(z, 0) - z*y + ln(1 + e^-|z|)`; the `y = 1` term is scaled by
/// `positive_weight`.
pub fn bce_with_logits<F: Real>(logit: F, label: bool, positive_weight: F) -> F {
    if label {
        positive_weight * softplus(-logit)
    } else {
        softplus(logit)
    }
}

/// Derivative of [`bce_with_logits`] with respect to the logit.
pub fn bce_grad<F: Real>(logit: F, label: bool, positive_weight: F) -> F {
    if label {
        positive_weight * (sigmoid(logit) - F::one())
    } else {
        sigmoid(logit)
    }
}
