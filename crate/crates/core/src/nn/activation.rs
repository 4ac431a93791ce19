use serde::{Deserialize, Serialize};

/// SELU scale.
pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
/// SELU negative-branch coefficient.
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Selu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Selu => {
                if z > 0.0 {
                    SELU_LAMBDA * z
                } else {
                    SELU_LAMBDA * SELU_ALPHA * z.exp_m1()
                }
            }
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative given both the pre-activation `z` and `a = apply(z)`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Selu => {
                if z > 0.0 {
                    SELU_LAMBDA
                } else {
                    a + SELU_LAMBDA * SELU_ALPHA
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
        }
    }

    /// Tag used by the checkpoint format.
    pub fn tag(self) -> u8 {
        match self {
            Activation::Linear => 0,
            Activation::Selu => 1,
            Activation::Sigmoid => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Linear),
            1 => Some(Activation::Selu),
            2 => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // scalar reference written from the defining formula
    #[allow(clippy::excessive_precision)]
    fn selu_ref(x: f64) -> f64 {
        let lambda = 1.0507009873554804934193349852946;
        let alpha = 1.6732632423543772848170429916717;
        if x > 0.0 {
            lambda * x
        } else {
            lambda * (alpha * x.exp() - alpha)
        }
    }

    #[test]
    fn selu_values() {
        assert_eq!(Activation::Selu.apply(0.0), 0.0);
        assert!((Activation::Selu.apply(1.0) - 1.0507009873554805).abs() < 1e-15);
        for i in -50..=50 {
            let x = i as f64 / 10.0;
            assert!((Activation::Selu.apply(x) - selu_ref(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn selu_monotone_on_grid() {
        let mut prev = f64::NEG_INFINITY;
        for i in -500..=500 {
            let v = Activation::Selu.apply(i as f64 / 100.0);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for act in [Activation::Linear, Activation::Selu, Activation::Sigmoid] {
            for &z in &[-3.0, -0.7, -1e-3, 0.4, 2.5] {
                let h = 1e-6;
                let fd = (act.apply(z + h) - act.apply(z - h)) / (2.0 * h);
                let an = act.derivative(z, act.apply(z));
                assert!((fd - an).abs() < 1e-7, "{act:?} at {z}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn sigmoid_and_softplus_are_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((softplus(1000.0) - 1000.0).abs() < 1e-12);
        assert!(softplus(-1000.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn tags_round_trip() {
        for act in [Activation::Linear, Activation::Selu, Activation::Sigmoid] {
            assert_eq!(Activation::from_tag(act.tag()), Some(act));
        }
        assert_eq!(Activation::from_tag(9), None);
    }
}
