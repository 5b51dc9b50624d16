use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Elu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Elu => elu(z),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative at pre-activation `z`, given the output `a = apply(z)`.
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z >= 0.0 {
                    1.0
                } else {
                    a + 1.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Elu => 0,
            Activation::Sigmoid => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Elu),
            1 => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

/// Exponential linear unit with `alpha = 1`.
pub fn elu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

pub fn elu_derivative(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central(f: fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn fixed_points_and_limits() {
        assert_eq!(elu(0.0), 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(elu(-800.0), -1.0);
        assert_eq!(elu(3.5), 3.5);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!(sigmoid(-30.0) > 0.0 && sigmoid(30.0) < 1.0);
        let mut prev = 0.0;
        for i in -200..=200 {
            let s = sigmoid(i as f64 * 0.1);
            assert!(s > prev);
            prev = s;
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        for &x in &[-4.0, -1.3, -0.2, 0.3, 1.7, 5.0] {
            let (a, n) = (elu_derivative(x), central(elu, x));
            assert!((a - n).abs() / a.abs() < 1e-8, "elu' at {x}: {a} vs {n}");
            let (a, n) = (sigmoid_derivative(x), central(sigmoid, x));
            assert!((a - n).abs() / a.abs() < 1e-8, "sigmoid' at {x}: {a} vs {n}");
        }
    }

    #[test]
    fn derivative_from_output_agrees() {
        for &z in &[-2.0, -0.5, 0.0, 0.5, 2.0] {
            let a = Activation::Elu.apply(z);
            assert!((Activation::Elu.derivative(z, a) - elu_derivative(z)).abs() < 1e-15);
            let a = Activation::Sigmoid.apply(z);
            assert!((Activation::Sigmoid.derivative(z, a) - sigmoid_derivative(z)).abs() < 1e-15);
        }
    }
}
