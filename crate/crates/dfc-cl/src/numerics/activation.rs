//! Elementwise activation functions and their derivatives.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
    /// Identity, used for readout layers whose output feeds a softmax loss.
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply_scalar(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => sigmoid(v),
            Activation::Linear => v,
        }
    }

    /// Derivative expressed in terms of the pre-activation value.
    #[inline]
    pub fn derivative_scalar(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = v.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(v);
                s * (1.0 - s)
            }
            Activation::Linear => 1.0,
        }
    }

    pub fn apply(self, v: &Matrix) -> Matrix {
        v.map(|x| self.apply_scalar(x))
    }

    pub fn derivative(self, v: &Matrix) -> Matrix {
        v.map(|x| self.derivative_scalar(x))
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Linear => "linear",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Activation {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "linear" => Ok(Activation::Linear),
            other => Err(crate::error::Error::InvalidArgument(format!(
                "unknown activation `{other}`"
            ))),
        }
    }
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::matrix::Matrix;

    #[test]
    fn tanh_odd_at_origin() {
        let v = Matrix::from_rows(&[vec![0.0]]).unwrap();
        assert_eq!(Activation::Tanh.apply(&v).get(0, 0), 0.0);
    }

    #[test]
    fn relu_definition() {
        let v = Matrix::from_rows(&[vec![-2.0, 3.0]]).unwrap();
        let out = Activation::Relu.apply(&v);
        assert_eq!(out.row(0), &[0.0, 3.0]);
    }

    #[test]
    fn sigmoid_midpoint() {
        let v = Matrix::from_rows(&[vec![0.0]]).unwrap();
        assert_eq!(Activation::Sigmoid.apply(&v).get(0, 0), 0.5);
    }

    #[test]
    fn output_shape_matches_input() {
        let v = Matrix::zeros(3, 4);
        for kind in [Activation::Tanh, Activation::Relu, Activation::Sigmoid] {
            assert_eq!(kind.apply(&v).shape(), (3, 4));
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let eps = 1e-6;
        for kind in [Activation::Tanh, Activation::Sigmoid] {
            for &x in &[-1.7, -0.3, 0.0, 0.4, 2.1] {
                let fd = (kind.apply_scalar(x + eps) - kind.apply_scalar(x - eps)) / (2.0 * eps);
                assert!((fd - kind.derivative_scalar(x)).abs() < 1e-8, "{kind} at {x}");
            }
        }
    }
}
