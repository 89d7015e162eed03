use core::fmt;

use serde::{Deserialize, Serialize};

use super::{BinaryOp, Node, UnaryOp};

/// Exponents within this distance of an integer count as integers.
const INTEGER_EXPONENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainError {
    SqrtOfNegative,
    DivByZero,
    FractionalPowerOfNegative,
    ZeroToNegativePower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Invalid {
    NaN,
    Infinite,
    Domain(DomainError),
}

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Invalid::NaN => f.write_str("NaN"),
            Invalid::Infinite => f.write_str("infinite value"),
            Invalid::Domain(DomainError::SqrtOfNegative) => f.write_str("sqrt of negative"),
            Invalid::Domain(DomainError::DivByZero) => f.write_str("division by zero"),
            Invalid::Domain(DomainError::FractionalPowerOfNegative) => f.write_str("fractional power of negative base"),
            Invalid::Domain(DomainError::ZeroToNegativePower) => f.write_str("zero to negative power"),
        }
    }
}

/// Outcome of evaluating an expression at a point. `Ok` values are always
/// finite.
pub type EvalResult = Result<f64, Invalid>;

fn finite(v: f64) -> EvalResult {
    if v.is_nan() {
        Err(Invalid::NaN)
    } else if v.is_infinite() {
        Err(Invalid::Infinite)
    } else {
        Ok(v)
    }
}

pub(super) fn evaluate(node: &Node, x: &[f64]) -> EvalResult {
    match node {
        Node::Constant(v) => finite(*v),
        Node::Variable(i) => finite(x[*i]),
        Node::Unary(op, child) => {
            let a = evaluate(child, x)?;
            let v = match op {
                UnaryOp::Neg => -a,
                UnaryOp::Sqrt => {
                    if a < 0.0 {
                        return Err(Invalid::Domain(DomainError::SqrtOfNegative));
                    }
                    libm::sqrt(a)
                }
                UnaryOp::Sin => libm::sin(a),
                UnaryOp::Cos => libm::cos(a),
                UnaryOp::Tan => libm::tan(a),
                UnaryOp::Sinh => libm::sinh(a),
                UnaryOp::Cosh => libm::cosh(a),
                UnaryOp::Tanh => libm::tanh(a),
                UnaryOp::Abs => libm::fabs(a),
            };
            finite(v)
        }
        Node::Binary(op, left, right) => {
            let a = evaluate(left, x)?;
            let b = evaluate(right, x)?;
            let v = match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => {
                    if b == 0.0 {
                        return Err(Invalid::Domain(DomainError::DivByZero));
                    }
                    a / b
                }
                BinaryOp::Pow => power(a, b)?,
            };
            finite(v)
        }
    }
}

/// Real-valued power: negative bases need an (almost) integer exponent.
fn power(base: f64, exponent: f64) -> EvalResult {
    let rounded = libm::round(exponent);
    let is_integer = libm::fabs(exponent - rounded) <= INTEGER_EXPONENT_TOL;
    if base == 0.0 && exponent < 0.0 {
        return Err(Invalid::Domain(DomainError::ZeroToNegativePower));
    }
    if base < 0.0 {
        if !is_integer {
            return Err(Invalid::Domain(DomainError::FractionalPowerOfNegative));
        }
        return finite(libm::pow(base, rounded));
    }
    finite(libm::pow(base, exponent))
}
