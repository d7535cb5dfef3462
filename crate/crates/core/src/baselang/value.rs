use std::fmt;

use super::interp::RuntimeError;
use super::Type;

/// Runtime values. Integers are exact 64-bit, reals binary64.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
}

impl Value {
    pub fn ty(self) -> Type {
        match self {
            Value::Int(_) => Type::Int,
            Value::Real(_) => Type::Real,
            Value::Bool(_) => Type::Bool,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_int(self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(v),
            _ => None,
        }
    }

    /// Numeric value as a real; ints promote.
    pub fn as_real(self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(v as f64),
            Value::Real(v) => Some(v),
            Value::Bool(_) => None,
        }
    }

    /// Widens an int to real when `ty` is real; other values pass through.
    pub fn coerce_to(self, ty: Type) -> Value {
        match (self, ty) {
            (Value::Int(v), Type::Real) => Value::Real(v as f64),
            (v, _) => v,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v:?}"),
            Value::Bool(v) => write!(f, "{v}"),
        }
    }
}

fn type_error(op: &str, l: Value, r: Value) -> RuntimeError {
    RuntimeError::TypeMismatch(format!("`{op}` applied to {} and {}", l.ty(), r.ty()))
}

fn checked(v: Option<i64>) -> Result<Value, RuntimeError> {
    v.map(Value::Int).ok_or(RuntimeError::Overflow)
}

/// Evaluates a binary operator on two values.
///
/// `div` truncates toward zero; `mod` takes the sign of the divisor
/// (`x - y * floor(x / y)`). `/` always yields a real.
pub fn apply_binary(op: &str, l: Value, r: Value) -> Result<Value, RuntimeError> {
    use Value::*;
    match op {
        "+" | "-" | "*" => match (l, r) {
            (Int(a), Int(b)) => checked(match op {
                "+" => a.checked_add(b),
                "-" => a.checked_sub(b),
                _ => a.checked_mul(b),
            }),
            _ => {
                let (a, b) = (
                    l.as_real().ok_or_else(|| type_error(op, l, r))?,
                    r.as_real().ok_or_else(|| type_error(op, l, r))?,
                );
                Ok(Real(match op {
                    "+" => a + b,
                    "-" => a - b,
                    _ => a * b,
                }))
            }
        },
        "/" => {
            let (a, b) = (
                l.as_real().ok_or_else(|| type_error(op, l, r))?,
                r.as_real().ok_or_else(|| type_error(op, l, r))?,
            );
            if b == 0.0 {
                return Err(RuntimeError::DivisionByZero);
            }
            Ok(Real(a / b))
        }
        "div" | "mod" => match (l, r) {
            (Int(_), Int(0)) => Err(RuntimeError::DivisionByZero),
            (Int(a), Int(b)) if op == "div" => checked(a.checked_div(b)),
            (Int(a), Int(b)) => {
                let m = a.checked_rem(b).ok_or(RuntimeError::Overflow)?;
                Ok(Int(if m != 0 && (m < 0) != (b < 0) { m + b } else { m }))
            }
            _ => Err(type_error(op, l, r)),
        },
        "<" | "<=" | ">" | ">=" => {
            let ord = match (l, r) {
                (Int(a), Int(b)) => a.partial_cmp(&b),
                _ => l
                    .as_real()
                    .zip(r.as_real())
                    .ok_or_else(|| type_error(op, l, r))
                    .map(|(a, b)| a.partial_cmp(&b))?,
            };
            let ord = ord.ok_or_else(|| RuntimeError::TypeMismatch("comparison with NaN".into()))?;
            Ok(Bool(match op {
                "<" => ord.is_lt(),
                "<=" => ord.is_le(),
                ">" => ord.is_gt(),
                _ => ord.is_ge(),
            }))
        }
        "=" | "<>" => {
            let eq = match (l, r) {
                (Int(a), Int(b)) => a == b,
                (Bool(a), Bool(b)) => a == b,
                (Bool(_), _) | (_, Bool(_)) => return Err(type_error(op, l, r)),
                _ => l.as_real() == r.as_real(),
            };
            Ok(Bool(if op == "=" { eq } else { !eq }))
        }
        "and" | "or" => match (l, r) {
            (Bool(a), Bool(b)) => Ok(Bool(if op == "and" { a && b } else { a || b })),
            _ => Err(type_error(op, l, r)),
        },
        _ => Err(RuntimeError::TypeMismatch(format!("unknown operator `{op}`"))),
    }
}

pub fn apply_unary(op: &str, v: Value) -> Result<Value, RuntimeError> {
    match (op, v) {
        ("not", Value::Bool(b)) => Ok(Value::Bool(!b)),
        ("-", Value::Int(i)) => checked(i.checked_neg()),
        ("-", Value::Real(x)) => Ok(Value::Real(-x)),
        _ => Err(RuntimeError::TypeMismatch(format!(
            "`{op}` applied to {}",
            v.ty()
        ))),
    }
}
