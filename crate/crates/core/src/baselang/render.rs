//! Source rendering of Base-L expressions with minimal parentheses.

use crate::treekit::{Node, Scalar};

fn binary_prec(op: &str) -> u8 {
    match op {
        "or" => 1,
        "and" => 2,
        "=" | "<>" | "<" | "<=" | ">" | ">=" => 4,
        "+" | "-" => 5,
        _ => 6,
    }
}

fn prec(n: &Node) -> u8 {
    match n.alternative() {
        "If" | "Let" => 0,
        "Binary" => binary_prec(n.text("op")),
        "Unary" if n.text("op") == "not" => 3,
        "Unary" => 7,
        "IntLit" if n.int("value") < 0 => 7,
        "RealLit" if n.real("value").is_sign_negative() => 7,
        _ => 8,
    }
}

pub(crate) fn at_least(n: &Node, min: u8) -> String {
    let s = render_exp(n);
    if prec(n) < min {
        format!("({s})")
    } else {
        s
    }
}

/// Renders `exp` as Base-L source that parses back to the same tree.
pub fn render_exp(exp: &Node) -> String {
    match exp.alternative() {
        "Var" => exp.text("name").to_string(),
        "IntLit" | "RealLit" | "BoolLit" => match exp.scalar("value") {
            Scalar::Int(v) if *v < 0 => format!("-{}", v.unsigned_abs()),
            Scalar::Real(v) if v.is_sign_negative() => format!("-{:?}", -v),
            other => other.to_string(),
        },
        "Unary" => {
            let op = exp.text("op");
            if op == "not" {
                format!("not {}", at_least(exp.child("operand"), 3))
            } else {
                let inner = at_least(exp.child("operand"), 8);
                if inner.starts_with('-') {
                    format!("-({inner})")
                } else {
                    format!("-{inner}")
                }
            }
        }
        "Binary" => {
            let op = exp.text("op");
            let p = binary_prec(op);
            let lmin = if p == 4 { 5 } else { p };
            format!(
                "{} {op} {}",
                at_least(exp.child("left"), lmin),
                at_least(exp.child("right"), p + 1)
            )
        }
        "If" => format!(
            "if {} then {} else {}",
            render_exp(exp.child("cond")),
            render_exp(exp.child("then")),
            render_exp(exp.child("else"))
        ),
        "Let" => format!(
            "let {} = {} in {}",
            exp.text("name"),
            render_exp(exp.child("bound")),
            render_exp(exp.child("body"))
        ),
        "Apply" => {
            let args: Vec<String> = exp.list("args").iter().map(render_exp).collect();
            format!("{}({})", exp.text("name"), args.join(", "))
        }
        other => format!("<{other}>"),
    }
}
