use alloc::string::String;
use core::fmt::Write;

use super::{BinaryOp, Node, UnaryOp};

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(node: &Node) -> u8 {
    match node {
        Node::Constant(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => PREC_NEG,
        Node::Constant(_) | Node::Variable(_) => PREC_ATOM,
        Node::Unary(UnaryOp::Neg, _) => PREC_NEG,
        Node::Unary(..) => PREC_ATOM,
        Node::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => PREC_SUM,
        Node::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => PREC_PRODUCT,
        Node::Binary(BinaryOp::Pow, ..) => PREC_POW,
    }
}

pub(super) fn render(node: &Node) -> String {
    let mut out = String::new();
    write_node(&mut out, node);
    out
}

fn write_child(out: &mut String, child: &Node, parens: bool) {
    if parens {
        out.push('(');
        write_node(out, child);
        out.push(')');
    } else {
        write_node(out, child);
    }
}

fn write_node(out: &mut String, node: &Node) {
    match node {
        Node::Constant(v) => {
            // Shortest round-trip decimal; negative literals only arise from
            // hand-built trees and are grouped so they re-read as one unit.
            if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                let _ = write!(out, "-{}", -v);
            } else {
                let _ = write!(out, "{v}");
            }
        }
        Node::Variable(i) => {
            let _ = write!(out, "x[{i}]");
        }
        Node::Unary(UnaryOp::Neg, child) => {
            out.push('-');
            write_child(out, child, precedence(child) < PREC_NEG || is_negative_constant(child));
        }
        Node::Unary(op, child) => {
            out.push_str(op.name());
            out.push('(');
            write_node(out, child);
            out.push(')');
        }
        Node::Binary(op, left, right) => {
            let (lp, rp) = (precedence(left), precedence(right));
            let (left_parens, right_parens, spaced) = match op {
                BinaryOp::Add | BinaryOp::Sub => (lp < PREC_SUM, rp <= PREC_SUM, true),
                BinaryOp::Mul | BinaryOp::Div => (lp < PREC_PRODUCT, rp <= PREC_PRODUCT, false),
                // The base must be an atom; the exponent is parsed as a
                // signed operand, so only sums and products need grouping.
                BinaryOp::Pow => (lp < PREC_ATOM, rp < PREC_NEG, false),
            };
            write_child(out, left, left_parens);
            if spaced {
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
            } else {
                out.push_str(op.symbol());
            }
            write_child(out, right, right_parens);
        }
    }
}

fn is_negative_constant(node: &Node) -> bool {
    matches!(node, Node::Constant(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()))
}
