//! Symbolic objective functions over `x[0..D-1]`.
//!
//! The surface syntax is a single line of Python-style arithmetic:
//! `x[i]` variables, `+ - * / **`, and calls such as `sin(...)`.
//! Expressions are stored exactly as parsed (no folding or simplification),
//! so rendering them reproduces the surface text up to whitespace and
//! redundant parentheses.

mod eval;
mod parse;
mod render;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use eval::{DomainError, EvalResult, Invalid};
pub use parse::ParseError;

/// Unary operators. `Neg` is prefix minus, the rest are function calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnaryOp {
    Neg,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Abs,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 9] = [
        UnaryOp::Neg,
        UnaryOp::Sqrt,
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Tan,
        UnaryOp::Sinh,
        UnaryOp::Cosh,
        UnaryOp::Tanh,
        UnaryOp::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "neg",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Sinh => "sinh",
            UnaryOp::Cosh => "cosh",
            UnaryOp::Tanh => "tanh",
            UnaryOp::Abs => "abs",
        }
    }

    /// Looks up a function-call name. `neg` has no call syntax.
    pub fn from_call_name(name: &str) -> Option<UnaryOp> {
        UnaryOp::ALL
            .iter()
            .copied()
            .find(|op| *op != UnaryOp::Neg && op.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "**",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Constant(f64),
    Variable(usize),
    Unary(UnaryOp, alloc::boxed::Box<Node>),
    Binary(BinaryOp, alloc::boxed::Box<Node>, alloc::boxed::Box<Node>),
}

impl Node {
    pub fn constant(v: f64) -> Node {
        Node::Constant(v)
    }

    pub fn var(i: usize) -> Node {
        Node::Variable(i)
    }

    pub fn unary(op: UnaryOp, child: Node) -> Node {
        Node::Unary(op, alloc::boxed::Box::new(child))
    }

    pub fn binary(op: BinaryOp, left: Node, right: Node) -> Node {
        Node::Binary(op, alloc::boxed::Box::new(left), alloc::boxed::Box::new(right))
    }

    fn visit<F: FnMut(&Node)>(&self, f: &mut F) {
        f(self);
        match self {
            Node::Constant(_) | Node::Variable(_) => {}
            Node::Unary(_, c) => c.visit(f),
            Node::Binary(_, l, r) => {
                l.visit(f);
                r.visit(f);
            }
        }
    }
}

/// The set of unary operators an expression may use. Binary operators are
/// always allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionWhitelist {
    allowed: BTreeSet<UnaryOp>,
}

impl FunctionWhitelist {
    /// The operator list advertised to the language model:
    /// `[+,-,*,/,**,sqrt,sin,sinh,abs]`.
    pub fn prompt_list() -> Self {
        Self::from_ops([UnaryOp::Neg, UnaryOp::Sqrt, UnaryOp::Sin, UnaryOp::Sinh, UnaryOp::Abs])
    }

    pub fn from_ops<I: IntoIterator<Item = UnaryOp>>(ops: I) -> Self {
        FunctionWhitelist {
            allowed: ops.into_iter().collect(),
        }
    }

    /// Builds a whitelist from names such as `"sin"` or `"neg"`.
    /// Returns the first unrecognized name on failure.
    pub fn from_names<'a, I: IntoIterator<Item = &'a str>>(names: I) -> Result<Self, String> {
        let mut allowed = BTreeSet::new();
        for name in names {
            let op = UnaryOp::ALL
                .iter()
                .copied()
                .find(|op| op.name() == name)
                .ok_or_else(|| String::from(name))?;
            allowed.insert(op);
        }
        Ok(FunctionWhitelist { allowed })
    }

    pub fn allows(&self, op: UnaryOp) -> bool {
        self.allowed.contains(&op)
    }

    pub fn is_empty(&self) -> bool {
        self.allowed.is_empty()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.allowed.iter().map(|op| op.name()).collect()
    }
}

impl Default for FunctionWhitelist {
    fn default() -> Self {
        Self::from_ops(UnaryOp::ALL)
    }
}

/// A parsed objective function over a fixed number of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    dimension: usize,
}

impl Expression {
    pub fn parse(text: &str, dimension: usize, whitelist: &FunctionWhitelist) -> Result<Self, ParseError> {
        let root = parse::parse(text, dimension, whitelist)?;
        Ok(Expression { root, dimension })
    }

    /// Wraps an already-built tree after checking the variable bound.
    pub fn from_node(root: Node, dimension: usize) -> Result<Self, ParseError> {
        let mut bad = None;
        root.visit(&mut |n| {
            if let Node::Variable(i) = n {
                if *i >= dimension && bad.is_none() {
                    bad = Some(*i);
                }
            }
        });
        match bad {
            Some(index) => Err(ParseError::IndexOutOfRange {
                index,
                dimension,
                position: 0,
            }),
            None => Ok(Expression { root, dimension }),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Canonical single-line form.
    pub fn render(&self) -> String {
        render::render(&self.root)
    }

    pub fn evaluate(&self, x: &[f64]) -> EvalResult {
        debug_assert_eq!(x.len(), self.dimension);
        eval::evaluate(&self.root, x)
    }

    pub fn free_variables(&self) -> BTreeSet<usize> {
        let mut vars = BTreeSet::new();
        self.root.visit(&mut |n| {
            if let Node::Variable(i) = n {
                vars.insert(*i);
            }
        });
        vars
    }

    /// Checks every unary operator against `whitelist`.
    pub fn uses_only(&self, whitelist: &FunctionWhitelist) -> bool {
        let mut ok = true;
        self.root.visit(&mut |n| {
            if let Node::Unary(op, _) = n {
                ok &= whitelist.allows(*op);
            }
        });
        ok
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Parses with the default whitelist and the smallest dimension that covers
/// every variable (at least 1).
impl FromStr for Expression {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let root = parse::parse(s, usize::MAX, &FunctionWhitelist::default())?;
        let mut max = 0;
        root.visit(&mut |n| {
            if let Node::Variable(i) = n {
                max = max.max(*i + 1);
            }
        });
        Ok(Expression {
            root,
            dimension: max.max(1),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_variables_examples() {
        let wl = FunctionWhitelist::default();
        let e = Expression::parse("x[0] + x[0]*x[4]", 5, &wl).unwrap();
        assert_eq!(e.free_variables().into_iter().collect::<Vec<_>>(), [0, 4]);
        let e = Expression::parse("1 + 2", 5, &wl).unwrap();
        assert!(e.free_variables().is_empty());
    }

    #[test]
    fn whitelist_from_names() {
        let wl = FunctionWhitelist::from_names(["sin", "neg"]).unwrap();
        assert!(wl.allows(UnaryOp::Sin));
        assert!(!wl.allows(UnaryOp::Cos));
        assert_eq!(FunctionWhitelist::from_names(["log"]).unwrap_err(), "log");
    }

    #[test]
    fn default_whitelist_covers_observed_extensions() {
        let wl = FunctionWhitelist::default();
        for name in ["sqrt", "sin", "sinh", "abs", "cos", "cosh", "tan", "tanh", "neg"] {
            assert!(wl.names().contains(&name), "{name}");
        }
    }

    #[test]
    fn from_node_checks_index() {
        assert!(Expression::from_node(Node::var(5), 5).is_err());
        assert!(Expression::from_node(Node::var(4), 5).is_ok());
    }
}
