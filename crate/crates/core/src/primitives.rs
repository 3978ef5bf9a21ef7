//! Primitive set, expression trees and protected evaluation.
//!
//! Trees are stored as a flat preorder sequence of nodes. Node addresses used
//! by the variation operators are positions in that sequence (root = 0).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arguments to `exp` are clamped to this magnitude before exponentiation.
pub const EXP_ARG_LIMIT: f64 = 700.0;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Function {
    Add,
    Sub,
    Mul,
    Pdiv,
    Sin,
    Cos,
    Exp,
    Plog,
}

impl Function {
    pub const ALL: [Function; 8] = [
        Function::Add,
        Function::Sub,
        Function::Mul,
        Function::Pdiv,
        Function::Sin,
        Function::Cos,
        Function::Exp,
        Function::Plog,
    ];

    pub fn arity(self) -> usize {
        match self {
            Function::Add | Function::Sub | Function::Mul | Function::Pdiv => 2,
            Function::Sin | Function::Cos | Function::Exp | Function::Plog => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Function::Add => "add",
            Function::Sub => "sub",
            Function::Mul => "mul",
            Function::Pdiv => "pdiv",
            Function::Sin => "sin",
            Function::Cos => "cos",
            Function::Exp => "exp",
            Function::Plog => "plog",
        }
    }

    pub fn from_name(name: &str) -> Option<Function> {
        Function::ALL.into_iter().find(|f| f.name() == name)
    }

    #[inline]
    pub fn apply_unary(self, a: f64) -> f64 {
        let v = match self {
            Function::Sin => a.sin(),
            Function::Cos => a.cos(),
            Function::Exp => a.clamp(-EXP_ARG_LIMIT, EXP_ARG_LIMIT).exp(),
            Function::Plog => {
                if a == 0.0 {
                    0.0
                } else {
                    a.abs().ln()
                }
            }
            _ => unreachable!("{} is not unary", self.name()),
        };
        saturate(v)
    }

    #[inline]
    pub fn apply_binary(self, a: f64, b: f64) -> f64 {
        let v = match self {
            Function::Add => a + b,
            Function::Sub => a - b,
            Function::Mul => a * b,
            Function::Pdiv => {
                if b == 0.0 {
                    1.0
                } else {
                    a / b
                }
            }
            _ => unreachable!("{} is not binary", self.name()),
        };
        saturate(v)
    }
}

/// Overflowed intermediate results are pinned to the largest finite magnitude
/// so that every node output stays finite.
#[inline]
fn saturate(v: f64) -> f64 {
    v.clamp(-f64::MAX, f64::MAX)
}

/// Name of input variable `index`: `x`, `y`, then `x2`, `x3`, ...
pub fn variable_name(index: u8) -> String {
    match index {
        0 => "x".to_string(),
        1 => "y".to_string(),
        i => format!("x{i}"),
    }
}

fn variable_from_name(name: &str) -> Option<u8> {
    match name {
        "x" => Some(0),
        "y" => Some(1),
        _ => {
            let digits = name.strip_prefix('x')?;
            if digits.is_empty() || (digits.len() > 1 && digits.starts_with('0')) {
                return None;
            }
            let index: u8 = digits.parse().ok()?;
            (index >= 2).then_some(index)
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Func(Function),
    Var(u8),
}

impl Node {
    #[inline]
    pub fn arity(self) -> usize {
        match self {
            Node::Func(f) => f.arity(),
            Node::Var(_) => 0,
        }
    }

    pub fn symbol(self) -> String {
        match self {
            Node::Func(f) => f.name().to_string(),
            Node::Var(i) => variable_name(i),
        }
    }
}

/// Primitive set: the eight functions plus `num_vars` input variables and no
/// constants.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct PrimitiveSet {
    pub num_vars: u8,
}

impl PrimitiveSet {
    pub fn new(num_vars: u8) -> Self {
        assert!(num_vars >= 1, "at least one terminal is required");
        PrimitiveSet { num_vars }
    }

    pub fn num_terminals(&self) -> usize {
        self.num_vars as usize
    }

    pub fn num_functions(&self) -> usize {
        Function::ALL.len()
    }

    /// Probability of picking a terminal at an unconstrained grow node.
    pub fn terminal_ratio(&self) -> f64 {
        let t = self.num_terminals() as f64;
        t / (t + self.num_functions() as f64)
    }
}

/// Rooted expression tree stored in preorder.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExprTree {
    nodes: Vec<Node>,
}

impl ExprTree {
    /// Builds a tree from a preorder node sequence, checking that it encodes
    /// exactly one complete tree.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::parse(0, "empty tree"));
        }
        let mut open = 1usize;
        for (i, node) in nodes.iter().enumerate() {
            if open == 0 {
                return Err(Error::parse(i, "trailing nodes after a complete tree"));
            }
            open = open - 1 + node.arity();
        }
        if open != 0 {
            return Err(Error::parse(nodes.len(), "tree is missing children"));
        }
        Ok(ExprTree { nodes })
    }

    pub(crate) fn from_nodes_unchecked(nodes: Vec<Node>) -> Self {
        debug_assert!(ExprTree::from_nodes(nodes.clone()).is_ok());
        ExprTree { nodes }
    }

    pub fn var(index: u8) -> Self {
        ExprTree {
            nodes: vec![Node::Var(index)],
        }
    }

    pub fn apply(f: Function, children: &[ExprTree]) -> Result<Self> {
        if children.len() != f.arity() {
            return Err(Error::config(format!(
                "{} takes {} argument(s), got {}",
                f.name(),
                f.arity(),
                children.len()
            )));
        }
        let mut nodes = vec![Node::Func(f)];
        for c in children {
            nodes.extend_from_slice(&c.nodes);
        }
        Ok(ExprTree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> Node {
        self.nodes[0]
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    /// Longest root-to-leaf path counted in nodes; a single node has depth 1.
    pub fn depth(&self) -> usize {
        let mut stack: Vec<usize> = Vec::with_capacity(32);
        for node in self.nodes.iter().rev() {
            let arity = node.arity();
            let mut deepest = 0;
            for _ in 0..arity {
                deepest = deepest.max(stack.pop().expect("well-formed tree"));
            }
            stack.push(deepest + 1);
        }
        stack[0]
    }

    /// One past the last preorder position of the subtree rooted at `at`.
    pub fn subtree_end(&self, at: usize) -> usize {
        let mut open = 1usize;
        let mut i = at;
        while open > 0 {
            open = open - 1 + self.nodes[i].arity();
            i += 1;
        }
        i
    }

    pub fn subtree(&self, at: usize) -> ExprTree {
        ExprTree {
            nodes: self.nodes[at..self.subtree_end(at)].to_vec(),
        }
    }

    /// Copy of `self` with the subtree at `at` replaced by `replacement`.
    pub fn replace_subtree(&self, at: usize, replacement: &[Node]) -> ExprTree {
        let end = self.subtree_end(at);
        let mut nodes = Vec::with_capacity(self.nodes.len() - (end - at) + replacement.len());
        nodes.extend_from_slice(&self.nodes[..at]);
        nodes.extend_from_slice(replacement);
        nodes.extend_from_slice(&self.nodes[end..]);
        ExprTree { nodes }
    }

    /// Preorder positions of the children of the node at `at`.
    pub fn children(&self, at: usize) -> Vec<usize> {
        let arity = self.nodes[at].arity();
        let mut out = Vec::with_capacity(arity);
        let mut next = at + 1;
        for _ in 0..arity {
            out.push(next);
            next = self.subtree_end(next);
        }
        out
    }

    pub fn max_var(&self) -> Option<u8> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Var(i) => Some(*i),
                Node::Func(_) => None,
            })
            .max()
    }

    /// Evaluates the tree at a single input point.
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        if let Some(v) = self.max_var() {
            if v as usize >= point.len() {
                return Err(Error::UnknownVariable {
                    index: v as usize,
                    arity: point.len(),
                });
            }
        }
        let mut pos = 0;
        Ok(self.eval_at(&mut pos, point))
    }

    fn eval_at(&self, pos: &mut usize, point: &[f64]) -> f64 {
        let node = self.nodes[*pos];
        *pos += 1;
        match node {
            Node::Var(i) => point[i as usize],
            Node::Func(f) => {
                if f.arity() == 1 {
                    let a = self.eval_at(pos, point);
                    f.apply_unary(a)
                } else {
                    let a = self.eval_at(pos, point);
                    let b = self.eval_at(pos, point);
                    f.apply_binary(a, b)
                }
            }
        }
    }
}

impl fmt::Debug for ExprTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExprTree({self})")
    }
}

/// Canonical prefix form: `(symbol child1 ... childN)`, terminals bare.
impl fmt::Display for ExprTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // closing parens owed after each open function node
        let mut pending: Vec<usize> = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match node {
                Node::Func(func) => {
                    write!(f, "({}", func.name())?;
                    pending.push(func.arity());
                }
                Node::Var(v) => {
                    f.write_str(&variable_name(*v))?;
                    while let Some(left) = pending.last_mut() {
                        *left -= 1;
                        if *left > 0 {
                            break;
                        }
                        f.write_str(")")?;
                        pending.pop();
                    }
                }
            }
        }
        Ok(())
    }
}

impl FromStr for ExprTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parser = Parser {
            src: s.as_bytes(),
            pos: 0,
            nodes: Vec::new(),
        };
        parser.skip_ws();
        parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.src.len() {
            return Err(Error::parse(parser.pos, "unexpected trailing input"));
        }
        Ok(ExprTree {
            nodes: parser.nodes,
        })
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    nodes: Vec<Node>,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn ident(&mut self) -> Result<(usize, &str)> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.src.get(start) {
                None => Error::parse(start, "unexpected end of input"),
                Some(c) => Error::parse(start, format!("unexpected character '{}'", *c as char)),
            });
        }
        // ascii only, so this cannot fail
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        Ok((start, text))
    }

    fn expr(&mut self) -> Result<()> {
        if self.src.get(self.pos) == Some(&b'(') {
            self.pos += 1;
            self.skip_ws();
            let (at, name) = self.ident()?;
            let func = Function::from_name(name)
                .ok_or_else(|| Error::parse(at, format!("unknown function '{name}'")))?;
            self.nodes.push(Node::Func(func));
            let mut found = 0;
            loop {
                self.skip_ws();
                match self.src.get(self.pos) {
                    Some(b')') => {
                        if found != func.arity() {
                            return Err(Error::parse(
                                self.pos,
                                format!(
                                    "arity mismatch: {} expects {} argument(s), found {}",
                                    func.name(),
                                    func.arity(),
                                    found
                                ),
                            ));
                        }
                        self.pos += 1;
                        return Ok(());
                    }
                    None => return Err(Error::parse(self.pos, "unclosed '('")),
                    Some(_) => {
                        if found == func.arity() {
                            return Err(Error::parse(
                                self.pos,
                                format!(
                                    "arity mismatch: {} expects {} argument(s)",
                                    func.name(),
                                    func.arity()
                                ),
                            ));
                        }
                        self.expr()?;
                        found += 1;
                    }
                }
            }
        } else {
            let (at, name) = self.ident()?;
            let var = variable_from_name(name)
                .ok_or_else(|| Error::parse(at, format!("unknown terminal '{name}'")))?;
            self.nodes.push(Node::Var(var));
            Ok(())
        }
    }
}

/// Column-wise evaluator that evaluates a tree over many input points at
/// once, reusing scratch buffers between calls. Produces bit-identical
/// results to [`ExprTree::eval`].
#[derive(Default)]
pub struct Evaluator {
    stack: Vec<Vec<f64>>,
    pool: Vec<Vec<f64>>,
}

impl Evaluator {
    pub fn new() -> Self {
        Self::default()
    }

    /// `columns[v][i]` is the value of variable `v` at point `i`.
    pub fn eval_columns(&mut self, tree: &ExprTree, columns: &[Vec<f64>]) -> Result<Vec<f64>> {
        if let Some(v) = tree.max_var() {
            if v as usize >= columns.len() {
                return Err(Error::UnknownVariable {
                    index: v as usize,
                    arity: columns.len(),
                });
            }
        }
        let len = columns.first().map_or(0, Vec::len);
        for node in tree.nodes.iter().rev() {
            match *node {
                Node::Var(v) => {
                    let mut buf = self.pool.pop().unwrap_or_default();
                    buf.clear();
                    buf.extend_from_slice(&columns[v as usize][..len]);
                    self.stack.push(buf);
                }
                Node::Func(f) if f.arity() == 1 => {
                    let top = self.stack.last_mut().expect("well-formed tree");
                    for v in top.iter_mut() {
                        *v = f.apply_unary(*v);
                    }
                }
                Node::Func(f) => {
                    // first child is on top, second just below
                    let a = self.stack.pop().expect("well-formed tree");
                    let b = self.stack.last_mut().expect("well-formed tree");
                    for (bv, av) in b.iter_mut().zip(&a) {
                        *bv = f.apply_binary(*av, *bv);
                    }
                    self.pool.push(a);
                }
            }
        }
        let out = self.stack.pop().expect("well-formed tree");
        debug_assert!(self.stack.is_empty());
        Ok(out)
    }

    /// Returns a buffer obtained from [`Evaluator::eval_columns`] for reuse.
    pub fn recycle(&mut self, buf: Vec<f64>) {
        self.pool.push(buf);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> ExprTree {
        s.parse().unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(t("(add x (mul x x))").eval(&[2.0]).unwrap(), 6.0);
        assert_eq!(t("(pdiv x (sub x x))").eval(&[3.0]).unwrap(), 1.0);
        assert_eq!(t("(plog x)").eval(&[0.0]).unwrap(), 0.0);
        let big = t("(exp x)").eval(&[1000.0]).unwrap();
        assert!(big.is_finite());
        assert_eq!(big, 700f64.exp());
        assert_eq!(t("(exp x)").eval(&[-1000.0]).unwrap(), (-700f64).exp());
    }

    #[test]
    fn overflow_saturates() {
        let v = t("(mul (exp x) (exp x))").eval(&[1000.0]).unwrap();
        assert_eq!(v, f64::MAX);
        let v = t("(sub (mul (exp x) (exp x)) (mul (exp x) (exp x)))")
            .eval(&[1000.0])
            .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn unknown_variable_is_an_error() {
        let err = t("(add x y)").eval(&[1.0]).unwrap_err();
        assert!(matches!(err, Error::UnknownVariable { index: 1, arity: 1 }));
        let mut ev = Evaluator::new();
        assert!(ev.eval_columns(&t("y"), &[vec![1.0]]).is_err());
    }

    #[test]
    fn serialization_examples() {
        assert_eq!(t("(add x x)").to_string(), "(add x x)");
        assert_eq!(t("x").to_string(), "x");
        assert_eq!(
            t("( add (sin  x)\n(pdiv y x2))").to_string(),
            "(add (sin x) (pdiv y x2))"
        );
        assert_eq!(t("(sin (sin (sin x)))").to_string(), "(sin (sin (sin x)))");
    }

    #[test]
    fn parse_errors_carry_positions() {
        match "(sin)".parse::<ExprTree>() {
            Err(Error::Parse { position, message }) => {
                assert_eq!(position, 4);
                assert!(message.contains("arity"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            "(add x x x)".parse::<ExprTree>(),
            Err(Error::Parse { position: 9, .. })
        ));
        assert!(matches!("(foo x)".parse::<ExprTree>(), Err(Error::Parse { position: 1, .. })));
        assert!(matches!("(add x".parse::<ExprTree>(), Err(Error::Parse { .. })));
        assert!(matches!("x x".parse::<ExprTree>(), Err(Error::Parse { position: 2, .. })));
        assert!(matches!("".parse::<ExprTree>(), Err(Error::Parse { position: 0, .. })));
        assert!(matches!("z".parse::<ExprTree>(), Err(Error::Parse { .. })));
        assert!(matches!("x01".parse::<ExprTree>(), Err(Error::Parse { .. })));
    }

    #[test]
    fn depth_and_size() {
        let x = t("x");
        assert_eq!((x.depth(), x.size()), (1, 1));
        let a = t("(add x x)");
        assert_eq!((a.depth(), a.size()), (2, 3));
        let s = t("(sin (sin (sin x)))");
        assert_eq!((s.depth(), s.size()), (4, 4));
        let lop = t("(add (sin (cos x)) y)");
        assert_eq!((lop.depth(), lop.size()), (4, 5));
    }

    #[test]
    fn subtree_navigation() {
        let tree = t("(add (sin x) (mul x y))");
        assert_eq!(tree.children(0), vec![1, 3]);
        assert_eq!(tree.subtree_end(1), 3);
        assert_eq!(tree.subtree(3).to_string(), "(mul x y)");
        let swapped = tree.replace_subtree(1, t("(cos y)").nodes());
        assert_eq!(swapped.to_string(), "(add (cos y) (mul x y))");
    }

    #[test]
    fn from_nodes_validates_shape() {
        assert!(ExprTree::from_nodes(vec![Node::Func(Function::Add), Node::Var(0)]).is_err());
        assert!(ExprTree::from_nodes(vec![Node::Var(0), Node::Var(0)]).is_err());
        assert!(ExprTree::from_nodes(vec![]).is_err());
        assert!(ExprTree::apply(Function::Sin, &[t("x"), t("x")]).is_err());
        assert_eq!(
            ExprTree::apply(Function::Sub, &[t("x"), t("(cos y)")]).unwrap().to_string(),
            "(sub x (cos y))"
        );
    }

    #[test]
    fn column_eval_matches_pointwise() {
        let tree = t("(add (pdiv x (sub y y)) (plog (mul (exp x) (cos y))))");
        let xs = vec![0.0, -1.5, 3.25, 1e-300, 720.0];
        let ys = vec![2.0, 0.0, -0.5, 4.0, 1e10];
        let mut ev = Evaluator::new();
        let out = ev.eval_columns(&tree, &[xs.clone(), ys.clone()]).unwrap();
        for i in 0..xs.len() {
            let p = tree.eval(&[xs[i], ys[i]]).unwrap();
            assert_eq!(out[i].to_bits(), p.to_bits());
        }
    }
}
