//! Expression trees stored as a flat pre-order node list.
//!
//! Node `0` is the root. The left child of an operator at `i` is `i + 1` and
//! the right child starts right after the left subtree. Node ids are only
//! meaningful for the tree they were taken from; every edit produces a new
//! tree with fresh ids.

use std::fmt;

use crate::error::TreeError;

/// The four arithmetic operators available to non-terminal nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    /// All operators in tie-break order.
    pub const ALL: [BinaryOp; 4] = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div];

    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }

    #[inline]
    pub fn apply(self, x: f64, y: f64) -> f64 {
        match self {
            BinaryOp::Add => x + y,
            BinaryOp::Sub => x - y,
            BinaryOp::Mul => x * y,
            BinaryOp::Div => x / y,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Node {
    Constant(f64),
    /// 0-based index into the dataset variables.
    Variable(usize),
    Op(BinaryOp),
}

impl Node {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Node::Op(_))
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Node::Constant(_))
    }

    pub fn constant(&self) -> Option<f64> {
        match self {
            Node::Constant(k) => Some(*k),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeMetrics {
    pub node_count: usize,
    /// Longest root-to-leaf path counted in nodes.
    pub height: usize,
}

/// An immutable arithmetic expression tree.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprTree {
    nodes: Vec<Node>,
    sizes: Vec<usize>,
}

impl ExprTree {
    /// Builds a tree from a pre-order node list, checking that every
    /// operator has exactly two children and nothing is left over.
    pub fn from_preorder(nodes: Vec<Node>) -> Result<Self, TreeError> {
        if nodes.is_empty() {
            return Err(TreeError::Malformed("empty node list".into()));
        }
        let mut sizes = vec![0; nodes.len()];
        let end = fill_sizes(&nodes, &mut sizes, 0)?;
        if end != nodes.len() {
            return Err(TreeError::Malformed(format!(
                "{} trailing nodes after a complete tree",
                nodes.len() - end
            )));
        }
        Ok(Self { nodes, sizes })
    }

    pub fn constant(value: f64) -> Self {
        Self { nodes: vec![Node::Constant(value)], sizes: vec![1] }
    }

    pub fn variable(index: usize) -> Self {
        Self { nodes: vec![Node::Variable(index)], sizes: vec![1] }
    }

    pub fn binary(op: BinaryOp, left: ExprTree, right: ExprTree) -> Self {
        let total = 1 + left.len() + right.len();
        let mut nodes = Vec::with_capacity(total);
        let mut sizes = Vec::with_capacity(total);
        nodes.push(Node::Op(op));
        sizes.push(total);
        nodes.extend(left.nodes);
        sizes.extend(left.sizes);
        nodes.extend(right.nodes);
        sizes.extend(right.sizes);
        Self { nodes, sizes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> Node {
        self.nodes[id]
    }

    pub fn subtree_size(&self, id: usize) -> usize {
        self.sizes[id]
    }

    /// Ids of the two children of an operator node.
    pub fn children(&self, id: usize) -> Option<(usize, usize)> {
        match self.nodes[id] {
            Node::Op(_) => {
                let left = id + 1;
                Some((left, left + self.sizes[left]))
            }
            _ => None,
        }
    }

    /// Ancestors of `id`, root first, excluding `id` itself.
    pub fn ancestors(&self, id: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut cur = 0;
        while cur != id {
            path.push(cur);
            let (left, right) = self.children(cur).expect("id inside a leaf");
            cur = if id < right { left } else { right };
        }
        path
    }

    pub fn subtree(&self, id: usize) -> ExprTree {
        let range = id..id + self.sizes[id];
        Self { nodes: self.nodes[range.clone()].to_vec(), sizes: self.sizes[range].to_vec() }
    }

    pub fn check_node_id(&self, id: usize) -> Result<(), TreeError> {
        if id < self.nodes.len() {
            Ok(())
        } else {
            Err(TreeError::InvalidNodeId { id, len: self.nodes.len() })
        }
    }

    /// Returns a copy of this tree with the subtree at `id` swapped for
    /// `replacement`.
    pub fn replace_subtree(&self, id: usize, replacement: &ExprTree) -> Result<ExprTree, TreeError> {
        self.check_node_id(id)?;
        let old_size = self.sizes[id];
        let new_size = replacement.len();
        let ancestors = self.ancestors(id);

        let mut nodes = Vec::with_capacity(self.len() - old_size + new_size);
        nodes.extend_from_slice(&self.nodes[..id]);
        nodes.extend_from_slice(&replacement.nodes);
        nodes.extend_from_slice(&self.nodes[id + old_size..]);

        let mut sizes = Vec::with_capacity(nodes.len());
        sizes.extend_from_slice(&self.sizes[..id]);
        sizes.extend_from_slice(&replacement.sizes);
        sizes.extend_from_slice(&self.sizes[id + old_size..]);
        for a in ancestors {
            sizes[a] = sizes[a] + new_size - old_size;
        }
        Ok(Self { nodes, sizes })
    }

    pub fn metrics(&self) -> TreeMetrics {
        TreeMetrics { node_count: self.len(), height: self.height_of(0) }
    }

    fn height_of(&self, id: usize) -> usize {
        match self.children(id) {
            None => 1,
            Some((l, r)) => 1 + self.height_of(l).max(self.height_of(r)),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_variable(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Variable(v) => Some(*v),
                _ => None,
            })
            .max()
    }

    /// Ids of all nodes matching `pred`, in pre-order.
    pub fn ids_where(&self, pred: impl Fn(&Node) -> bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| pred(&self.nodes[i])).collect()
    }

    /// Renders the tree as fully parenthesized infix text.
    pub fn display<'a, S: AsRef<str>>(&'a self, names: &'a [S]) -> ExprDisplay<'a, S> {
        ExprDisplay { tree: self, names }
    }

    /// Renders with the default `x1..xL` variable names.
    pub fn to_text(&self) -> String {
        let names = default_names(self.max_variable().map_or(0, |v| v + 1));
        self.display(&names).to_string()
    }

    /// Structural equality that also compares constants bit for bit.
    pub fn identical(&self, other: &ExprTree) -> bool {
        self.nodes.len() == other.nodes.len()
            && self.nodes.iter().zip(&other.nodes).all(|(a, b)| match (a, b) {
                (Node::Constant(x), Node::Constant(y)) => x.to_bits() == y.to_bits(),
                _ => a == b,
            })
    }
}

fn fill_sizes(nodes: &[Node], sizes: &mut [usize], id: usize) -> Result<usize, TreeError> {
    let Some(node) = nodes.get(id) else {
        return Err(TreeError::Malformed(format!("operator missing a child at position {id}")));
    };
    let end = match node {
        Node::Op(_) => {
            let mid = fill_sizes(nodes, sizes, id + 1)?;
            fill_sizes(nodes, sizes, mid)?
        }
        _ => id + 1,
    };
    sizes[id] = end - id;
    Ok(end)
}

/// `x1, x2, ..., xL`.
pub fn default_names(count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("x{i}")).collect()
}

/// Shortest decimal text that parses back to exactly `value`.
pub fn format_constant(value: f64) -> String {
    let exp = if value == 0.0 { 0 } else { value.abs().log10().floor() as i32 };
    if (-5..17).contains(&exp) {
        format!("{value}")
    } else {
        format!("{value:e}")
    }
}

pub struct ExprDisplay<'a, S> {
    tree: &'a ExprTree,
    names: &'a [S],
}

impl<S: AsRef<str>> ExprDisplay<'_, S> {
    fn write_node(&self, f: &mut fmt::Formatter<'_>, id: usize) -> fmt::Result {
        match self.tree.nodes[id] {
            Node::Constant(v) => f.write_str(&format_constant(v)),
            Node::Variable(v) => match self.names.get(v) {
                Some(name) => f.write_str(name.as_ref()),
                None => write!(f, "x{}", v + 1),
            },
            Node::Op(op) => {
                let (l, r) = self.tree.children(id).unwrap();
                f.write_str("(")?;
                self.write_node(f, l)?;
                write!(f, " {} ", op.symbol())?;
                self.write_node(f, r)?;
                f.write_str(")")
            }
        }
    }
}

impl<S: AsRef<str>> fmt::Display for ExprDisplay<'_, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_node(f, 0)
    }
}

/// Parses infix text over `+ - * /`, decimal constants and the given
/// variable names. Fully parenthesized input is the canonical form; usual
/// precedence and left associativity apply where parentheses are omitted.
pub fn parse_expression<S: AsRef<str>>(text: &str, names: &[S]) -> Result<ExprTree, TreeError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, names };
    let tree = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(tree)
}

struct Parser<'a, S> {
    src: &'a [u8],
    pos: usize,
    names: &'a [S],
}

impl<S: AsRef<str>> Parser<'_, S> {
    fn error(&self, message: &str) -> TreeError {
        TreeError::Parse { position: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<ExprTree, TreeError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == b'+' { BinaryOp::Add } else { BinaryOp::Sub };
            lhs = ExprTree::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ExprTree, TreeError> {
        let mut lhs = self.primary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.primary()?;
            let op = if c == b'*' { BinaryOp::Mul } else { BinaryOp::Div };
            lhs = ExprTree::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<ExprTree, TreeError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' || c == b'-' || c == b'+' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.variable(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<ExprTree, TreeError> {
        let start = self.pos;
        if matches!(self.src[self.pos], b'-' | b'+') {
            self.pos += 1;
        }
        let mut seen_digit = false;
        while let Some(&c) = self.src.get(self.pos) {
            if c.is_ascii_digit() {
                seen_digit = true;
                self.pos += 1;
            } else if c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E') && seen_digit {
                self.pos += 1;
                if matches!(self.src.get(self.pos), Some(b'-' | b'+')) {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() && seen_digit => Ok(ExprTree::constant(v)),
            _ => {
                self.pos = start;
                Err(self.error("invalid number"))
            }
        }
    }

    fn variable(&mut self) -> Result<ExprTree, TreeError> {
        let start = self.pos;
        while let Some(&c) = self.src.get(self.pos) {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match self.names.iter().position(|n| n.as_ref() == name) {
            Some(index) => Ok(ExprTree::variable(index)),
            None => {
                self.pos = start;
                Err(self.error(&format!("unknown variable '{name}'")))
            }
        }
    }
}
