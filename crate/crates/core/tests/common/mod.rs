#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use semreg::{evaluate_tree, BinaryOp, Dataset, EvaluatedTree, ExprTree, Node, NodeEquation};

pub fn random_dataset(rng: &mut ChaCha8Rng, vars: usize, n: usize) -> Dataset {
    let variables = (0..vars).map(|_| (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
    let targets = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    Dataset::new(variables, targets).unwrap()
}

/// Random tree with exactly `size` nodes (`size` odd).
pub fn random_tree(rng: &mut ChaCha8Rng, size: usize, vars: usize) -> ExprTree {
    if size <= 1 {
        return if rng.gen_bool(0.5) {
            ExprTree::constant(rng.gen_range(-3.0..3.0))
        } else {
            ExprTree::variable(rng.gen_range(0..vars))
        };
    }
    let left = 2 * rng.gen_range(0..(size - 1) / 2) + 1;
    let op = BinaryOp::ALL[rng.gen_range(0..4)];
    let l = random_tree(rng, left, vars);
    let r = random_tree(rng, size - 1 - left, vars);
    ExprTree::binary(op, l, r)
}

/// Random tree of at most `max_size` nodes that evaluates on `data`.
pub fn random_valid_tree(rng: &mut ChaCha8Rng, data: &Dataset, max_size: usize) -> EvaluatedTree {
    loop {
        let size = 2 * rng.gen_range(0..=(max_size - 1) / 2) + 1;
        let t = random_tree(rng, size, data.num_variables());
        if let Ok(e) = evaluate_tree(&t, data) {
            if e.mse(data.targets()).is_finite() {
                return e;
            }
        }
    }
}

/// Whole-tree MSE of the equation at constant output `k`, computed
/// independently of the library.
pub fn equation_value(eq: &NodeEquation, k: f64) -> f64 {
    let n = eq.a.len();
    let mut sum = 0.0;
    for i in 0..n {
        let r = (eq.a[i] * k - eq.b[i]) / (eq.c[i] * k - eq.d[i]);
        sum += r * r;
    }
    sum / n as f64
}

/// `points` values log-spaced over `[1e-6, 1e6]` on both signs, plus zero.
pub fn log_grid(points: usize) -> Vec<f64> {
    let half = points / 2;
    let mut g = Vec::with_capacity(2 * half + 1);
    for i in 0..half {
        let e = -6.0 + 12.0 * i as f64 / (half - 1) as f64;
        let v = 10f64.powf(e);
        g.push(v);
        g.push(-v);
    }
    g.push(0.0);
    g
}

/// Lowest finite equation value over the grid.
pub fn grid_minimum(eq: &NodeEquation, grid: &[f64]) -> f64 {
    grid.iter().map(|&k| equation_value(eq, k)).filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min)
}

/// Coefficient and per-variable exponents if the tree is a single monomial
/// built only from `*` and `/`.
pub fn monomial(tree: &ExprTree, vars: usize) -> Option<(f64, Vec<i32>)> {
    fn walk(t: &ExprTree, id: usize, vars: usize) -> Option<(f64, Vec<i32>)> {
        match t.node(id) {
            Node::Constant(k) => Some((k, vec![0; vars])),
            Node::Variable(v) => {
                let mut e = vec![0; vars];
                e[v] = 1;
                Some((1.0, e))
            }
            Node::Op(op) => {
                let (l, r) = t.children(id).unwrap();
                let (kl, el) = walk(t, l, vars)?;
                let (kr, er) = walk(t, r, vars)?;
                match op {
                    BinaryOp::Mul => Some((kl * kr, el.iter().zip(&er).map(|(a, b)| a + b).collect())),
                    BinaryOp::Div => Some((kl / kr, el.iter().zip(&er).map(|(a, b)| a - b).collect())),
                    _ => None,
                }
            }
        }
    }
    walk(tree, 0, vars)
}
