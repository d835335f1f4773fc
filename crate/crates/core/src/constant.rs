//! Best constant output for a node equation.
//!
//! Finding the exact minimum of `sum ((a k - b) / (c k - d))^2` means solving
//! a polynomial of degree 3N, so only the shapes that reduce to a single
//! stationary point are solved in closed form. Everything else falls back to
//! scanning the zeros `b_i / a_i` of the individual terms.

use crate::equation::NodeEquation;

/// Which rule produced a [`ConstantFit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstantCase {
    /// `c = 0`, `a` and `d` constant: `k = mean(b) / a`.
    ScaledMean,
    /// `c = 0`, `a` constant, `d` varying.
    WeightedMean,
    /// `c = 0`, `a` varying, `d` constant.
    LeastSquares,
    /// `c = 0`, general `a` and nonzero `d`.
    WeightedLeastSquares,
    /// `c != 0` and `d = 0` everywhere: linear in `1 / k`.
    Reciprocal,
    /// `c` and `d` nonzero constants.
    ConstantDenominator,
    /// Best of the term zeros `b_i / a_i`.
    ZeroScan,
}

impl ConstantCase {
    pub fn is_closed_form(self) -> bool {
        self != ConstantCase::ZeroScan
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantFit {
    pub k: f64,
    pub fitted_mse: f64,
    pub case_used: ConstantCase,
}

/// Zeros closer than this (relative) to a pole of any term are skipped.
pub const POLE_EXCLUSION: f64 = 1e-9;

fn all_equal(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

fn checked(eq: &NodeEquation, k: f64, case_used: ConstantCase) -> Option<ConstantFit> {
    if !k.is_finite() {
        return None;
    }
    let fitted_mse = eq.constant_mse(k)?;
    Some(ConstantFit { k, fitted_mse, case_used })
}

/// Returns the constant minimizing the node equation, or `None` when the
/// function has no usable minimum.
pub fn minimize_constant(eq: &NodeEquation) -> Option<ConstantFit> {
    if eq.is_empty() || eq.forbidden.is_all_forbidden() {
        return None;
    }
    let (a, b, c, d) = (&eq.a, &eq.b, &eq.c, &eq.d);
    let n = a.len();

    if c.iter().all(|&x| x == 0.0) {
        if a.iter().all(|&x| x == 0.0) || d.iter().any(|&x| x == 0.0) {
            return None;
        }
        let (k, case) = match (all_equal(a), all_equal(d)) {
            (true, true) => (b.iter().sum::<f64>() / (a[0] * n as f64), ConstantCase::ScaledMean),
            (true, false) => {
                let (mut num, mut den) = (0.0, 0.0);
                for i in 0..n {
                    let w = 1.0 / (d[i] * d[i]);
                    num += b[i] * w;
                    den += w;
                }
                (num / den / a[0], ConstantCase::WeightedMean)
            }
            (false, true) => {
                let (mut num, mut den) = (0.0, 0.0);
                for i in 0..n {
                    num += a[i] * b[i];
                    den += a[i] * a[i];
                }
                (num / den, ConstantCase::LeastSquares)
            }
            (false, false) => {
                let (mut num, mut den) = (0.0, 0.0);
                for i in 0..n {
                    let d2 = d[i] * d[i];
                    num += a[i] * b[i] / d2;
                    den += a[i] * a[i] / d2;
                }
                (num / den, ConstantCase::WeightedLeastSquares)
            }
        };
        return checked(eq, k, case);
    }

    if (0..n).any(|i| c[i] == 0.0 && d[i] == 0.0) {
        return None;
    }

    if d.iter().all(|&x| x == 0.0) {
        // every c is nonzero here
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            let c2 = c[i] * c[i];
            num += b[i] * b[i] / c2;
            den += a[i] * b[i] / c2;
        }
        // den == 0 puts the minimum at k = infinity
        if den != 0.0 {
            if let Some(fit) = checked(eq, num / den, ConstantCase::Reciprocal) {
                return Some(fit);
            }
        }
        return zero_scan(eq);
    }

    if all_equal(c) && all_equal(d) {
        let (kc, kd) = (c[0], d[0]);
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            let w = b[i] * kc - a[i] * kd;
            num += b[i] * w;
            den += a[i] * w;
        }
        if den != 0.0 {
            if let Some(fit) = checked(eq, num / den, ConstantCase::ConstantDenominator) {
                // the single stationary point is the minimum only when it beats
                // the value approached as k goes to infinity
                let asymptote = a.iter().map(|x| x * x).sum::<f64>() / (kc * kc * n as f64);
                if fit.fitted_mse <= asymptote {
                    return Some(fit);
                }
            }
        }
        return zero_scan(eq);
    }

    zero_scan(eq)
}

/// Evaluates every term zero `b_i / a_i` that is allowed and not next to a
/// pole, returning the lowest. Ties keep the earliest index.
pub fn zero_scan(eq: &NodeEquation) -> Option<ConstantFit> {
    let (a, b, c, d) = (&eq.a, &eq.b, &eq.c, &eq.d);
    let n = a.len();
    let inv_n = 1.0 / n as f64;

    let mut best: Option<(f64, f64)> = None;
    let mut seen: Vec<u64> = Vec::new();
    for i in 0..n {
        if a[i] == 0.0 {
            continue;
        }
        let z = b[i] / a[i];
        if !z.is_finite() {
            continue;
        }
        // repeated zeros are common when a and b come from few distinct values
        let bits = z.to_bits();
        if seen.contains(&bits) {
            continue;
        }
        if seen.len() < 64 {
            seen.push(bits);
        }

        // Terms are non-negative, so the partial sum bounds the total and a
        // candidate can be dropped as soon as it exceeds the incumbent.
        let limit = best.map_or(f64::INFINITY, |(_, m)| m * n as f64);
        let pole_tol = POLE_EXCLUSION * (1.0 + z.abs());
        let mut sum = 0.0;
        let mut rejected = false;
        for j in 0..n {
            let den = c[j] * z - d[j];
            if den.abs() < pole_tol {
                rejected = true;
                break;
            }
            let r = (a[j] * z - b[j]) / den;
            sum += r * r;
            if sum > limit {
                rejected = true;
                break;
            }
        }
        if rejected || !sum.is_finite() {
            continue;
        }
        if !eq.forbidden.allows_constant(z) {
            continue;
        }
        let m = sum * inv_n;
        if best.is_none_or(|(_, bm)| m < bm) {
            best = Some((z, m));
        }
    }
    let (k, _) = best?;
    let fitted_mse = eq.constant_mse(k)?;
    Some(ConstantFit { k, fitted_mse, case_used: ConstantCase::ZeroScan })
}
