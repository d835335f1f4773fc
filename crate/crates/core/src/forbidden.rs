//! Forbidden semantics: values that, if produced at a node, would make some
//! ancestor divide by zero.
//!
//! Each position of a forbidden member holds an [`ExtValue`]. `AnyAllowed`
//! marks a position where no value can cause trouble, `NoneAllowed` one where
//! every value does.

use crate::tree::BinaryOp;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtValue {
    Real(f64),
    AnyAllowed,
    NoneAllowed,
}

/// Which child of an operator a forbidden set is being pushed down to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    First,
    Second,
}

impl ExtValue {
    fn real(v: f64) -> ExtValue {
        // an overflowed forbidden value can never equal a finite output
        if v.is_finite() {
            ExtValue::Real(v)
        } else {
            ExtValue::AnyAllowed
        }
    }
}

/// `s / y` with the extended rules shared by both multiplication children
/// and the numerator of a division.
fn ext_div(s: ExtValue, y: f64) -> ExtValue {
    match s {
        ExtValue::NoneAllowed => ExtValue::NoneAllowed,
        ExtValue::AnyAllowed => ExtValue::AnyAllowed,
        ExtValue::Real(v) if y == 0.0 => {
            if v == 0.0 {
                ExtValue::NoneAllowed
            } else {
                ExtValue::AnyAllowed
            }
        }
        ExtValue::Real(v) => ExtValue::real(v / y),
    }
}

/// Inverts one element of a forbidden semantic through `op`, with respect to
/// the sibling value.
pub fn invert_value(s: ExtValue, op: BinaryOp, side: Side, sibling: f64) -> ExtValue {
    use ExtValue::*;
    match (op, side) {
        (BinaryOp::Add, _) => match s {
            Real(v) => ExtValue::real(v - sibling),
            other => other,
        },
        (BinaryOp::Sub, Side::First) => match s {
            Real(v) => ExtValue::real(v + sibling),
            other => other,
        },
        (BinaryOp::Sub, Side::Second) => match s {
            Real(v) => ExtValue::real(sibling - v),
            other => other,
        },
        (BinaryOp::Mul, _) => ext_div(s, sibling),
        (BinaryOp::Div, Side::First) => match s {
            NoneAllowed => NoneAllowed,
            AnyAllowed if sibling == 0.0 => NoneAllowed,
            AnyAllowed => AnyAllowed,
            Real(v) => ExtValue::real(v * sibling),
        },
        (BinaryOp::Div, Side::Second) => match s {
            NoneAllowed => NoneAllowed,
            AnyAllowed => Real(0.0),
            Real(v) if v == 0.0 => {
                if sibling == 0.0 {
                    NoneAllowed
                } else {
                    AnyAllowed
                }
            }
            Real(v) => ExtValue::real(sibling / v),
        },
    }
}

/// Element-wise [`invert_value`] over a whole forbidden semantic.
pub fn invert_forbidden(s: &[ExtValue], op: BinaryOp, side: Side, sibling: &[f64]) -> Vec<ExtValue> {
    s.iter().zip(sibling).map(|(&v, &y)| invert_value(v, op, side, y)).collect()
}

/// Relative tolerance used when comparing candidate outputs with forbidden
/// values.
pub const MATCH_TOLERANCE: f64 = 1e-12;

#[inline]
fn matches(candidate: f64, forbidden: f64) -> bool {
    (candidate - forbidden).abs() <= MATCH_TOLERANCE * forbidden.abs().max(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub enum ForbiddenSet {
    /// Some position admits no value at all.
    AllForbidden,
    Members(Vec<Vec<ExtValue>>),
}

impl Default for ForbiddenSet {
    fn default() -> Self {
        ForbiddenSet::Members(Vec::new())
    }
}

impl ForbiddenSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_all_forbidden(&self) -> bool {
        matches!(self, ForbiddenSet::AllForbidden)
    }

    pub fn members(&self) -> &[Vec<ExtValue>] {
        match self {
            ForbiddenSet::AllForbidden => &[],
            ForbiddenSet::Members(m) => m,
        }
    }

    /// Adds a member, collapsing the set when it holds a `NoneAllowed`.
    /// Duplicates and members that are `AnyAllowed` everywhere are dropped.
    pub fn insert(&mut self, member: Vec<ExtValue>) {
        let ForbiddenSet::Members(members) = self else { return };
        if member.iter().any(|v| matches!(v, ExtValue::NoneAllowed)) {
            *self = ForbiddenSet::AllForbidden;
            return;
        }
        if member.iter().all(|v| matches!(v, ExtValue::AnyAllowed)) {
            return;
        }
        if members.iter().any(|m| same_member(m, &member)) {
            return;
        }
        members.push(member);
    }

    /// Pushes the set through `op` to one child.
    pub fn invert(&self, op: BinaryOp, side: Side, sibling: &[f64]) -> ForbiddenSet {
        let ForbiddenSet::Members(members) = self else {
            return ForbiddenSet::AllForbidden;
        };
        let mut out = ForbiddenSet::empty();
        for m in members {
            out.insert(invert_forbidden(m, op, side, sibling));
            if out.is_all_forbidden() {
                break;
            }
        }
        out
    }

    /// Forbidden set of the child at `side` of an `op` node, given the
    /// semantics of the other child.
    pub fn for_child(&self, op: BinaryOp, side: Side, sibling: &[f64]) -> ForbiddenSet {
        let mut out = self.invert(op, side, sibling);
        if op == BinaryOp::Div && side == Side::Second {
            out.insert(vec![ExtValue::Real(0.0); sibling.len()]);
        }
        out
    }

    /// Whether `candidate` may be produced at the owning node.
    pub fn allows(&self, candidate: &[f64]) -> bool {
        match self {
            ForbiddenSet::AllForbidden => false,
            ForbiddenSet::Members(members) => !members.iter().any(|m| {
                m.iter().zip(candidate).any(|(s, &c)| match *s {
                    ExtValue::NoneAllowed => true,
                    ExtValue::AnyAllowed => false,
                    ExtValue::Real(v) => matches(c, v),
                })
            }),
        }
    }

    /// [`allows`](Self::allows) for the constant semantics `(k, ..., k)`.
    pub fn allows_constant(&self, k: f64) -> bool {
        match self {
            ForbiddenSet::AllForbidden => false,
            ForbiddenSet::Members(members) => !members.iter().flatten().any(|s| match *s {
                ExtValue::NoneAllowed => true,
                ExtValue::AnyAllowed => false,
                ExtValue::Real(v) => matches(k, v),
            }),
        }
    }
}

fn same_member(a: &[ExtValue], b: &[ExtValue]) -> bool {
    a.iter().zip(b).all(|(x, y)| match (x, y) {
        (ExtValue::Real(p), ExtValue::Real(q)) => p.to_bits() == q.to_bits(),
        _ => x == y,
    })
}

/// Free-function form of [`ForbiddenSet::allows`].
pub fn forbidden_allows(set: &ForbiddenSet, candidate: &[f64]) -> bool {
    set.allows(candidate)
}
