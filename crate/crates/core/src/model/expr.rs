use std::fmt;

use super::{PackedInput, PackedState};

/// Boolean expression over state variables `x1..xn` and inputs `u1..um`.
///
/// Variable indices are stored zero-based; `State(0)` prints as `x1`.
/// `And`/`Or` are n-ary and keep the grouping they were built with, so a
/// parenthesised operand of the same kind stays a nested node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolExpr {
    Const(bool),
    State(usize),
    Input(usize),
    Not(Box<BoolExpr>),
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
}

/// `x<i>` with a one-based index.
pub fn x(i: usize) -> BoolExpr {
    assert!(i >= 1, "state variables are numbered from 1");
    BoolExpr::State(i - 1)
}

/// `u<j>` with a one-based index.
pub fn u(j: usize) -> BoolExpr {
    assert!(j >= 1, "input variables are numbered from 1");
    BoolExpr::Input(j - 1)
}

pub fn not(e: BoolExpr) -> BoolExpr {
    BoolExpr::Not(Box::new(e))
}

pub fn and(items: impl IntoIterator<Item = BoolExpr>) -> BoolExpr {
    BoolExpr::And(items.into_iter().collect())
}

pub fn or(items: impl IntoIterator<Item = BoolExpr>) -> BoolExpr {
    BoolExpr::Or(items.into_iter().collect())
}

impl BoolExpr {
    #[inline]
    pub fn eval_bits(&self, state: u64, input: u64) -> bool {
        match self {
            BoolExpr::Const(b) => *b,
            BoolExpr::State(i) => (state >> i) & 1 == 1,
            BoolExpr::Input(j) => (input >> j) & 1 == 1,
            BoolExpr::Not(e) => !e.eval_bits(state, input),
            BoolExpr::And(items) => items.iter().all(|e| e.eval_bits(state, input)),
            BoolExpr::Or(items) => items.iter().any(|e| e.eval_bits(state, input)),
        }
    }

    pub fn eval(&self, state: PackedState, input: PackedInput) -> bool {
        self.eval_bits(state.bits(), input.bits())
    }

    /// Largest (state, input) variable index referenced, zero-based.
    pub fn max_indices(&self) -> (Option<usize>, Option<usize>) {
        fn merge(a: Option<usize>, b: Option<usize>) -> Option<usize> {
            match (a, b) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, None) => a,
                (None, b) => b,
            }
        }
        match self {
            BoolExpr::Const(_) => (None, None),
            BoolExpr::State(i) => (Some(*i), None),
            BoolExpr::Input(j) => (None, Some(*j)),
            BoolExpr::Not(e) => e.max_indices(),
            BoolExpr::And(items) | BoolExpr::Or(items) => {
                items.iter().fold((None, None), |(s, i), e| {
                    let (es, ei) = e.max_indices();
                    (merge(s, es), merge(i, ei))
                })
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            BoolExpr::Or(_) => 1,
            BoolExpr::And(_) => 2,
            _ => 3,
        }
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Operands of an n-ary node are parenthesised whenever they are
        // themselves n-ary, so printing then parsing rebuilds the same tree.
        fn operand(f: &mut fmt::Formatter<'_>, e: &BoolExpr, parent: u8) -> fmt::Result {
            if e.precedence() <= parent {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            BoolExpr::Const(b) => write!(f, "{}", u8::from(*b)),
            BoolExpr::State(i) => write!(f, "x{}", i + 1),
            BoolExpr::Input(j) => write!(f, "u{}", j + 1),
            BoolExpr::Not(e) => {
                f.write_str("!")?;
                operand(f, e, 2)
            }
            BoolExpr::And(items) | BoolExpr::Or(items) => {
                let (sep, prec) = match self {
                    BoolExpr::And(_) => (" & ", 2),
                    _ => (" | ", 1),
                };
                for (k, e) in items.iter().enumerate() {
                    if k > 0 {
                        f.write_str(sep)?;
                    }
                    operand(f, e, prec)?;
                }
                Ok(())
            }
        }
    }
}
