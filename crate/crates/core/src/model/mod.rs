//! Probabilistic Boolean control networks.
//!
//! Each node `i` carries a list of alternative update functions with
//! selection probabilities. A transition draws one alternative per node
//! independently and evaluates every chosen function on the pre-step
//! state and input (synchronous update).
//!
//! Bit convention: `x1` is the least-significant bit of a [`PackedState`]
//! (index = Σ x_i·2^(i−1)); inputs use the same layout with `u1` as bit 0.

mod builtin;
mod expr;
mod parse;

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

pub use builtin::{builtin_lac_operon, builtin_tcell, LAC_OPERON_SOURCE};
pub use expr::{and, not, or, u, x, BoolExpr};
pub use parse::parse_model;

pub const MAX_NODES: usize = 64;
pub const MAX_INPUTS: usize = 16;

const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// A network state packed into the low `width` bits of a `u64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PackedState {
    bits: u64,
    width: u8,
}

/// A joint control assignment packed into the low `width` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PackedInput {
    bits: u64,
    width: u8,
}

fn mask(width: usize) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn pack(values: &[bool], limit: usize) -> Result<(u64, u8)> {
    if values.len() > limit {
        return Err(Error::WidthMismatch {
            expected: limit,
            actual: values.len(),
        });
    }
    let bits = values
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i));
    Ok((bits, values.len() as u8))
}

fn unpack(bits: u64, width: u8) -> Vec<bool> {
    (0..width).map(|i| (bits >> i) & 1 == 1).collect()
}

fn parse_bit_string(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .filter(|c| !c.is_whitespace() && *c != ',')
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::InvalidParameter(format!(
                "bit string contains '{other}'"
            ))),
        })
        .collect()
}

macro_rules! packed_common {
    ($ty:ident, $limit:expr) => {
        impl $ty {
            /// Panics if `bits` does not fit in `width`.
            pub fn new(bits: u64, width: usize) -> Self {
                assert!(width <= $limit, "width {width} exceeds {}", $limit);
                assert!(
                    bits & !mask(width) == 0,
                    "bits {bits:#x} exceed width {width}"
                );
                Self {
                    bits,
                    width: width as u8,
                }
            }

            pub fn try_new(bits: u64, width: usize) -> Result<Self> {
                if width > $limit || bits & !mask(width) != 0 {
                    return Err(Error::WidthMismatch {
                        expected: width,
                        actual: 64 - bits.leading_zeros() as usize,
                    });
                }
                Ok(Self::new(bits, width))
            }

            /// Packs a list of values; element 0 becomes the least-significant bit.
            pub fn encode(values: &[bool]) -> Result<Self> {
                let (bits, width) = pack(values, $limit)?;
                Ok(Self { bits, width })
            }

            /// Like [`Self::encode`] but checks the list length.
            pub fn encode_checked(values: &[bool], width: usize) -> Result<Self> {
                if values.len() != width {
                    return Err(Error::WidthMismatch {
                        expected: width,
                        actual: values.len(),
                    });
                }
                Self::encode(values)
            }

            pub fn decode(self) -> Vec<bool> {
                unpack(self.bits, self.width)
            }

            /// Parses a `0`/`1` string written in variable order (first char is variable 1).
            pub fn from_bit_string(s: &str, width: usize) -> Result<Self> {
                Self::encode_checked(&parse_bit_string(s)?, width)
            }

            pub fn to_bit_string(self) -> String {
                self.decode()
                    .iter()
                    .map(|&b| if b { '1' } else { '0' })
                    .collect()
            }

            #[inline]
            pub fn bits(self) -> u64 {
                self.bits
            }

            #[inline]
            pub fn width(self) -> usize {
                self.width as usize
            }

            #[inline]
            pub fn index(self) -> usize {
                self.bits as usize
            }

            /// Value of variable `i` (one-based).
            pub fn get(self, i: usize) -> bool {
                (self.bits >> (i - 1)) & 1 == 1
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_bit_string())
            }
        }
    };
}

packed_common!(PackedState, MAX_NODES);
packed_common!(PackedInput, MAX_INPUTS);

#[derive(Debug, Clone, PartialEq)]
pub struct Alternative {
    pub expr: BoolExpr,
    pub prob: f64,
}

/// Candidate update functions of one node with their selection probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRule {
    alternatives: Vec<Alternative>,
    // Cumulative selection thresholds; empty for single-alternative rules.
    cumulative: Vec<f64>,
}

impl NodeRule {
    pub fn deterministic(expr: BoolExpr) -> Self {
        Self {
            alternatives: vec![Alternative { expr, prob: 1.0 }],
            cumulative: Vec::new(),
        }
    }

    /// `node` is only used for error messages (one-based).
    pub fn new(node: usize, alternatives: Vec<(BoolExpr, f64)>) -> Result<Self> {
        if alternatives.is_empty() {
            return Err(Error::InvalidModel(format!(
                "node {node} has no alternatives"
            )));
        }
        for (_, p) in &alternatives {
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::InvalidProbability { node, prob: *p });
            }
        }
        let sum: f64 = alternatives.iter().map(|(_, p)| p).sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::ProbabilitySum { node, sum });
        }
        let alternatives: Vec<Alternative> = alternatives
            .into_iter()
            .map(|(expr, prob)| Alternative { expr, prob })
            .collect();
        let cumulative = if alternatives.len() > 1 {
            alternatives
                .iter()
                .scan(0.0, |acc, a| {
                    *acc += a.prob;
                    Some(*acc)
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            alternatives,
            cumulative,
        })
    }

    pub fn alternatives(&self) -> &[Alternative] {
        &self.alternatives
    }

    pub fn is_stochastic(&self) -> bool {
        self.alternatives.len() > 1
    }

    /// Draws an alternative index. Single-alternative rules consume no randomness.
    #[inline]
    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.cumulative.is_empty() {
            return 0;
        }
        let r: f64 = rng.gen();
        self.cumulative
            .iter()
            .position(|&c| r < c)
            .unwrap_or(self.alternatives.len() - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PbcnModel {
    n: usize,
    m: usize,
    rules: Vec<NodeRule>,
    node_labels: Option<Vec<String>>,
    input_labels: Option<Vec<String>>,
}

impl PbcnModel {
    pub fn new(n: usize, m: usize, rules: Vec<NodeRule>) -> Result<Self> {
        if n == 0 || n > MAX_NODES {
            return Err(Error::InvalidModel(format!(
                "node count {n} outside 1..={MAX_NODES}"
            )));
        }
        if m > MAX_INPUTS {
            return Err(Error::InvalidModel(format!(
                "input count {m} exceeds {MAX_INPUTS}"
            )));
        }
        if rules.len() != n {
            return Err(Error::InvalidModel(format!(
                "expected {n} node rules, got {}",
                rules.len()
            )));
        }
        for rule in &rules {
            for alt in rule.alternatives() {
                let (s, i) = alt.expr.max_indices();
                if let Some(s) = s.filter(|&s| s >= n) {
                    return Err(Error::VariableOutOfRange {
                        kind: "state",
                        index: s + 1,
                        limit: n,
                    });
                }
                if let Some(i) = i.filter(|&i| i >= m) {
                    return Err(Error::VariableOutOfRange {
                        kind: "input",
                        index: i + 1,
                        limit: m,
                    });
                }
            }
        }
        Ok(Self {
            n,
            m,
            rules,
            node_labels: None,
            input_labels: None,
        })
    }

    pub fn with_labels(
        mut self,
        node_labels: Option<Vec<String>>,
        input_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if let Some(l) = &node_labels {
            if l.len() != self.n {
                return Err(Error::InvalidModel(format!(
                    "{} node labels for {} nodes",
                    l.len(),
                    self.n
                )));
            }
        }
        if let Some(l) = &input_labels {
            if l.len() != self.m {
                return Err(Error::InvalidModel(format!(
                    "{} input labels for {} inputs",
                    l.len(),
                    self.m
                )));
            }
        }
        self.node_labels = node_labels;
        self.input_labels = input_labels;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_actions(&self) -> usize {
        1 << self.m
    }

    pub fn rules(&self) -> &[NodeRule] {
        &self.rules
    }

    pub fn node_labels(&self) -> Option<&[String]> {
        self.node_labels.as_deref()
    }

    pub fn input_labels(&self) -> Option<&[String]> {
        self.input_labels.as_deref()
    }

    pub fn state(&self, bits: u64) -> PackedState {
        PackedState::new(bits, self.n)
    }

    pub fn input(&self, bits: u64) -> PackedInput {
        PackedInput::new(bits, self.m)
    }

    /// One synchronous transition.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: PackedState,
        input: PackedInput,
        rng: &mut R,
    ) -> PackedState {
        debug_assert_eq!(state.width(), self.n);
        debug_assert_eq!(input.width(), self.m);
        let (s, u) = (state.bits(), input.bits());
        let mut next = 0u64;
        for (i, rule) in self.rules.iter().enumerate() {
            let j = rule.choose(rng);
            if rule.alternatives[j].expr.eval_bits(s, u) {
                next |= 1 << i;
            }
        }
        PackedState {
            bits: next,
            width: self.n as u8,
        }
    }

    /// Transition with a fixed alternative index per node.
    pub fn step_with_choices(
        &self,
        state: PackedState,
        input: PackedInput,
        choices: &[usize],
    ) -> PackedState {
        let (s, u) = (state.bits(), input.bits());
        let next = self
            .rules
            .iter()
            .zip(choices)
            .enumerate()
            .filter(|(_, (rule, &j))| rule.alternatives[j].expr.eval_bits(s, u))
            .fold(0u64, |acc, (i, _)| acc | (1 << i));
        PackedState {
            bits: next,
            width: self.n as u8,
        }
    }
}

impl fmt::Display for PbcnModel {
    /// Writes the model in the text format accepted by [`parse_model`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nodes: {}", self.n)?;
        writeln!(f, "inputs: {}", self.m)?;
        for (i, label) in self.node_labels.iter().flatten().enumerate() {
            writeln!(f, "label x{}: {label}", i + 1)?;
        }
        for (j, label) in self.input_labels.iter().flatten().enumerate() {
            writeln!(f, "label u{}: {label}", j + 1)?;
        }
        for (i, rule) in self.rules.iter().enumerate() {
            writeln!(f, "node {}:", i + 1)?;
            for alt in &rule.alternatives {
                writeln!(f, "  {:?} :: {}", alt.prob, alt.expr)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn encode_zero_and_unit_states() {
        assert_eq!(PackedState::encode(&[false; 9]).unwrap().bits(), 0);
        let mut v = vec![false; 9];
        v[0] = true;
        assert_eq!(PackedState::encode(&v).unwrap().bits(), 1);
    }

    #[test]
    fn encode_checked_rejects_length_mismatch() {
        let err = PackedState::encode_checked(&[true, false], 3).unwrap_err();
        assert!(matches!(
            err,
            Error::WidthMismatch {
                expected: 3,
                actual: 2
            }
        ));
    }

    #[test]
    fn bit_strings_read_first_variable_first() {
        let s = PackedState::from_bit_string("110", 3).unwrap();
        assert_eq!(s.bits(), 0b011);
        assert_eq!(s.to_bit_string(), "110");
        assert!(s.get(1) && s.get(2) && !s.get(3));
        assert!(PackedState::from_bit_string("12", 2).is_err());
    }

    #[test]
    fn decode_encode_roundtrip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let width = rng.gen_range(1..=64usize);
            let v: Vec<bool> = (0..width).map(|_| rng.gen()).collect();
            assert_eq!(PackedState::encode(&v).unwrap().decode(), v);
        }
    }

    #[test]
    fn try_new_rejects_overflowing_bits() {
        assert!(PackedState::try_new(8, 3).is_err());
        assert!(PackedState::try_new(7, 3).is_ok());
    }

    #[test]
    fn rule_rejects_bad_probabilities() {
        let err = NodeRule::new(1, vec![(x(1), 0.7), (u(1), 0.4)]).unwrap_err();
        assert!(matches!(err, Error::ProbabilitySum { node: 1, .. }));
        let err = NodeRule::new(2, vec![(x(1), 1.5), (u(1), -0.5)]).unwrap_err();
        assert!(matches!(err, Error::InvalidProbability { node: 2, .. }));
    }

    #[test]
    fn model_rejects_out_of_range_variables() {
        let err = PbcnModel::new(1, 1, vec![NodeRule::deterministic(x(2))]).unwrap_err();
        assert!(matches!(
            err,
            Error::VariableOutOfRange { kind: "state", .. }
        ));
        let err = PbcnModel::new(1, 1, vec![NodeRule::deterministic(u(2))]).unwrap_err();
        assert!(matches!(
            err,
            Error::VariableOutOfRange { kind: "input", .. }
        ));
        assert!(PbcnModel::new(2, 0, vec![NodeRule::deterministic(x(1))]).is_err());
    }

    #[test]
    fn deterministic_model_ignores_rng() {
        let model = PbcnModel::new(
            2,
            1,
            vec![
                NodeRule::deterministic(not(u(1))),
                NodeRule::deterministic(x(1)),
            ],
        )
        .unwrap();
        let s = model.state(0b01);
        let a = model.input(0);
        let first = model.step(s, a, &mut ChaCha8Rng::seed_from_u64(1));
        for seed in 0..20 {
            assert_eq!(
                model.step(s, a, &mut ChaCha8Rng::seed_from_u64(seed)),
                first
            );
        }
        assert_eq!(first.bits(), 0b11);
    }

    #[test]
    fn labels_must_match_dimensions() {
        let model = PbcnModel::new(1, 1, vec![NodeRule::deterministic(u(1))]).unwrap();
        assert!(model
            .clone()
            .with_labels(Some(vec!["a".into(), "b".into()]), None)
            .is_err());
        assert!(model
            .with_labels(Some(vec!["a".into()]), Some(vec!["g".into()]))
            .is_ok());
    }
}
