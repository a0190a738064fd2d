//! Text format for network definitions.
//!
//! ```text
//! # comment
//! nodes: 2
//! inputs: 1
//! label x1: optional description      (optional, all-or-none per kind)
//! node 1:
//!   1.0 :: !u1
//! node 2:
//!   0.8 :: u1 & x1
//!   0.2 :: x2
//! ```
//!
//! Expressions use `x<i>`, `u<j>`, `!`, `&`, `|`, parentheses and the
//! literals `0`/`1`. Precedence is `!` over `&` over `|`.

use super::{BoolExpr, NodeRule, PbcnModel};
use crate::error::{Error, Result};

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    State(usize),
    Input(usize),
    Lit(bool),
    Not,
    And,
    Or,
    Open,
    Close,
}

struct ExprParser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    end_column: usize,
}

fn tokenize(src: &str, line: usize, col0: usize) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = col0 + i;
        match c {
            c if c.is_whitespace() => i += 1,
            '!' => {
                out.push((Tok::Not, column));
                i += 1;
            }
            '&' => {
                out.push((Tok::And, column));
                i += 1;
            }
            '|' => {
                out.push((Tok::Or, column));
                i += 1;
            }
            '(' => {
                out.push((Tok::Open, column));
                i += 1;
            }
            ')' => {
                out.push((Tok::Close, column));
                i += 1;
            }
            '0' | '1' if !chars.get(i + 1).is_some_and(|c| c.is_ascii_alphanumeric()) => {
                out.push((Tok::Lit(c == '1'), column));
                i += 1;
            }
            'x' | 'u' => {
                let start = i + 1;
                let mut end = start;
                while end < chars.len() && chars[end].is_ascii_digit() {
                    end += 1;
                }
                let digits: String = chars[start..end].iter().collect();
                let index: usize = digits
                    .parse()
                    .map_err(|_| syntax(line, column, format!("expected index after '{c}'")))?;
                if index == 0 {
                    return Err(syntax(line, column, "variables are numbered from 1"));
                }
                out.push((
                    if c == 'x' {
                        Tok::State(index - 1)
                    } else {
                        Tok::Input(index - 1)
                    },
                    column,
                ));
                i = end;
            }
            other => {
                return Err(syntax(
                    line,
                    column,
                    format!("unexpected character '{other}'"),
                ))
            }
        }
    }
    Ok(out)
}

impl ExprParser {
    fn peek(&self) -> Option<Tok> {
        self.tokens.get(self.pos).map(|t| t.0)
    }

    fn column(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.1)
            .unwrap_or(self.end_column)
    }

    fn or_expr(&mut self) -> Result<BoolExpr> {
        let mut items = vec![self.and_expr()?];
        while self.peek() == Some(Tok::Or) {
            self.pos += 1;
            items.push(self.and_expr()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            BoolExpr::Or(items)
        })
    }

    fn and_expr(&mut self) -> Result<BoolExpr> {
        let mut items = vec![self.unary()?];
        while self.peek() == Some(Tok::And) {
            self.pos += 1;
            items.push(self.unary()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            BoolExpr::And(items)
        })
    }

    fn unary(&mut self) -> Result<BoolExpr> {
        let column = self.column();
        match self.peek() {
            Some(Tok::Not) => {
                self.pos += 1;
                Ok(BoolExpr::Not(Box::new(self.unary()?)))
            }
            Some(Tok::State(i)) => {
                self.pos += 1;
                Ok(BoolExpr::State(i))
            }
            Some(Tok::Input(j)) => {
                self.pos += 1;
                Ok(BoolExpr::Input(j))
            }
            Some(Tok::Lit(b)) => {
                self.pos += 1;
                Ok(BoolExpr::Const(b))
            }
            Some(Tok::Open) => {
                self.pos += 1;
                let inner = self.or_expr()?;
                if self.peek() != Some(Tok::Close) {
                    return Err(syntax(self.line, self.column(), "expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(_) => Err(syntax(self.line, column, "expected operand")),
            None => Err(syntax(self.line, column, "unexpected end of expression")),
        }
    }
}

/// Parses a single expression; `line`/`col0` only affect error positions.
pub(crate) fn parse_expr(src: &str, line: usize, col0: usize) -> Result<BoolExpr> {
    let tokens = tokenize(src, line, col0)?;
    let mut p = ExprParser {
        tokens,
        pos: 0,
        line,
        end_column: col0 + src.chars().count(),
    };
    let expr = p.or_expr()?;
    if p.pos != p.tokens.len() {
        return Err(syntax(line, p.column(), "trailing tokens after expression"));
    }
    Ok(expr)
}

struct NodeBlock {
    index: usize,
    line: usize,
    alternatives: Vec<(BoolExpr, f64)>,
}

fn header_value(rest: &str, line: usize, col: usize, what: &str) -> Result<usize> {
    rest.trim()
        .parse()
        .map_err(|_| syntax(line, col, format!("expected integer {what}")))
}

/// Column (1-based) of the first non-blank character of `s` inside `line`.
fn col_of(line: &str, s: &str) -> usize {
    let offset = s.as_ptr() as usize - line.as_ptr() as usize;
    line[..offset].chars().count() + 1
}

pub fn parse_model(text: &str) -> Result<PbcnModel> {
    let mut n: Option<usize> = None;
    let mut m: Option<usize> = None;
    let mut blocks: Vec<NodeBlock> = Vec::new();
    let mut node_labels: Vec<(usize, String)> = Vec::new();
    let mut input_labels: Vec<(usize, String)> = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let col = col_of(raw, trimmed);

        if let Some(rest) = trimmed.strip_prefix("nodes:") {
            if n.is_some() {
                return Err(syntax(line_no, col, "duplicate 'nodes' header"));
            }
            n = Some(header_value(rest, line_no, col, "node count")?);
        } else if let Some(rest) = trimmed.strip_prefix("inputs:") {
            if m.is_some() {
                return Err(syntax(line_no, col, "duplicate 'inputs' header"));
            }
            m = Some(header_value(rest, line_no, col, "input count")?);
        } else if let Some(rest) = trimmed.strip_prefix("label ") {
            let (var, text) = rest
                .split_once(':')
                .ok_or_else(|| syntax(line_no, col, "expected 'label x<i>: text'"))?;
            let var = var.trim();
            let target = match var.chars().next() {
                Some('x') => &mut node_labels,
                Some('u') => &mut input_labels,
                _ => return Err(syntax(line_no, col, "label must name x<i> or u<j>")),
            };
            let index: usize = var[1..]
                .parse()
                .ok()
                .filter(|&i| i >= 1)
                .ok_or_else(|| syntax(line_no, col, "bad label variable index"))?;
            target.push((index - 1, text.trim().to_string()));
        } else if let Some(rest) = trimmed.strip_prefix("node ") {
            let index_str = rest
                .strip_suffix(':')
                .ok_or_else(|| syntax(line_no, col, "expected 'node <i>:'"))?;
            let index: usize = index_str
                .trim()
                .parse()
                .ok()
                .filter(|&i| i >= 1)
                .ok_or_else(|| syntax(line_no, col, "expected positive node index"))?;
            if blocks.iter().any(|b| b.index == index) {
                return Err(syntax(
                    line_no,
                    col,
                    format!("duplicate block for node {index}"),
                ));
            }
            blocks.push(NodeBlock {
                index,
                line: line_no,
                alternatives: Vec::new(),
            });
        } else if let Some((prob, expr)) = trimmed.split_once("::") {
            let block = blocks
                .last_mut()
                .ok_or_else(|| syntax(line_no, col, "alternative outside a node block"))?;
            let p: f64 = prob
                .trim()
                .parse()
                .map_err(|_| syntax(line_no, col, "expected probability before '::'"))?;
            let expr_col = col_of(raw, expr);
            block
                .alternatives
                .push((parse_expr(expr, line_no, expr_col)?, p));
        } else {
            return Err(syntax(line_no, col, "unrecognised line"));
        }
    }

    let n = n.ok_or_else(|| syntax(1, 1, "missing 'nodes:' header"))?;
    let m = m.ok_or_else(|| syntax(1, 1, "missing 'inputs:' header"))?;
    blocks.sort_by_key(|b| b.index);
    if blocks.len() != n || blocks.iter().enumerate().any(|(i, b)| b.index != i + 1) {
        return Err(Error::InvalidModel(format!(
            "expected node blocks 1..={n}, found {:?}",
            blocks.iter().map(|b| b.index).collect::<Vec<_>>()
        )));
    }
    let rules = blocks
        .into_iter()
        .map(|b| {
            if b.alternatives.is_empty() {
                return Err(syntax(
                    b.line,
                    1,
                    format!("node {} has no alternatives", b.index),
                ));
            }
            NodeRule::new(b.index, b.alternatives)
        })
        .collect::<Result<Vec<_>>>()?;

    let model = PbcnModel::new(n, m, rules)?;
    let node_labels = collect_labels(node_labels, n, "node")?;
    let input_labels = collect_labels(input_labels, m, "input")?;
    model.with_labels(node_labels, input_labels)
}

fn collect_labels(
    mut labels: Vec<(usize, String)>,
    count: usize,
    kind: &str,
) -> Result<Option<Vec<String>>> {
    if labels.is_empty() {
        return Ok(None);
    }
    labels.sort_by_key(|l| l.0);
    if labels.len() != count || labels.iter().enumerate().any(|(i, l)| l.0 != i) {
        return Err(Error::InvalidModel(format!(
            "{kind} labels must cover every {kind} exactly once"
        )));
    }
    Ok(Some(labels.into_iter().map(|l| l.1).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{and, not, or, u, x};

    #[test]
    fn single_deterministic_negation() {
        let model = parse_model("nodes: 1\ninputs: 1\nnode 1:\n 1.0 :: !u1\n").unwrap();
        assert_eq!(model.n(), 1);
        assert_eq!(model.m(), 1);
        let alts = model.rules()[0].alternatives();
        assert_eq!(alts.len(), 1);
        assert_eq!(alts[0].expr, not(u(1)));
        assert_eq!(alts[0].prob, 1.0);
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let err = parse_model("nodes: 1\ninputs: 1\nnode 1:\n0.7 :: u1\n0.4 :: x1\n").unwrap_err();
        assert!(
            matches!(err, Error::ProbabilitySum { node: 1, .. }),
            "{err}"
        );
    }

    #[test]
    fn precedence_not_and_or() {
        let e = parse_expr("!x1 & x2 | u1", 1, 1).unwrap();
        assert_eq!(e, or([and([not(x(1)), x(2)]), u(1)]));
        let e = parse_expr("!(x1 | x2) & 1", 1, 1).unwrap();
        assert_eq!(e, and([not(or([x(1), x(2)])), BoolExpr::Const(true)]));
    }

    #[test]
    fn syntax_errors_report_position() {
        let err = parse_model("nodes: 1\ninputs: 1\nnode 1:\n  1.0 :: x1 & & u1\n").unwrap_err();
        match err {
            Error::Syntax { line, column, .. } => {
                assert_eq!(line, 4);
                assert_eq!(column, 15);
            }
            other => panic!("unexpected {other}"),
        }
        let err = parse_expr("(x1 | u1", 3, 1).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Syntax {
                    line: 3,
                    column: 9,
                    ..
                }
            ),
            "{err}"
        );
        assert!(matches!(parse_expr("x0", 1, 1), Err(Error::Syntax { .. })));
        assert!(matches!(
            parse_expr("x1 y", 1, 1),
            Err(Error::Syntax { .. })
        ));
    }

    #[test]
    fn out_of_range_variable() {
        let err = parse_model("nodes: 1\ninputs: 1\nnode 1:\n1 :: x3\n").unwrap_err();
        assert!(
            matches!(err, Error::VariableOutOfRange { index: 3, .. }),
            "{err}"
        );
    }

    #[test]
    fn comments_and_labels() {
        let text = "# toy\nnodes: 1 # one node\ninputs: 1\nlabel x1: gene A\nlabel u1: drug\nnode 1:\n  0.8 :: u1\n  0.2 :: x1\n";
        let model = parse_model(text).unwrap();
        assert_eq!(model.node_labels().unwrap(), ["gene A"]);
        assert_eq!(model.input_labels().unwrap(), ["drug"]);
        assert_eq!(parse_model(&model.to_string()).unwrap(), model);
    }

    #[test]
    fn missing_blocks_rejected() {
        assert!(parse_model("nodes: 2\ninputs: 0\nnode 1:\n1 :: x2\n").is_err());
        assert!(parse_model("inputs: 0\nnode 1:\n1 :: x1\n").is_err());
        assert!(parse_model("nodes: 1\ninputs: 0\n1 :: x1\n").is_err());
    }
}
