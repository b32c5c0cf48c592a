// SPDX-License-Identifier: Apache-2.0
//! Variable orders and the plain-text ordering file.
//!
//! An ordering file holds one order per line: the circuit name followed by
//! the primary-input names from the top BDD level to the bottom. Blank lines
//! and `#` comments are ignored.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OrderError {
    #[error("order is not a permutation of 0..{0}")]
    NotPermutation(usize),
    #[error("unknown input `{0}`")]
    UnknownInput(String),
    #[error("order names {got} inputs, circuit has {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("line {0}: expected a circuit name followed by input names")]
    Malformed(usize),
}

/// Position → variable permutation. Position 0 is the top BDD level.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarOrder(Vec<usize>);

impl VarOrder {
    pub fn new(perm: Vec<usize>) -> Result<VarOrder, OrderError> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &v in &perm {
            if v >= n || std::mem::replace(&mut seen[v], true) {
                return Err(OrderError::NotPermutation(n));
            }
        }
        Ok(VarOrder(perm))
    }

    pub fn identity(n: usize) -> VarOrder {
        VarOrder((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    /// Variable → position.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (p, &v) in self.0.iter().enumerate() {
            pos[v] = p;
        }
        pos
    }

    pub fn reversed(&self) -> VarOrder {
        VarOrder(self.0.iter().rev().copied().collect())
    }

    pub fn from_names<S: AsRef<str>>(names: &[S], inputs: &[String]) -> Result<VarOrder, OrderError> {
        if names.len() != inputs.len() {
            return Err(OrderError::WrongLength {
                expected: inputs.len(),
                got: names.len(),
            });
        }
        let perm = names
            .iter()
            .map(|n| {
                inputs
                    .iter()
                    .position(|i| i == n.as_ref())
                    .ok_or_else(|| OrderError::UnknownInput(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        VarOrder::new(perm)
    }

    pub fn to_names<'a>(&self, inputs: &'a [String]) -> Vec<&'a str> {
        self.0.iter().map(|&v| inputs[v].as_str()).collect()
    }
}

impl std::ops::Index<usize> for VarOrder {
    type Output = usize;
    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderLine {
    pub circuit: String,
    pub inputs: Vec<String>,
}

pub fn write_order_line(circuit: &str, order: &VarOrder, inputs: &[String]) -> String {
    let mut s = String::from(circuit);
    for name in order.to_names(inputs) {
        let _ = write!(s, " {name}");
    }
    s.push('\n');
    s
}

pub fn parse_order_file(text: &str) -> Result<Vec<OrderLine>, OrderError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        let mut tokens = body.split_whitespace();
        let Some(circuit) = tokens.next() else {
            continue;
        };
        let inputs: Vec<String> = tokens.map(str::to_string).collect();
        if inputs.is_empty() {
            return Err(OrderError::Malformed(i + 1));
        }
        out.push(OrderLine {
            circuit: circuit.to_string(),
            inputs,
        });
    }
    Ok(out)
}
