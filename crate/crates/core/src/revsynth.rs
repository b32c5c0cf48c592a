// SPDX-License-Identifier: Apache-2.0
//! Reversible circuits from BDDs.
//!
//! Every input gets a line that is never written. Every internal node gets a
//! fresh ancilla line, initialised to 0, that ends up holding the node's
//! function. With `x` the node's variable line and `a`, `b` the lines of its
//! low and high children, the node `(x, low, high)` becomes:
//!
//! | low | high | gates                              |
//! |-----|------|------------------------------------|
//! | 0   | 1    | none, the node reuses line `x`     |
//! | 1   | 0    | `CNOT(-x; t)`                      |
//! | 0   | b    | `TOF(x, b; t)`                     |
//! | a   | 0    | `TOF(-x, a; t)`                    |
//! | 1   | b    | `TOF(x, -b; t)`, `NOT(t)`          |
//! | a   | 1    | `CNOT(x; t)`, `TOF(-x, a; t)`      |
//! | a   | b    | `TOF(x, b; t)`, `TOF(-x, a; t)`    |
//!
//! A `-` marks a negative control. Constant outputs get a constant line with
//! no gates. An output whose line is already claimed by another output is
//! copied onto a fresh line with one CNOT.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blif::Netlist;
use crate::robdd::{BddManager, NodeRef};

pub const DEFAULT_MAX_LINES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SynthError {
    #[error("circuit needs more than {0} lines")]
    LineLimit(usize),
    #[error("{roots} roots for {outputs} primary outputs")]
    RootCount { roots: usize, outputs: usize },
    #[error("{0} primary inputs in the netlist, {1} variables in the manager")]
    InputCount(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RealError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `{0}` section")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Control {
    pub line: usize,
    pub positive: bool,
}

impl Control {
    pub fn pos(line: usize) -> Control {
        Control { line, positive: true }
    }

    pub fn neg(line: usize) -> Control {
        Control { line, positive: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    Not,
    Cnot,
    Toffoli,
}

/// Multiple-controlled Toffoli gate with up to two controls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevGate {
    pub controls: Vec<Control>,
    pub target: usize,
}

impl RevGate {
    pub fn not(target: usize) -> RevGate {
        RevGate {
            controls: Vec::new(),
            target,
        }
    }

    pub fn cnot(c: Control, target: usize) -> RevGate {
        RevGate {
            controls: vec![c],
            target,
        }
    }

    pub fn toffoli(c1: Control, c2: Control, target: usize) -> RevGate {
        RevGate {
            controls: vec![c1, c2],
            target,
        }
    }

    pub fn kind(&self) -> GateKind {
        match self.controls.len() {
            0 => GateKind::Not,
            1 => GateKind::Cnot,
            _ => GateKind::Toffoli,
        }
    }

    fn fires(&self, state: &[bool]) -> bool {
        self.controls.iter().all(|c| state[c.line] == c.positive)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReversibleCircuit {
    pub input_labels: Vec<String>,
    pub output_labels: Vec<String>,
    pub constants: Vec<Option<bool>>,
    pub garbage: Vec<bool>,
    pub gates: Vec<RevGate>,
}

impl ReversibleCircuit {
    pub fn lines(&self) -> usize {
        self.constants.len()
    }

    fn add_line(&mut self, input: String, constant: Option<bool>) -> usize {
        self.input_labels.push(input);
        self.output_labels.push(String::new());
        self.constants.push(constant);
        self.garbage.push(true);
        self.lines() - 1
    }

    pub fn validate(&self) -> Result<(), String> {
        let n = self.lines();
        if [self.input_labels.len(), self.output_labels.len(), self.garbage.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err("per-line vectors differ in length".into());
        }
        for (i, g) in self.gates.iter().enumerate() {
            if g.controls.len() > 2 {
                return Err(format!("gate {i} has {} controls", g.controls.len()));
            }
            if g.target >= n || g.controls.iter().any(|c| c.line >= n) {
                return Err(format!("gate {i} uses a line out of range"));
            }
            if g.controls.iter().any(|c| c.line == g.target) {
                return Err(format!("gate {i} controls its own target"));
            }
            if g.controls.len() == 2 && g.controls[0].line == g.controls[1].line {
                return Err(format!("gate {i} repeats a control line"));
            }
        }
        Ok(())
    }

    /// Line index of a non-garbage output.
    pub fn output_line(&self, name: &str) -> Option<usize> {
        (0..self.lines()).find(|&l| !self.garbage[l] && self.output_labels[l] == name)
    }
}

/// Per-gate costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub not_cost: usize,
    pub cnot_cost: usize,
    pub toffoli_cost: usize,
    /// Toffoli whose two controls are both negative.
    pub toffoli_two_negative_cost: usize,
    pub transistors_per_control: usize,
}

impl Default for CostModel {
    fn default() -> CostModel {
        CostModel {
            not_cost: 1,
            cnot_cost: 1,
            toffoli_cost: 5,
            toffoli_two_negative_cost: 6,
            transistors_per_control: 8,
        }
    }
}

pub fn quantum_cost(circuit: &ReversibleCircuit, model: &CostModel) -> usize {
    circuit
        .gates
        .iter()
        .map(|g| match g.kind() {
            GateKind::Not => model.not_cost,
            GateKind::Cnot => model.cnot_cost,
            GateKind::Toffoli if g.controls.iter().all(|c| !c.positive) => model.toffoli_two_negative_cost,
            GateKind::Toffoli => model.toffoli_cost,
        })
        .sum()
}

pub fn transistor_cost(circuit: &ReversibleCircuit, model: &CostModel) -> usize {
    circuit
        .gates
        .iter()
        .map(|g| g.controls.len() * model.transistors_per_control)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Metrics {
    pub gates: usize,
    pub lines: usize,
    pub quantum_cost: usize,
    pub transistor_cost: usize,
}

pub fn metrics(circuit: &ReversibleCircuit, model: &CostModel) -> Metrics {
    Metrics {
        gates: circuit.gates.len(),
        lines: circuit.lines(),
        quantum_cost: quantum_cost(circuit, model),
        transistor_cost: transistor_cost(circuit, model),
    }
}

pub fn synthesize(manager: &BddManager, roots: &[NodeRef], netlist: &Netlist) -> Result<ReversibleCircuit, SynthError> {
    synthesize_with_limit(manager, roots, netlist, DEFAULT_MAX_LINES)
}

pub fn synthesize_with_limit(
    manager: &BddManager,
    roots: &[NodeRef],
    netlist: &Netlist,
    max_lines: usize,
) -> Result<ReversibleCircuit, SynthError> {
    let npi = netlist.num_inputs();
    if npi != manager.num_vars() {
        return Err(SynthError::InputCount(npi, manager.num_vars()));
    }
    if roots.len() != netlist.primary_outputs.len() {
        return Err(SynthError::RootCount {
            roots: roots.len(),
            outputs: netlist.primary_outputs.len(),
        });
    }
    let mut c = ReversibleCircuit::default();
    let fresh = |c: &mut ReversibleCircuit, constant: bool| -> Result<usize, SynthError> {
        if c.lines() >= max_lines {
            return Err(SynthError::LineLimit(max_lines));
        }
        let k = c.lines() - npi;
        Ok(c.add_line(format!("a{k}"), Some(constant)))
    };
    for pi in &netlist.primary_inputs {
        c.add_line(pi.clone(), None);
    }
    if npi > max_lines {
        return Err(SynthError::LineLimit(max_lines));
    }

    let mut line_of: HashMap<NodeRef, usize> = HashMap::new();
    for f in manager.postorder(roots) {
        let n = manager.node(f).expect("postorder yields internal nodes");
        let x = n.var;
        let child = |r: NodeRef| line_of.get(&r).copied();
        let line = match (n.low, n.high) {
            (NodeRef::FALSE, NodeRef::TRUE) => x,
            (lo, hi) => {
                let t = fresh(&mut c, false)?;
                let gates = match (lo, hi) {
                    (NodeRef::TRUE, NodeRef::FALSE) => vec![RevGate::cnot(Control::neg(x), t)],
                    (NodeRef::FALSE, b) => vec![RevGate::toffoli(Control::pos(x), Control::pos(child(b).unwrap()), t)],
                    (a, NodeRef::FALSE) => vec![RevGate::toffoli(Control::neg(x), Control::pos(child(a).unwrap()), t)],
                    (NodeRef::TRUE, b) => vec![
                        RevGate::toffoli(Control::pos(x), Control::neg(child(b).unwrap()), t),
                        RevGate::not(t),
                    ],
                    (a, NodeRef::TRUE) => vec![
                        RevGate::cnot(Control::pos(x), t),
                        RevGate::toffoli(Control::neg(x), Control::pos(child(a).unwrap()), t),
                    ],
                    (a, b) => vec![
                        RevGate::toffoli(Control::pos(x), Control::pos(child(b).unwrap()), t),
                        RevGate::toffoli(Control::neg(x), Control::pos(child(a).unwrap()), t),
                    ],
                };
                c.gates.extend(gates);
                t
            }
        };
        line_of.insert(f, line);
    }

    let mut claimed = vec![false; c.lines()];
    for (name, &r) in netlist.primary_outputs.iter().zip(roots) {
        let line = if r.is_terminal() {
            fresh(&mut c, r == NodeRef::TRUE)?
        } else {
            let src = line_of[&r];
            if claimed[src] {
                let t = fresh(&mut c, false)?;
                c.gates.push(RevGate::cnot(Control::pos(src), t));
                t
            } else {
                src
            }
        };
        claimed.resize(c.lines(), false);
        claimed[line] = true;
        c.output_labels[line] = name.clone();
        c.garbage[line] = false;
    }
    for l in 0..c.lines() {
        if c.garbage[l] {
            c.output_labels[l] = if l < npi {
                c.input_labels[l].clone()
            } else {
                format!("g{l}")
            };
        }
    }
    debug_assert_eq!(c.validate(), Ok(()));
    Ok(c)
}

/// Applies every gate in order to a full line assignment.
pub fn simulate_reversible(circuit: &ReversibleCircuit, state: &[bool]) -> Vec<bool> {
    let mut s = state.to_vec();
    for g in &circuit.gates {
        if g.fires(&s) {
            s[g.target] = !s[g.target];
        }
    }
    s
}

/// Line assignment for the given primary-input values, constants filled in.
pub fn initial_state(circuit: &ReversibleCircuit, inputs: &[bool]) -> Vec<bool> {
    let mut it = inputs.iter();
    circuit
        .constants
        .iter()
        .map(|c| match c {
            Some(v) => *v,
            None => *it.next().expect("one value per non-constant line"),
        })
        .collect()
}

/// First input assignment on which the circuit and the netlist disagree.
pub fn verify_against(circuit: &ReversibleCircuit, netlist: &Netlist) -> Result<(), String> {
    let n = netlist.num_inputs();
    if n > 24 {
        return Err(format!("{n} inputs is too many for exhaustive verification"));
    }
    let lines: Vec<usize> = netlist
        .primary_outputs
        .iter()
        .map(|o| circuit.output_line(o).ok_or_else(|| format!("no line for output {o}")))
        .collect::<Result<_, _>>()?;
    let sim = crate::blif::Simulator::new(netlist);
    for m in 0..1usize << n {
        let a: Vec<bool> = (0..n).map(|i| (m >> i) & 1 == 1).collect();
        let want = sim.run(&a);
        let got = simulate_reversible(circuit, &initial_state(circuit, &a));
        for (k, &l) in lines.iter().enumerate() {
            if got[l] != want[k] {
                return Err(format!(
                    "output {} differs on input {a:?}",
                    netlist.primary_outputs[k]
                ));
            }
        }
    }
    Ok(())
}

/// Exhaustively checks that the line-state map is a bijection.
pub fn is_bijection(circuit: &ReversibleCircuit) -> bool {
    let n = circuit.lines();
    assert!(n <= 24, "exhaustive check limited to 24 lines");
    let mut seen = vec![false; 1 << n];
    for m in 0..1usize << n {
        let s: Vec<bool> = (0..n).map(|i| (m >> i) & 1 == 1).collect();
        let out = simulate_reversible(circuit, &s);
        let k = out.iter().enumerate().fold(0usize, |k, (i, &b)| k | (b as usize) << i);
        if std::mem::replace(&mut seen[k], true) {
            return false;
        }
    }
    true
}

/// Samples random states and checks that running the gates backwards
/// recovers each one, which rules out collisions on those states.
pub fn spot_check_reversible(circuit: &ReversibleCircuit, samples: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).all(|_| {
        let s: Vec<bool> = (0..circuit.lines()).map(|_| rng.gen()).collect();
        let mut back = simulate_reversible(circuit, &s);
        for g in circuit.gates.iter().rev() {
            if g.fires(&back) {
                back[g.target] = !back[g.target];
            }
        }
        back == s
    })
}

fn var_name(l: usize) -> String {
    format!("l{l}")
}

pub fn write_real(circuit: &ReversibleCircuit) -> String {
    let n = circuit.lines();
    let mut s = String::new();
    let vars: Vec<String> = (0..n).map(var_name).collect();
    let _ = writeln!(s, ".version 2.0");
    let _ = writeln!(s, ".numvars {n}");
    let _ = writeln!(s, ".variables {}", vars.join(" "));
    let _ = writeln!(s, ".inputs {}", circuit.input_labels.join(" "));
    let _ = writeln!(s, ".outputs {}", circuit.output_labels.join(" "));
    let consts: String = circuit
        .constants
        .iter()
        .map(|c| match c {
            None => '-',
            Some(false) => '0',
            Some(true) => '1',
        })
        .collect();
    let _ = writeln!(s, ".constants {consts}");
    let garbage: String = circuit.garbage.iter().map(|&g| if g { '1' } else { '0' }).collect();
    let _ = writeln!(s, ".garbage {garbage}");
    let _ = writeln!(s, ".begin");
    for g in &circuit.gates {
        let mut parts = vec![format!("t{}", g.controls.len() + 1)];
        for c in &g.controls {
            let sign = if c.positive { "" } else { "-" };
            parts.push(format!("{sign}{}", vars[c.line]));
        }
        parts.push(vars[g.target].clone());
        let _ = writeln!(s, "{}", parts.join(" "));
    }
    let _ = writeln!(s, ".end");
    s
}

pub fn parse_real(text: &str) -> Result<ReversibleCircuit, RealError> {
    let mut vars: Option<Vec<String>> = None;
    let mut inputs = None;
    let mut outputs = None;
    let mut constants = None;
    let mut garbage = None;
    let mut gates = Vec::new();
    let mut in_body = false;
    let syntax = |line: usize, msg: String| RealError::Syntax { line: line + 1, msg };
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let mut words = line.split_whitespace();
        let head = words.next().unwrap();
        let rest: Vec<&str> = words.collect();
        if in_body {
            if head == ".end" {
                in_body = false;
                continue;
            }
            let vars = vars.as_ref().ok_or(RealError::Missing(".variables"))?;
            let arity: usize = head
                .strip_prefix('t')
                .and_then(|k| k.parse().ok())
                .ok_or_else(|| syntax(ln, format!("unknown gate `{head}`")))?;
            if arity == 0 || arity > 3 || rest.len() != arity {
                return Err(syntax(ln, format!("gate `{head}` with {} operands", rest.len())));
            }
            let lookup = |w: &str| {
                vars.iter()
                    .position(|v| v == w)
                    .ok_or_else(|| syntax(ln, format!("unknown variable `{w}`")))
            };
            let mut controls = Vec::new();
            for w in &rest[..arity - 1] {
                let (positive, name) = match w.strip_prefix('-') {
                    Some(n) => (false, n),
                    None => (true, *w),
                };
                controls.push(Control {
                    line: lookup(name)?,
                    positive,
                });
            }
            if rest[arity - 1].starts_with('-') {
                return Err(syntax(ln, "negated target".into()));
            }
            gates.push(RevGate {
                controls,
                target: lookup(rest[arity - 1])?,
            });
            continue;
        }
        let flags = |what: &str| -> Result<Vec<char>, RealError> {
            match rest.as_slice() {
                [w] => Ok(w.chars().collect()),
                _ => Err(syntax(ln, format!("`{what}` takes one word"))),
            }
        };
        match head {
            ".version" | ".numvars" => {}
            ".variables" => vars = Some(rest.iter().map(|s| s.to_string()).collect()),
            ".inputs" => inputs = Some(rest.iter().map(|s| s.to_string()).collect::<Vec<_>>()),
            ".outputs" => outputs = Some(rest.iter().map(|s| s.to_string()).collect::<Vec<_>>()),
            ".constants" => {
                let mut v = Vec::new();
                for ch in flags(".constants")? {
                    v.push(match ch {
                        '-' => None,
                        '0' => Some(false),
                        '1' => Some(true),
                        _ => return Err(syntax(ln, format!("bad constant `{ch}`"))),
                    });
                }
                constants = Some(v);
            }
            ".garbage" => {
                let mut v = Vec::new();
                for ch in flags(".garbage")? {
                    v.push(match ch {
                        '-' | '0' => false,
                        '1' => true,
                        _ => return Err(syntax(ln, format!("bad garbage flag `{ch}`"))),
                    });
                }
                garbage = Some(v);
            }
            ".begin" => in_body = true,
            _ => return Err(syntax(ln, format!("unexpected `{head}`"))),
        }
    }
    let n = vars.as_ref().ok_or(RealError::Missing(".variables"))?.len();
    let c = ReversibleCircuit {
        input_labels: inputs.unwrap_or_else(|| vars.clone().unwrap()),
        output_labels: outputs.unwrap_or_else(|| vars.clone().unwrap()),
        constants: constants.unwrap_or_else(|| vec![None; n]),
        garbage: garbage.unwrap_or_else(|| vec![false; n]),
        gates,
    };
    c.validate().map_err(RealError::Invalid)?;
    Ok(c)
}
