// SPDX-License-Identifier: Apache-2.0
//! Combinational BLIF netlists.
//!
//! Only the `.model/.inputs/.outputs/.names/.end` subset is accepted. Each
//! `.names` block is a single-polarity cube cover: every row of a block must
//! carry the same output value. Rows with output `1` list the on-set, rows
//! with output `0` list the off-set. An empty cover is the constant 0.

use std::collections::{BinaryHeap, HashMap, HashSet};
use std::cmp::Reverse;
use std::fmt::Write as _;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BlifError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unsupported construct `{what}`")]
    Unsupported { line: usize, what: String },
    #[error("line {line}: gate `{gate}` mixes on-set and off-set rows")]
    MixedPolarity { line: usize, gate: String },
    #[error("undefined signal `{0}`")]
    UndefinedSignal(String),
    #[error("signal `{0}` is driven more than once")]
    DuplicateDriver(String),
    #[error("combinational cycle through `{0}`")]
    Cycle(String),
    #[error("gate `{gate}`: {msg}")]
    InvalidGate { gate: String, msg: String },
    #[error("cannot negate {requested} signals: only {available} internal signals")]
    TooManySignals { requested: usize, available: usize },
}

/// One position of a cube's input pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lit {
    Zero,
    One,
    DontCare,
}

impl Lit {
    fn from_char(c: char) -> Option<Lit> {
        match c {
            '0' => Some(Lit::Zero),
            '1' => Some(Lit::One),
            '-' => Some(Lit::DontCare),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Lit::Zero => '0',
            Lit::One => '1',
            Lit::DontCare => '-',
        }
    }

    #[inline]
    pub fn matches(self, value: bool) -> bool {
        match self {
            Lit::Zero => !value,
            Lit::One => value,
            Lit::DontCare => true,
        }
    }
}

/// A cover row: an input pattern and the output value it asserts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cube {
    pub pattern: Vec<Lit>,
    pub output: bool,
}

impl Cube {
    pub fn new(pattern: &str, output: bool) -> Cube {
        Cube {
            pattern: pattern
                .chars()
                .map(|c| Lit::from_char(c).expect("cube pattern uses 0/1/-"))
                .collect(),
            output,
        }
    }

    pub fn matches(&self, inputs: &[bool]) -> bool {
        self.pattern.iter().zip(inputs).all(|(l, &v)| l.matches(v))
    }

    pub fn pattern_string(&self) -> String {
        self.pattern.iter().map(|l| l.as_char()).collect()
    }
}

/// A `.names` gate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicGate {
    pub inputs: Vec<String>,
    pub output: String,
    pub cover: Vec<Cube>,
}

impl LogicGate {
    pub fn new(inputs: &[&str], output: &str, cover: Vec<Cube>) -> LogicGate {
        LogicGate {
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            output: output.to_string(),
            cover,
        }
    }

    pub fn arity(&self) -> usize {
        self.inputs.len()
    }

    /// Output value carried by the cover rows; an empty cover counts as on-set.
    pub fn polarity(&self) -> bool {
        self.cover.first().is_none_or(|c| c.output)
    }

    pub fn eval(&self, inputs: &[bool]) -> bool {
        if self.cover.is_empty() {
            return false;
        }
        let hit = self.cover.iter().any(|c| c.matches(inputs));
        if self.polarity() {
            hit
        } else {
            !hit
        }
    }

    /// The same gate with its output inverted.
    pub fn negated(&self) -> LogicGate {
        let cover = if self.cover.is_empty() {
            vec![Cube {
                pattern: vec![Lit::DontCare; self.inputs.len()],
                output: true,
            }]
        } else {
            self.cover
                .iter()
                .map(|c| Cube {
                    pattern: c.pattern.clone(),
                    output: !c.output,
                })
                .collect()
        };
        LogicGate {
            inputs: self.inputs.clone(),
            output: self.output.clone(),
            cover,
        }
    }

    fn check(&self) -> Result<(), BlifError> {
        let bad = |msg: &str| {
            Err(BlifError::InvalidGate {
                gate: self.output.clone(),
                msg: msg.to_string(),
            })
        };
        let mut seen = HashSet::new();
        for i in &self.inputs {
            if !seen.insert(i.as_str()) {
                return bad("repeated input");
            }
        }
        if seen.contains(self.output.as_str()) {
            return bad("output is also an input");
        }
        if self.cover.iter().any(|c| c.pattern.len() != self.inputs.len()) {
            return bad("cube width differs from input count");
        }
        if self.cover.iter().any(|c| c.output != self.polarity()) {
            return bad("mixed-polarity cover");
        }
        Ok(())
    }
}

/// A parsed combinational circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    pub name: String,
    pub primary_inputs: Vec<String>,
    pub primary_outputs: Vec<String>,
    /// Gates in the order they were written.
    pub gates: Vec<LogicGate>,
}

impl Netlist {
    pub fn num_inputs(&self) -> usize {
        self.primary_inputs.len()
    }

    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.primary_inputs.iter().position(|p| p == name)
    }

    /// Checks the structural invariants and returns the gates in a
    /// deterministic topological order (ties broken by written position).
    pub fn validate(&self) -> Result<Vec<usize>, BlifError> {
        let mut driver: HashMap<&str, Option<usize>> = HashMap::new();
        for pi in &self.primary_inputs {
            if driver.insert(pi.as_str(), None).is_some() {
                return Err(BlifError::DuplicateDriver(pi.clone()));
            }
        }
        for (g, gate) in self.gates.iter().enumerate() {
            gate.check()?;
            if driver.insert(gate.output.as_str(), Some(g)).is_some() {
                return Err(BlifError::DuplicateDriver(gate.output.clone()));
            }
        }
        for gate in &self.gates {
            for i in &gate.inputs {
                if !driver.contains_key(i.as_str()) {
                    return Err(BlifError::UndefinedSignal(i.clone()));
                }
            }
        }
        for po in &self.primary_outputs {
            if !driver.contains_key(po.as_str()) {
                return Err(BlifError::UndefinedSignal(po.clone()));
            }
        }

        // Kahn over gates only; PIs are already available.
        let n = self.gates.len();
        let mut pending = vec![0usize; n];
        let mut fanout: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (g, gate) in self.gates.iter().enumerate() {
            for i in &gate.inputs {
                if let Some(Some(d)) = driver.get(i.as_str()) {
                    pending[g] += 1;
                    fanout[*d].push(g);
                }
            }
        }
        let mut ready: BinaryHeap<Reverse<usize>> =
            (0..n).filter(|&g| pending[g] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(g)) = ready.pop() {
            order.push(g);
            for &s in &fanout[g] {
                pending[s] -= 1;
                if pending[s] == 0 {
                    ready.push(Reverse(s));
                }
            }
        }
        if order.len() != n {
            let stuck = (0..n).find(|&g| pending[g] > 0).unwrap();
            return Err(BlifError::Cycle(self.gates[stuck].output.clone()));
        }
        Ok(order)
    }

    /// Gate indices in topological order. Panics on an invalid netlist.
    pub fn topo_order(&self) -> Vec<usize> {
        self.validate().expect("valid netlist")
    }

    pub fn simulate(&self, assignment: &[bool]) -> Vec<bool> {
        Simulator::new(self).run(assignment)
    }
}

/// Precomputed evaluation schedule for repeated simulation of one netlist.
#[derive(Debug, Clone)]
pub struct Simulator {
    num_inputs: usize,
    num_signals: usize,
    /// (gate index, input signal ids, output signal id), topologically sorted.
    schedule: Vec<(usize, Vec<usize>, usize)>,
    outputs: Vec<usize>,
    gates: Vec<LogicGate>,
}

impl Simulator {
    pub fn new(netlist: &Netlist) -> Simulator {
        let order = netlist.topo_order();
        let mut ids: HashMap<&str, usize> = HashMap::new();
        for (i, pi) in netlist.primary_inputs.iter().enumerate() {
            ids.insert(pi, i);
        }
        for (g, gate) in netlist.gates.iter().enumerate() {
            ids.insert(&gate.output, netlist.num_inputs() + g);
        }
        let schedule = order
            .iter()
            .map(|&g| {
                let gate = &netlist.gates[g];
                let ins = gate.inputs.iter().map(|i| ids[i.as_str()]).collect();
                (g, ins, ids[gate.output.as_str()])
            })
            .collect();
        Simulator {
            num_inputs: netlist.num_inputs(),
            num_signals: netlist.num_inputs() + netlist.gates.len(),
            schedule,
            outputs: netlist
                .primary_outputs
                .iter()
                .map(|o| ids[o.as_str()])
                .collect(),
            gates: netlist.gates.clone(),
        }
    }

    pub fn run(&self, assignment: &[bool]) -> Vec<bool> {
        assert_eq!(
            assignment.len(),
            self.num_inputs,
            "assignment must cover every primary input"
        );
        let mut values = vec![false; self.num_signals];
        values[..self.num_inputs].copy_from_slice(assignment);
        let mut buf = Vec::new();
        for (g, ins, out) in &self.schedule {
            buf.clear();
            buf.extend(ins.iter().map(|&i| values[i]));
            values[*out] = self.gates[*g].eval(&buf);
        }
        self.outputs.iter().map(|&o| values[o]).collect()
    }

    /// Output bits packed per assignment index; bit `i` of the index is input `i`.
    pub fn truth_table(&self) -> Vec<Vec<bool>> {
        let n = self.num_inputs;
        (0..1usize << n)
            .map(|m| {
                let a: Vec<bool> = (0..n).map(|i| (m >> i) & 1 == 1).collect();
                self.run(&a)
            })
            .collect()
    }
}

pub fn simulate(netlist: &Netlist, assignment: &[bool]) -> Vec<bool> {
    netlist.simulate(assignment)
}

struct LogicalLine {
    number: usize,
    tokens: Vec<String>,
}

fn logical_lines(text: &str) -> Vec<LogicalLine> {
    let mut out = Vec::new();
    let mut pending: Option<LogicalLine> = None;
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        let trimmed = body.trim_end();
        let (content, continued) = match trimmed.strip_suffix('\\') {
            Some(rest) => (rest, true),
            None => (trimmed, false),
        };
        let line = pending.get_or_insert_with(|| LogicalLine {
            number,
            tokens: Vec::new(),
        });
        line.tokens
            .extend(content.split_whitespace().map(str::to_string));
        if !continued {
            let line = pending.take().unwrap();
            if !line.tokens.is_empty() {
                out.push(line);
            }
        }
    }
    if let Some(line) = pending {
        if !line.tokens.is_empty() {
            out.push(line);
        }
    }
    out
}

pub fn parse_blif(text: &str) -> Result<Netlist, BlifError> {
    let mut name: Option<String> = None;
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut gates: Vec<LogicGate> = Vec::new();
    let mut in_names = false;
    let mut ended = false;

    for line in logical_lines(text) {
        let ln = line.number;
        let head = line.tokens[0].as_str();
        if ended {
            return Err(BlifError::Unsupported {
                line: ln,
                what: "content after .end (multiple models)".into(),
            });
        }
        if head.starts_with('.') {
            in_names = false;
            let args = &line.tokens[1..];
            match head {
                ".model" => {
                    if name.is_some() {
                        return Err(BlifError::Unsupported {
                            line: ln,
                            what: "multiple .model".into(),
                        });
                    }
                    name = Some(args.first().cloned().unwrap_or_default());
                }
                ".inputs" => inputs.extend(args.iter().cloned()),
                ".outputs" => outputs.extend(args.iter().cloned()),
                ".names" => {
                    let Some((out, ins)) = args.split_last() else {
                        return Err(BlifError::Syntax {
                            line: ln,
                            msg: ".names needs at least an output".into(),
                        });
                    };
                    gates.push(LogicGate {
                        inputs: ins.to_vec(),
                        output: out.clone(),
                        cover: Vec::new(),
                    });
                    in_names = true;
                }
                ".end" => ended = true,
                other => {
                    return Err(BlifError::Unsupported {
                        line: ln,
                        what: other.to_string(),
                    })
                }
            }
            continue;
        }

        if !in_names {
            return Err(BlifError::Syntax {
                line: ln,
                msg: format!("cover row `{}` outside a .names block", line.tokens.join(" ")),
            });
        }
        let gate = gates.last_mut().unwrap();
        let (pattern, value) = match (gate.inputs.len(), line.tokens.as_slice()) {
            (0, [v]) => ("", v.as_str()),
            (n, [p, v]) if n > 0 => (p.as_str(), v.as_str()),
            _ => {
                return Err(BlifError::Syntax {
                    line: ln,
                    msg: "malformed cover row".into(),
                })
            }
        };
        if pattern.chars().count() != gate.inputs.len() {
            return Err(BlifError::Syntax {
                line: ln,
                msg: format!(
                    "pattern `{pattern}` has {} symbols, gate has {} inputs",
                    pattern.chars().count(),
                    gate.inputs.len()
                ),
            });
        }
        let pattern = pattern
            .chars()
            .map(|c| {
                Lit::from_char(c).ok_or_else(|| BlifError::Syntax {
                    line: ln,
                    msg: format!("bad pattern symbol `{c}`"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let output = match value {
            "1" => true,
            "0" => false,
            _ => {
                return Err(BlifError::Syntax {
                    line: ln,
                    msg: format!("bad output value `{value}`"),
                })
            }
        };
        if gate.cover.first().is_some_and(|c| c.output != output) {
            return Err(BlifError::MixedPolarity {
                line: ln,
                gate: gate.output.clone(),
            });
        }
        gate.cover.push(Cube { pattern, output });
    }

    let netlist = Netlist {
        name: name.unwrap_or_default(),
        primary_inputs: inputs,
        primary_outputs: outputs,
        gates,
    };
    netlist.validate()?;
    Ok(netlist)
}

pub fn write_blif(netlist: &Netlist) -> String {
    let mut s = String::new();
    if netlist.name.is_empty() {
        s.push_str(".model\n");
    } else {
        let _ = writeln!(s, ".model {}", netlist.name);
    }
    if !netlist.primary_inputs.is_empty() {
        let _ = writeln!(s, ".inputs {}", netlist.primary_inputs.join(" "));
    }
    if !netlist.primary_outputs.is_empty() {
        let _ = writeln!(s, ".outputs {}", netlist.primary_outputs.join(" "));
    }
    for gate in &netlist.gates {
        s.push_str(".names");
        for i in &gate.inputs {
            s.push(' ');
            s.push_str(i);
        }
        s.push(' ');
        s.push_str(&gate.output);
        s.push('\n');
        for cube in &gate.cover {
            let v = if cube.output { '1' } else { '0' };
            if gate.inputs.is_empty() {
                let _ = writeln!(s, "{v}");
            } else {
                let _ = writeln!(s, "{} {v}", cube.pattern_string());
            }
        }
    }
    s.push_str(".end\n");
    s
}

/// Inverts `k` distinct gate outputs chosen uniformly with `seed`.
///
/// Consumers are left untouched, so the result is the original circuit with
/// those internal signals complemented at their drivers.
pub fn negate_random_signals(netlist: &Netlist, k: usize, seed: u64) -> Result<Netlist, BlifError> {
    let available = netlist.gates.len();
    if k > available {
        return Err(BlifError::TooManySignals {
            requested: k,
            available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, available, k).into_vec();
    picked.sort_unstable();
    Ok(negate_signals(netlist, &picked))
}

/// Inverts the outputs of the given gates (by index).
pub fn negate_signals(netlist: &Netlist, gates: &[usize]) -> Netlist {
    let mut out = netlist.clone();
    for &g in gates {
        out.gates[g] = out.gates[g].negated();
    }
    out
}

/// Indices of the gates `negate_random_signals` would pick for `(k, seed)`.
pub fn negation_choice(netlist: &Netlist, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, netlist.gates.len(), k.min(netlist.gates.len())).into_vec();
    picked.sort_unstable();
    picked
}

/// Splits every gate wider than `max_arity` into a tree of narrower gates.
///
/// Single-cube covers become balanced AND trees, covers made of
/// single-literal cubes become balanced OR trees, and anything else is
/// Shannon-expanded on its first input. Function is preserved exactly.
pub fn bound_fanin(netlist: &Netlist, max_arity: usize) -> Netlist {
    assert!(max_arity >= 2, "max_arity must be at least 2");
    if netlist.gates.iter().all(|g| g.arity() <= max_arity) {
        return netlist.clone();
    }
    let mut names = Names::new(netlist);
    let mut gates = Vec::with_capacity(netlist.gates.len());
    for gate in &netlist.gates {
        if gate.arity() <= max_arity {
            gates.push(gate.clone());
            continue;
        }
        let cover = Sop {
            inputs: gate.inputs.clone(),
            cubes: gate.cover.iter().map(|c| c.pattern.clone()).collect(),
            on_set: gate.polarity(),
        };
        decompose(cover, &gate.output, max_arity, &mut names, &mut gates);
    }
    Netlist {
        name: netlist.name.clone(),
        primary_inputs: netlist.primary_inputs.clone(),
        primary_outputs: netlist.primary_outputs.clone(),
        gates,
    }
}

struct Names {
    used: HashSet<String>,
    counter: usize,
}

impl Names {
    fn new(netlist: &Netlist) -> Names {
        let mut used: HashSet<String> = netlist.primary_inputs.iter().cloned().collect();
        used.extend(netlist.gates.iter().map(|g| g.output.clone()));
        Names { used, counter: 0 }
    }

    fn fresh(&mut self, base: &str) -> String {
        loop {
            let candidate = format!("{base}_d{}", self.counter);
            self.counter += 1;
            if self.used.insert(candidate.clone()) {
                return candidate;
            }
        }
    }
}

/// Cover with an explicit polarity, so an empty cube list keeps its meaning.
#[derive(Clone)]
struct Sop {
    inputs: Vec<String>,
    cubes: Vec<Vec<Lit>>,
    on_set: bool,
}

impl Sop {
    /// Drops inputs that are don't-care in every cube.
    fn reduce_support(mut self) -> Sop {
        let keep: Vec<usize> = (0..self.inputs.len())
            .filter(|&i| self.cubes.iter().any(|c| c[i] != Lit::DontCare))
            .collect();
        self.inputs = keep.iter().map(|&i| self.inputs[i].clone()).collect();
        for c in &mut self.cubes {
            *c = keep.iter().map(|&i| c[i]).collect();
        }
        self
    }

    fn into_gate(self, output: &str) -> LogicGate {
        let cover = if self.cubes.is_empty() {
            if self.on_set {
                Vec::new()
            } else {
                // no off-set rows: constant 1
                vec![Cube {
                    pattern: vec![Lit::DontCare; self.inputs.len()],
                    output: true,
                }]
            }
        } else {
            self.cubes
                .into_iter()
                .map(|pattern| Cube {
                    pattern,
                    output: self.on_set,
                })
                .collect()
        };
        LogicGate {
            inputs: self.inputs,
            output: output.to_string(),
            cover,
        }
    }

    fn cofactor(&self, value: bool) -> Sop {
        let cubes = self
            .cubes
            .iter()
            .filter(|c| c[0].matches(value))
            .map(|c| c[1..].to_vec())
            .collect();
        Sop {
            inputs: self.inputs[1..].to_vec(),
            cubes,
            on_set: self.on_set,
        }
    }
}

fn decompose(sop: Sop, output: &str, max: usize, names: &mut Names, gates: &mut Vec<LogicGate>) {
    let sop = sop.reduce_support();
    if sop.inputs.len() <= max {
        gates.push(sop.into_gate(output));
        return;
    }

    if sop.cubes.len() == 1 {
        let lits: Vec<(String, Lit)> = sop
            .inputs
            .iter()
            .cloned()
            .zip(sop.cubes[0].iter().copied())
            .collect();
        tree(&lits, output, sop.on_set, TreeKind::And, max, names, gates);
        return;
    }

    let single_literal = sop
        .cubes
        .iter()
        .all(|c| c.iter().filter(|l| **l != Lit::DontCare).count() == 1);
    // after support reduction each input appears in some cube; an OR tree
    // needs each input in exactly one cube
    if single_literal && sop.cubes.len() == sop.inputs.len() {
        let lits: Vec<(String, Lit)> = sop
            .cubes
            .iter()
            .map(|c| {
                let i = c.iter().position(|l| *l != Lit::DontCare).unwrap();
                (sop.inputs[i].clone(), c[i])
            })
            .collect();
        tree(&lits, output, sop.on_set, TreeKind::Or, max, names, gates);
        return;
    }

    let x = sop.inputs[0].clone();
    let hi = names.fresh(output);
    decompose(sop.cofactor(true), &hi, max, names, gates);
    let lo = names.fresh(output);
    decompose(sop.cofactor(false), &lo, max, names, gates);
    if max >= 3 {
        gates.push(LogicGate {
            inputs: vec![x, hi, lo],
            output: output.to_string(),
            cover: vec![Cube::new("11-", true), Cube::new("0-1", true)],
        });
    } else {
        let t1 = names.fresh(output);
        let t0 = names.fresh(output);
        gates.push(LogicGate {
            inputs: vec![x.clone(), hi],
            output: t1.clone(),
            cover: vec![Cube::new("11", true)],
        });
        gates.push(LogicGate {
            inputs: vec![x, lo],
            output: t0.clone(),
            cover: vec![Cube::new("01", true)],
        });
        gates.push(LogicGate {
            inputs: vec![t1, t0],
            output: output.to_string(),
            cover: vec![Cube::new("1-", true), Cube::new("-1", true)],
        });
    }
}

#[derive(Clone, Copy, PartialEq)]
enum TreeKind {
    And,
    Or,
}

/// Balanced AND/OR tree over literals; only the root carries `on_set`.
fn tree(
    lits: &[(String, Lit)],
    output: &str,
    on_set: bool,
    kind: TreeKind,
    max: usize,
    names: &mut Names,
    gates: &mut Vec<LogicGate>,
) {
    let children: Vec<(String, Lit)> = if lits.len() <= max {
        lits.to_vec()
    } else {
        let chunks = max;
        let base = lits.len() / chunks;
        let extra = lits.len() % chunks;
        let mut start = 0;
        let mut children = Vec::with_capacity(chunks);
        for c in 0..chunks {
            let len = base + usize::from(c < extra);
            let part = &lits[start..start + len];
            start += len;
            if part.len() == 1 {
                children.push(part[0].clone());
            } else {
                let sig = names.fresh(output);
                tree(part, &sig, true, kind, max, names, gates);
                children.push((sig, Lit::One));
            }
        }
        children
    };
    let n = children.len();
    let cover = match kind {
        TreeKind::And => vec![Cube {
            pattern: children.iter().map(|(_, l)| *l).collect(),
            output: on_set,
        }],
        TreeKind::Or => (0..n)
            .map(|i| {
                let mut pattern = vec![Lit::DontCare; n];
                pattern[i] = children[i].1;
                Cube {
                    pattern,
                    output: on_set,
                }
            })
            .collect(),
    };
    gates.push(LogicGate {
        inputs: children.into_iter().map(|(s, _)| s).collect(),
        output: output.to_string(),
        cover,
    });
}
