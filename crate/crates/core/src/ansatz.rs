//! The four circuit families over an annotated graph.
//!
//! | kind  | start      | layer                                             | trainable / layer     |
//! |-------|------------|---------------------------------------------------|-----------------------|
//! | EQC   | `H^{⊗n}`   | RZZ(2γε_ij) per edge, RX(α_i β) per node          | 2 (γ, β)              |
//! | NEQC  | `H^{⊗n}`   | same gates, one parameter per gate                | n(n-1)/2 + n          |
//! | HWETE | `|0…0⟩`    | RX(α_i θ), RZZ(2ε_ij θ), RY(φ_i), CZ chain        | n(n-1)/2 + 2n         |
//! | HWE   | `|0…0⟩`    | RX(α_i), RZZ(2ε_ij) fixed; RY(φ_i), CZ chain      | n                     |
//!
//! Edges are emitted in ascending `(i, j)`, `i < j`. EQC parameters are laid
//! out `[γ_1, β_1, γ_2, β_2, …]`; the per-gate kinds number parameters in gate
//! emission order.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::AnnotatedGraph;
use crate::simulator::{Gate, Statevector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AnsatzKind {
    Eqc,
    Neqc,
    Hwete,
    Hwe,
}

impl AnsatzKind {
    pub const ALL: [AnsatzKind; 4] = [
        AnsatzKind::Eqc,
        AnsatzKind::Neqc,
        AnsatzKind::Hwete,
        AnsatzKind::Hwe,
    ];

    /// Trainable parameter count for `n` nodes at depth `p`.
    pub fn n_trainable(self, n: usize, p: usize) -> usize {
        let edges = n * (n - 1) / 2;
        p * match self {
            AnsatzKind::Eqc => 2,
            AnsatzKind::Neqc => edges + n,
            AnsatzKind::Hwete => edges + 2 * n,
            AnsatzKind::Hwe => n,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AnsatzKind::Eqc => "eqc",
            AnsatzKind::Neqc => "neqc",
            AnsatzKind::Hwete => "hwete",
            AnsatzKind::Hwe => "hwe",
        }
    }
}

impl fmt::Display for AnsatzKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnsatzKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "eqc" => Ok(AnsatzKind::Eqc),
            "neqc" => Ok(AnsatzKind::Neqc),
            "hwete" => Ok(AnsatzKind::Hwete),
            "hwe" => Ok(AnsatzKind::Hwe),
            other => Err(Error::InvalidArgument(format!("unknown ansatz {other:?}"))),
        }
    }
}

/// A gate angle: either a constant or `coeff · params[index]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Angle {
    Fixed(f64),
    Param { index: usize, coeff: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    H,
    Rx,
    Ry,
    Rzz,
    Cz,
}

/// One gate slot of a program, with its angle left symbolic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Op {
    pub kind: OpKind,
    pub qubits: (usize, usize),
    pub angle: Angle,
}

impl Op {
    fn fixed(kind: OpKind, q: usize) -> Self {
        Op {
            kind,
            qubits: (q, q),
            angle: Angle::Fixed(0.0),
        }
    }

    fn angle_value(&self, params: &[f64]) -> f64 {
        match self.angle {
            Angle::Fixed(a) => a,
            Angle::Param { index, coeff } => coeff * params[index],
        }
    }

    fn to_gate(self, angle: f64) -> Gate {
        let (a, b) = self.qubits;
        match self.kind {
            OpKind::H => Gate::H(a),
            OpKind::Rx => Gate::Rx(a, angle),
            OpKind::Ry => Gate::Ry(a, angle),
            OpKind::Rzz => Gate::Rzz(a, b, angle),
            OpKind::Cz => Gate::Cz(a, b),
        }
    }
}

/// A circuit family and depth; builds concrete programs per annotated graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ansatz {
    pub kind: AnsatzKind,
    pub depth: usize,
}

impl Ansatz {
    pub fn new(kind: AnsatzKind, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidArgument("depth must be at least 1".into()));
        }
        Ok(Self { kind, depth })
    }

    pub fn n_trainable(&self, n: usize) -> usize {
        self.kind.n_trainable(n, self.depth)
    }

    pub fn build(&self, g: &AnnotatedGraph<'_>) -> AnsatzProgram {
        match self.kind {
            AnsatzKind::Eqc => build_eqc(g, self.depth),
            AnsatzKind::Neqc => build_neqc(g, self.depth),
            AnsatzKind::Hwete => build_hwete(g, self.depth),
            AnsatzKind::Hwe => build_hwe(g, self.depth),
        }
    }
}

/// A gate sequence with symbolic angles and the parameter → gate binding.
#[derive(Clone, Debug)]
pub struct AnsatzProgram {
    kind: AnsatzKind,
    n_qubits: usize,
    depth: usize,
    ops: Vec<Op>,
    n_trainable: usize,
    binding: Vec<Vec<(usize, f64)>>,
}

struct Builder {
    ops: Vec<Op>,
    next_param: usize,
}

impl Builder {
    fn new() -> Self {
        Self {
            ops: Vec::new(),
            next_param: 0,
        }
    }

    fn fresh(&mut self) -> usize {
        self.next_param += 1;
        self.next_param - 1
    }

    fn push(&mut self, kind: OpKind, qubits: (usize, usize), angle: Angle) {
        self.ops.push(Op { kind, qubits, angle });
    }

    fn finish(self, kind: AnsatzKind, n_qubits: usize, depth: usize) -> AnsatzProgram {
        let mut binding = vec![Vec::new(); self.next_param];
        for (k, op) in self.ops.iter().enumerate() {
            if let Angle::Param { index, coeff } = op.angle {
                binding[index].push((k, coeff));
            }
        }
        AnsatzProgram {
            kind,
            n_qubits,
            depth,
            ops: self.ops,
            n_trainable: self.next_param,
            binding,
        }
    }
}

fn param(index: usize, coeff: f64) -> Angle {
    Angle::Param { index, coeff }
}

fn hadamard_layer(b: &mut Builder, n: usize) {
    for q in 0..n {
        b.ops.push(Op::fixed(OpKind::H, q));
    }
}

pub fn build_eqc(g: &AnnotatedGraph<'_>, p: usize) -> AnsatzProgram {
    let n = g.graph().n();
    let mut b = Builder::new();
    hadamard_layer(&mut b, n);
    for _ in 0..p {
        let gamma = b.fresh();
        let beta = b.fresh();
        for (i, j, w) in g.graph().edges() {
            b.push(OpKind::Rzz, (i, j), param(gamma, 2.0 * w));
        }
        for (i, &a) in g.alpha().iter().enumerate() {
            b.push(OpKind::Rx, (i, i), param(beta, a));
        }
    }
    b.finish(AnsatzKind::Eqc, n, p)
}

pub fn build_neqc(g: &AnnotatedGraph<'_>, p: usize) -> AnsatzProgram {
    let n = g.graph().n();
    let mut b = Builder::new();
    hadamard_layer(&mut b, n);
    for _ in 0..p {
        for (i, j, w) in g.graph().edges() {
            let k = b.fresh();
            b.push(OpKind::Rzz, (i, j), param(k, 2.0 * w));
        }
        for (i, &a) in g.alpha().iter().enumerate() {
            let k = b.fresh();
            b.push(OpKind::Rx, (i, i), param(k, a));
        }
    }
    b.finish(AnsatzKind::Neqc, n, p)
}

fn hardware_efficient(g: &AnnotatedGraph<'_>, p: usize, train_encoding: bool) -> AnsatzProgram {
    let n = g.graph().n();
    let mut b = Builder::new();
    for _ in 0..p {
        for (i, &a) in g.alpha().iter().enumerate() {
            let angle = if train_encoding {
                param(b.fresh(), a)
            } else {
                Angle::Fixed(a)
            };
            b.push(OpKind::Rx, (i, i), angle);
        }
        for (i, j, w) in g.graph().edges() {
            let angle = if train_encoding {
                param(b.fresh(), 2.0 * w)
            } else {
                Angle::Fixed(2.0 * w)
            };
            b.push(OpKind::Rzz, (i, j), angle);
        }
        for i in 0..n {
            let k = b.fresh();
            b.push(OpKind::Ry, (i, i), param(k, 1.0));
        }
        for i in 0..n.saturating_sub(1) {
            b.push(OpKind::Cz, (i, i + 1), Angle::Fixed(0.0));
        }
    }
    let kind = if train_encoding {
        AnsatzKind::Hwete
    } else {
        AnsatzKind::Hwe
    };
    b.finish(kind, n, p)
}

pub fn build_hwete(g: &AnnotatedGraph<'_>, p: usize) -> AnsatzProgram {
    hardware_efficient(g, p, true)
}

pub fn build_hwe(g: &AnnotatedGraph<'_>, p: usize) -> AnsatzProgram {
    hardware_efficient(g, p, false)
}

impl AnsatzProgram {
    pub fn kind(&self) -> AnsatzKind {
        self.kind
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_trainable(&self) -> usize {
        self.n_trainable
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    /// `(op index, coefficient)` pairs driven by trainable parameter `index`.
    pub fn binding(&self, index: usize) -> &[(usize, f64)] {
        &self.binding[index]
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_trainable {
            return Err(Error::InvalidArgument(format!(
                "{} ansatz takes {} parameters, got {}",
                self.kind,
                self.n_trainable,
                params.len()
            )));
        }
        Ok(())
    }

    /// Concrete gates for a parameter vector.
    pub fn gates(&self, params: &[f64]) -> Result<Vec<Gate>> {
        self.check_params(params)?;
        Ok(self
            .ops
            .iter()
            .map(|op| op.to_gate(op.angle_value(params)))
            .collect())
    }

    pub fn evaluate(&self, params: &[f64]) -> Result<Statevector> {
        self.run(params, None)
    }

    /// Evaluates with the angle of gate `op` offset by `delta` (parameter-shift support).
    pub fn evaluate_shifted(&self, params: &[f64], op: usize, delta: f64) -> Result<Statevector> {
        if op >= self.ops.len() {
            return Err(Error::InvalidArgument(format!("no gate at position {op}")));
        }
        self.run(params, Some((op, delta)))
    }

    fn run(&self, params: &[f64], shift: Option<(usize, f64)>) -> Result<Statevector> {
        self.check_params(params)?;
        let mut state = Statevector::zero(self.n_qubits)?;
        for (k, op) in self.ops.iter().enumerate() {
            let mut angle = op.angle_value(params);
            if let Some((at, delta)) = shift {
                if at == k {
                    angle += delta;
                }
            }
            state.apply_gate(&op.to_gate(angle))?;
        }
        Ok(state)
    }
}
