//! Flat instruction lists compiled from expression DAGs.
//!
//! Compilation deduplicates structurally identical subexpressions, so a
//! vector of expressions that share work (a field together with its
//! Jacobian, or a whole Lie table) is evaluated with one pass over a slot
//! buffer.

use std::collections::HashMap;

use super::expr::{Expr, Node};
use super::SymbolicError;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    State(usize),
    Param(usize),
    Time,
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Pow(usize, u32),
    Sin(usize),
    Cos(usize),
    Exp(usize),
    Sqrt(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Const(u64),
    State(usize),
    Param(usize),
    Time,
    Unary(u8, usize),
    Binary(u8, usize, usize),
    Pow(usize, u32),
}

fn key_of(op: &Op) -> Key {
    match *op {
        Op::Const(c) => Key::Const(c.to_bits()),
        Op::State(i) => Key::State(i),
        Op::Param(i) => Key::Param(i),
        Op::Time => Key::Time,
        Op::Neg(a) => Key::Unary(0, a),
        Op::Sin(a) => Key::Unary(1, a),
        Op::Cos(a) => Key::Unary(2, a),
        Op::Exp(a) => Key::Unary(3, a),
        Op::Sqrt(a) => Key::Unary(4, a),
        Op::Add(a, b) => Key::Binary(0, a, b),
        Op::Sub(a, b) => Key::Binary(1, a, b),
        Op::Mul(a, b) => Key::Binary(2, a, b),
        Op::Div(a, b) => Key::Binary(3, a, b),
        Op::Pow(a, k) => Key::Pow(a, k),
    }
}

/// A compiled list of expressions evaluated together.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Op>,
    // First output index whose compilation introduced each op; used to
    // attribute evaluation errors to a component.
    owner: Vec<usize>,
    outputs: Vec<usize>,
    n_states: usize,
    n_params: usize,
}

impl Program {
    pub fn compile(exprs: &[Expr]) -> Program {
        let mut b = Builder::default();
        let outputs = exprs
            .iter()
            .enumerate()
            .map(|(k, e)| b.visit(e, k))
            .collect();
        let n_states = b
            .ops
            .iter()
            .filter_map(|op| match op {
                Op::State(i) => Some(i + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let n_params = b
            .ops
            .iter()
            .filter_map(|op| match op {
                Op::Param(i) => Some(i + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        Program {
            ops: b.ops,
            owner: b.owner,
            outputs,
            n_states,
            n_params,
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Evaluates every output into `out`, using `scratch` as slot storage.
    pub fn eval_into(
        &self,
        x: &[f64],
        params: &[f64],
        t: f64,
        scratch: &mut Vec<f64>,
        out: &mut [f64],
    ) -> Result<(), SymbolicError> {
        if x.len() < self.n_states {
            return Err(SymbolicError::IndexOutOfRange {
                kind: "state",
                index: self.n_states - 1,
                len: x.len(),
            });
        }
        if params.len() < self.n_params {
            return Err(SymbolicError::IndexOutOfRange {
                kind: "parameter",
                index: self.n_params - 1,
                len: params.len(),
            });
        }
        assert_eq!(out.len(), self.outputs.len(), "output buffer length");
        scratch.clear();
        scratch.reserve(self.ops.len());
        for (k, op) in self.ops.iter().enumerate() {
            let s = &*scratch;
            let v = match *op {
                Op::Const(c) => c,
                Op::State(i) => x[i],
                Op::Param(i) => params[i],
                Op::Time => t,
                Op::Neg(a) => -s[a],
                Op::Add(a, b) => s[a] + s[b],
                Op::Sub(a, b) => s[a] - s[b],
                Op::Mul(a, b) => s[a] * s[b],
                Op::Div(a, b) => {
                    if s[b] == 0.0 {
                        return Err(SymbolicError::DivisionByZero {
                            component: Some(self.owner[k]),
                        });
                    }
                    s[a] / s[b]
                }
                Op::Pow(a, p) => s[a].powi(p as i32),
                Op::Sin(a) => s[a].sin(),
                Op::Cos(a) => s[a].cos(),
                Op::Exp(a) => s[a].exp(),
                Op::Sqrt(a) => {
                    if s[a] < 0.0 {
                        return Err(SymbolicError::Domain {
                            function: "sqrt",
                            component: Some(self.owner[k]),
                        });
                    }
                    s[a].sqrt()
                }
            };
            scratch.push(v);
        }
        for (o, &slot) in out.iter_mut().zip(&self.outputs) {
            *o = scratch[slot];
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], params: &[f64], t: f64) -> Result<Vec<f64>, SymbolicError> {
        let mut scratch = Vec::new();
        let mut out = vec![0.0; self.outputs.len()];
        self.eval_into(x, params, t, &mut scratch, &mut out)?;
        Ok(out)
    }
}

#[derive(Default)]
struct Builder {
    ops: Vec<Op>,
    owner: Vec<usize>,
    visited: HashMap<usize, usize>,
    pinned: Vec<Expr>,
    cse: HashMap<Key, usize>,
}

impl Builder {
    fn push(&mut self, op: Op, output: usize) -> usize {
        let key = key_of(&op);
        if let Some(&slot) = self.cse.get(&key) {
            return slot;
        }
        let slot = self.ops.len();
        self.ops.push(op);
        self.owner.push(output);
        self.cse.insert(key, slot);
        slot
    }

    fn visit(&mut self, e: &Expr, output: usize) -> usize {
        if let Some(&slot) = self.visited.get(&e.id()) {
            return slot;
        }
        // Iterative post-order to survive deep chains.
        let mut stack: Vec<(Expr, bool)> = vec![(e.clone(), false)];
        while let Some((cur, expanded)) = stack.pop() {
            if self.visited.contains_key(&cur.id()) {
                continue;
            }
            if !expanded {
                stack.push((cur.clone(), true));
                cur.for_each_child(|c| {
                    if !self.visited.contains_key(&c.id()) {
                        stack.push((c.clone(), false));
                    }
                });
                continue;
            }
            let slot_of = |c: &Expr| self.visited[&c.id()];
            let op = match cur.node() {
                Node::Const(c) => Op::Const(*c),
                Node::State(i) => Op::State(*i),
                Node::Param(i) => Op::Param(*i),
                Node::Time => Op::Time,
                Node::Neg(a) => Op::Neg(slot_of(a)),
                Node::Add(a, b) => Op::Add(slot_of(a), slot_of(b)),
                Node::Sub(a, b) => Op::Sub(slot_of(a), slot_of(b)),
                Node::Mul(a, b) => Op::Mul(slot_of(a), slot_of(b)),
                Node::Div(a, b) => Op::Div(slot_of(a), slot_of(b)),
                Node::Pow(a, k) => Op::Pow(slot_of(a), *k),
                Node::Sin(a) => Op::Sin(slot_of(a)),
                Node::Cos(a) => Op::Cos(slot_of(a)),
                Node::Exp(a) => Op::Exp(slot_of(a)),
                Node::Sqrt(a) => Op::Sqrt(slot_of(a)),
            };
            let slot = self.push(op, output);
            self.visited.insert(cur.id(), slot);
            self.pinned.push(cur);
        }
        self.visited[&e.id()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structurally_equal_subtrees_share_slots() {
        // Two separately built copies of x*y.
        let a = Expr::mul(Expr::state(0), Expr::state(1));
        let b = Expr::mul(Expr::state(0), Expr::state(1));
        let p = Program::compile(&[Expr::add(a, b)]);
        // x, y, x*y, sum
        assert_eq!(p.len(), 4);
        assert_eq!(p.eval(&[2.0, 3.0], &[], 0.0).unwrap(), vec![12.0]);
    }

    #[test]
    fn errors_name_the_first_component_using_the_op() {
        let ok = Expr::state(0);
        let bad = Expr::div(Expr::one(), Expr::state(1));
        let p = Program::compile(&[ok, bad.clone(), Expr::add(bad, Expr::one())]);
        match p.eval(&[1.0, 0.0], &[], 0.0) {
            Err(SymbolicError::DivisionByZero { component }) => assert_eq!(component, Some(1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_inputs_rejected() {
        let p = Program::compile(&[Expr::param(2)]);
        assert!(p.eval(&[], &[1.0], 0.0).is_err());
    }
}
