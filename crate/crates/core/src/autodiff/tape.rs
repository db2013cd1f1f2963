use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Scalar;

#[derive(Debug, Clone, Copy)]
struct Entry {
    // (parent index, local partial); unused slots point at themselves with 0.
    parents: [(usize, f64); 2],
}

/// Append-only Wengert list for reverse-mode differentiation.
#[derive(Debug, Default)]
pub struct Tape {
    entries: RefCell<Vec<Entry>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&self, parents: [(usize, f64); 2]) -> usize {
        let mut e = self.entries.borrow_mut();
        e.push(Entry { parents });
        e.len() - 1
    }

    /// A new independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let idx = self.entries.borrow().len();
        let idx2 = self.push([(idx, 0.0), (idx, 0.0)]);
        debug_assert_eq!(idx, idx2);
        Var { tape: self, idx, value }
    }

    pub fn len(&self) -> usize {
        self.entries.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adjoints `∂output/∂node` for every node on the tape.
    pub fn adjoints(&self, output: &Var<'_>) -> Vec<f64> {
        let entries = self.entries.borrow();
        let mut adj = vec![0.0; entries.len()];
        adj[output.idx] = 1.0;
        for i in (0..=output.idx).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            for &(p, w) in &entries[i].parents {
                if p != i {
                    adj[p] += w * a;
                }
            }
        }
        adj
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
    value: f64,
}

impl<'t> Var<'t> {
    pub fn index(&self) -> usize {
        self.idx
    }

    fn unary(&self, value: f64, partial: f64) -> Var<'t> {
        let idx = self.tape.push([(self.idx, partial), (self.idx, 0.0)]);
        Var { tape: self.tape, idx, value }
    }

    fn binary(&self, other: &Var<'t>, value: f64, da: f64, db: f64) -> Var<'t> {
        let idx = if self.idx == other.idx {
            self.tape.push([(self.idx, da + db), (self.idx, 0.0)])
        } else {
            self.tape.push([(self.idx, da), (other.idx, db)])
        };
        Var { tape: self.tape, idx, value }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, o: Var<'t>) -> Var<'t> {
        self.binary(&o, self.value + o.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, o: Var<'t>) -> Var<'t> {
        self.binary(&o, self.value - o.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, o: Var<'t>) -> Var<'t> {
        self.binary(&o, self.value * o.value, o.value, self.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, o: Var<'t>) -> Var<'t> {
        let q = self.value / o.value;
        self.binary(&o, q, 1.0 / o.value, -q / o.value)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-self.value, -1.0)
    }
}

impl<'t> Scalar for Var<'t> {
    fn lift(&self, c: f64) -> Self {
        let idx = self.tape.entries.borrow().len();
        self.tape.push([(idx, 0.0), (idx, 0.0)]);
        Var { tape: self.tape, idx, value: c }
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn scale(&self, c: f64) -> Self {
        self.unary(self.value * c, c)
    }

    fn add_const(&self, c: f64) -> Self {
        self.unary(self.value + c, 1.0)
    }

    fn tanh(&self) -> Self {
        let y = self.value.tanh();
        self.unary(y, 1.0 - y * y)
    }

    fn sin(&self) -> Self {
        self.unary(self.value.sin(), self.value.cos())
    }

    fn cos(&self) -> Self {
        self.unary(self.value.cos(), -self.value.sin())
    }

    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.unary(e, e)
    }

    fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.unary(s, 0.5 / s)
    }

    fn powi(&self, k: i32) -> Self {
        let d = if k == 0 { 0.0 } else { k as f64 * self.value.powi(k - 1) };
        self.unary(self.value.powi(k), d)
    }
}
