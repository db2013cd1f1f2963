//! Expression DAG over state variables, parameters and time.
//!
//! Nodes are reference counted, so rewriting passes (differentiation,
//! simplification) return expressions that share unchanged subtrees with
//! their inputs. Passes that walk an expression memoize on node identity,
//! which keeps the cost linear in the number of distinct nodes rather than
//! in the size of the expanded tree.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::SymbolicError;

/// A variable an expression can be differentiated with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    State(usize),
    Time,
}

#[derive(Debug, Clone)]
pub enum Node {
    Const(f64),
    State(usize),
    Param(usize),
    Time,
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, u32),
    Sin(Expr),
    Cos(Expr),
    Exp(Expr),
    Sqrt(Expr),
}

/// Immutable, shareable expression handle.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl Expr {
    /// Wraps a node without any simplification.
    pub fn new(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(value: f64) -> Self {
        Expr::new(Node::Const(value))
    }

    pub fn state(index: usize) -> Self {
        Expr::new(Node::State(index))
    }

    pub fn param(index: usize) -> Self {
        Expr::new(Node::Param(index))
    }

    pub fn time() -> Self {
        Expr::new(Node::Time)
    }

    pub fn zero() -> Self {
        Expr::constant(0.0)
    }

    pub fn one() -> Self {
        Expr::constant(1.0)
    }

    pub(crate) fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    fn is_const(&self, value: f64) -> bool {
        self.as_const() == Some(value)
    }

    // Smart constructors. Each applies local constant folding and identity
    // elimination; none of them reorders operands.

    pub fn neg(a: Expr) -> Expr {
        match a.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::new(Node::Neg(a)),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => return Expr::constant(x + y),
            (Some(x), _) if x == 0.0 => return b,
            (_, Some(y)) if y == 0.0 => return a,
            _ => {}
        }
        if let Node::Neg(inner) = b.node() {
            return Expr::new(Node::Sub(a, inner.clone()));
        }
        Expr::new(Node::Add(a, b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => return Expr::constant(x - y),
            (Some(x), _) if x == 0.0 => return Expr::neg(b),
            (_, Some(y)) if y == 0.0 => return a,
            _ => {}
        }
        if let Node::Neg(inner) = b.node() {
            return Expr::new(Node::Add(a, inner.clone()));
        }
        Expr::new(Node::Sub(a, b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => return Expr::constant(x * y),
            (Some(x), _) if x == 0.0 => return Expr::zero(),
            (_, Some(y)) if y == 0.0 => return Expr::zero(),
            (Some(x), _) if x == 1.0 => return b,
            (_, Some(y)) if y == 1.0 => return a,
            (Some(x), _) if x == -1.0 => return Expr::neg(b),
            (_, Some(y)) if y == -1.0 => return Expr::neg(a),
            _ => {}
        }
        match (a.node(), b.node()) {
            (Node::Neg(x), Node::Neg(y)) => Expr::new(Node::Mul(x.clone(), y.clone())),
            (Node::Neg(x), _) => Expr::neg(Expr::new(Node::Mul(x.clone(), b))),
            (_, Node::Neg(y)) => Expr::neg(Expr::new(Node::Mul(a, y.clone()))),
            _ => Expr::new(Node::Mul(a, b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => return Expr::constant(x / y),
            (Some(x), _) if x == 0.0 => return Expr::zero(),
            (_, Some(y)) if y == 1.0 => return a,
            _ => {}
        }
        Expr::new(Node::Div(a, b))
    }

    pub fn pow(a: Expr, k: u32) -> Expr {
        match (k, a.as_const()) {
            (0, _) => Expr::one(),
            (1, _) => a,
            (_, Some(c)) => Expr::constant(c.powi(k as i32)),
            _ => Expr::new(Node::Pow(a, k)),
        }
    }

    pub fn sin(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::constant(c.sin()),
            None => Expr::new(Node::Sin(a)),
        }
    }

    pub fn cos(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::constant(c.cos()),
            None => Expr::new(Node::Cos(a)),
        }
    }

    pub fn exp(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::constant(c.exp()),
            None => Expr::new(Node::Exp(a)),
        }
    }

    pub fn sqrt(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) if c >= 0.0 => Expr::constant(c.sqrt()),
            _ => Expr::new(Node::Sqrt(a)),
        }
    }

    /// Recursive numeric evaluation. Prefer [`super::Program`] on hot paths.
    pub fn eval(&self, x: &[f64], params: &[f64], t: f64) -> Result<f64, SymbolicError> {
        let mut memo = HashMap::new();
        self.eval_memo(x, params, t, &mut memo)
    }

    fn eval_memo(
        &self,
        x: &[f64],
        params: &[f64],
        t: f64,
        memo: &mut HashMap<usize, f64>,
    ) -> Result<f64, SymbolicError> {
        if let Some(v) = memo.get(&self.id()) {
            return Ok(*v);
        }
        let mut ev = |e: &Expr| e.eval_memo(x, params, t, memo);
        let v = match self.node() {
            Node::Const(c) => *c,
            Node::State(i) => *x.get(*i).ok_or(SymbolicError::IndexOutOfRange {
                kind: "state",
                index: *i,
                len: x.len(),
            })?,
            Node::Param(i) => *params.get(*i).ok_or(SymbolicError::IndexOutOfRange {
                kind: "parameter",
                index: *i,
                len: params.len(),
            })?,
            Node::Time => t,
            Node::Neg(a) => -ev(a)?,
            Node::Add(a, b) => ev(a)? + ev(b)?,
            Node::Sub(a, b) => ev(a)? - ev(b)?,
            Node::Mul(a, b) => ev(a)? * ev(b)?,
            Node::Div(a, b) => {
                let num = ev(a)?;
                let den = ev(b)?;
                if den == 0.0 {
                    return Err(SymbolicError::DivisionByZero { component: None });
                }
                num / den
            }
            Node::Pow(a, k) => ev(a)?.powi(*k as i32),
            Node::Sin(a) => ev(a)?.sin(),
            Node::Cos(a) => ev(a)?.cos(),
            Node::Exp(a) => ev(a)?.exp(),
            Node::Sqrt(a) => {
                let v = ev(a)?;
                if v < 0.0 {
                    return Err(SymbolicError::Domain {
                        function: "sqrt",
                        component: None,
                    });
                }
                v.sqrt()
            }
        };
        memo.insert(self.id(), v);
        Ok(v)
    }

    /// Exact partial derivative with respect to `wrt`.
    pub fn differentiate(&self, wrt: Var) -> Expr {
        Differentiator::new(wrt).diff(self)
    }

    /// Re-applies the smart constructors bottom-up.
    pub fn simplify(&self) -> Expr {
        Simplifier::default().run(self)
    }

    /// Largest state and parameter index referenced, if any.
    pub fn max_indices(&self) -> (Option<usize>, Option<usize>) {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        let (mut s, mut p) = (None::<usize>, None::<usize>);
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            match e.node() {
                Node::State(i) => s = Some(s.map_or(*i, |m| m.max(*i))),
                Node::Param(i) => p = Some(p.map_or(*i, |m| m.max(*i))),
                Node::Const(_) | Node::Time => {}
                Node::Neg(a)
                | Node::Pow(a, _)
                | Node::Sin(a)
                | Node::Cos(a)
                | Node::Exp(a)
                | Node::Sqrt(a) => stack.push(a.clone()),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
            }
        }
        (s, p)
    }

    /// Number of distinct nodes in the DAG.
    pub fn dag_size(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            e.for_each_child(|c| stack.push(c.clone()));
        }
        seen.len()
    }

    pub(crate) fn for_each_child(&self, mut f: impl FnMut(&Expr)) {
        match self.node() {
            Node::Const(_) | Node::State(_) | Node::Param(_) | Node::Time => {}
            Node::Neg(a)
            | Node::Pow(a, _)
            | Node::Sin(a)
            | Node::Cos(a)
            | Node::Exp(a)
            | Node::Sqrt(a) => f(a),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                f(a);
                f(b);
            }
        }
    }

    /// Renders the expression with the given variable names.
    pub fn display<'a>(&'a self, names: &'a Names<'a>) -> DisplayExpr<'a> {
        DisplayExpr { expr: self, names }
    }
}

/// Structural equality. Shared subtrees short-circuit on pointer identity.
impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        if self.ptr_eq(other) {
            return true;
        }
        match (self.node(), other.node()) {
            (Node::Const(a), Node::Const(b)) => a.to_bits() == b.to_bits(),
            (Node::State(a), Node::State(b)) => a == b,
            (Node::Param(a), Node::Param(b)) => a == b,
            (Node::Time, Node::Time) => true,
            (Node::Neg(a), Node::Neg(b))
            | (Node::Sin(a), Node::Sin(b))
            | (Node::Cos(a), Node::Cos(b))
            | (Node::Exp(a), Node::Exp(b))
            | (Node::Sqrt(a), Node::Sqrt(b)) => a == b,
            (Node::Pow(a, j), Node::Pow(b, k)) => j == k && a == b,
            (Node::Add(a, b), Node::Add(c, d))
            | (Node::Sub(a, b), Node::Sub(c, d))
            | (Node::Mul(a, b), Node::Mul(c, d))
            | (Node::Div(a, b), Node::Div(c, d)) => a == c && b == d,
            _ => false,
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write!(f, "Const({c})"),
            Node::State(i) => write!(f, "State({i})"),
            Node::Param(i) => write!(f, "Param({i})"),
            Node::Time => write!(f, "Time"),
            Node::Neg(a) => write!(f, "Neg({a:?})"),
            Node::Add(a, b) => write!(f, "Add({a:?}, {b:?})"),
            Node::Sub(a, b) => write!(f, "Sub({a:?}, {b:?})"),
            Node::Mul(a, b) => write!(f, "Mul({a:?}, {b:?})"),
            Node::Div(a, b) => write!(f, "Div({a:?}, {b:?})"),
            Node::Pow(a, k) => write!(f, "Pow({a:?}, {k})"),
            Node::Sin(a) => write!(f, "Sin({a:?})"),
            Node::Cos(a) => write!(f, "Cos({a:?})"),
            Node::Exp(a) => write!(f, "Exp({a:?})"),
            Node::Sqrt(a) => write!(f, "Sqrt({a:?})"),
        }
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

/// Memoized symbolic differentiation with respect to a single variable.
///
/// One instance may be reused across several expressions (for example all
/// components of a vector field), so subtrees shared between them are
/// differentiated once.
pub struct Differentiator {
    wrt: Var,
    memo: HashMap<usize, Expr>,
    // Keeps memo keys alive for the lifetime of the differentiator.
    pinned: Vec<Expr>,
}

impl Differentiator {
    pub fn new(wrt: Var) -> Self {
        Differentiator {
            wrt,
            memo: HashMap::new(),
            pinned: Vec::new(),
        }
    }

    pub fn diff(&mut self, e: &Expr) -> Expr {
        if let Some(d) = self.memo.get(&e.id()) {
            return d.clone();
        }
        let d = match e.node() {
            Node::Const(_) | Node::Param(_) => Expr::zero(),
            Node::State(i) => {
                if self.wrt == Var::State(*i) {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Time => {
                if self.wrt == Var::Time {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Neg(a) => Expr::neg(self.diff(a)),
            Node::Add(a, b) => {
                let (da, db) = (self.diff(a), self.diff(b));
                Expr::add(da, db)
            }
            Node::Sub(a, b) => {
                let (da, db) = (self.diff(a), self.diff(b));
                Expr::sub(da, db)
            }
            Node::Mul(a, b) => {
                let (da, db) = (self.diff(a), self.diff(b));
                Expr::add(Expr::mul(da, b.clone()), Expr::mul(a.clone(), db))
            }
            Node::Div(a, b) => {
                let (da, db) = (self.diff(a), self.diff(b));
                if db.is_const(0.0) {
                    Expr::div(da, b.clone())
                } else {
                    let num = Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a.clone(), db));
                    Expr::div(num, Expr::pow(b.clone(), 2))
                }
            }
            Node::Pow(a, k) => {
                let da = self.diff(a);
                let scaled = Expr::mul(
                    Expr::constant(*k as f64),
                    Expr::pow(a.clone(), k - 1),
                );
                Expr::mul(scaled, da)
            }
            Node::Sin(a) => {
                let da = self.diff(a);
                Expr::mul(Expr::cos(a.clone()), da)
            }
            Node::Cos(a) => {
                let da = self.diff(a);
                Expr::neg(Expr::mul(Expr::sin(a.clone()), da))
            }
            Node::Exp(a) => {
                let da = self.diff(a);
                Expr::mul(e.clone(), da)
            }
            Node::Sqrt(a) => {
                let da = self.diff(a);
                Expr::div(da, Expr::mul(Expr::constant(2.0), e.clone()))
            }
        };
        self.memo.insert(e.id(), d.clone());
        self.pinned.push(e.clone());
        d
    }
}

#[derive(Default)]
struct Simplifier {
    memo: HashMap<usize, Expr>,
    pinned: Vec<Expr>,
}

impl Simplifier {
    fn run(&mut self, e: &Expr) -> Expr {
        if let Some(s) = self.memo.get(&e.id()) {
            return s.clone();
        }
        let s = match e.node() {
            Node::Const(_) | Node::State(_) | Node::Param(_) | Node::Time => e.clone(),
            Node::Neg(a) => Expr::neg(self.run(a)),
            Node::Add(a, b) => {
                let (a, b) = (self.run(a), self.run(b));
                Expr::add(a, b)
            }
            Node::Sub(a, b) => {
                let (a, b) = (self.run(a), self.run(b));
                Expr::sub(a, b)
            }
            Node::Mul(a, b) => {
                let (a, b) = (self.run(a), self.run(b));
                Expr::mul(a, b)
            }
            Node::Div(a, b) => {
                let (a, b) = (self.run(a), self.run(b));
                Expr::div(a, b)
            }
            Node::Pow(a, k) => Expr::pow(self.run(a), *k),
            Node::Sin(a) => Expr::sin(self.run(a)),
            Node::Cos(a) => Expr::cos(self.run(a)),
            Node::Exp(a) => Expr::exp(self.run(a)),
            Node::Sqrt(a) => Expr::sqrt(self.run(a)),
        };
        self.memo.insert(e.id(), s.clone());
        self.pinned.push(e.clone());
        s
    }
}

/// Variable names used when rendering expressions.
#[derive(Debug, Clone, Copy)]
pub struct Names<'a> {
    pub states: &'a [String],
    pub params: &'a [String],
}

pub struct DisplayExpr<'a> {
    expr: &'a Expr,
    names: &'a Names<'a>,
}

// Binding strength used for parenthesization.
fn precedence(node: &Node) -> u8 {
    match node {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(..) => 3,
        Node::Pow(..) => 4,
        Node::Const(c) if *c < 0.0 => 3,
        _ => 5,
    }
}

impl DisplayExpr<'_> {
    fn write(&self, e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |child: &Expr, min: u8, f: &mut fmt::Formatter<'_>| -> fmt::Result {
            if precedence(child.node()) < min {
                write!(f, "(")?;
                self.write(child, f)?;
                write!(f, ")")
            } else {
                self.write(child, f)
            }
        };
        match e.node() {
            Node::Const(c) => write!(f, "{c:?}"),
            Node::State(i) => match self.names.states.get(*i) {
                Some(n) => write!(f, "{n}"),
                None => write!(f, "x{i}"),
            },
            Node::Param(i) => match self.names.params.get(*i) {
                Some(n) => write!(f, "{n}"),
                None => write!(f, "p{i}"),
            },
            Node::Time => write!(f, "t"),
            Node::Neg(a) => {
                write!(f, "-")?;
                wrap(a, 4, f)
            }
            Node::Add(a, b) => {
                wrap(a, 1, f)?;
                write!(f, " + ")?;
                wrap(b, 2, f)
            }
            Node::Sub(a, b) => {
                wrap(a, 1, f)?;
                write!(f, " - ")?;
                wrap(b, 2, f)
            }
            Node::Mul(a, b) => {
                wrap(a, 2, f)?;
                write!(f, "*")?;
                wrap(b, 3, f)
            }
            Node::Div(a, b) => {
                wrap(a, 2, f)?;
                write!(f, "/")?;
                wrap(b, 3, f)
            }
            Node::Pow(a, k) => {
                wrap(a, 5, f)?;
                write!(f, "^{k}")
            }
            Node::Sin(a) => self.call("sin", a, f),
            Node::Cos(a) => self.call("cos", a, f),
            Node::Exp(a) => self.call("exp", a, f),
            Node::Sqrt(a) => self.call("sqrt", a, f),
        }
    }

    fn call(&self, name: &str, arg: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{name}(")?;
        self.write(arg, f)?;
        write!(f, ")")
    }
}

impl fmt::Display for DisplayExpr<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, f)
    }
}
