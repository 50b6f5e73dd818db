//! Scalar reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every scalar operation as a node holding its value, the
//! indices of its parents and the local partial derivative with respect to each
//! parent. Parents always precede their children, so a single reverse sweep over
//! the node list accumulates exact adjoints.
//!
//! Variables are cheap `Copy` handles ([`Var`]) borrowing the tape, which lets the
//! usual arithmetic operators be overloaded. Operations that leave their domain
//! (logarithm of a non-positive number, a non-finite result, ...) do not panic:
//! the tape is poisoned with the first such error and every later call to
//! [`Tape::grad`] or [`Tape::check`] reports it.

mod complex;
mod ops;
pub mod special;

use std::cell::RefCell;
use std::fmt;

pub use complex::{cadd, cdiv, cexp, clog, cmul, creal, csqrt, CVar};

/// Errors raised by tape construction and differentiation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdError {
    #[error("non-finite value {value} produced by `{op}` at node {node}")]
    NonFinite { op: &'static str, node: usize, value: f64 },
    #[error("domain error in `{op}`: argument {arg} at node {node}")]
    Domain { op: &'static str, node: usize, arg: f64 },
    #[error("variable belongs to a different tape")]
    CrossTape,
}

#[derive(Default)]
struct Nodes {
    values: Vec<f64>,
    // parents of node i live in parents[start[i]..start[i + 1]]
    start: Vec<u32>,
    parents: Vec<u32>,
    partials: Vec<f64>,
    poison: Option<AdError>,
}

impl Nodes {
    fn push(&mut self, op: &'static str, value: f64, parents: &[(u32, f64)]) -> u32 {
        let idx = self.values.len();
        if !value.is_finite() && self.poison.is_none() {
            self.poison = Some(AdError::NonFinite { op, node: idx, value });
        }
        self.values.push(value);
        for &(p, d) in parents {
            debug_assert!((p as usize) < idx);
            self.parents.push(p);
            self.partials.push(d);
        }
        self.start.push(self.parents.len() as u32);
        idx as u32
    }
}

/// Append-only record of scalar operations.
pub struct Tape {
    nodes: RefCell<Nodes>,
}

/// Position on a tape that can be restored with [`Tape::truncate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Checkpoint(usize);

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        let nodes = Nodes {
            start: vec![0],
            ..Default::default()
        };
        Tape {
            nodes: RefCell::new(nodes),
        }
    }

    pub fn with_capacity(n: usize) -> Self {
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        let nodes = Nodes {
            values: Vec::with_capacity(n),
            start,
            parents: Vec::with_capacity(2 * n),
            partials: Vec::with_capacity(2 * n),
            poison: None,
        };
        Tape {
            nodes: RefCell::new(nodes),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf variable. Fails on non-finite input.
    pub fn var(&self, x: f64) -> Result<Var<'_>, AdError> {
        if !x.is_finite() {
            return Err(AdError::NonFinite {
                op: "lift",
                node: self.len(),
                value: x,
            });
        }
        Ok(self.leaf("lift", x))
    }

    /// Lifts a slice of reals.
    pub fn vars(&self, xs: &[f64]) -> Result<Vec<Var<'_>>, AdError> {
        xs.iter().map(|&x| self.var(x)).collect()
    }

    /// A leaf with no intended derivative. Equivalent to [`Tape::var`] but
    /// infallible; non-finite constants poison the tape instead.
    pub fn constant(&self, x: f64) -> Var<'_> {
        self.leaf("constant", x)
    }

    fn leaf(&self, op: &'static str, x: f64) -> Var<'_> {
        let idx = self.nodes.borrow_mut().push(op, x, &[]);
        Var {
            tape: self,
            idx,
            value: x,
        }
    }

    pub(crate) fn push(&self, op: &'static str, value: f64, parents: &[(u32, f64)]) -> Var<'_> {
        let idx = self.nodes.borrow_mut().push(op, value, parents);
        Var {
            tape: self,
            idx,
            value,
        }
    }

    pub(crate) fn poison(&self, err: AdError) {
        let mut n = self.nodes.borrow_mut();
        if n.poison.is_none() {
            n.poison = Some(err);
        }
    }

    /// First error recorded on this tape, if any.
    pub fn check(&self) -> Result<(), AdError> {
        match &self.nodes.borrow().poison {
            Some(e) => Err(e.clone()),
            None => Ok(()),
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint(self.len())
    }

    /// Drops every node recorded after `mark`. Handles to dropped nodes must
    /// not be used afterwards.
    pub fn truncate(&self, mark: Checkpoint) {
        let mut n = self.nodes.borrow_mut();
        if mark.0 >= n.values.len() {
            return;
        }
        let p = n.start[mark.0] as usize;
        n.values.truncate(mark.0);
        n.start.truncate(mark.0 + 1);
        n.parents.truncate(p);
        n.partials.truncate(p);
        if let Some(AdError::NonFinite { node, .. } | AdError::Domain { node, .. }) = n.poison {
            if node >= mark.0 {
                n.poison = None;
            }
        }
    }

    /// Σ xᵢ as a single node.
    pub fn sum(&self, xs: &[Var<'_>]) -> Var<'_> {
        let mut parents = Vec::with_capacity(xs.len());
        let mut value = 0.0;
        for x in xs {
            debug_assert!(std::ptr::eq(x.tape, self));
            value += x.value;
            parents.push((x.idx, 1.0));
        }
        self.push("sum", value, &parents)
    }

    /// Σ wᵢ xᵢ + bias with constant weights, as a single node.
    pub fn dot_const(&self, xs: &[Var<'_>], weights: &[f64], bias: f64) -> Var<'_> {
        debug_assert_eq!(xs.len(), weights.len());
        let mut parents = Vec::with_capacity(xs.len());
        let mut value = bias;
        for (x, &w) in xs.iter().zip(weights) {
            value += w * x.value;
            parents.push((x.idx, w));
        }
        self.push("dot_const", value, &parents)
    }

    /// Σ aᵢ bᵢ + bias with both operands on the tape, as a single node.
    pub fn dot(&self, a: &[Var<'_>], b: &[Var<'_>], bias: Var<'_>) -> Var<'_> {
        debug_assert_eq!(a.len(), b.len());
        let mut parents = Vec::with_capacity(2 * a.len() + 1);
        let mut value = bias.value;
        parents.push((bias.idx, 1.0));
        for (x, y) in a.iter().zip(b) {
            value += x.value * y.value;
            parents.push((x.idx, y.value));
            parents.push((y.idx, x.value));
        }
        self.push("dot", value, &parents)
    }

    /// Full adjoint vector of `output`: entry i is ∂output/∂node_i.
    pub fn adjoints(&self, output: Var<'_>) -> Result<Vec<f64>, AdError> {
        self.backward(&[(output, 1.0)])
    }

    /// Reverse sweep seeded with several outputs at once, i.e. the adjoints of
    /// Σ cₖ·outputₖ.
    pub fn backward(&self, seeds: &[(Var<'_>, f64)]) -> Result<Vec<f64>, AdError> {
        self.check()?;
        let n = self.nodes.borrow();
        let len = n.values.len();
        let mut adj = vec![0.0; len];
        let mut top = 0usize;
        for (v, c) in seeds {
            if !std::ptr::eq(v.tape, self) {
                return Err(AdError::CrossTape);
            }
            adj[v.idx as usize] += c;
            top = top.max(v.idx as usize + 1);
        }
        for i in (0..top).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let (s, e) = (n.start[i] as usize, n.start[i + 1] as usize);
            for k in s..e {
                adj[n.parents[k] as usize] += a * n.partials[k];
            }
        }
        Ok(adj)
    }

    /// Gradient of `output` with respect to each of `wrt`. Variables that do not
    /// influence `output` receive 0.
    pub fn grad(&self, output: Var<'_>, wrt: &[Var<'_>]) -> Result<Vec<f64>, AdError> {
        if wrt.iter().any(|w| !std::ptr::eq(w.tape, self)) {
            return Err(AdError::CrossTape);
        }
        let adj = self.adjoints(output)?;
        Ok(wrt.iter().map(|w| adj[w.idx as usize]).collect())
    }

    /// Reads the adjoint of each variable out of a vector produced by
    /// [`Tape::backward`] or [`Tape::adjoints`].
    pub fn gather(adjoints: &[f64], vars: &[Var<'_>]) -> Vec<f64> {
        vars.iter().map(|v| adjoints[v.idx as usize]).collect()
    }
}

/// Scalar on a tape.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    value: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var({}@{})", self.value, self.idx)
    }
}

impl<'t> Var<'t> {
    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    #[inline]
    pub fn index(&self) -> usize {
        self.idx as usize
    }

    /// Constant on the same tape as `self`.
    #[inline]
    pub fn lift(&self, x: f64) -> Var<'t> {
        self.tape.constant(x)
    }

    #[inline]
    pub(crate) fn unary(self, op: &'static str, value: f64, d: f64) -> Var<'t> {
        self.tape.push(op, value, &[(self.idx, d)])
    }

    #[inline]
    pub(crate) fn binary(self, other: Var<'t>, op: &'static str, value: f64, da: f64, db: f64) -> Var<'t> {
        debug_assert!(std::ptr::eq(self.tape, other.tape), "cross-tape operation");
        self.tape.push(op, value, &[(self.idx, da), (other.idx, db)])
    }
}
