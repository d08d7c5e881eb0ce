//! Reverse-mode accumulation over a flat Wengert list.
//!
//! Every arithmetic operation on [`Var`] appends one node holding the local
//! partial derivatives with respect to its (at most two) parents. A backward
//! sweep in reverse insertion order then yields adjoints of every node.
//! Leaves created first (the trainable parameters) occupy the lowest indices,
//! so their adjoints are the leading slice of the adjoint buffer.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::scalar::{sigmoid, Scalar};
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

/// Operation class of a recorded node, reported when the backward sweep
/// produces a non-finite adjoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    AddConst,
    MulConst,
    Exp,
    Ln,
    Sqrt,
    Sigmoid,
    Square,
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: Op,
    parents: [u32; 2],
    partials: [f64; 2],
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    adjoints: RefCell<Vec<f64>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Tape {
            nodes: RefCell::new(Vec::with_capacity(n)),
            adjoints: RefCell::new(Vec::with_capacity(n)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops every recorded node, keeping the allocation.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
    }

    /// Records an independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        self.push(Op::Leaf, [NONE, NONE], [0.0, 0.0], value)
    }

    #[inline]
    fn push(&self, op: Op, parents: [u32; 2], partials: [f64; 2], value: f64) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len() as u32;
        nodes.push(Node {
            op,
            parents,
            partials,
        });
        Var {
            tape: self,
            index,
            value,
        }
    }

    /// Runs the backward sweep from `output` and adds `weight * d output / d leaf_i`
    /// into `grad[i]` for the first `grad.len()` nodes of the tape.
    pub fn accumulate(&self, output: Var<'_>, weight: f64, grad: &mut [f64]) -> Result<()> {
        debug_assert!(std::ptr::eq(output.tape, self));
        let nodes = self.nodes.borrow();
        let mut adj = self.adjoints.borrow_mut();
        let n = output.index as usize + 1;
        adj.clear();
        adj.resize(n, 0.0);
        adj[n - 1] = weight;
        for i in (0..n).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = &nodes[i];
            for k in 0..2 {
                let p = node.parents[k];
                if p == NONE {
                    break;
                }
                let contribution = node.partials[k] * a;
                if !contribution.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("backward sweep through {:?} node #{i}", node.op),
                    });
                }
                adj[p as usize] += contribution;
            }
        }
        for (g, a) in grad.iter_mut().zip(adj.iter()) {
            *g += *a;
        }
        Ok(())
    }

    /// Gradient of `output` with respect to the first `n_leaves` nodes.
    pub fn gradient(&self, output: Var<'_>, n_leaves: usize) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; n_leaves];
        self.accumulate(output, 1.0, &mut grad)?;
        Ok(grad)
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: u32,
    value: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{} = {})", self.index, self.value)
    }
}

impl<'t> Var<'t> {
    pub fn index(&self) -> usize {
        self.index as usize
    }

    #[inline]
    fn unary(self, op: Op, partial: f64, value: f64) -> Self {
        self.tape.push(op, [self.index, NONE], [partial, 0.0], value)
    }

    #[inline]
    fn binary(self, rhs: Self, op: Op, partials: [f64; 2], value: f64) -> Self {
        debug_assert!(std::ptr::eq(self.tape, rhs.tape));
        self.tape
            .push(op, [self.index, rhs.index], partials, value)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Add, [1.0, 1.0], self.value + rhs.value)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Sub, [1.0, -1.0], self.value - rhs.value)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Mul, [rhs.value, self.value], self.value * rhs.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let q = self.value / rhs.value;
        self.binary(rhs, Op::Div, [1.0 / rhs.value, -q / rhs.value], q)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.unary(Op::Neg, -1.0, -self.value)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: f64) -> Self {
        self.unary(Op::AddConst, 1.0, self.value + rhs)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: f64) -> Self {
        self.unary(Op::AddConst, 1.0, self.value - rhs)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        self.unary(Op::MulConst, rhs, self.value * rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self.unary(Op::MulConst, 1.0 / rhs, self.value / rhs)
    }
}

impl<'t> Scalar for Var<'t> {
    #[inline]
    fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    fn lift(&self, c: f64) -> Self {
        self.tape.var(c)
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(Op::Exp, e, e)
    }

    fn ln(self) -> Self {
        self.unary(Op::Ln, 1.0 / self.value, self.value.ln())
    }

    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.unary(Op::Sqrt, 0.5 / s, s)
    }

    #[inline]
    fn sigmoid(self) -> Self {
        let s = sigmoid(self.value);
        self.unary(Op::Sigmoid, s * (1.0 - s), s)
    }

    #[inline]
    fn square(self) -> Self {
        self.unary(Op::Square, 2.0 * self.value, self.value * self.value)
    }

    fn recip_scaled(self, c: f64) -> Self {
        let q = c / self.value;
        self.unary(Op::Div, -q / self.value, q)
    }
}
