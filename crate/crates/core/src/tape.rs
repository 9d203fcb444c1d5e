//! Minimal reverse-mode automatic differentiation over scalars.
//!
//! Every operation appends a node holding its value and the local partial
//! derivatives with respect to its operands. [`Tape::gradient`] then sweeps
//! the nodes in reverse creation order, which is a valid topological order.
//! Operations are n-ary so that affine maps cost one node per output.

use alloc::vec::Vec;
use core::cell::RefCell;
use core::ops::{Add, Div, Mul, Neg, Sub};

use crate::math;
use crate::scalar::Scalar;

#[derive(Default)]
struct Graph {
    values: Vec<f64>,
    /// `starts[i]..starts[i + 1]` indexes the operand edges of node `i`.
    starts: Vec<u32>,
    edges: Vec<(u32, f64)>,
}

#[derive(Default)]
pub struct Tape {
    graph: RefCell<Graph>,
}

#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: u32,
    value: f64,
}

impl core::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Var").field("index", &self.index).field("value", &self.value).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        let mut graph = Graph::default();
        graph.starts.push(0);
        Tape { graph: RefCell::new(graph) }
    }

    pub fn with_capacity(nodes: usize) -> Self {
        let mut graph = Graph {
            values: Vec::with_capacity(nodes),
            starts: Vec::with_capacity(nodes + 1),
            edges: Vec::with_capacity(nodes * 3),
        };
        graph.starts.push(0);
        Tape { graph: RefCell::new(graph) }
    }

    pub fn len(&self) -> usize {
        self.graph.borrow().values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A leaf variable (no operands).
    pub fn var(&self, value: f64) -> Var<'_> {
        self.push(value, &[])
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    fn push(&self, value: f64, operands: &[(u32, f64)]) -> Var<'_> {
        let mut g = self.graph.borrow_mut();
        let index = g.values.len() as u32;
        g.values.push(value);
        g.edges.extend_from_slice(operands);
        let end = g.edges.len() as u32;
        g.starts.push(end);
        Var { tape: self, index, value }
    }

    fn push_iter(&self, value: f64, operands: impl Iterator<Item = (u32, f64)>) -> Var<'_> {
        let mut g = self.graph.borrow_mut();
        let index = g.values.len() as u32;
        g.values.push(value);
        g.edges.extend(operands);
        let end = g.edges.len() as u32;
        g.starts.push(end);
        Var { tape: self, index, value }
    }

    /// Adjoints of `output` with respect to every node on the tape, indexed by
    /// creation order. Leaves created first therefore occupy the leading slots.
    pub fn gradient(&self, output: Var<'_>) -> Vec<f64> {
        let g = self.graph.borrow();
        let n = output.index as usize + 1;
        let mut adj = alloc::vec![0.0; n];
        adj[n - 1] = 1.0;
        for node in (0..n).rev() {
            let a = adj[node];
            if a == 0.0 {
                continue;
            }
            let (s, e) = (g.starts[node] as usize, g.starts[node + 1] as usize);
            for &(parent, partial) in &g.edges[s..e] {
                adj[parent as usize] += a * partial;
            }
        }
        adj
    }

    /// `Σ xs`, one node.
    pub fn sum<'t>(&'t self, xs: &[Var<'t>]) -> Var<'t> {
        let value = xs.iter().map(|x| x.value).sum();
        self.push_iter(value, xs.iter().map(|x| (x.index, 1.0)))
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn index(&self) -> usize {
        self.index as usize
    }

    fn unary(self, value: f64, partial: f64) -> Var<'t> {
        self.tape.push(value, &[(self.index, partial)])
    }

    fn binary(self, other: Var<'t>, value: f64, d_self: f64, d_other: f64) -> Var<'t> {
        debug_assert!(core::ptr::eq(self.tape, other.tape), "operands on different tapes");
        self.tape.push(value, &[(self.index, d_self), (other.index, d_other)])
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let q = self.value / rhs.value;
        self.binary(rhs, q, 1.0 / rhs.value, -q / rhs.value)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-self.value, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.unary(self.value + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.unary(self.value - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.unary(self.value * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Var<'t> {
        self.unary(self.value / rhs, 1.0 / rhs)
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        rhs + self
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        rhs.unary(self - rhs.value, -1.0)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        rhs * self
    }
}

impl<'t> Div<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let q = self / rhs.value;
        rhs.unary(q, -q / rhs.value)
    }
}

impl<'t> Scalar for Var<'t> {
    fn value(self) -> f64 {
        self.value
    }

    fn constant_like(self, c: f64) -> Self {
        self.tape.var(c)
    }

    fn exp(self) -> Self {
        let e = math::exp(self.value);
        self.unary(e, e)
    }

    fn ln(self) -> Self {
        self.unary(math::ln(self.value), 1.0 / self.value)
    }

    fn recip(self) -> Self {
        1.0 / self
    }

    fn rdiv(self, c: f64) -> Self {
        c / self
    }

    fn sqrt(self) -> Self {
        let s = math::sqrt(self.value);
        self.unary(s, 0.5 / s)
    }

    fn log_sigmoid(self) -> Self {
        // d/dx log σ(x) = σ(−x)
        self.unary(math::log_sigmoid(self.value), math::sigmoid(-self.value))
    }

    fn gelu(self) -> Self {
        let x = self.value;
        let cdf = math::norm_cdf(x);
        self.unary(x * cdf, cdf + x * math::norm_pdf(x))
    }

    fn clamp_to(self, lo: f64, hi: f64) -> Self {
        if self.value < lo {
            self.unary(lo, 0.0)
        } else if self.value > hi {
            self.unary(hi, 0.0)
        } else {
            self
        }
    }

    fn affine(weights: &[Self], xs: &[Self], bias: Self) -> Self {
        let tape = bias.tape;
        let value = weights.iter().zip(xs).fold(bias.value, |acc, (w, x)| acc + w.value * x.value);
        let edges = weights
            .iter()
            .zip(xs)
            .flat_map(|(w, x)| [(w.index, x.value), (x.index, w.value)])
            .chain(core::iter::once((bias.index, 1.0)));
        tape.push_iter(value, edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_has_gradient_two_x() {
        let tape = Tape::new();
        let w = tape.var(3.0);
        let y = w * w;
        assert_eq!(y.value(), 9.0);
        assert_eq!(tape.gradient(y)[w.index()], 6.0);
    }

    #[test]
    fn unused_leaf_has_exactly_zero_gradient() {
        let tape = Tape::new();
        let x = tape.var(2.0);
        let unused = tape.var(5.0);
        let y = x.exp() * 3.0;
        let g = tape.gradient(y);
        assert_eq!(g[unused.index()], 0.0);
        assert!((g[x.index()] - 3.0 * math::exp(2.0)).abs() < 1e-12);
    }

    #[test]
    fn fan_out_accumulates() {
        let tape = Tape::new();
        let x = tape.var(1.5);
        let y = x * x * x + x / 2.0 - 1.0 / x;
        let g = tape.gradient(y)[x.index()];
        let expected = 3.0 * 1.5 * 1.5 + 0.5 + 1.0 / (1.5 * 1.5);
        assert!((g - expected).abs() < 1e-12);
    }

    #[test]
    fn affine_matches_expanded_form() {
        let tape = Tape::new();
        let w = tape.vars(&[0.5, -1.0, 2.0]);
        let x = tape.vars(&[1.0, 3.0, -0.25]);
        let b = tape.var(0.1);
        let y = Var::affine(&w, &x, b);
        assert!((y.value() - (0.5 - 3.0 - 0.5 + 0.1)).abs() < 1e-15);
        let g = tape.gradient(y);
        assert_eq!(g[w[1].index()], 3.0);
        assert_eq!(g[x[2].index()], 2.0);
        assert_eq!(g[b.index()], 1.0);
    }

    #[test]
    fn elementary_derivatives_match_central_differences() {
        let fns: [fn(f64) -> f64; 5] = [
            math::exp,
            math::ln,
            math::sqrt,
            math::log_sigmoid,
            math::gelu,
        ];
        for (k, f) in fns.iter().enumerate() {
            for &x in &[0.3, 1.7, 4.0] {
                let tape = Tape::new();
                let v = tape.var(x);
                let y = match k {
                    0 => v.exp(),
                    1 => v.ln(),
                    2 => v.sqrt(),
                    3 => v.log_sigmoid(),
                    _ => v.gelu(),
                };
                let h = 1e-6;
                let fd = (f(x + h) - f(x - h)) / (2.0 * h);
                let g = tape.gradient(y)[v.index()];
                assert!((g - fd).abs() < 1e-7 * (1.0 + fd.abs()), "fn {k} at {x}: {g} vs {fd}");
            }
        }
    }
}
