use std::fmt;
use std::str::FromStr;

use super::tensor::{broadcast_shape, reduce_to, zip_broadcast, Tensor};
use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The closed set of differentiable primitives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Primitive {
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Cos,
    Exp,
    Log,
    Tanh,
    Softplus,
    Max,
    Matvec,
    Sum,
    Mean,
    Clip,
}

impl Primitive {
    pub const ALL: [Primitive; 15] = [
        Primitive::Add,
        Primitive::Sub,
        Primitive::Mul,
        Primitive::Div,
        Primitive::Sin,
        Primitive::Cos,
        Primitive::Exp,
        Primitive::Log,
        Primitive::Tanh,
        Primitive::Softplus,
        Primitive::Max,
        Primitive::Matvec,
        Primitive::Sum,
        Primitive::Mean,
        Primitive::Clip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Div => "div",
            Primitive::Sin => "sin",
            Primitive::Cos => "cos",
            Primitive::Exp => "exp",
            Primitive::Log => "log",
            Primitive::Tanh => "tanh",
            Primitive::Softplus => "softplus",
            Primitive::Max => "max",
            Primitive::Matvec => "matvec",
            Primitive::Sum => "sum",
            Primitive::Mean => "mean",
            Primitive::Clip => "clip",
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Primitive {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Primitive::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnsupportedPrimitive(s.to_string()))
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Max(Var, Var),
    AddScalar(Var),
    MulScalar(Var, f64),
    Sin(Var),
    Cos(Var),
    Exp(Var),
    Log(Var),
    Tanh(Var),
    Softplus(Var),
    Clip(Var, f64, f64),
    Matvec(Var, Var),
    SumAll(Var),
    SumCols(Var),
    MeanAll(Var),
    // Index maps: selectors into parameter vectors and oscillator columns.
    View { src: Var, offset: usize },
    Gather { src: Var, cols: Vec<usize> },
    ScatterAdd { src: Var, cols: Vec<usize> },
    Concat(Vec<Var>),
}

impl Op {
    fn primitive(&self) -> Option<Primitive> {
        Some(match self {
            Op::Add(..) | Op::AddScalar(_) => Primitive::Add,
            Op::Sub(..) => Primitive::Sub,
            Op::Mul(..) | Op::MulScalar(..) => Primitive::Mul,
            Op::Div(..) => Primitive::Div,
            Op::Max(..) => Primitive::Max,
            Op::Sin(_) => Primitive::Sin,
            Op::Cos(_) => Primitive::Cos,
            Op::Exp(_) => Primitive::Exp,
            Op::Log(_) => Primitive::Log,
            Op::Tanh(_) => Primitive::Tanh,
            Op::Softplus(_) => Primitive::Softplus,
            Op::Clip(..) => Primitive::Clip,
            Op::Matvec(..) => Primitive::Matvec,
            Op::SumAll(_) | Op::SumCols(_) => Primitive::Sum,
            Op::MeanAll(_) => Primitive::Mean,
            _ => return None,
        })
    }

    fn operands(&self) -> Vec<Var> {
        match self {
            Op::Input => vec![],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) | Op::Max(a, b) => {
                vec![*a, *b]
            }
            Op::Matvec(x, w) => vec![*x, *w],
            Op::AddScalar(a)
            | Op::MulScalar(a, _)
            | Op::Sin(a)
            | Op::Cos(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Tanh(a)
            | Op::Softplus(a)
            | Op::Clip(a, ..)
            | Op::SumAll(a)
            | Op::SumCols(a)
            | Op::MeanAll(a) => vec![*a],
            Op::View { src, .. } | Op::Gather { src, .. } | Op::ScatterAdd { src, .. } => {
                vec![*src]
            }
            Op::Concat(vs) => vs.clone(),
        }
    }
}

struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Append-only record of a forward computation. Values are computed eagerly
/// as nodes are pushed, so node order is a topological order by construction.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    faults: Vec<Primitive>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_raw(Op::Input, value, true)
    }

    /// Input that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_raw(Op::Input, value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn is_leaf(&self, v: Var) -> bool {
        let n = &self.nodes[v.0];
        matches!(n.op, Op::Input) && n.requires_grad
    }

    /// Every operand index precedes the node that uses it.
    pub fn is_topologically_ordered(&self) -> bool {
        self.nodes
            .iter()
            .enumerate()
            .all(|(i, n)| n.op.operands().iter().all(|v| v.0 < i))
    }

    /// Scales the adjoint of `prim` by 1.5 in subsequent backward sweeps.
    /// Exists to demonstrate that gradient checks catch broken adjoints.
    #[doc(hidden)]
    pub fn inject_adjoint_fault(&mut self, prim: Primitive) {
        self.faults.push(prim);
    }

    fn push_raw(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        let requires_grad = op.operands().iter().any(|v| self.nodes[v.0].requires_grad);
        self.push_raw(op, value, requires_grad)
    }

    fn binary(&mut self, context: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let shape = broadcast_shape(context, va.shape(), vb.shape())?;
        let value = zip_broadcast(va, vb, shape, f);
        Ok(self.push(op, value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    /// Elementwise maximum; ties route the gradient to `a`.
    pub fn max(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("max", a, b, f64::max, Op::Max(a, b))
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|x| x + s);
        self.push(Op::AddScalar(a), value)
    }

    pub fn mul_scalar(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|x| x * s);
        self.push(Op::MulScalar(a, s), value)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.mul_scalar(a, -1.0)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a).expect("same shape")
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::sin);
        self.push(Op::Sin(a), value)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::cos);
        self.push(Op::Cos(a), value)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::exp);
        self.push(Op::Exp(a), value)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::ln);
        self.push(Op::Log(a), value)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), value)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let value = self.value(a).map(softplus);
        self.push(Op::Softplus(a), value)
    }

    pub fn clip(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(a).map(|x| crate::math::clip(x, lo, hi));
        self.push(Op::Clip(a, lo, hi), value)
    }

    /// `x · wᵀ` for `x: [batch, in]`, `w: [out, in]`, giving `[batch, out]`.
    pub fn matvec(&mut self, x: Var, w: Var) -> Result<Var> {
        let (vx, vw) = (self.value(x), self.value(w));
        let (b, n_in) = vx.shape();
        let (n_out, w_in) = vw.shape();
        if n_in != w_in {
            return Err(Error::Shape {
                context: "matvec",
                lhs: vx.shape(),
                rhs: vw.shape(),
            });
        }
        let mut out = Vec::with_capacity(b * n_out);
        for r in 0..b {
            let xr = vx.row_slice(r);
            for o in 0..n_out {
                let wr = vw.row_slice(o);
                let mut acc = 0.0;
                for i in 0..n_in {
                    acc += xr[i] * wr[i];
                }
                out.push(acc);
            }
        }
        let value = Tensor::new(b, n_out, out)?;
        Ok(self.push(Op::Matvec(x, w), value))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum::<f64>();
        self.push(Op::SumAll(a), Tensor::scalar(s))
    }

    /// Row-wise sum, `[r, c] -> [r, 1]`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let sums = (0..v.rows()).map(|r| v.row_slice(r).iter().sum::<f64>()).collect();
        self.push(Op::SumCols(a), Tensor::column(sums))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let m = v.data().iter().sum::<f64>() / v.data().len() as f64;
        self.push(Op::MeanAll(a), Tensor::scalar(m))
    }

    /// Reinterprets `rows * cols` consecutive entries of `src` (row-major,
    /// starting at `offset`) as a new tensor.
    pub fn view(&mut self, src: Var, offset: usize, rows: usize, cols: usize) -> Result<Var> {
        let data = self.value(src).data();
        if offset + rows * cols > data.len() {
            return Err(Error::Dimension {
                context: "view",
                expected: offset + rows * cols,
                got: data.len(),
            });
        }
        let value = Tensor::new(rows, cols, data[offset..offset + rows * cols].to_vec())?;
        Ok(self.push(Op::View { src, offset }, value))
    }

    /// Selects columns (repetition allowed).
    pub fn gather(&mut self, src: Var, cols: &[usize]) -> Result<Var> {
        let v = self.value(src);
        if let Some(&bad) = cols.iter().find(|&&c| c >= v.cols()) {
            return Err(Error::Dimension {
                context: "gather",
                expected: v.cols(),
                got: bad,
            });
        }
        let mut data = Vec::with_capacity(v.rows() * cols.len());
        for r in 0..v.rows() {
            let row = v.row_slice(r);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        let value = Tensor::new(v.rows(), cols.len(), data)?;
        Ok(self.push(
            Op::Gather {
                src,
                cols: cols.to_vec(),
            },
            value,
        ))
    }

    /// Sums column `k` of `src` into output column `cols[k]`, in order of `k`,
    /// starting from zero.
    pub fn scatter_add(&mut self, src: Var, cols: &[usize], width: usize) -> Result<Var> {
        let v = self.value(src);
        if cols.len() != v.cols() {
            return Err(Error::Dimension {
                context: "scatter_add",
                expected: v.cols(),
                got: cols.len(),
            });
        }
        if let Some(&bad) = cols.iter().find(|&&c| c >= width) {
            return Err(Error::Dimension {
                context: "scatter_add",
                expected: width,
                got: bad,
            });
        }
        let mut out = Tensor::zeros(v.rows(), width);
        for r in 0..v.rows() {
            let row = v.row_slice(r);
            for (k, &c) in cols.iter().enumerate() {
                out.data_mut()[r * width + c] += row[k];
            }
        }
        Ok(self.push(
            Op::ScatterAdd {
                src,
                cols: cols.to_vec(),
            },
            out,
        ))
    }

    /// Column-wise concatenation of tensors with equal row counts.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows();
        let mut widths = 0;
        for &p in parts {
            let (r, c) = self.shape(p);
            if r != rows {
                return Err(Error::Dimension {
                    context: "concat",
                    expected: rows,
                    got: r,
                });
            }
            widths += c;
        }
        let mut data = Vec::with_capacity(rows * widths);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let value = Tensor::new(rows, widths, data)?;
        Ok(self.push(Op::Concat(parts.to_vec()), value))
    }

    /// Applies a primitive by name, for callers assembling graphs from data.
    pub fn apply(&mut self, name: &str, args: &[Var]) -> Result<Var> {
        let prim: Primitive = name.parse()?;
        let arity = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Dimension {
                    context: "apply arity",
                    expected: n,
                    got: args.len(),
                })
            }
        };
        match prim {
            Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::Div | Primitive::Max | Primitive::Matvec => {
                arity(2)?;
                let (a, b) = (args[0], args[1]);
                match prim {
                    Primitive::Add => self.add(a, b),
                    Primitive::Sub => self.sub(a, b),
                    Primitive::Mul => self.mul(a, b),
                    Primitive::Div => self.div(a, b),
                    Primitive::Max => self.max(a, b),
                    _ => self.matvec(a, b),
                }
            }
            Primitive::Clip => Err(Error::Contract("clip needs bounds; call Tape::clip directly".into())),
            _ => {
                arity(1)?;
                let a = args[0];
                Ok(match prim {
                    Primitive::Sin => self.sin(a),
                    Primitive::Cos => self.cos(a),
                    Primitive::Exp => self.exp(a),
                    Primitive::Log => self.log(a),
                    Primitive::Tanh => self.tanh(a),
                    Primitive::Softplus => self.softplus(a),
                    Primitive::Sum => self.sum(a),
                    _ => self.mean(a),
                })
            }
        }
    }

    /// Reverse sweep from `output` seeded with the cotangent `seed`.
    pub fn backward(&self, output: Var, seed: &Tensor) -> Result<Gradients> {
        let out_shape = self.shape(output);
        if seed.shape() != out_shape {
            return Err(Error::Shape {
                context: "backward seed",
                lhs: out_shape,
                rhs: seed.shape(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(seed.clone());

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let contributions = self.adjoints(node, &g);
            let fault = node.op.primitive().is_some_and(|p| self.faults.contains(&p));
            for (v, mut c) in contributions {
                if !self.nodes[v.0].requires_grad {
                    continue;
                }
                if fault {
                    c.data_mut().iter_mut().for_each(|x| *x *= 1.5);
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&c),
                    slot => *slot = Some(c),
                }
            }
            // Leaves keep their gradient for the caller.
            if matches!(node.op, Op::Input) {
                grads[idx] = Some(g);
            }
        }

        let mut leaf_grads = Vec::new();
        for (i, node) in self.nodes.iter().enumerate().take(output.0 + 1) {
            if matches!(node.op, Op::Input) && node.requires_grad {
                let g = grads[i]
                    .take()
                    .unwrap_or_else(|| Tensor::zeros(node.value.rows(), node.value.cols()));
                leaf_grads.push((Var(i), g));
            }
        }
        // Leaves created after `output` cannot influence it.
        for (i, node) in self.nodes.iter().enumerate().skip(output.0 + 1) {
            if matches!(node.op, Op::Input) && node.requires_grad {
                leaf_grads.push((Var(i), Tensor::zeros(node.value.rows(), node.value.cols())));
            }
        }
        Ok(Gradients { leaf_grads })
    }

    fn adjoints(&self, node: &Node, g: &Tensor) -> Vec<(Var, Tensor)> {
        let val = |v: Var| &self.nodes[v.0].value;
        let elementwise = |x: Var, f: &dyn Fn(f64, f64) -> f64| -> Tensor {
            // g has the shape of the node, which equals x's shape for unary ops.
            let xv = val(x);
            let data = g.data().iter().zip(xv.data()).map(|(&gi, &xi)| f(gi, xi)).collect();
            Tensor::new(xv.rows(), xv.cols(), data).expect("unary shape")
        };
        match &node.op {
            Op::Input => vec![],
            Op::Add(a, b) => vec![
                (*a, reduce_to(g.clone(), val(*a).shape())),
                (*b, reduce_to(g.clone(), val(*b).shape())),
            ],
            Op::Sub(a, b) => vec![
                (*a, reduce_to(g.clone(), val(*a).shape())),
                (*b, reduce_to(g.map(|x| -x), val(*b).shape())),
            ],
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let ga = zip_broadcast(g, vb, g.shape(), |gi, bi| gi * bi);
                let gb = zip_broadcast(g, va, g.shape(), |gi, ai| gi * ai);
                vec![(*a, reduce_to(ga, va.shape())), (*b, reduce_to(gb, vb.shape()))]
            }
            Op::Div(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let ga = zip_broadcast(g, vb, g.shape(), |gi, bi| gi / bi);
                // d(a/b)/db = -(a/b)/b, using the stored quotient.
                let q = &node.value;
                let gq = zip_broadcast(g, q, g.shape(), |gi, qi| gi * qi);
                let gb = zip_broadcast(&gq, vb, g.shape(), |x, bi| -x / bi);
                vec![(*a, reduce_to(ga, va.shape())), (*b, reduce_to(gb, vb.shape()))]
            }
            Op::Max(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let pick_a = zip_broadcast(va, vb, g.shape(), |x, y| if x >= y { 1.0 } else { 0.0 });
                let ga = zip_broadcast(g, &pick_a, g.shape(), |gi, m| gi * m);
                let gb = zip_broadcast(g, &pick_a, g.shape(), |gi, m| gi * (1.0 - m));
                vec![(*a, reduce_to(ga, va.shape())), (*b, reduce_to(gb, vb.shape()))]
            }
            Op::AddScalar(a) => vec![(*a, g.clone())],
            Op::MulScalar(a, s) => vec![(*a, g.map(|x| x * s))],
            Op::Sin(a) => vec![(*a, elementwise(*a, &|gi, x| gi * x.cos()))],
            Op::Cos(a) => vec![(*a, elementwise(*a, &|gi, x| -gi * x.sin()))],
            Op::Exp(a) => {
                let y = &node.value;
                let data = g.data().iter().zip(y.data()).map(|(gi, yi)| gi * yi).collect();
                vec![(*a, Tensor::new(y.rows(), y.cols(), data).expect("shape"))]
            }
            Op::Log(a) => vec![(*a, elementwise(*a, &|gi, x| gi / x))],
            Op::Tanh(a) => {
                let y = &node.value;
                let data = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(gi, yi)| gi * (1.0 - yi * yi))
                    .collect();
                vec![(*a, Tensor::new(y.rows(), y.cols(), data).expect("shape"))]
            }
            Op::Softplus(a) => vec![(*a, elementwise(*a, &|gi, x| gi * sigmoid(x)))],
            Op::Clip(a, lo, hi) => {
                let (lo, hi) = (*lo, *hi);
                vec![(*a, elementwise(*a, &|gi, x| if x > lo && x < hi { gi } else { 0.0 }))]
            }
            Op::Matvec(x, w) => {
                let (vx, vw) = (val(*x), val(*w));
                let (b, n_in) = vx.shape();
                let n_out = vw.rows();
                let mut gx = Tensor::zeros(b, n_in);
                let mut gw = Tensor::zeros(n_out, n_in);
                for r in 0..b {
                    let xr = vx.row_slice(r);
                    let gr = g.row_slice(r);
                    for (o, &go) in gr.iter().enumerate() {
                        if go == 0.0 {
                            continue;
                        }
                        let wr = vw.row_slice(o);
                        let gxr = &mut gx.data_mut()[r * n_in..(r + 1) * n_in];
                        for i in 0..n_in {
                            gxr[i] += go * wr[i];
                        }
                        let gwr = &mut gw.data_mut()[o * n_in..(o + 1) * n_in];
                        for i in 0..n_in {
                            gwr[i] += go * xr[i];
                        }
                    }
                }
                vec![(*x, gx), (*w, gw)]
            }
            Op::SumAll(a) => {
                let (r, c) = val(*a).shape();
                vec![(*a, Tensor::filled(r, c, g.item()))]
            }
            Op::SumCols(a) => {
                let (r, c) = val(*a).shape();
                let mut out = Tensor::zeros(r, c);
                for i in 0..r {
                    let gi = g.get(i, 0);
                    out.data_mut()[i * c..(i + 1) * c].fill(gi);
                }
                vec![(*a, out)]
            }
            Op::MeanAll(a) => {
                let (r, c) = val(*a).shape();
                vec![(*a, Tensor::filled(r, c, g.item() / (r * c) as f64))]
            }
            Op::View { src, offset } => {
                let (r, c) = val(*src).shape();
                let mut out = Tensor::zeros(r, c);
                out.data_mut()[*offset..*offset + g.data().len()].copy_from_slice(g.data());
                vec![(*src, out)]
            }
            Op::Gather { src, cols } => {
                let (r, c) = val(*src).shape();
                let mut out = Tensor::zeros(r, c);
                for i in 0..r {
                    let gr = g.row_slice(i);
                    for (k, &col) in cols.iter().enumerate() {
                        out.data_mut()[i * c + col] += gr[k];
                    }
                }
                vec![(*src, out)]
            }
            Op::ScatterAdd { src, cols } => {
                let (r, c) = val(*src).shape();
                let mut out = Tensor::zeros(r, c);
                for i in 0..r {
                    let gr = g.row_slice(i);
                    for (k, &col) in cols.iter().enumerate() {
                        out.data_mut()[i * c + k] = gr[col];
                    }
                }
                vec![(*src, out)]
            }
            Op::Concat(parts) => {
                let mut start = 0;
                let mut res = Vec::with_capacity(parts.len());
                for &p in parts {
                    let (r, c) = val(p).shape();
                    let mut out = Tensor::zeros(r, c);
                    for i in 0..r {
                        out.data_mut()[i * c..(i + 1) * c].copy_from_slice(&g.row_slice(i)[start..start + c]);
                    }
                    start += c;
                    res.push((p, out));
                }
                res
            }
        }
    }
}

/// Gradients of one seeded output with respect to every differentiable leaf.
#[derive(Clone, Debug)]
pub struct Gradients {
    leaf_grads: Vec<(Var, Tensor)>,
}

impl Gradients {
    /// Gradient for a leaf; `None` if `v` is not a differentiable leaf.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.leaf_grads.iter().find(|(leaf, _)| *leaf == v).map(|(_, g)| g)
    }

    /// All leaf gradients flattened in leaf-creation order.
    pub fn to_vector(&self) -> GradVector {
        GradVector(
            self.leaf_grads
                .iter()
                .flat_map(|(_, g)| g.data().iter().copied())
                .collect(),
        )
    }
}

/// Flat gradient aligned with the concatenated trainable parameter layout.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct GradVector(pub Vec<f64>);

impl GradVector {
    pub fn zeros(n: usize) -> Self {
        GradVector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn accumulate(&mut self, other: &GradVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        crate::math::all_finite(&self.0)
    }
}

/// Records `f` applied to `inputs` (each registered as a differentiable
/// leaf, in order) and returns its outputs together with the tape.
pub fn record_forward<F>(inputs: &[Tensor], f: F) -> Result<(Vec<Var>, Tape)>
where
    F: FnOnce(&mut Tape, &[Var]) -> Result<Vec<Var>>,
{
    let mut tape = Tape::new();
    let leaves: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let outputs = f(&mut tape, &leaves)?;
    Ok((outputs, tape))
}
