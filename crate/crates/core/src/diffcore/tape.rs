use super::tensor::{dot, Tensor};
use super::DiffError;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Norms at or below this are treated as degenerate by the normalize ops.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug)]
enum Op {
    Param,
    Constant,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Dot(Var, Var),
    SumRows(Var),
    MeanRows(Var),
    Softmax(Var),
    L2Normalize(Var, f64),
    L2NormalizeRows(Var, Vec<f64>),
    Hinge(Var),
    SqFrobenius(Var),
    Square(Var),
    Sum(Var),
    GatherRows(Var, Vec<usize>),
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records primitive applications in evaluation order for reverse-mode
/// differentiation. Nodes are appended only, so the record is always
/// topologically sorted.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    hinge_inputs: Vec<f64>,
    degenerate: usize,
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.item()
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Every pre-activation seen by `hinge`, in recording order.
    pub fn hinge_inputs(&self) -> &[f64] {
        &self.hinge_inputs
    }

    /// Number of normalize calls that hit a (near-)zero norm.
    pub fn degenerate_count(&self) -> usize {
        self.degenerate
    }

    /// Differentiable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_unchecked(value, Op::Param, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_unchecked(value, Op::Constant, false)
    }

    fn push_unchecked(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op) -> Result<Var, DiffError> {
        if !value.is_finite() {
            return Err(DiffError::NonFinite(name));
        }
        let needs_grad = match &op {
            Op::Param => true,
            Op::Constant => false,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Dot(a, b) => {
                self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad
            }
            Op::Transpose(x)
            | Op::Scale(x, _)
            | Op::AddScalar(x)
            | Op::SumRows(x)
            | Op::MeanRows(x)
            | Op::Softmax(x)
            | Op::L2Normalize(x, _)
            | Op::L2NormalizeRows(x, _)
            | Op::Hinge(x)
            | Op::SqFrobenius(x)
            | Op::Square(x)
            | Op::Sum(x)
            | Op::GatherRows(x, _) => self.nodes[x.0].needs_grad,
        };
        Ok(self.push_unchecked(value, op, needs_grad))
    }

    fn same_shape(&self, name: &'static str, a: Var, b: Var) -> Result<(), DiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(DiffError::Shape {
                op: name,
                lhs: sa,
                rhs: sb,
            });
        }
        Ok(())
    }

    fn require_vector(&self, name: &'static str, x: Var) -> Result<(), DiffError> {
        if !self.value(x).is_vector() {
            return Err(DiffError::NotVector {
                op: name,
                shape: self.shape(x),
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(DiffError::Shape {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let value = self.value(a).matmul(self.value(b));
        self.push("matmul", value, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var, DiffError> {
        let value = self.value(x).transpose();
        self.push("transpose", value, Op::Transpose(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("add", a, b)?;
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        self.push("add", value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("sub", a, b)?;
        let mut value = self.value(a).clone();
        value.add_scaled(self.value(b), -1.0);
        self.push("sub", value, Op::Sub(a, b))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var, DiffError> {
        let mut value = self.value(x).clone();
        value.as_mut_slice().iter_mut().for_each(|v| *v *= factor);
        self.push("scale", value, Op::Scale(x, factor))
    }

    /// Adds a constant to every entry.
    pub fn add_scalar(&mut self, x: Var, offset: f64) -> Result<Var, DiffError> {
        let mut value = self.value(x).clone();
        value.as_mut_slice().iter_mut().for_each(|v| *v += offset);
        self.push("add_scalar", value, Op::AddScalar(x))
    }

    /// Inner product of two equally shaped tensors; returns a scalar.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("dot", a, b)?;
        let value = dot(self.value(a).as_slice(), self.value(b).as_slice());
        self.push("dot", Tensor::scalar(value), Op::Dot(a, b))
    }

    /// Sums the rows of an n×d matrix into a d-dimensional column vector.
    pub fn sum_rows(&mut self, x: Var) -> Result<Var, DiffError> {
        let value = column_sums(self.value(x), 1.0);
        self.push("sum_rows", value, Op::SumRows(x))
    }

    pub fn mean_rows(&mut self, x: Var) -> Result<Var, DiffError> {
        let rows = self.value(x).rows();
        if rows == 0 {
            return Err(DiffError::Empty("mean_rows"));
        }
        let value = column_sums(self.value(x), 1.0 / rows as f64);
        self.push("mean_rows", value, Op::MeanRows(x))
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var, DiffError> {
        self.masked_softmax(x, None)
    }

    /// Softmax over a vector. Positions whose mask entry is `false` get
    /// exactly zero weight and the rest renormalize among themselves.
    pub fn masked_softmax(&mut self, x: Var, mask: Option<&[bool]>) -> Result<Var, DiffError> {
        self.require_vector("softmax", x)?;
        let input = self.value(x);
        if let Some(mask) = mask {
            if mask.len() != input.len() {
                return Err(DiffError::Shape {
                    op: "softmax mask",
                    lhs: input.shape(),
                    rhs: (mask.len(), 1),
                });
            }
        }
        let live = |i: usize| mask.is_none_or(|m| m[i]);
        let max = input
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(i, _)| live(*i))
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(DiffError::AllMasked);
        }
        let mut value = Tensor::zeros(input.rows(), input.cols());
        let mut total = 0.0;
        for (i, (out, v)) in value.as_mut_slice().iter_mut().zip(input.as_slice()).enumerate() {
            if live(i) {
                *out = (v - max).exp();
                total += *out;
            }
        }
        value.as_mut_slice().iter_mut().for_each(|v| *v /= total);
        self.push("softmax", value, Op::Softmax(x))
    }

    /// Scales a vector to unit L2 norm. Vectors with norm ≤ [`NORM_EPS`]
    /// pass through unchanged with zero gradient and bump the degenerate
    /// counter.
    pub fn l2_normalize(&mut self, x: Var) -> Result<Var, DiffError> {
        self.require_vector("l2_normalize", x)?;
        let mut value = self.value(x).clone();
        let norm = value.norm();
        let stored = if norm > NORM_EPS {
            value.as_mut_slice().iter_mut().for_each(|v| *v /= norm);
            norm
        } else {
            self.degenerate += 1;
            0.0
        };
        self.push("l2_normalize", value, Op::L2Normalize(x, stored))
    }

    /// Row-wise [`Tape::l2_normalize`] for a matrix.
    pub fn l2_normalize_rows(&mut self, x: Var) -> Result<Var, DiffError> {
        let mut value = self.value(x).clone();
        let mut norms = Vec::with_capacity(value.rows());
        for r in 0..value.rows() {
            let row = value.row_mut(r);
            let norm = dot(row, row).sqrt();
            if norm > NORM_EPS {
                row.iter_mut().for_each(|v| *v /= norm);
                norms.push(norm);
            } else {
                norms.push(0.0);
                self.degenerate += 1;
            }
        }
        self.push("l2_normalize_rows", value, Op::L2NormalizeRows(x, norms))
    }

    /// Elementwise `max(0, x)`; the subgradient at 0 is 0.
    pub fn hinge(&mut self, x: Var) -> Result<Var, DiffError> {
        let mut value = self.value(x).clone();
        self.hinge_inputs.extend_from_slice(value.as_slice());
        value.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        self.push("hinge", value, Op::Hinge(x))
    }

    pub fn sq_frobenius(&mut self, x: Var) -> Result<Var, DiffError> {
        let s = self.value(x).as_slice();
        let value = dot(s, s);
        self.push("sq_frobenius", Tensor::scalar(value), Op::SqFrobenius(x))
    }

    pub fn square(&mut self, x: Var) -> Result<Var, DiffError> {
        let mut value = self.value(x).clone();
        value.as_mut_slice().iter_mut().for_each(|v| *v *= *v);
        self.push("square", value, Op::Square(x))
    }

    /// Sum of all entries.
    pub fn sum(&mut self, x: Var) -> Result<Var, DiffError> {
        let value = self.value(x).as_slice().iter().sum();
        self.push("sum", Tensor::scalar(value), Op::Sum(x))
    }

    /// Selects rows of `x` (with repetition) into a new matrix.
    pub fn gather_rows(&mut self, x: Var, indices: &[usize]) -> Result<Var, DiffError> {
        let src = self.value(x);
        let cols = src.cols();
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            if i >= src.rows() {
                return Err(DiffError::RowIndex {
                    index: i,
                    rows: src.rows(),
                });
            }
            data.extend_from_slice(src.row(i));
        }
        let value = Tensor::from_vec(indices.len(), cols, data)?;
        self.push("gather_rows", value, Op::GatherRows(x, indices.to_vec()))
    }

    /// Sum of scalars.
    pub fn add_all(&mut self, terms: &[Var]) -> Result<Var, DiffError> {
        let (first, rest) = terms.split_first().ok_or(DiffError::Empty("add_all"))?;
        rest.iter().try_fold(*first, |acc, &t| self.add(acc, t))
    }

    /// Arithmetic mean of scalars.
    pub fn mean_all(&mut self, terms: &[Var]) -> Result<Var, DiffError> {
        let total = self.add_all(terms)?;
        self.scale(total, 1.0 / terms.len() as f64)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, DiffError> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(DiffError::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Tensor::scalar(1.0));
        let mut leaves: Vec<Option<Tensor>> = Vec::new();
        leaves.resize_with(self.nodes.len(), || None);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            let out = &node.value;
            match &node.op {
                Op::Param => leaves[i] = Some(g),
                Op::Constant => {}
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    if self.nodes[a.0].needs_grad {
                        // dA = G Bᵀ
                        let da = slot(&mut grads, *a, av.shape());
                        let (n, m, p) = (av.rows(), av.cols(), bv.cols());
                        for r in 0..n {
                            let grow = &g.as_slice()[r * p..(r + 1) * p];
                            for k in 0..m {
                                let brow = &bv.as_slice()[k * p..(k + 1) * p];
                                da.as_mut_slice()[r * m + k] += dot(grow, brow);
                            }
                        }
                    }
                    if self.nodes[b.0].needs_grad {
                        // dB = Aᵀ G
                        let db = slot(&mut grads, *b, bv.shape());
                        let (n, m, p) = (av.rows(), av.cols(), bv.cols());
                        for r in 0..n {
                            let grow = &g.as_slice()[r * p..(r + 1) * p];
                            for k in 0..m {
                                let a_rk = av.as_slice()[r * m + k];
                                if a_rk == 0.0 {
                                    continue;
                                }
                                let dst = &mut db.as_mut_slice()[k * p..(k + 1) * p];
                                for (d, gv) in dst.iter_mut().zip(grow) {
                                    *d += a_rk * gv;
                                }
                            }
                        }
                    }
                }
                Op::Transpose(x) => {
                    slot(&mut grads, *x, g.transpose().shape()).add_assign(&g.transpose());
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut grads, *a, &g, 1.0);
                    self.accumulate(&mut grads, *b, &g, 1.0);
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut grads, *a, &g, 1.0);
                    self.accumulate(&mut grads, *b, &g, -1.0);
                }
                Op::Scale(x, factor) => self.accumulate(&mut grads, *x, &g, *factor),
                Op::AddScalar(x) => self.accumulate(&mut grads, *x, &g, 1.0),
                Op::Dot(a, b) => {
                    let gs = g.item();
                    let (av, bv) = (self.value(*a), self.value(*b));
                    self.accumulate(&mut grads, *a, bv, gs);
                    self.accumulate(&mut grads, *b, av, gs);
                }
                Op::SumRows(x) | Op::MeanRows(x) => {
                    let xv = self.value(*x);
                    let factor = match node.op {
                        Op::MeanRows(_) => 1.0 / xv.rows() as f64,
                        _ => 1.0,
                    };
                    let dx = slot(&mut grads, *x, xv.shape());
                    for r in 0..xv.rows() {
                        for (d, gv) in dx.row_mut(r).iter_mut().zip(g.as_slice()) {
                            *d += factor * gv;
                        }
                    }
                }
                Op::Softmax(x) => {
                    let s = out.as_slice();
                    let gs = dot(g.as_slice(), s);
                    let dx = slot(&mut grads, *x, out.shape());
                    for ((d, si), gi) in dx.as_mut_slice().iter_mut().zip(s).zip(g.as_slice()) {
                        *d += si * (gi - gs);
                    }
                }
                Op::L2Normalize(x, norm) => {
                    if *norm > 0.0 {
                        let y = out.as_slice();
                        let yg = dot(y, g.as_slice());
                        let dx = slot(&mut grads, *x, out.shape());
                        for ((d, yi), gi) in dx.as_mut_slice().iter_mut().zip(y).zip(g.as_slice()) {
                            *d += (gi - yi * yg) / norm;
                        }
                    }
                }
                Op::L2NormalizeRows(x, norms) => {
                    let dx = slot(&mut grads, *x, out.shape());
                    for (r, &norm) in norms.iter().enumerate() {
                        if norm == 0.0 {
                            continue;
                        }
                        let y = out.row(r);
                        let gr = g.row(r);
                        let yg = dot(y, gr);
                        for ((d, yi), gi) in dx.row_mut(r).iter_mut().zip(y).zip(gr) {
                            *d += (gi - yi * yg) / norm;
                        }
                    }
                }
                Op::Hinge(x) => {
                    let xv = self.value(*x);
                    let dx = slot(&mut grads, *x, xv.shape());
                    for ((d, xi), gi) in dx.as_mut_slice().iter_mut().zip(xv.as_slice()).zip(g.as_slice()) {
                        if *xi > 0.0 {
                            *d += gi;
                        }
                    }
                }
                Op::SqFrobenius(x) => {
                    let xv = self.value(*x);
                    self.accumulate(&mut grads, *x, xv, 2.0 * g.item());
                }
                Op::Square(x) => {
                    let xv = self.value(*x);
                    let dx = slot(&mut grads, *x, xv.shape());
                    for ((d, xi), gi) in dx.as_mut_slice().iter_mut().zip(xv.as_slice()).zip(g.as_slice()) {
                        *d += 2.0 * xi * gi;
                    }
                }
                Op::Sum(x) => {
                    let gs = g.item();
                    let dx = slot(&mut grads, *x, self.shape(*x));
                    dx.as_mut_slice().iter_mut().for_each(|d| *d += gs);
                }
                Op::GatherRows(x, indices) => {
                    let dx = slot(&mut grads, *x, self.shape(*x));
                    for (r, &src) in indices.iter().enumerate() {
                        for (d, gv) in dx.row_mut(src).iter_mut().zip(g.row(r)) {
                            *d += gv;
                        }
                    }
                }
            }
        }

        let leaves = leaves
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, node)| match node.op {
                Op::Param => Some(g.unwrap_or_else(|| {
                    let (r, c) = node.value.shape();
                    Tensor::zeros(r, c)
                })),
                _ => None,
            })
            .collect();
        Ok(Gradients { leaves })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], target: Var, g: &Tensor, scale: f64) {
        if !self.nodes[target.0].needs_grad {
            return;
        }
        slot(grads, target, self.shape(target)).add_scaled(g, scale);
    }
}

fn slot(grads: &mut [Option<Tensor>], v: Var, shape: (usize, usize)) -> &mut Tensor {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(shape.0, shape.1))
}

fn column_sums(x: &Tensor, factor: f64) -> Tensor {
    let mut out = vec![0.0; x.cols()];
    for r in 0..x.rows() {
        for (o, v) in out.iter_mut().zip(x.row(r)) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o *= factor);
    Tensor::vector(out)
}

/// Gradients of a scalar loss with respect to every parameter leaf of a tape.
#[derive(Debug)]
pub struct Gradients {
    leaves: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for a parameter leaf; zeros if the loss never reached it.
    ///
    /// # Panics
    /// If `v` is not a parameter leaf of the tape that produced these gradients.
    pub fn wrt(&self, v: Var) -> &Tensor {
        self.leaves
            .get(v.0)
            .and_then(Option::as_ref)
            .expect("gradient requested for a non-parameter node")
    }
}
