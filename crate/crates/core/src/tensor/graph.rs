//! Wengert tape over dense tensors.
//!
//! Operations are recorded in construction order; `backward` replays the
//! tape in reverse, accumulating gradients into every node on a path from a
//! parameter to the loss. Values are computed eagerly at construction, so a
//! node's output is always readable immediately.

use super::{Real, Tensor, TensorError};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    Add(NodeId, NodeId),
    AddN(Vec<NodeId>),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, T),
    /// gamma * a + (1 - gamma) * b
    Combine(NodeId, NodeId, T),
    /// M[r x c] . v[c] -> [r]
    MatVec(NodeId, NodeId),
    /// M[r x c]^T . v[r] -> [c]
    MatVecT(NodeId, NodeId),
    Dot(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Softmax(NodeId, Option<Vec<bool>>),
    /// Mask entries are 0 or 1/keep_prob, fixed at record time.
    Dropout(NodeId, Vec<T>),
    Concat(Vec<NodeId>),
    /// Row `i` of a matrix node.
    Pickup(NodeId, usize),
    StackRows(Vec<NodeId>),
    /// Rows of a parameter matrix selected by token id (embedding lookup).
    GatherRows(NodeId, Vec<usize>),
    /// -ln(max(p[gold], floor)) on an explicit probability vector.
    CrossEntropyProbs(NodeId, usize),
    /// Fused log-softmax cross entropy on logits.
    LogSoftmaxXent(NodeId, usize),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Floor inside the log of the probability-space cross entropy.
pub(crate) const CE_PROB_FLOOR: f64 = 1e-12;

pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    /// Gradient of the last `backward` target w.r.t. this node, if any
    /// flowed here.
    pub fn grad(&self, id: NodeId) -> Option<&[T]> {
        self.grads[id.0].as_deref()
    }

    pub fn grad_tensor(&self, id: NodeId) -> Tensor<T> {
        let shape = self.nodes[id.0].value.shape().to_vec();
        match &self.grads[id.0] {
            Some(g) => Tensor::new(shape, g.clone()).expect("grad shape"),
            None => Tensor::zeros(shape),
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.grads.push(None);
        NodeId(self.nodes.len() - 1)
    }

    fn requires(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    /// Constant leaf; no gradient is tracked through it.
    pub fn input(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// Trainable leaf; `backward` accumulates a gradient for it.
    pub fn param(&mut self, value: &Tensor<T>) -> NodeId {
        self.push(value.clone(), Op::Leaf, true)
    }

    fn check_same_shape(&self, a: NodeId, b: NodeId) -> Result<(), TensorError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(TensorError::ShapeMismatch(format!(
                "operands have shapes {:?} and {:?}",
                sa, sb
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.check_same_shape(a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let req = self.requires(&[a, b]);
        Ok(self.push(Tensor::new(shape, data)?, Op::Add(a, b), req))
    }

    pub fn add_n(&mut self, ids: &[NodeId]) -> Result<NodeId, TensorError> {
        let first = *ids.first().ok_or(TensorError::EmptySequence)?;
        for &id in &ids[1..] {
            self.check_same_shape(first, id)?;
        }
        let mut data = self.value(first).data().to_vec();
        for &id in &ids[1..] {
            for (acc, &v) in data.iter_mut().zip(self.value(id).data()) {
                *acc += v;
            }
        }
        let shape = self.value(first).shape().to_vec();
        let req = self.requires(ids);
        Ok(self.push(Tensor::new(shape, data)?, Op::AddN(ids.to_vec()), req))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.check_same_shape(a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x - y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let req = self.requires(&[a, b]);
        Ok(self.push(Tensor::new(shape, data)?, Op::Sub(a, b), req))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.check_same_shape(a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let req = self.requires(&[a, b]);
        Ok(self.push(Tensor::new(shape, data)?, Op::Mul(a, b), req))
    }

    pub fn scale(&mut self, a: NodeId, factor: T) -> NodeId {
        let data = self.value(a).data().iter().map(|&x| x * factor).collect();
        let shape = self.value(a).shape().to_vec();
        let req = self.requires(&[a]);
        self.push(
            Tensor::new(shape, data).expect("scale shape"),
            Op::Scale(a, factor),
            req,
        )
    }

    /// gamma * a + (1 - gamma) * b, elementwise.
    pub fn combine(&mut self, a: NodeId, b: NodeId, gamma: T) -> Result<NodeId, TensorError> {
        self.check_same_shape(a, b)?;
        let one_m = T::one() - gamma;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| gamma * x + one_m * y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let req = self.requires(&[a, b]);
        Ok(self.push(Tensor::new(shape, data)?, Op::Combine(a, b, gamma), req))
    }

    fn matrix_dims(&self, m: NodeId) -> Result<(usize, usize), TensorError> {
        let shape = self.value(m).shape();
        if shape.len() != 2 {
            return Err(TensorError::ShapeMismatch(format!(
                "expected a matrix, got shape {:?}",
                shape
            )));
        }
        Ok((shape[0], shape[1]))
    }

    pub fn matvec(&mut self, m: NodeId, v: NodeId) -> Result<NodeId, TensorError> {
        let (r, c) = self.matrix_dims(m)?;
        if self.value(v).shape() != [c] {
            return Err(TensorError::ShapeMismatch(format!(
                "matvec: matrix [{},{}] with vector {:?}",
                r,
                c,
                self.value(v).shape()
            )));
        }
        let md = self.value(m).data();
        let vd = self.value(v).data();
        let mut out = vec![T::zero(); r];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &md[i * c..(i + 1) * c];
            let mut acc = T::zero();
            for (x, y) in row.iter().zip(vd) {
                acc += *x * *y;
            }
            *o = acc;
        }
        let req = self.requires(&[m, v]);
        Ok(self.push(Tensor::vector(out), Op::MatVec(m, v), req))
    }

    pub fn matvec_t(&mut self, m: NodeId, v: NodeId) -> Result<NodeId, TensorError> {
        let (r, c) = self.matrix_dims(m)?;
        if self.value(v).shape() != [r] {
            return Err(TensorError::ShapeMismatch(format!(
                "matvec_t: matrix [{},{}] with vector {:?}",
                r,
                c,
                self.value(v).shape()
            )));
        }
        let md = self.value(m).data();
        let vd = self.value(v).data();
        let mut out = vec![T::zero(); c];
        for i in 0..r {
            let row = &md[i * c..(i + 1) * c];
            let w = vd[i];
            for (o, &x) in out.iter_mut().zip(row) {
                *o += w * x;
            }
        }
        let req = self.requires(&[m, v]);
        Ok(self.push(Tensor::vector(out), Op::MatVecT(m, v), req))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.check_same_shape(a, b)?;
        let mut acc = T::zero();
        for (&x, &y) in self.value(a).data().iter().zip(self.value(b).data()) {
            acc += x * y;
        }
        let req = self.requires(&[a, b]);
        Ok(self.push(Tensor::scalar(acc), Op::Dot(a, b), req))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let data = self
            .value(a)
            .data()
            .iter()
            .map(|&x| T::one() / (T::one() + (-x).exp()))
            .collect();
        let shape = self.value(a).shape().to_vec();
        let req = self.requires(&[a]);
        self.push(
            Tensor::new(shape, data).expect("sigmoid shape"),
            Op::Sigmoid(a),
            req,
        )
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let data = self.value(a).data().iter().map(|&x| x.tanh()).collect();
        let shape = self.value(a).shape().to_vec();
        let req = self.requires(&[a]);
        self.push(
            Tensor::new(shape, data).expect("tanh shape"),
            Op::Tanh(a),
            req,
        )
    }

    /// Max-subtracted softmax over a vector. Masked-out entries (mask =
    /// false) are exactly zero in the output and receive no gradient.
    pub fn softmax(&mut self, a: NodeId, mask: Option<&[bool]>) -> Result<NodeId, TensorError> {
        let xs = self.value(a).data();
        let n = xs.len();
        if let Some(m) = mask {
            if m.len() != n {
                return Err(TensorError::ShapeMismatch(format!(
                    "mask length {} for input of length {}",
                    m.len(),
                    n
                )));
            }
        }
        let live = |i: usize| mask.map_or(true, |m| m[i]);
        let mut max = T::neg_infinity();
        for (i, &x) in xs.iter().enumerate() {
            if live(i) && x > max {
                max = x;
            }
        }
        if max == T::neg_infinity() {
            return Err(TensorError::AllMasked);
        }
        let mut out = vec![T::zero(); n];
        let mut sum = T::zero();
        for (i, &x) in xs.iter().enumerate() {
            if live(i) {
                let e = (x - max).exp();
                out[i] = e;
                sum += e;
            }
        }
        for o in out.iter_mut() {
            *o /= sum;
        }
        let req = self.requires(&[a]);
        Ok(self.push(
            Tensor::vector(out),
            Op::Softmax(a, mask.map(|m| m.to_vec())),
            req,
        ))
    }

    /// Inverted dropout. In training mode each entry is dropped with
    /// probability 1-keep_prob and survivors are scaled by 1/keep_prob; in
    /// evaluation mode (or keep_prob == 1) this is the identity.
    pub fn dropout<R: rand::Rng>(
        &mut self,
        a: NodeId,
        keep_prob: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<NodeId, TensorError> {
        if !(keep_prob > 0.0 && keep_prob <= 1.0) {
            return Err(TensorError::InvalidArgument(format!(
                "keep_prob must be in (0, 1], got {keep_prob}"
            )));
        }
        if !training || keep_prob == 1.0 {
            return Ok(a);
        }
        let inv = T::from_f64_lossy(1.0 / keep_prob);
        let mask: Vec<T> = (0..self.value(a).numel())
            .map(|_| {
                if rng.random::<f64>() < keep_prob {
                    inv
                } else {
                    T::zero()
                }
            })
            .collect();
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(&mask)
            .map(|(&x, &m)| x * m)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let req = self.requires(&[a]);
        Ok(self.push(Tensor::new(shape, data)?, Op::Dropout(a, mask), req))
    }

    /// Concatenate vectors (or scalars) into one vector.
    pub fn concat(&mut self, ids: &[NodeId]) -> Result<NodeId, TensorError> {
        if ids.is_empty() {
            return Err(TensorError::EmptySequence);
        }
        let mut data = Vec::new();
        for &id in ids {
            data.extend_from_slice(self.value(id).data());
        }
        let req = self.requires(ids);
        Ok(self.push(Tensor::vector(data), Op::Concat(ids.to_vec()), req))
    }

    pub fn concat2(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.concat(&[a, b])
    }

    /// Row `row` of a matrix node, as a vector.
    pub fn pickup(&mut self, m: NodeId, row: usize) -> Result<NodeId, TensorError> {
        let (r, c) = self.matrix_dims(m)?;
        if row >= r {
            return Err(TensorError::IndexOutOfRange { index: row, size: r });
        }
        let data = self.value(m).data()[row * c..(row + 1) * c].to_vec();
        let req = self.requires(&[m]);
        Ok(self.push(Tensor::vector(data), Op::Pickup(m, row), req))
    }

    /// Stack equal-length vectors into a matrix, one per row.
    pub fn stack_rows(&mut self, ids: &[NodeId]) -> Result<NodeId, TensorError> {
        let first = *ids.first().ok_or(TensorError::EmptySequence)?;
        let c = self.value(first).numel();
        let mut data = Vec::with_capacity(ids.len() * c);
        for &id in ids {
            if self.value(id).numel() != c {
                return Err(TensorError::ShapeMismatch(
                    "stack_rows over vectors of unequal length".into(),
                ));
            }
            data.extend_from_slice(self.value(id).data());
        }
        let req = self.requires(ids);
        Ok(self.push(
            Tensor::matrix(ids.len(), c, data)?,
            Op::StackRows(ids.to_vec()),
            req,
        ))
    }

    /// Embedding lookup: rows of `table` selected by id, stacked into a
    /// matrix. The backward pass scatter-adds into the selected rows.
    pub fn gather_rows(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId, TensorError> {
        let (r, c) = self.matrix_dims(table)?;
        let mut data = Vec::with_capacity(ids.len() * c);
        for &id in ids {
            if id >= r {
                return Err(TensorError::IndexOutOfRange { index: id, size: r });
            }
            data.extend_from_slice(&self.value(table).data()[id * c..(id + 1) * c]);
        }
        let req = self.requires(&[table]);
        Ok(self.push(
            Tensor::matrix(ids.len(), c, data)?,
            Op::GatherRows(table, ids.to_vec()),
            req,
        ))
    }

    /// -ln(max(probs[gold], 1e-12)) over an explicit probability vector.
    pub fn cross_entropy_probs(
        &mut self,
        probs: NodeId,
        gold: usize,
    ) -> Result<NodeId, TensorError> {
        let p = self.value(probs);
        if gold >= p.numel() {
            return Err(TensorError::IndexOutOfRange {
                index: gold,
                size: p.numel(),
            });
        }
        let floor = T::from_f64_lossy(CE_PROB_FLOOR);
        let v = -(p.data()[gold].max(floor)).ln();
        let req = self.requires(&[probs]);
        Ok(self.push(
            Tensor::scalar(v),
            Op::CrossEntropyProbs(probs, gold),
            req,
        ))
    }

    /// Fused log-softmax cross entropy on logits: logsumexp(x) - x[gold].
    pub fn log_softmax_xent(&mut self, logits: NodeId, gold: usize) -> Result<NodeId, TensorError> {
        let x = self.value(logits);
        if gold >= x.numel() {
            return Err(TensorError::IndexOutOfRange {
                index: gold,
                size: x.numel(),
            });
        }
        let xs = x.data();
        let max = xs.iter().cloned().fold(T::neg_infinity(), T::max);
        let lse = max + xs.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        let v = lse - xs[gold];
        let req = self.requires(&[logits]);
        Ok(self.push(Tensor::scalar(v), Op::LogSoftmaxXent(logits, gold), req))
    }

    /// Reverse pass from a scalar node. Clears previous gradients.
    pub fn backward(&mut self, loss: NodeId) -> Result<(), TensorError> {
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(TensorError::ShapeMismatch(
                "backward target must be a scalar".into(),
            ));
        }
        for g in self.grads.iter_mut() {
            *g = None;
        }
        self.grads[loss.0] = Some(vec![T::one()]);

        for i in (0..self.nodes.len()).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g_out) = std::mem::take(&mut self.grads[i]) else {
                continue;
            };
            self.propagate(i, &g_out);
            self.grads[i] = Some(g_out);
        }
        Ok(())
    }

    fn accumulate(&mut self, id: NodeId, delta: &[T]) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        let n = self.nodes[id.0].value.numel();
        let slot = self.grads[id.0].get_or_insert_with(|| vec![T::zero(); n]);
        for (s, d) in slot.iter_mut().zip(delta) {
            *s += *d;
        }
    }

    fn propagate(&mut self, i: usize, g_out: &[T]) {
        // Shapes were validated at construction; backward trusts them.
        macro_rules! val {
            ($id:expr) => {
                self.nodes[$id.0].value.data()
            };
        }
        let mut steps: Vec<(NodeId, Vec<T>)> = Vec::new();

        match &self.nodes[i].op {
            Op::Leaf => return,
            Op::Add(a, b) => {
                steps.push((*a, g_out.to_vec()));
                steps.push((*b, g_out.to_vec()));
            }
            Op::AddN(ids) => {
                for &id in ids {
                    steps.push((id, g_out.to_vec()));
                }
            }
            Op::Sub(a, b) => {
                steps.push((*a, g_out.to_vec()));
                steps.push((*b, g_out.iter().map(|&g| -g).collect()));
            }
            Op::Mul(a, b) => {
                let ga = g_out
                    .iter()
                    .zip(val!(b))
                    .map(|(&g, &y)| g * y)
                    .collect::<Vec<_>>();
                let gb = g_out
                    .iter()
                    .zip(val!(a))
                    .map(|(&g, &x)| g * x)
                    .collect::<Vec<_>>();
                steps.push((*a, ga));
                steps.push((*b, gb));
            }
            Op::Scale(a, f) => {
                let f = *f;
                steps.push((*a, g_out.iter().map(|&g| g * f).collect()));
            }
            Op::Combine(a, b, gamma) => {
                let (ga, gb) = (*gamma, T::one() - *gamma);
                steps.push((*a, g_out.iter().map(|&g| g * ga).collect()));
                steps.push((*b, g_out.iter().map(|&g| g * gb).collect()));
            }
            Op::MatVec(m, v) => {
                let c = val!(v).len();
                let vd = val!(v);
                let md = val!(m);
                // dM = g ⊗ v ; dv = M^T g
                let mut gm = vec![T::zero(); md.len()];
                let mut gv = vec![T::zero(); c];
                for (r, &g) in g_out.iter().enumerate() {
                    for j in 0..c {
                        gm[r * c + j] = g * vd[j];
                        gv[j] += md[r * c + j] * g;
                    }
                }
                steps.push((*m, gm));
                steps.push((*v, gv));
            }
            Op::MatVecT(m, v) => {
                let r = val!(v).len();
                let md = val!(m);
                let vd = val!(v);
                let c = g_out.len();
                // y = M^T v : dM = v ⊗ g ; dv = M g
                let mut gm = vec![T::zero(); md.len()];
                let mut gv = vec![T::zero(); r];
                for i_row in 0..r {
                    let w = vd[i_row];
                    let mut acc = T::zero();
                    for j in 0..c {
                        gm[i_row * c + j] = w * g_out[j];
                        acc += md[i_row * c + j] * g_out[j];
                    }
                    gv[i_row] = acc;
                }
                steps.push((*m, gm));
                steps.push((*v, gv));
            }
            Op::Dot(a, b) => {
                let g = g_out[0];
                steps.push((*a, val!(b).iter().map(|&y| g * y).collect()));
                steps.push((*b, val!(a).iter().map(|&x| g * x).collect()));
            }
            Op::Sigmoid(a) => {
                let y = self.nodes[i].value.data();
                let ga = g_out
                    .iter()
                    .zip(y)
                    .map(|(&g, &s)| g * s * (T::one() - s))
                    .collect();
                steps.push((*a, ga));
            }
            Op::Tanh(a) => {
                let y = self.nodes[i].value.data();
                let ga = g_out
                    .iter()
                    .zip(y)
                    .map(|(&g, &t)| g * (T::one() - t * t))
                    .collect();
                steps.push((*a, ga));
            }
            Op::Softmax(a, _mask) => {
                // dx = y ⊙ (g - (g · y)); masked entries have y = 0.
                let y = self.nodes[i].value.data();
                let dot: T = g_out.iter().zip(y).map(|(&g, &p)| g * p).sum();
                let ga = g_out
                    .iter()
                    .zip(y)
                    .map(|(&g, &p)| p * (g - dot))
                    .collect();
                steps.push((*a, ga));
            }
            Op::Dropout(a, mask) => {
                let ga = g_out.iter().zip(mask).map(|(&g, &m)| g * m).collect();
                steps.push((*a, ga));
            }
            Op::Concat(ids) => {
                let mut off = 0;
                for &id in ids {
                    let n = self.nodes[id.0].value.numel();
                    steps.push((id, g_out[off..off + n].to_vec()));
                    off += n;
                }
            }
            Op::Pickup(m, row) => {
                let c = g_out.len();
                let md_len = val!(m).len();
                let mut gm = vec![T::zero(); md_len];
                gm[row * c..(row + 1) * c].copy_from_slice(g_out);
                steps.push((*m, gm));
            }
            Op::StackRows(ids) => {
                let c = self.nodes[ids[0].0].value.numel();
                for (r, &id) in ids.iter().enumerate() {
                    steps.push((id, g_out[r * c..(r + 1) * c].to_vec()));
                }
            }
            Op::GatherRows(table, ids) => {
                let c = g_out.len() / ids.len().max(1);
                let n = val!(table).len();
                let mut gt = vec![T::zero(); n];
                for (r, &id) in ids.iter().enumerate() {
                    for j in 0..c {
                        gt[id * c + j] += g_out[r * c + j];
                    }
                }
                steps.push((*table, gt));
            }
            Op::CrossEntropyProbs(probs, gold) => {
                let p = val!(probs);
                let floor = T::from_f64_lossy(CE_PROB_FLOOR);
                let mut gp = vec![T::zero(); p.len()];
                if p[*gold] > floor {
                    gp[*gold] = -g_out[0] / p[*gold];
                }
                steps.push((*probs, gp));
            }
            Op::LogSoftmaxXent(logits, gold) => {
                let xs = val!(logits);
                let max = xs.iter().cloned().fold(T::neg_infinity(), T::max);
                let sum: T = xs.iter().map(|&v| (v - max).exp()).sum();
                let g = g_out[0];
                let mut gx: Vec<T> = xs.iter().map(|&v| g * (v - max).exp() / sum).collect();
                gx[*gold] -= g;
                steps.push((*logits, gx));
            }
        }

        for (id, delta) in steps {
            self.accumulate(id, &delta);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Central finite differences against the analytic gradient for a graph
    /// built by `build` from leaf parameter tensors. The builder must return
    /// a scalar loss node (last returned id) and register params in order.
    fn fd_check(
        build: &dyn Fn(&mut Graph<f64>, &[NodeId]) -> NodeId,
        inputs: &[Tensor<f64>],
        tol: f64,
    ) {
        let eval = |tensors: &[Tensor<f64>]| -> f64 {
            let mut g = Graph::new();
            let ids: Vec<NodeId> = tensors.iter().map(|t| g.param(t)).collect();
            let loss = build(&mut g, &ids);
            g.value(loss).item()
        };

        let mut g = Graph::new();
        let ids: Vec<NodeId> = inputs.iter().map(|t| g.param(t)).collect();
        let loss = build(&mut g, &ids);
        g.backward(loss).unwrap();

        let h = 1e-5;
        for (pi, t) in inputs.iter().enumerate() {
            let analytic = g.grad_tensor(ids[pi]);
            for k in 0..t.numel() {
                let mut plus = inputs.to_vec();
                plus[pi].data_mut()[k] += h;
                let mut minus = inputs.to_vec();
                minus[pi].data_mut()[k] -= h;
                let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let a = analytic.data()[k];
                let denom = a.abs().max(numeric.abs()).max(1e-6);
                let rel = (a - numeric).abs() / denom;
                assert!(
                    rel < tol,
                    "param {pi} elem {k}: analytic {a} vs numeric {numeric} (rel {rel})"
                );
            }
        }
    }

    fn rng_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor<f64> {
        use rand::Rng;
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn softmax_uniform_and_hand_value() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::vector(vec![1.0, 1.0, 1.0]));
        let y = g.softmax(x, None).unwrap();
        for &p in g.value(y).data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        // softmax([0, ln 2]) = [1/3, 2/3]
        let x2 = g.input(Tensor::vector(vec![0.0, 2.0f64.ln()]));
        let y2 = g.softmax(x2, None).unwrap();
        assert!((g.value(y2).data()[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((g.value(y2).data()[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariance() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::vector(vec![0.3, -1.2, 2.0, 0.0]));
        let y = g.softmax(x, None).unwrap();
        let shifted = g.input(Tensor::vector(vec![0.3 + 7.5, -1.2 + 7.5, 2.0 + 7.5, 7.5]));
        let ys = g.softmax(shifted, None).unwrap();
        for (a, b) in g.value(y).data().iter().zip(g.value(ys).data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_mask_zeroes_entries_and_renormalizes() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::vector(vec![5.0, 1.0, 1.0]));
        let y = g.softmax(x, Some(&[false, true, true])).unwrap();
        let p = g.value(y).data();
        assert_eq!(p[0], 0.0);
        assert!((p[1] - 0.5).abs() < 1e-12);
        assert!((p[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn softmax_all_masked_is_domain_error() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(
            g.softmax(x, Some(&[false, false])),
            Err(TensorError::AllMasked)
        ));
    }

    #[test]
    fn cross_entropy_values() {
        let mut g = Graph::<f64>::new();
        let p = g.input(Tensor::vector(vec![1.0, 0.0, 0.0]));
        let l = g.cross_entropy_probs(p, 0).unwrap();
        assert_eq!(g.value(l).item(), 0.0);

        let uniform = g.input(Tensor::vector(vec![0.1; 10]));
        let l10 = g.cross_entropy_probs(uniform, 7).unwrap();
        assert!((g.value(l10).item() - 10.0f64.ln()).abs() < 1e-12);
        assert!(g.value(l10).item() >= 0.0);

        assert!(g.cross_entropy_probs(p, 3).is_err());
    }

    #[test]
    fn fused_xent_matches_softmax_then_ce() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::vector(vec![0.2, -0.4, 1.5, 0.0]));
        let p = g.softmax(x, None).unwrap();
        let a = g.cross_entropy_probs(p, 2).unwrap();
        let b = g.log_softmax_xent(x, 2).unwrap();
        assert!((g.value(a).item() - g.value(b).item()).abs() < 1e-12);
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut g = Graph::<f64>::new();
        let x = g.param(&Tensor::vector(vec![1.0, 2.0, 3.0]));
        let same = g.dropout(x, 1.0, true, &mut rng).unwrap();
        assert_eq!(same, x);
        let eval = g.dropout(x, 0.5, false, &mut rng).unwrap();
        assert_eq!(eval, x);
        assert!(g.dropout(x, 0.0, true, &mut rng).is_err());
    }

    #[test]
    fn dropout_kept_fraction_within_three_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let keep = 0.8;
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::vector(vec![1.0; n]));
        let y = g.dropout(x, keep, true, &mut rng).unwrap();
        let kept = g.value(y).data().iter().filter(|&&v| v != 0.0).count();
        let sigma = (n as f64 * keep * (1.0 - keep)).sqrt();
        assert!(
            (kept as f64 - n as f64 * keep).abs() < 3.0 * sigma,
            "kept {kept} of {n}"
        );
        // Survivors are scaled by 1/keep.
        let nonzero = g.value(y).data().iter().find(|&&v| v != 0.0).unwrap();
        assert!((nonzero - 1.0 / keep).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences_per_op() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let tol = 1e-4;

        // add / sub / mul / scale / combine chained to a dot-based scalar.
        let a = rng_tensor(&mut rng, vec![5]);
        let b = rng_tensor(&mut rng, vec![5]);
        let c = rng_tensor(&mut rng, vec![5]);
        fd_check(
            &|g, ids| {
                let s = g.add(ids[0], ids[1]).unwrap();
                let d = g.sub(s, ids[2]).unwrap();
                let m = g.mul(d, ids[0]).unwrap();
                let sc = g.scale(m, 0.7);
                let cb = g.combine(sc, ids[1], 0.3).unwrap();
                g.dot(cb, ids[2]).unwrap()
            },
            &[a, b, c],
            tol,
        );

        // matvec and matvec_t.
        let m = rng_tensor(&mut rng, vec![3, 4]);
        let v = rng_tensor(&mut rng, vec![4]);
        let u = rng_tensor(&mut rng, vec![3]);
        fd_check(
            &|g, ids| {
                let y = g.matvec(ids[0], ids[1]).unwrap();
                g.dot(y, ids[2]).unwrap()
            },
            &[m.clone(), v.clone(), u.clone()],
            tol,
        );
        fd_check(
            &|g, ids| {
                let y = g.matvec_t(ids[0], ids[2]).unwrap();
                g.dot(y, ids[1]).unwrap()
            },
            &[m, v, u],
            tol,
        );

        // sigmoid / tanh / softmax.
        let x = rng_tensor(&mut rng, vec![6]);
        let w = rng_tensor(&mut rng, vec![6]);
        fd_check(
            &|g, ids| {
                let s = g.sigmoid(ids[0]);
                let t = g.tanh(s);
                let p = g.softmax(t, None).unwrap();
                g.dot(p, ids[1]).unwrap()
            },
            &[x.clone(), w.clone()],
            tol,
        );

        // masked softmax.
        fd_check(
            &|g, ids| {
                let p = g
                    .softmax(ids[0], Some(&[true, false, true, true, false, true]))
                    .unwrap();
                g.dot(p, ids[1]).unwrap()
            },
            &[x, w],
            tol,
        );

        // concat / pickup / stack_rows / gather_rows.
        let table = rng_tensor(&mut rng, vec![4, 3]);
        let probe = rng_tensor(&mut rng, vec![6]);
        fd_check(
            &|g, ids| {
                let rows = g.gather_rows(ids[0], &[2, 0, 2]).unwrap();
                let r0 = g.pickup(rows, 0).unwrap();
                let r2 = g.pickup(rows, 2).unwrap();
                let cat = g.concat2(r0, r2).unwrap();
                g.dot(cat, ids[1]).unwrap()
            },
            &[table.clone(), probe.clone()],
            tol,
        );
        fd_check(
            &|g, ids| {
                let r0 = g.pickup(ids[0], 0).unwrap();
                let r1 = g.pickup(ids[0], 1).unwrap();
                let stacked = g.stack_rows(&[r1, r0]).unwrap();
                let back = g.pickup(stacked, 1).unwrap();
                let three = g.concat2(back, back).unwrap();
                let six = g.dot(three, three).unwrap();
                let _ = ids;
                six
            },
            &[table],
            tol,
        );
        let _ = probe;

        // cross entropy, both routes.
        let logits = rng_tensor(&mut rng, vec![7]);
        fd_check(
            &|g, ids| {
                let p = g.softmax(ids[0], None).unwrap();
                g.cross_entropy_probs(p, 3).unwrap()
            },
            &[logits.clone()],
            tol,
        );
        fd_check(
            &|g, ids| g.log_softmax_xent(ids[0], 3).unwrap(),
            &[logits],
            tol,
        );

        // add_n fan-in.
        let p1 = rng_tensor(&mut rng, vec![4]);
        let p2 = rng_tensor(&mut rng, vec![4]);
        fd_check(
            &|g, ids| {
                let s = g.add_n(&[ids[0], ids[1], ids[0]]).unwrap();
                g.dot(s, s).unwrap()
            },
            &[p1, p2],
            tol,
        );
    }

    #[test]
    fn pickup_gradient_flows_only_into_selected_row() {
        let mut g = Graph::<f64>::new();
        let m = g.param(&Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let row = g.pickup(m, 1).unwrap();
        let loss = g.dot(row, row).unwrap();
        g.backward(loss).unwrap();
        let grad = g.grad_tensor(m);
        assert_eq!(grad.data()[0..2], [0.0, 0.0]);
        assert_eq!(grad.data()[4..6], [0.0, 0.0]);
        assert_eq!(grad.data()[2..4], [6.0, 8.0]);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut g = Graph::<f64>::new();
        let x = g.param(&Tensor::vector(vec![1.0, 2.0]));
        assert!(g.backward(x).is_err());
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let mut g = Graph::<f64>::new();
        let a = g.input(Tensor::vector(vec![1.0, 2.0]));
        let b = g.input(Tensor::vector(vec![1.0, 2.0, 3.0]));
        assert!(g.add(a, b).is_err());
        assert!(g.dot(a, b).is_err());
        let m = g.input(Tensor::matrix(2, 2, vec![1.0; 4]).unwrap());
        assert!(g.matvec(m, b).is_err());
        assert!(g.pickup(m, 2).is_err());
    }
}
