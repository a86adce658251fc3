//! GRU cell and bidirectional encoder built on the tape.
//!
//! Gate convention: z = sigmoid(Wz x + Uz h + bz), r = sigmoid(Wr x + Ur h + br),
//! cand = tanh(Wh x + Uh (r * h) + bh), h' = (1 - z) * h + z * cand.

use super::{Graph, NodeId, Real, Tensor, TensorError};
use rand::Rng;

/// One direction's gate parameters. Input-to-hidden matrices are
/// [hidden x input], hidden-to-hidden are [hidden x hidden].
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams<T> {
    pub w_z: Tensor<T>,
    pub u_z: Tensor<T>,
    pub b_z: Tensor<T>,
    pub w_r: Tensor<T>,
    pub u_r: Tensor<T>,
    pub b_r: Tensor<T>,
    pub w_h: Tensor<T>,
    pub u_h: Tensor<T>,
    pub b_h: Tensor<T>,
}

impl<T: Real> GruParams<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Tensor::zeros(vec![hidden, input]);
        let u = || Tensor::zeros(vec![hidden, hidden]);
        let b = || Tensor::zeros(vec![hidden]);
        GruParams {
            w_z: w(),
            u_z: u(),
            b_z: b(),
            w_r: w(),
            u_r: u(),
            b_r: b(),
            w_h: w(),
            u_h: u(),
            b_h: b(),
        }
    }

    /// Glorot-uniform gate matrices, zero biases. Sampling happens in f64 so
    /// f32 and f64 instantiations draw the same stream.
    pub fn glorot<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut mat = |rows: usize, cols: usize| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let data = (0..rows * cols)
                .map(|_| T::from_f64_lossy(rng.random_range(-limit..limit)))
                .collect();
            Tensor::new(vec![rows, cols], data).expect("glorot shape")
        };
        let w_z = mat(hidden, input);
        let u_z = mat(hidden, hidden);
        let w_r = mat(hidden, input);
        let u_r = mat(hidden, hidden);
        let w_h = mat(hidden, input);
        let u_h = mat(hidden, hidden);
        GruParams {
            w_z,
            u_z,
            b_z: Tensor::zeros(vec![hidden]),
            w_r,
            u_r,
            b_r: Tensor::zeros(vec![hidden]),
            w_h,
            u_h,
            b_h: Tensor::zeros(vec![hidden]),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.b_z.numel()
    }

    pub fn input_size(&self) -> usize {
        self.w_z.shape()[1]
    }

    pub fn named_tensors(&self) -> Vec<(&'static str, &Tensor<T>)> {
        vec![
            ("w_z", &self.w_z),
            ("u_z", &self.u_z),
            ("b_z", &self.b_z),
            ("w_r", &self.w_r),
            ("u_r", &self.u_r),
            ("b_r", &self.b_r),
            ("w_h", &self.w_h),
            ("u_h", &self.u_h),
            ("b_h", &self.b_h),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_h,
            &mut self.u_h,
            &mut self.b_h,
        ]
    }
}

/// Graph handles for one direction's registered parameters.
#[derive(Debug, Clone, Copy)]
pub struct GruParamIds {
    pub w_z: NodeId,
    pub u_z: NodeId,
    pub b_z: NodeId,
    pub w_r: NodeId,
    pub u_r: NodeId,
    pub b_r: NodeId,
    pub w_h: NodeId,
    pub u_h: NodeId,
    pub b_h: NodeId,
}

impl GruParamIds {
    pub fn register<T: Real>(g: &mut Graph<T>, p: &GruParams<T>) -> Self {
        GruParamIds {
            w_z: g.param(&p.w_z),
            u_z: g.param(&p.u_z),
            b_z: g.param(&p.b_z),
            w_r: g.param(&p.w_r),
            u_r: g.param(&p.u_r),
            b_r: g.param(&p.b_r),
            w_h: g.param(&p.w_h),
            u_h: g.param(&p.u_h),
            b_h: g.param(&p.b_h),
        }
    }
}

/// Forward and backward directions of a bidirectional encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct BiGruParams<T> {
    pub fwd: GruParams<T>,
    pub bwd: GruParams<T>,
}

impl<T: Real> BiGruParams<T> {
    pub fn glorot<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        BiGruParams {
            fwd: GruParams::glorot(input, hidden, rng),
            bwd: GruParams::glorot(input, hidden, rng),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        BiGruParams {
            fwd: GruParams::zeros(input, hidden),
            bwd: GruParams::zeros(input, hidden),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.fwd.hidden_size()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BiGruParamIds {
    pub fwd: GruParamIds,
    pub bwd: GruParamIds,
}

impl BiGruParamIds {
    pub fn register<T: Real>(g: &mut Graph<T>, p: &BiGruParams<T>) -> Self {
        BiGruParamIds {
            fwd: GruParamIds::register(g, &p.fwd),
            bwd: GruParamIds::register(g, &p.bwd),
        }
    }
}

/// One GRU step. `x` is an input-width vector, `h_prev` a hidden-width one.
pub fn gru_cell<T: Real>(
    g: &mut Graph<T>,
    p: &GruParamIds,
    x: NodeId,
    h_prev: NodeId,
) -> Result<NodeId, TensorError> {
    let zx = g.matvec(p.w_z, x)?;
    let zh = g.matvec(p.u_z, h_prev)?;
    let zs = g.add(zx, zh)?;
    let zb = g.add(zs, p.b_z)?;
    let z = g.sigmoid(zb);

    let rx = g.matvec(p.w_r, x)?;
    let rh = g.matvec(p.u_r, h_prev)?;
    let rs = g.add(rx, rh)?;
    let rb = g.add(rs, p.b_r)?;
    let r = g.sigmoid(rb);

    let gated = g.mul(r, h_prev)?;
    let cx = g.matvec(p.w_h, x)?;
    let ch = g.matvec(p.u_h, gated)?;
    let cs = g.add(cx, ch)?;
    let cb = g.add(cs, p.b_h)?;
    let cand = g.tanh(cb);

    // (1 - z) * h + z * cand, written as h + z * (cand - h).
    let diff = g.sub(cand, h_prev)?;
    let step = g.mul(z, diff)?;
    g.add(h_prev, step)
}

/// Output of a bidirectional pass over a token sequence.
pub struct BiGruOutput {
    /// Per-step [forward state ; backward state], each 2h wide.
    pub steps: Vec<NodeId>,
    /// Forward state after the last token.
    pub final_fwd: NodeId,
    /// Backward state after the first token (i.e. having read the whole
    /// sequence right-to-left).
    pub final_bwd: NodeId,
}

/// Run both directions over `xs`, concatenating per-step states.
pub fn bigru<T: Real>(
    g: &mut Graph<T>,
    p: &BiGruParamIds,
    xs: &[NodeId],
    init_fwd: NodeId,
    init_bwd: NodeId,
) -> Result<BiGruOutput, TensorError> {
    if xs.is_empty() {
        return Err(TensorError::EmptySequence);
    }
    let n = xs.len();
    let mut fwd_states = Vec::with_capacity(n);
    let mut h = init_fwd;
    for &x in xs {
        h = gru_cell(g, &p.fwd, x, h)?;
        fwd_states.push(h);
    }
    let mut bwd_states = vec![init_bwd; n];
    let mut hb = init_bwd;
    for t in (0..n).rev() {
        hb = gru_cell(g, &p.bwd, xs[t], hb)?;
        bwd_states[t] = hb;
    }
    let mut steps = Vec::with_capacity(n);
    for t in 0..n {
        steps.push(g.concat2(fwd_states[t], bwd_states[t])?);
    }
    Ok(BiGruOutput {
        steps,
        final_fwd: fwd_states[n - 1],
        final_bwd: bwd_states[0],
    })
}
