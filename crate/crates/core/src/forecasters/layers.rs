//! Building blocks with explicit forward traces and backward passes.

use rand::Rng;

use crate::numerics::{Matrix, ParamSet};

/// Affine map `y = x·W + b` with `W: in×out`, applied row-wise.
#[derive(Debug, Clone)]
pub(crate) struct Dense {
    w: usize,
    b: usize,
}

impl Dense {
    pub(crate) fn register<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w = params.push(
            format!("{name}.weight"),
            Matrix::uniform(fan_in, fan_out, bound, rng),
        );
        let b = params.push(
            format!("{name}.bias"),
            Matrix::uniform(1, fan_out, bound, rng),
        );
        Self { w, b }
    }

    pub(crate) fn weight_slot(&self) -> usize {
        self.w
    }

    pub(crate) fn bias_slot(&self) -> usize {
        self.b
    }

    pub(crate) fn forward(&self, p: &ParamSet, x: &Matrix) -> Matrix {
        let mut y = x.matmul(p.get(self.w)).expect("dense input width");
        y.add_row_broadcast(p.get(self.b).data());
        y
    }

    /// Accumulates parameter gradients into `g`; returns `dL/dx` when asked.
    pub(crate) fn backward(
        &self,
        p: &ParamSet,
        x: &Matrix,
        dy: &Matrix,
        g: &mut ParamSet,
        need_input_grad: bool,
    ) -> Option<Matrix> {
        let dw = x.t_matmul(dy).expect("dense backward shapes");
        g.get_mut(self.w).add_assign(&dw).expect("dense weight grad");
        let db = dy.col_sums();
        for (acc, v) in g.get_mut(self.b).data_mut().iter_mut().zip(db) {
            *acc += v;
        }
        need_input_grad.then(|| dy.matmul_t(p.get(self.w)).expect("dense input grad"))
    }
}

pub(crate) fn tanh(z: Matrix) -> Matrix {
    let mut a = z;
    for v in a.data_mut() {
        *v = v.tanh();
    }
    a
}

/// `dL/dz` from `dL/da` and the activation `a = tanh(z)`.
pub(crate) fn tanh_backward(a: &Matrix, da: &Matrix) -> Matrix {
    a.zip_map(da, |a, d| d * (1.0 - a * a))
        .expect("tanh backward shapes")
}

/// Stack of `Dense → tanh` layers.
#[derive(Debug, Clone)]
pub(crate) struct MlpEncoder {
    layers: Vec<Dense>,
}

pub(crate) struct MlpTrace {
    /// Output of every layer, post-activation.
    acts: Vec<Matrix>,
}

impl MlpTrace {
    pub(crate) fn output(&self) -> &Matrix {
        self.acts.last().expect("at least one layer")
    }
}

impl MlpEncoder {
    pub(crate) fn register<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        input: usize,
        width: usize,
        depth: usize,
        rng: &mut R,
    ) -> Self {
        let layers = (0..depth)
            .map(|l| {
                let fan_in = if l == 0 { input } else { width };
                Dense::register(params, &format!("{name}.{l}"), fan_in, width, rng)
            })
            .collect();
        Self { layers }
    }

    pub(crate) fn forward(&self, p: &ParamSet, x: &Matrix) -> MlpTrace {
        let mut acts: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = acts.last().unwrap_or(x);
            acts.push(tanh(layer.forward(p, input)));
        }
        MlpTrace { acts }
    }

    pub(crate) fn backward(
        &self,
        p: &ParamSet,
        x: &Matrix,
        trace: &MlpTrace,
        d_out: Matrix,
        g: &mut ParamSet,
    ) {
        let mut d_act = d_out;
        for l in (0..self.layers.len()).rev() {
            let dz = tanh_backward(&trace.acts[l], &d_act);
            let input = if l == 0 { x } else { &trace.acts[l - 1] };
            match self.layers[l].backward(p, input, &dz, g, l > 0) {
                Some(d_in) => d_act = d_in,
                None => break,
            }
        }
    }
}

/// Causal dilated 1-D convolution over time, rows = time steps, cols = channels.
///
/// Input rows are grouped into independent sequences of `seq_len` steps;
/// taps never reach across a sequence boundary and positions before the
/// start of a sequence read as zero.
#[derive(Debug, Clone)]
pub(crate) struct CausalConv {
    w: usize,
    b: usize,
    c_in: usize,
    kernel: usize,
    dilation: usize,
}

impl CausalConv {
    pub(crate) fn register<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        dilation: usize,
        rng: &mut R,
    ) -> Self {
        let fan_in = c_in * kernel;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w = params.push(
            format!("{name}.weight"),
            Matrix::uniform(fan_in, c_out, bound, rng),
        );
        let b = params.push(
            format!("{name}.bias"),
            Matrix::uniform(1, c_out, bound, rng),
        );
        Self {
            w,
            b,
            c_in,
            kernel,
            dilation,
        }
    }

    /// Column `k·c_in + c` of row `t` holds channel `c` at time `t − k·dilation`.
    fn im2col(&self, x: &Matrix, seq_len: usize) -> Matrix {
        let rows = x.rows();
        let mut cols = Matrix::zeros(rows, self.kernel * self.c_in);
        for r in 0..rows {
            let t = r % seq_len;
            for k in 0..self.kernel {
                let lag = k * self.dilation;
                if lag > t {
                    break;
                }
                let src = x.row(r - lag);
                cols.row_mut(r)[k * self.c_in..(k + 1) * self.c_in].copy_from_slice(src);
            }
        }
        cols
    }

    fn col2im(&self, d_cols: &Matrix, seq_len: usize) -> Matrix {
        let rows = d_cols.rows();
        let mut dx = Matrix::zeros(rows, self.c_in);
        for r in 0..rows {
            let t = r % seq_len;
            for k in 0..self.kernel {
                let lag = k * self.dilation;
                if lag > t {
                    break;
                }
                let src = &d_cols.row(r)[k * self.c_in..(k + 1) * self.c_in];
                for (d, s) in dx.row_mut(r - lag).iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ConvEncoder {
    layers: Vec<CausalConv>,
}

pub(crate) struct ConvTrace {
    cols: Vec<Matrix>,
    acts: Vec<Matrix>,
    seq_len: usize,
}

impl ConvTrace {
    /// Feature at the final step of every sequence, one row per sequence.
    pub(crate) fn last_steps(&self) -> Matrix {
        let out = self.acts.last().expect("at least one layer");
        let n_seq = out.rows() / self.seq_len;
        let mut z = Matrix::zeros(n_seq, out.cols());
        for s in 0..n_seq {
            z.row_mut(s)
                .copy_from_slice(out.row(s * self.seq_len + self.seq_len - 1));
        }
        z
    }
}

impl ConvEncoder {
    /// Layer `l` uses dilation `2^l`.
    pub(crate) fn register<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        c_in: usize,
        width: usize,
        depth: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Self {
        let layers = (0..depth)
            .map(|l| {
                let c = if l == 0 { c_in } else { width };
                CausalConv::register(params, &format!("{name}.{l}"), c, width, kernel, 1 << l, rng)
            })
            .collect();
        Self { layers }
    }

    pub(crate) fn forward(&self, p: &ParamSet, x: &Matrix, seq_len: usize) -> ConvTrace {
        let mut cols = Vec::with_capacity(self.layers.len());
        let mut acts: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = acts.last().unwrap_or(x);
            let c = layer.im2col(input, seq_len);
            let mut z = c.matmul(p.get(layer.w)).expect("conv width");
            z.add_row_broadcast(p.get(layer.b).data());
            cols.push(c);
            acts.push(tanh(z));
        }
        ConvTrace {
            cols,
            acts,
            seq_len,
        }
    }

    /// Backward from a gradient on [`ConvTrace::last_steps`].
    pub(crate) fn backward_last(
        &self,
        p: &ParamSet,
        trace: &ConvTrace,
        d_last: &Matrix,
        g: &mut ParamSet,
    ) {
        let top = trace.acts.last().expect("at least one layer");
        let seq_len = trace.seq_len;
        let mut d_act = Matrix::zeros(top.rows(), top.cols());
        for s in 0..d_last.rows() {
            d_act
                .row_mut(s * seq_len + seq_len - 1)
                .copy_from_slice(d_last.row(s));
        }
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let dz = tanh_backward(&trace.acts[l], &d_act);
            let dw = trace.cols[l].t_matmul(&dz).expect("conv weight grad");
            g.get_mut(layer.w).add_assign(&dw).expect("conv weight grad");
            for (acc, v) in g.get_mut(layer.b).data_mut().iter_mut().zip(dz.col_sums()) {
                *acc += v;
            }
            if l == 0 {
                break;
            }
            let d_cols = dz.matmul_t(p.get(layer.w)).expect("conv input grad");
            d_act = layer.col2im(&d_cols, seq_len);
        }
    }
}
