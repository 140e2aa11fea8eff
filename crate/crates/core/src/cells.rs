//! Recurrent cell architectures.
//!
//! Every cell is a map `F(h, x) -> h'` on its full state vector. Update
//! equations (σ is the logistic function, ⊙ the elementwise product):
//!
//! * vanilla: `h' = tanh(W h + U x + b)`
//! * linear:  `h' = W h + U x + b`
//! * GRU: `z = σ(W_z h + U_z x + b_z)`, `r = σ(W_r h + U_r x + b_r)`,
//!   `c = tanh(W_c (r ⊙ h) + U_c x + b_c)`, `h' = z ⊙ h + (1 − z) ⊙ c`.
//!   The reset gate multiplies the state before the candidate matmul.
//! * UGRNN: `g = σ(W_g h + U_g x + b_g)`, `c = tanh(W_c h + U_c x + b_c)`,
//!   `h' = g ⊙ h + (1 − g) ⊙ c`.
//! * LSTM: state is `(c, h)` of length `2N`; `i, f, o = σ(·)`, `g = tanh(·)`
//!   from `W h + U x + b`, `c' = f ⊙ c + i ⊙ g`, `h' = o ⊙ tanh(c')`.
//!
//! Gate kernels are stored fused (e.g. the GRU `w_gates` is `[W_z; W_r]`).
//! Initialization: kernels uniform in `±1/√N`, biases zero except the GRU
//! update gate, UGRNN gate and LSTM forget gate, which start at `+1`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    Vanilla,
    Gru,
    Lstm,
    Ugrnn,
    Linear,
}

impl Architecture {
    pub const ALL: [Architecture; 5] = [
        Architecture::Vanilla,
        Architecture::Gru,
        Architecture::Lstm,
        Architecture::Ugrnn,
        Architecture::Linear,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Architecture::Vanilla => "vanilla",
            Architecture::Gru => "gru",
            Architecture::Lstm => "lstm",
            Architecture::Ugrnn => "ugrnn",
            Architecture::Linear => "linear",
        }
    }

    pub fn state_size(self, hidden: usize) -> usize {
        match self {
            Architecture::Lstm => 2 * hidden,
            _ => hidden,
        }
    }

    /// Names and shapes `(rows, cols)` of the parameter tensors.
    pub fn tensor_layout(self, hidden: usize, input: usize) -> Vec<(&'static str, usize, usize)> {
        let n = hidden;
        match self {
            Architecture::Vanilla => vec![("w", n, n), ("u", n, input), ("b", n, 1)],
            Architecture::Linear => vec![("w_h", n, n), ("w_x", n, input), ("b", n, 1)],
            Architecture::Gru => vec![
                ("w_gates", 2 * n, n),
                ("u_gates", 2 * n, input),
                ("b_gates", 2 * n, 1),
                ("w_cand", n, n),
                ("u_cand", n, input),
                ("b_cand", n, 1),
            ],
            Architecture::Ugrnn => vec![("w", 2 * n, n), ("u", 2 * n, input), ("b", 2 * n, 1)],
            Architecture::Lstm => vec![("w", 4 * n, n), ("u", 4 * n, input), ("b", 4 * n, 1)],
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown architecture '{s}'")))
    }
}

/// Weights and biases of one cell. Biases are stored as `rows x 1` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CellParameters {
    architecture: Architecture,
    hidden_size: usize,
    input_size: usize,
    tensors: Vec<Matrix>,
}

/// Intermediate values of one forward step, enough to run the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache {
    h: Vec<f64>,
    x: Vec<f64>,
    /// architecture-specific activations, concatenated
    act: Vec<f64>,
}

/// Gradients of `upstreamᵀ F(h, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGradients {
    pub params: Vec<Matrix>,
    pub d_state: Vec<f64>,
    pub d_input: Vec<f64>,
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl CellParameters {
    pub fn zeros(architecture: Architecture, hidden_size: usize, input_size: usize) -> Self {
        let tensors = architecture
            .tensor_layout(hidden_size, input_size)
            .into_iter()
            .map(|(_, r, c)| Matrix::zeros(r, c))
            .collect();
        Self {
            architecture,
            hidden_size,
            input_size,
            tensors,
        }
    }

    pub fn init<R: Rng>(architecture: Architecture, hidden_size: usize, input_size: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(architecture, hidden_size, input_size);
        let bound = 1.0 / (hidden_size as f64).sqrt();
        let layout = architecture.tensor_layout(hidden_size, input_size);
        for (t, (_, _, cols)) in p.tensors.iter_mut().zip(&layout) {
            if *cols == 1 {
                continue;
            }
            for v in t.as_mut_slice() {
                *v = rng.gen_range(-bound..bound);
            }
        }
        let n = hidden_size;
        let gate_bias = match architecture {
            Architecture::Gru => Some((2, 0..n)),
            Architecture::Ugrnn => Some((2, 0..n)),
            Architecture::Lstm => Some((2, n..2 * n)),
            _ => None,
        };
        if let Some((idx, range)) = gate_bias {
            for i in range {
                p.tensors[idx][(i, 0)] = 1.0;
            }
        }
        p
    }

    /// Assembles parameters from tensors, checking shapes and finiteness.
    pub fn from_tensors(
        architecture: Architecture,
        hidden_size: usize,
        input_size: usize,
        tensors: Vec<Matrix>,
    ) -> Result<Self> {
        let layout = architecture.tensor_layout(hidden_size, input_size);
        if layout.len() != tensors.len() {
            return Err(Error::Dimension(format!(
                "{architecture} expects {} tensors, got {}",
                layout.len(),
                tensors.len()
            )));
        }
        for ((name, r, c), t) in layout.iter().zip(&tensors) {
            if t.rows() != *r || t.cols() != *c {
                return Err(Error::Dimension(format!(
                    "tensor {name} should be {r}x{c}, got {}x{}",
                    t.rows(),
                    t.cols()
                )));
            }
            if !t.is_finite() {
                return Err(Error::NonFinite(format!("tensor {name}")));
            }
        }
        Ok(Self {
            architecture,
            hidden_size,
            input_size,
            tensors,
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn state_size(&self) -> usize {
        self.architecture.state_size(self.hidden_size)
    }

    pub fn tensors(&self) -> &[Matrix] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Matrix] {
        &mut self.tensors
    }

    pub fn tensor_names(&self) -> Vec<&'static str> {
        self.architecture
            .tensor_layout(self.hidden_size, self.input_size)
            .into_iter()
            .map(|(n, _, _)| n)
            .collect()
    }

    pub fn zero_gradients(&self) -> Vec<Matrix> {
        self.tensors
            .iter()
            .map(|t| Matrix::zeros(t.rows(), t.cols()))
            .collect()
    }

    /// Index of the state slice visible to the readout (the `h` half for LSTM).
    pub fn output_range(&self) -> std::ops::Range<usize> {
        match self.architecture {
            Architecture::Lstm => self.hidden_size..2 * self.hidden_size,
            _ => 0..self.hidden_size,
        }
    }

    fn check(&self, h: &[f64], x: &[f64]) -> Result<()> {
        if h.len() != self.state_size() {
            return Err(Error::Dimension(format!(
                "state has length {}, {} cell expects {}",
                h.len(),
                self.architecture,
                self.state_size()
            )));
        }
        if x.len() != self.input_size {
            return Err(Error::Dimension(format!(
                "input has length {}, cell expects {}",
                x.len(),
                self.input_size
            )));
        }
        Ok(())
    }

    /// `F(h, x)`
    pub fn step(&self, h: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check(h, x)?;
        Ok(self.forward(h, x).0)
    }

    /// Affine pre-activation `W h + U x + b` for a fused kernel triple.
    fn affine(&self, w: usize, h: &[f64], x: &[f64]) -> Vec<f64> {
        let (wm, um, bm) = (&self.tensors[w], &self.tensors[w + 1], &self.tensors[w + 2]);
        let mut a = bm.as_slice().to_vec();
        for (i, ai) in a.iter_mut().enumerate() {
            *ai += crate::numerics::dot(wm.row(i), h) + crate::numerics::dot(um.row(i), x);
        }
        a
    }

    /// Forward step without shape checks; returns the new state and a cache.
    pub fn forward(&self, h: &[f64], x: &[f64]) -> (Vec<f64>, StepCache) {
        let n = self.hidden_size;
        let (out, act) = match self.architecture {
            Architecture::Linear => (self.affine(0, h, x), Vec::new()),
            Architecture::Vanilla => {
                let mut a = self.affine(0, h, x);
                a.iter_mut().for_each(|v| *v = v.tanh());
                (a.clone(), a)
            }
            Architecture::Gru => {
                let mut gates = self.affine(0, h, x);
                gates.iter_mut().for_each(|v| *v = sigmoid(*v));
                let rh: Vec<f64> = (0..n).map(|i| gates[n + i] * h[i]).collect();
                let mut c = self.affine(3, &rh, x);
                c.iter_mut().for_each(|v| *v = v.tanh());
                let out: Vec<f64> = (0..n).map(|i| gates[i] * h[i] + (1.0 - gates[i]) * c[i]).collect();
                gates.extend_from_slice(&c);
                (out, gates)
            }
            Architecture::Ugrnn => {
                let mut a = self.affine(0, h, x);
                for i in 0..n {
                    a[i] = sigmoid(a[i]);
                    a[n + i] = a[n + i].tanh();
                }
                let out = (0..n).map(|i| a[i] * h[i] + (1.0 - a[i]) * a[n + i]).collect();
                (out, a)
            }
            Architecture::Lstm => {
                let (c, hh) = h.split_at(n);
                let mut a = self.affine(0, hh, x);
                for i in 0..n {
                    a[i] = sigmoid(a[i]);
                    a[n + i] = sigmoid(a[n + i]);
                    a[2 * n + i] = a[2 * n + i].tanh();
                    a[3 * n + i] = sigmoid(a[3 * n + i]);
                }
                let mut out = vec![0.0; 2 * n];
                let mut tc = vec![0.0; n];
                for i in 0..n {
                    let cn = a[n + i] * c[i] + a[i] * a[2 * n + i];
                    tc[i] = cn.tanh();
                    out[i] = cn;
                    out[n + i] = a[3 * n + i] * tc[i];
                }
                a.extend_from_slice(&tc);
                (out, a)
            }
        };
        (
            out,
            StepCache {
                h: h.to_vec(),
                x: x.to_vec(),
                act,
            },
        )
    }

    /// Accumulates gradients for a fused kernel triple given `da`, the
    /// gradient with respect to its pre-activation.
    fn accumulate(grads: &mut [Matrix], w: usize, da: &[f64], h: &[f64], x: &[f64]) {
        grads[w].add_outer(1.0, da, h);
        grads[w + 1].add_outer(1.0, da, x);
        crate::numerics::axpy(1.0, da, grads[w + 2].as_mut_slice());
    }

    /// Backward pass for one step. Adds `∂(upstreamᵀ F)/∂θ` into `grads` when
    /// given and returns `(∂/∂h, ∂/∂x)`.
    pub fn backward(&self, cache: &StepCache, upstream: &[f64], mut grads: Option<&mut [Matrix]>) -> (Vec<f64>, Vec<f64>) {
        let n = self.hidden_size;
        let (h, x, act) = (&cache.h, &cache.x, &cache.act);
        let mut dx = vec![0.0; self.input_size];
        match self.architecture {
            Architecture::Linear | Architecture::Vanilla => {
                let da: Vec<f64> = if self.architecture == Architecture::Linear {
                    upstream.to_vec()
                } else {
                    upstream.iter().zip(act).map(|(u, o)| u * (1.0 - o * o)).collect()
                };
                if let Some(g) = grads.as_deref_mut() {
                    Self::accumulate(g, 0, &da, h, x);
                }
                let mut dh = vec![0.0; n];
                self.tensors[0].tr_matvec_acc(&da, &mut dh);
                self.tensors[1].tr_matvec_acc(&da, &mut dx);
                (dh, dx)
            }
            Architecture::Gru => {
                let (z, r, c) = (&act[..n], &act[n..2 * n], &act[2 * n..3 * n]);
                let mut dh: Vec<f64> = (0..n).map(|i| upstream[i] * z[i]).collect();
                let da_c: Vec<f64> = (0..n)
                    .map(|i| upstream[i] * (1.0 - z[i]) * (1.0 - c[i] * c[i]))
                    .collect();
                let rh: Vec<f64> = (0..n).map(|i| r[i] * h[i]).collect();
                if let Some(g) = grads.as_deref_mut() {
                    Self::accumulate(g, 3, &da_c, &rh, x);
                }
                let mut drh = vec![0.0; n];
                self.tensors[3].tr_matvec_acc(&da_c, &mut drh);
                self.tensors[4].tr_matvec_acc(&da_c, &mut dx);
                let mut dg = vec![0.0; 2 * n];
                for i in 0..n {
                    dh[i] += drh[i] * r[i];
                    dg[i] = upstream[i] * (h[i] - c[i]) * z[i] * (1.0 - z[i]);
                    dg[n + i] = drh[i] * h[i] * r[i] * (1.0 - r[i]);
                }
                if let Some(g) = grads.as_deref_mut() {
                    Self::accumulate(g, 0, &dg, h, x);
                }
                self.tensors[0].tr_matvec_acc(&dg, &mut dh);
                self.tensors[1].tr_matvec_acc(&dg, &mut dx);
                (dh, dx)
            }
            Architecture::Ugrnn => {
                let (gt, c) = (&act[..n], &act[n..2 * n]);
                let mut dh: Vec<f64> = (0..n).map(|i| upstream[i] * gt[i]).collect();
                let mut da = vec![0.0; 2 * n];
                for i in 0..n {
                    da[i] = upstream[i] * (h[i] - c[i]) * gt[i] * (1.0 - gt[i]);
                    da[n + i] = upstream[i] * (1.0 - gt[i]) * (1.0 - c[i] * c[i]);
                }
                if let Some(g) = grads.as_deref_mut() {
                    Self::accumulate(g, 0, &da, h, x);
                }
                self.tensors[0].tr_matvec_acc(&da, &mut dh);
                self.tensors[1].tr_matvec_acc(&da, &mut dx);
                (dh, dx)
            }
            Architecture::Lstm => {
                let (c, hh) = h.split_at(n);
                let (ig, fg, gg, og, tc) = (
                    &act[..n],
                    &act[n..2 * n],
                    &act[2 * n..3 * n],
                    &act[3 * n..4 * n],
                    &act[4 * n..5 * n],
                );
                let (uc, uh) = upstream.split_at(n);
                let mut d_state = vec![0.0; 2 * n];
                let mut da = vec![0.0; 4 * n];
                for i in 0..n {
                    let dcn = uc[i] + uh[i] * og[i] * (1.0 - tc[i] * tc[i]);
                    da[i] = dcn * gg[i] * ig[i] * (1.0 - ig[i]);
                    da[n + i] = dcn * c[i] * fg[i] * (1.0 - fg[i]);
                    da[2 * n + i] = dcn * ig[i] * (1.0 - gg[i] * gg[i]);
                    da[3 * n + i] = uh[i] * tc[i] * og[i] * (1.0 - og[i]);
                    d_state[i] = dcn * fg[i];
                }
                if let Some(g) = grads.as_deref_mut() {
                    Self::accumulate(g, 0, &da, hh, x);
                }
                self.tensors[0].tr_matvec_acc(&da, &mut d_state[n..]);
                self.tensors[1].tr_matvec_acc(&da, &mut dx);
                (d_state, dx)
            }
        }
    }

    /// Analytic Jacobians `(∂F/∂h, ∂F/∂x)` at `(h, x)`.
    pub fn jacobians(&self, h: &[f64], x: &[f64]) -> Result<(Matrix, Matrix)> {
        self.check(h, x)?;
        let n = self.hidden_size;
        let (_, cache) = self.forward(h, x);
        let act = &cache.act;
        let t = &self.tensors;
        let out = match self.architecture {
            Architecture::Linear => (t[0].clone(), t[1].clone()),
            Architecture::Vanilla => {
                let d: Vec<f64> = act.iter().map(|o| 1.0 - o * o).collect();
                (t[0].scale_rows(&d), t[1].scale_rows(&d))
            }
            Architecture::Gru => {
                let (z, r, c) = (&act[..n], &act[n..2 * n], &act[2 * n..3 * n]);
                let wz = t[0].rows_range(0, n);
                let wr = t[0].rows_range(n, n);
                let uz = t[1].rows_range(0, n);
                let ur = t[1].rows_range(n, n);
                let dz: Vec<f64> = (0..n).map(|i| (h[i] - c[i]) * z[i] * (1.0 - z[i])).collect();
                let dc: Vec<f64> = (0..n).map(|i| (1.0 - z[i]) * (1.0 - c[i] * c[i])).collect();
                let k = t[3].scale_rows(&dc);
                let hr: Vec<f64> = (0..n).map(|i| h[i] * r[i] * (1.0 - r[i])).collect();
                let k_hr = scale_cols(&k, &hr);
                let mut jrec = wz.scale_rows(&dz).add(&scale_cols(&k, r))?.add(&k_hr.matmul(&wr)?)?;
                for i in 0..n {
                    jrec[(i, i)] += z[i];
                }
                let jinp = uz
                    .scale_rows(&dz)
                    .add(&k_hr.matmul(&ur)?)?
                    .add(&t[4].scale_rows(&dc))?;
                (jrec, jinp)
            }
            Architecture::Ugrnn => {
                let (gt, c) = (&act[..n], &act[n..2 * n]);
                let dg: Vec<f64> = (0..n).map(|i| (h[i] - c[i]) * gt[i] * (1.0 - gt[i])).collect();
                let dc: Vec<f64> = (0..n).map(|i| (1.0 - gt[i]) * (1.0 - c[i] * c[i])).collect();
                let mut jrec = t[0]
                    .rows_range(0, n)
                    .scale_rows(&dg)
                    .add(&t[0].rows_range(n, n).scale_rows(&dc))?;
                for i in 0..n {
                    jrec[(i, i)] += gt[i];
                }
                let jinp = t[1]
                    .rows_range(0, n)
                    .scale_rows(&dg)
                    .add(&t[1].rows_range(n, n).scale_rows(&dc))?;
                (jrec, jinp)
            }
            Architecture::Lstm => {
                let c = &h[..n];
                let (ig, fg, gg, og, tc) = (
                    &act[..n],
                    &act[n..2 * n],
                    &act[2 * n..3 * n],
                    &act[3 * n..4 * n],
                    &act[4 * n..5 * n],
                );
                let di: Vec<f64> = (0..n).map(|k| gg[k] * ig[k] * (1.0 - ig[k])).collect();
                let df: Vec<f64> = (0..n).map(|k| c[k] * fg[k] * (1.0 - fg[k])).collect();
                let dg: Vec<f64> = (0..n).map(|k| ig[k] * (1.0 - gg[k] * gg[k])).collect();
                let dout: Vec<f64> = (0..n).map(|k| tc[k] * og[k] * (1.0 - og[k])).collect();
                let dtc: Vec<f64> = (0..n).map(|k| og[k] * (1.0 - tc[k] * tc[k])).collect();
                // ∂c'/∂(h or x) through the gate pre-activations
                let gate_sum = |m: &Matrix| -> Result<Matrix> {
                    m.rows_range(0, n)
                        .scale_rows(&di)
                        .add(&m.rows_range(n, n).scale_rows(&df))?
                        .add(&m.rows_range(2 * n, n).scale_rows(&dg))
                };
                let dc_dh = gate_sum(&t[0])?;
                let dc_dx = gate_sum(&t[1])?;
                let dh_dh = t[0].rows_range(3 * n, n).scale_rows(&dout).add(&dc_dh.scale_rows(&dtc))?;
                let dh_dx = t[1].rows_range(3 * n, n).scale_rows(&dout).add(&dc_dx.scale_rows(&dtc))?;
                let mut jrec = Matrix::zeros(2 * n, 2 * n);
                for i in 0..n {
                    jrec[(i, i)] = fg[i];
                    jrec[(n + i, i)] = dtc[i] * fg[i];
                    for j in 0..n {
                        jrec[(i, n + j)] = dc_dh[(i, j)];
                        jrec[(n + i, n + j)] = dh_dh[(i, j)];
                    }
                }
                let jinp = Matrix::from_fn(2 * n, self.input_size, |i, j| {
                    if i < n {
                        dc_dx[(i, j)]
                    } else {
                        dh_dx[(i - n, j)]
                    }
                });
                (jrec, jinp)
            }
        };
        Ok(out)
    }

    /// `∂(upstreamᵀ F(h, x))` with respect to every parameter, the state and the input.
    pub fn parameter_gradients(&self, h: &[f64], x: &[f64], upstream: &[f64]) -> Result<CellGradients> {
        self.check(h, x)?;
        if upstream.len() != self.state_size() {
            return Err(Error::Dimension(format!(
                "upstream has length {}, state size is {}",
                upstream.len(),
                self.state_size()
            )));
        }
        let (_, cache) = self.forward(h, x);
        let mut params = self.zero_gradients();
        let (d_state, d_input) = self.backward(&cache, upstream, Some(&mut params));
        Ok(CellGradients {
            params,
            d_state,
            d_input,
        })
    }
}

fn scale_cols(m: &Matrix, d: &[f64]) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] * d[j])
}

/// Central-difference Jacobians, columnwise `(F(v + εe_j) − F(v − εe_j)) / 2ε`.
pub fn fd_jacobian(params: &CellParameters, h: &[f64], x: &[f64], step: f64) -> Result<(Matrix, Matrix)> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {step}")));
    }
    params.check(h, x)?;
    let s = params.state_size();
    let e = params.input_size();
    let mut jrec = Matrix::zeros(s, s);
    let mut jinp = Matrix::zeros(s, e);
    let mut hp = h.to_vec();
    for j in 0..s {
        hp[j] = h[j] + step;
        let fp = params.forward(&hp, x).0;
        hp[j] = h[j] - step;
        let fm = params.forward(&hp, x).0;
        hp[j] = h[j];
        for i in 0..s {
            jrec[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    let mut xp = x.to_vec();
    for j in 0..e {
        xp[j] = x[j] + step;
        let fp = params.forward(h, &xp).0;
        xp[j] = x[j] - step;
        let fm = params.forward(h, &xp).0;
        xp[j] = x[j];
        for i in 0..s {
            jinp[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    Ok((jrec, jinp))
}

/// `max|a − b| / max|b|`, with the denominator floored at 1e-12.
pub fn relative_max_abs_error(a: &Matrix, b: &Matrix) -> f64 {
    let diff = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / b.max_abs().max(1e-12)
}
