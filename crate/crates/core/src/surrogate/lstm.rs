//! Single-layer LSTM with a linear output head, forward and backward passes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                context: "matrix data",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// out = self · v + bias
    fn affine_into(&self, v: &[f64], bias: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = bias[r] + dot(self.row(r), v);
        }
    }

    /// self += a · bᵀ
    fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        for (r, &ar) in a.iter().enumerate() {
            if ar == 0.0 {
                continue;
            }
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (m, &bc) in row.iter_mut().zip(b) {
                *m += ar * bc;
            }
        }
    }

    /// out += selfᵀ · a
    fn add_transpose_mul(&self, a: &[f64], out: &mut [f64]) {
        for (r, &ar) in a.iter().enumerate() {
            for (o, &m) in out.iter_mut().zip(self.row(r)) {
                *o += ar * m;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Gate weights act on the concatenation `[h_{t-1}, x_t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub hidden_size: usize,
    pub input_size: usize,
    pub output_size: usize,
    #[serde(rename = "W_f")]
    pub w_f: Mat,
    #[serde(rename = "W_i")]
    pub w_i: Mat,
    #[serde(rename = "W_c")]
    pub w_c: Mat,
    #[serde(rename = "W_o")]
    pub w_o: Mat,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
    #[serde(rename = "W_y")]
    pub w_y: Mat,
    pub b_y: Vec<f64>,
}

/// Parameter block names in the order used by [`LstmParams::blocks`].
pub const PARAM_BLOCKS: [&str; 10] = [
    "W_f", "W_i", "W_c", "W_o", "b_f", "b_i", "b_c", "b_o", "W_y", "b_y",
];

impl LstmParams {
    pub fn zeros(hidden_size: usize, input_size: usize, output_size: usize) -> Self {
        let z = hidden_size + input_size;
        Self {
            hidden_size,
            input_size,
            output_size,
            w_f: Mat::zeros(hidden_size, z),
            w_i: Mat::zeros(hidden_size, z),
            w_c: Mat::zeros(hidden_size, z),
            w_o: Mat::zeros(hidden_size, z),
            b_f: vec![0.0; hidden_size],
            b_i: vec![0.0; hidden_size],
            b_c: vec![0.0; hidden_size],
            b_o: vec![0.0; hidden_size],
            w_y: Mat::zeros(output_size, hidden_size),
            b_y: vec![0.0; output_size],
        }
    }

    /// Every weight and bias drawn uniformly from `[-scale, scale]`.
    pub fn random<R: Rng>(
        hidden_size: usize,
        input_size: usize,
        output_size: usize,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(hidden_size, input_size, output_size);
        for block in p.blocks_mut() {
            for v in block.iter_mut() {
                *v = rng.gen_range(-scale..=scale);
            }
        }
        p
    }

    pub fn blocks(&self) -> [&[f64]; 10] {
        [
            self.w_f.data(),
            self.w_i.data(),
            self.w_c.data(),
            self.w_o.data(),
            &self.b_f,
            &self.b_i,
            &self.b_c,
            &self.b_o,
            self.w_y.data(),
            &self.b_y,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 10] {
        [
            self.w_f.data_mut(),
            self.w_i.data_mut(),
            self.w_c.data_mut(),
            self.w_o.data_mut(),
            &mut self.b_f,
            &mut self.b_i,
            &mut self.b_c,
            &mut self.b_o,
            self.w_y.data_mut(),
            &mut self.b_y,
        ]
    }

    pub fn n_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|b| b.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Shape consistency and finiteness.
    pub fn validate(&self) -> Result<()> {
        let (h, i, o) = (self.hidden_size, self.input_size, self.output_size);
        if h == 0 || i == 0 || o == 0 {
            return Err(Error::Input(format!(
                "lstm sizes must be positive (hidden {h}, input {i}, output {o})"
            )));
        }
        for (name, m) in [
            ("W_f", &self.w_f),
            ("W_i", &self.w_i),
            ("W_c", &self.w_c),
            ("W_o", &self.w_o),
        ] {
            check_mat(name, m, h, h + i)?;
        }
        check_mat("W_y", &self.w_y, o, h)?;
        for (ctx, b, n) in [
            ("b_f", &self.b_f, h),
            ("b_i", &self.b_i, h),
            ("b_c", &self.b_c, h),
            ("b_o", &self.b_o, h),
            ("b_y", &self.b_y, o),
        ] {
            if b.len() != n {
                return Err(Error::Input(format!(
                    "{ctx}: expected length {n}, got {}",
                    b.len()
                )));
            }
        }
        if self
            .blocks()
            .iter()
            .flat_map(|b| b.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Input(
                "lstm parameters contain non-finite values".into(),
            ));
        }
        Ok(())
    }
}

fn check_mat(name: &str, m: &Mat, rows: usize, cols: usize) -> Result<()> {
    if m.rows != rows || m.cols != cols || m.data.len() != rows * cols {
        return Err(Error::Input(format!(
            "{name}: expected {rows}x{cols}, got {}x{} with {} values",
            m.rows,
            m.cols,
            m.data.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_size: usize) -> Self {
        Self {
            h: vec![0.0; hidden_size],
            c: vec![0.0; hidden_size],
        }
    }
}

/// Intermediates of one cell step kept for the backward pass.
struct StepCache {
    z: Vec<f64>,
    f: Vec<f64>,
    i: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
}

fn step(p: &LstmParams, h_prev: &[f64], c_prev: &[f64], x: &[f64]) -> StepCache {
    let n = p.hidden_size;
    let mut z = Vec::with_capacity(n + p.input_size);
    z.extend_from_slice(h_prev);
    z.extend_from_slice(x);
    let mut f = vec![0.0; n];
    let mut i = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut o = vec![0.0; n];
    p.w_f.affine_into(&z, &p.b_f, &mut f);
    p.w_i.affine_into(&z, &p.b_i, &mut i);
    p.w_c.affine_into(&z, &p.b_c, &mut g);
    p.w_o.affine_into(&z, &p.b_o, &mut o);
    let mut c = vec![0.0; n];
    let mut tanh_c = vec![0.0; n];
    let mut h = vec![0.0; n];
    for k in 0..n {
        f[k] = sigmoid(f[k]);
        i[k] = sigmoid(i[k]);
        g[k] = g[k].tanh();
        o[k] = sigmoid(o[k]);
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
        tanh_c[k] = c[k].tanh();
        h[k] = o[k] * tanh_c[k];
    }
    StepCache {
        z,
        f,
        i,
        g,
        o,
        c_prev: c_prev.to_vec(),
        tanh_c,
        c,
        h,
    }
}

fn check_input(p: &LstmParams, x: &[f64]) -> Result<()> {
    if x.len() != p.input_size {
        return Err(Error::Dimension {
            context: "lstm input",
            expected: p.input_size,
            actual: x.len(),
        });
    }
    Ok(())
}

pub fn lstm_cell(params: &LstmParams, state: &LstmState, x: &[f64]) -> Result<LstmState> {
    check_input(params, x)?;
    for (context, len) in [
        ("lstm hidden state", state.h.len()),
        ("lstm cell state", state.c.len()),
    ] {
        if len != params.hidden_size {
            return Err(Error::Dimension {
                context,
                expected: params.hidden_size,
                actual: len,
            });
        }
    }
    let s = step(params, &state.h, &state.c, x);
    Ok(LstmState { h: s.h, c: s.c })
}

fn project(p: &LstmParams, h: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; p.output_size];
    p.w_y.affine_into(h, &p.b_y, &mut y);
    y
}

fn check_sequence(p: &LstmParams, xs: &[Vec<f64>]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Input("empty input sequence".into()));
    }
    xs.iter().try_for_each(|x| check_input(p, x))
}

/// Outputs `y_t = W_y h_t + b_y` from a zero initial state.
pub fn forward_sequence(params: &LstmParams, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_sequence(params, xs)?;
    let mut h = vec![0.0; params.hidden_size];
    let mut c = vec![0.0; params.hidden_size];
    let mut ys = Vec::with_capacity(xs.len());
    for x in xs {
        let s = step(params, &h, &c, x);
        ys.push(project(params, &s.h));
        h = s.h;
        c = s.c;
    }
    Ok(ys)
}

fn check_targets(p: &LstmParams, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<()> {
    if ys.len() != xs.len() {
        return Err(Error::Dimension {
            context: "target sequence",
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    for y in ys {
        if y.len() != p.output_size {
            return Err(Error::Dimension {
                context: "target vector",
                expected: p.output_size,
                actual: y.len(),
            });
        }
    }
    Ok(())
}

/// Training objective of one sequence: the per-step squared error averaged
/// over outputs and summed over time. Dividing by the length gives the MSE.
pub fn sequence_loss(params: &LstmParams, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<f64> {
    check_targets(params, xs, ys)?;
    let pred = forward_sequence(params, xs)?;
    let sse: f64 = pred
        .iter()
        .zip(ys)
        .flat_map(|(p, y)| p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)))
        .sum();
    Ok(sse / params.output_size as f64)
}

/// [`sequence_loss`] and its gradient by backpropagation through the whole
/// sequence. The gradient is added into `grad`, which must have the shape of
/// `params`.
pub fn sequence_loss_and_grad(
    params: &LstmParams,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    grad: &mut LstmParams,
) -> Result<f64> {
    check_sequence(params, xs)?;
    check_targets(params, xs, ys)?;
    let n = params.hidden_size;
    let n_in = params.input_size;
    let scale = 1.0 / params.output_size as f64;

    let mut caches = Vec::with_capacity(xs.len());
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    for x in xs {
        let s = step(params, &h, &c, x);
        h.clone_from(&s.h);
        c.clone_from(&s.c);
        caches.push(s);
    }

    let mut sse = 0.0;
    let mut dh_next = vec![0.0; n];
    let mut dc_next = vec![0.0; n];
    let mut dz = vec![0.0; n + n_in];
    let (mut da_f, mut da_i, mut da_g, mut da_o) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (s, y) in caches.iter().zip(ys).rev() {
        let pred = project(params, &s.h);
        let mut dy = vec![0.0; params.output_size];
        for k in 0..params.output_size {
            let e = pred[k] - y[k];
            sse += e * e;
            dy[k] = 2.0 * e * scale;
        }
        grad.w_y.add_outer(&dy, &s.h);
        for (b, d) in grad.b_y.iter_mut().zip(&dy) {
            *b += d;
        }
        let mut dh = dh_next.clone();
        params.w_y.add_transpose_mul(&dy, &mut dh);

        for k in 0..n {
            let d_o = dh[k] * s.tanh_c[k];
            let dc = dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]) + dc_next[k];
            let d_f = dc * s.c_prev[k];
            let d_i = dc * s.g[k];
            let d_g = dc * s.i[k];
            dc_next[k] = dc * s.f[k];
            da_f[k] = d_f * s.f[k] * (1.0 - s.f[k]);
            da_i[k] = d_i * s.i[k] * (1.0 - s.i[k]);
            da_g[k] = d_g * (1.0 - s.g[k] * s.g[k]);
            da_o[k] = d_o * s.o[k] * (1.0 - s.o[k]);
        }
        dz.iter_mut().for_each(|v| *v = 0.0);
        for (w, gw, gb, da) in [
            (&params.w_f, &mut grad.w_f, &mut grad.b_f, &da_f),
            (&params.w_i, &mut grad.w_i, &mut grad.b_i, &da_i),
            (&params.w_c, &mut grad.w_c, &mut grad.b_c, &da_g),
            (&params.w_o, &mut grad.w_o, &mut grad.b_o, &da_o),
        ] {
            gw.add_outer(da, &s.z);
            for (b, d) in gb.iter_mut().zip(da.iter()) {
                *b += d;
            }
            w.add_transpose_mul(da, &mut dz);
        }
        dh_next.copy_from_slice(&dz[..n]);
    }
    Ok(sse * scale)
}
