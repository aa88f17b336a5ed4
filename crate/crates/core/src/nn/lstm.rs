//! LSTM cell, its recurrence over a sequence, and backpropagation through time.
//!
//! With `z_t = [x_t, y_{t-1}]`:
//!
//! ```text
//! i_t = σ(W_i z_t + b_i)     f_t = σ(W_f z_t + b_f)
//! o_t = σ(W_o z_t + b_o)     g_t = tanh(W_g z_t + b_g)
//! c_t = f_t ⊙ c_{t-1} + i_t ⊙ g_t
//! y_t = o_t ⊙ tanh(c_t)
//! ```
//!
//! Biases default to zero, in which case the cell is exactly the bias-free
//! LSTM recurrence.

use rand::Rng;

use super::activation::{sigmoid_scalar, tanh_vec};
use super::NnError;
use crate::features::FeatureMatrix;
use crate::linalg::Matrix;

/// Gate weights, each `H × (D + H)`, and biases of length `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_i: Matrix,
    pub w_f: Matrix,
    pub w_o: Matrix,
    pub w_g: Matrix,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_o: Vec<f64>,
    pub b_g: Vec<f64>,
    input_dim: usize,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let w = Matrix::zeros(hidden, input_dim + hidden);
        Self {
            w_i: w.clone(),
            w_f: w.clone(),
            w_o: w.clone(),
            w_g: w,
            b_i: vec![0.0; hidden],
            b_f: vec![0.0; hidden],
            b_o: vec![0.0; hidden],
            b_g: vec![0.0; hidden],
            input_dim,
        }
    }

    /// Weights uniform in `±1/√(D+H)`, biases zero (forget bias optionally 1).
    pub fn init_uniform<R: Rng + ?Sized>(input_dim: usize, hidden: usize, forget_bias_one: bool, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim, hidden);
        let bound = 1.0 / ((input_dim + hidden) as f64).sqrt();
        for w in [&mut p.w_i, &mut p.w_f, &mut p.w_o, &mut p.w_g] {
            for x in w.as_mut_slice() {
                *x = rng.random_range(-bound..=bound);
            }
        }
        if forget_bias_one {
            p.b_f.fill(1.0);
        }
        p
    }

    /// Assembles parameters from explicit matrices, checking shapes.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        w_i: Matrix,
        w_f: Matrix,
        w_o: Matrix,
        w_g: Matrix,
        b_i: Vec<f64>,
        b_f: Vec<f64>,
        b_o: Vec<f64>,
        b_g: Vec<f64>,
    ) -> Result<Self, NnError> {
        let (h, cols) = w_i.shape();
        if cols < h {
            return Err(NnError::Shape(format!("gate matrix {h}x{cols} narrower than H")));
        }
        for (name, w) in [("W_f", &w_f), ("W_o", &w_o), ("W_g", &w_g)] {
            if w.shape() != (h, cols) {
                return Err(NnError::Shape(format!(
                    "{name} is {:?}, W_i is {:?}",
                    w.shape(),
                    (h, cols)
                )));
            }
        }
        for b in [&b_i, &b_f, &b_o, &b_g] {
            if b.len() != h {
                return Err(NnError::Shape(format!("bias of length {} for H = {h}", b.len())));
            }
        }
        Ok(Self {
            w_i,
            w_f,
            w_o,
            w_g,
            b_i,
            b_f,
            b_o,
            b_g,
            input_dim: cols - h,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.w_i.rows()
    }

    pub fn same_shape(&self, other: &LstmParams) -> bool {
        self.input_dim == other.input_dim && self.hidden() == other.hidden()
    }

    /// Weight and bias blocks in checkpoint order.
    pub fn blocks(&self) -> [&[f64]; 8] {
        [
            self.w_i.as_slice(),
            self.w_f.as_slice(),
            self.w_o.as_slice(),
            self.w_g.as_slice(),
            &self.b_i,
            &self.b_f,
            &self.b_o,
            &self.b_g,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.w_i.as_mut_slice(),
            self.w_f.as_mut_slice(),
            self.w_o.as_mut_slice(),
            self.w_g.as_mut_slice(),
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_g,
        ]
    }
}

/// Recurrent state `(c_t, y_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub c: Vec<f64>,
    pub y: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            c: vec![0.0; hidden],
            y: vec![0.0; hidden],
        }
    }
}

/// Everything one step's backward pass needs.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub y_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub y: Vec<f64>,
}

fn gate(w: &Matrix, b: &[f64], z: &[f64]) -> Vec<f64> {
    let mut a = w.matvec(z);
    a.iter_mut().zip(b).for_each(|(a, b)| *a += b);
    a
}

pub fn lstm_cell_forward(p: &LstmParams, x: &[f64], prev: &LstmState) -> Result<(LstmState, StepCache), NnError> {
    let h = p.hidden();
    if x.len() != p.input_dim {
        return Err(NnError::Shape(format!(
            "input of length {} for D = {}",
            x.len(),
            p.input_dim
        )));
    }
    if prev.c.len() != h || prev.y.len() != h {
        return Err(NnError::Shape(format!("state of length {} for H = {h}", prev.c.len())));
    }
    let z = [x, &prev.y[..]].concat();
    let i: Vec<f64> = gate(&p.w_i, &p.b_i, &z).into_iter().map(sigmoid_scalar).collect();
    let f: Vec<f64> = gate(&p.w_f, &p.b_f, &z).into_iter().map(sigmoid_scalar).collect();
    let o: Vec<f64> = gate(&p.w_o, &p.b_o, &z).into_iter().map(sigmoid_scalar).collect();
    let g = tanh_vec(&gate(&p.w_g, &p.b_g, &z));
    let c: Vec<f64> = (0..h).map(|k| f[k] * prev.c[k] + i[k] * g[k]).collect();
    let tanh_c = tanh_vec(&c);
    let y: Vec<f64> = (0..h).map(|k| o[k] * tanh_c[k]).collect();
    let state = LstmState {
        c: c.clone(),
        y: y.clone(),
    };
    let cache = StepCache {
        x: x.to_vec(),
        y_prev: prev.y.clone(),
        c_prev: prev.c.clone(),
        i,
        f,
        o,
        g,
        c,
        tanh_c,
        y,
    };
    Ok((state, cache))
}

/// Left-to-right recurrence from `c₀ = y₀ = 0`. Returns `y_1 … y_T` and the caches.
pub fn lstm_sequence_forward(p: &LstmParams, xs: &FeatureMatrix) -> Result<(Vec<Vec<f64>>, Vec<StepCache>), NnError> {
    if xs.steps() == 0 {
        return Err(NnError::EmptySequence);
    }
    let mut state = LstmState::zeros(p.hidden());
    let mut ys = Vec::with_capacity(xs.steps());
    let mut caches = Vec::with_capacity(xs.steps());
    for t in 0..xs.steps() {
        let (next, cache) = lstm_cell_forward(p, xs.step(t), &state)?;
        ys.push(next.y.clone());
        caches.push(cache);
        state = next;
    }
    Ok((ys, caches))
}

/// How the two directions of a bidirectional layer are combined per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Merge {
    /// `[y_F(t), y_B(N − t + 1)]`, width `2H`.
    #[default]
    Concat,
    /// `y_F(t) + y_B(N − t + 1)`, width `H`.
    Sum,
}

/// Combines forward outputs with the outputs of a recurrence run over the
/// reversed sequence. Step `t` of the result pairs `forward[t]` with
/// `reversed[N − 1 − t]` (0-based), i.e. both halves describe the same frame.
pub fn merge_directions(forward: &[Vec<f64>], reversed: &[Vec<f64>], merge: Merge) -> Vec<Vec<f64>> {
    let n = forward.len();
    (0..n)
        .map(|t| {
            let back = &reversed[n - 1 - t];
            match merge {
                Merge::Concat => [&forward[t][..], &back[..]].concat(),
                Merge::Sum => forward[t].iter().zip(back).map(|(a, b)| a + b).collect(),
            }
        })
        .collect()
}

/// Output of [`blstm_forward`] with the caches of both directions.
#[derive(Debug, Clone)]
pub struct BlstmPass {
    pub merged: Vec<Vec<f64>>,
    pub forward_caches: Vec<StepCache>,
    /// Caches of the backward recurrence, in its own (reversed) time order.
    pub backward_caches: Vec<StepCache>,
}

pub fn blstm_forward(pf: &LstmParams, pb: &LstmParams, xs: &FeatureMatrix, merge: Merge) -> Result<BlstmPass, NnError> {
    if !pf.same_shape(pb) {
        return Err(NnError::Shape(format!(
            "forward ({}x{}) and backward ({}x{}) parameter shapes differ",
            pf.hidden(),
            pf.input_dim(),
            pb.hidden(),
            pb.input_dim()
        )));
    }
    let (yf, forward_caches) = lstm_sequence_forward(pf, xs)?;
    let (yb, backward_caches) = lstm_sequence_forward(pb, &xs.reversed())?;
    Ok(BlstmPass {
        merged: merge_directions(&yf, &yb, merge),
        forward_caches,
        backward_caches,
    })
}

/// Backpropagation through time.
///
/// `dy[t]` is the gradient of the loss arriving at `y_t` from outside the
/// recurrence. Returns parameter gradients shaped like `p`.
pub fn lstm_sequence_backward(p: &LstmParams, caches: &[StepCache], dy: &[Vec<f64>]) -> Result<LstmParams, NnError> {
    if caches.len() != dy.len() {
        return Err(NnError::Shape(format!(
            "{} caches for {} output gradients",
            caches.len(),
            dy.len()
        )));
    }
    let h = p.hidden();
    let d = p.input_dim();
    let mut grads = LstmParams::zeros(d, h);
    let mut dy_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut da_i = vec![0.0; h];
    let mut da_f = vec![0.0; h];
    let mut da_o = vec![0.0; h];
    let mut da_g = vec![0.0; h];

    for (cache, dy_ext) in caches.iter().zip(dy).rev() {
        if cache.x.len() != d || cache.y.len() != h || dy_ext.len() != h {
            return Err(NnError::Shape("cache does not match parameters".into()));
        }
        for k in 0..h {
            let dyk = dy_ext[k] + dy_next[k];
            let (i, f, o, g) = (cache.i[k], cache.f[k], cache.o[k], cache.g[k]);
            let tc = cache.tanh_c[k];
            let dc = dc_next[k] + dyk * o * (1.0 - tc * tc);
            da_o[k] = dyk * tc * o * (1.0 - o);
            da_i[k] = dc * g * i * (1.0 - i);
            da_f[k] = dc * cache.c_prev[k] * f * (1.0 - f);
            da_g[k] = dc * i * (1.0 - g * g);
            dc_next[k] = dc * f;
        }
        let z = [&cache.x[..], &cache.y_prev[..]].concat();
        let mut dz = vec![0.0; d + h];
        for (w, dw, db, da) in [
            (&p.w_i, &mut grads.w_i, &mut grads.b_i, &da_i),
            (&p.w_f, &mut grads.w_f, &mut grads.b_f, &da_f),
            (&p.w_o, &mut grads.w_o, &mut grads.b_o, &da_o),
            (&p.w_g, &mut grads.w_g, &mut grads.b_g, &da_g),
        ] {
            dw.add_outer(da, &z);
            db.iter_mut().zip(da.iter()).for_each(|(b, a)| *b += a);
            w.matvec_transpose_acc(da, &mut dz);
        }
        dy_next.copy_from_slice(&dz[d..]);
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows, FeatureKind::Raw).unwrap()
    }

    #[test]
    fn zero_weights_zero_state() {
        let p = LstmParams::zeros(3, 2);
        let (s, c) = lstm_cell_forward(&p, &[0.3, -1.0, 2.0], &LstmState::zeros(2)).unwrap();
        assert_eq!(c.i, vec![0.5; 2]);
        assert_eq!(c.f, vec![0.5; 2]);
        assert_eq!(c.o, vec![0.5; 2]);
        assert_eq!(c.g, vec![0.0; 2]);
        assert_eq!(s.c, vec![0.0; 2]);
        assert_eq!(s.y, vec![0.0; 2]);
    }

    #[test]
    fn zero_weights_unit_cell() {
        let p = LstmParams::zeros(1, 1);
        let prev = LstmState {
            c: vec![1.0],
            y: vec![0.0],
        };
        let (s, _) = lstm_cell_forward(&p, &[0.7], &prev).unwrap();
        assert_eq!(s.c, vec![0.5]);
        // 0.5 · tanh(0.5)
        assert!((s.y[0] - 0.231_058_578_630_005).abs() < 1e-12);
    }

    #[test]
    fn saturated_gates_hold_cell() {
        let mut p = LstmParams::zeros(2, 3);
        p.b_f.fill(50.0);
        p.b_i.fill(-50.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for x in p.w_g.as_mut_slice() {
            *x = rng.random_range(-1.0..1.0);
        }
        let prev = LstmState {
            c: vec![0.4, -1.3, 2.2],
            y: vec![0.1, -0.2, 0.3],
        };
        let (s, _) = lstm_cell_forward(&p, &[0.5, -0.5], &prev).unwrap();
        for (a, b) in s.c.iter().zip(&prev.c) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn sequence_prefix_and_base_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = LstmParams::init_uniform(2, 4, false, &mut rng);
        let xs = seq((0..6).map(|t| vec![t as f64 * 0.1, -0.3]).collect());
        let (full, _) = lstm_sequence_forward(&p, &xs).unwrap();
        for k in 1..=6 {
            let (part, _) = lstm_sequence_forward(&p, &xs.prefix(k)).unwrap();
            assert_eq!(&full[..k], &part[..]);
        }
        let (one, _) = lstm_sequence_forward(&p, &xs.prefix(1)).unwrap();
        let (s, _) = lstm_cell_forward(&p, xs.step(0), &LstmState::zeros(4)).unwrap();
        assert_eq!(one[0], s.y);
    }

    #[test]
    fn shape_errors() {
        let p = LstmParams::zeros(3, 2);
        assert!(matches!(
            lstm_cell_forward(&p, &[0.0; 2], &LstmState::zeros(2)),
            Err(NnError::Shape(_))
        ));
        let q = LstmParams::zeros(3, 3);
        let xs = seq(vec![vec![0.0; 3]]);
        assert!(blstm_forward(&p, &q, &xs, Merge::Concat).is_err());
    }

    #[test]
    fn blstm_singleton_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pf = LstmParams::init_uniform(2, 3, false, &mut rng);
        let pb = LstmParams::init_uniform(2, 3, false, &mut rng);
        let xs = seq(vec![vec![0.4, -0.9]]);
        let out = blstm_forward(&pf, &pb, &xs, Merge::Concat).unwrap();
        let (a, _) = lstm_cell_forward(&pf, xs.step(0), &LstmState::zeros(3)).unwrap();
        let (b, _) = lstm_cell_forward(&pb, xs.step(0), &LstmState::zeros(3)).unwrap();
        assert_eq!(out.merged[0], [a.y, b.y].concat());

        let z = LstmParams::zeros(2, 3);
        let xs = seq(vec![vec![1.0, 2.0]; 4]);
        let out = blstm_forward(&z, &z, &xs, Merge::Concat).unwrap();
        assert!(out.merged.iter().all(|m| m.len() == 6 && m.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn blstm_palindrome_with_shared_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = LstmParams::init_uniform(2, 3, false, &mut rng);
        let rows = vec![
            vec![0.1, 0.2],
            vec![-0.5, 0.9],
            vec![0.3, 0.3],
            vec![-0.5, 0.9],
            vec![0.1, 0.2],
        ];
        let xs = seq(rows);
        let (a, _) = lstm_sequence_forward(&p, &xs).unwrap();
        let out = blstm_forward(&p, &p, &xs, Merge::Concat).unwrap();
        let n = a.len();
        for t in 0..n {
            assert_eq!(out.merged[t], [a[t].clone(), a[n - 1 - t].clone()].concat());
        }
    }

    #[test]
    fn zero_input_weight_columns_get_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = LstmParams::init_uniform(3, 2, false, &mut rng);
        // input component 1 is always zero
        let xs = seq(vec![vec![0.5, 0.0, -0.2], vec![0.1, 0.0, 0.7]]);
        let (_, caches) = lstm_sequence_forward(&p, &xs).unwrap();
        let dy = vec![vec![0.3, -0.1], vec![1.0, 0.4]];
        let g = lstm_sequence_backward(&p, &caches, &dy).unwrap();
        for w in [&g.w_i, &g.w_f, &g.w_o, &g.w_g] {
            for r in 0..2 {
                assert_eq!(w[(r, 1)], 0.0);
            }
        }
    }
}
