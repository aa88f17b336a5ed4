//! Full classifier: (B)LSTM layer, readout, dense softmax head over the eight
//! diagnosis classes, its loss, analytic gradients and the SGD update.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::activation::{cross_entropy, softmax, PROB_FLOOR};
use super::lstm::{blstm_forward, lstm_sequence_backward, lstm_sequence_forward, LstmParams, Merge, StepCache};
use super::NnError;
use crate::features::FeatureMatrix;
use crate::linalg::Matrix;
use crate::NUM_CLASSES;

/// Dense output layer: `logits = W h + b` with `W` of shape `8 × H_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl DenseParams {
    pub fn zeros(input_dim: usize) -> Self {
        Self {
            w: Matrix::zeros(NUM_CLASSES, input_dim),
            b: vec![0.0; NUM_CLASSES],
        }
    }

    pub fn init_uniform<R: Rng + ?Sized>(input_dim: usize, rng: &mut R) -> Self {
        let mut d = Self::zeros(input_dim);
        let bound = 1.0 / (input_dim as f64).sqrt();
        for x in d.w.as_mut_slice() {
            *x = rng.random_range(-bound..=bound);
        }
        d
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn logits(&self, h: &[f64]) -> Result<Vec<f64>, NnError> {
        if h.len() != self.w.cols() {
            return Err(NnError::Shape(format!(
                "dense input {} for W with {} columns",
                h.len(),
                self.w.cols()
            )));
        }
        let mut z = self.w.matvec(h);
        z.iter_mut().zip(&self.b).for_each(|(z, b)| *z += b);
        Ok(z)
    }
}

/// `softmax(W h + b)`.
pub fn dense_softmax_forward(d: &DenseParams, h: &[f64]) -> Result<Vec<f64>, NnError> {
    Ok(softmax(&d.logits(h)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    #[default]
    Unidirectional,
    Bidirectional,
}

/// How per-step outputs become the dense-layer input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Readout {
    /// Output at the final step.
    #[default]
    Last,
    /// Mean over all steps.
    Mean,
}

macro_rules! str_enum {
    ($t:ty { $($v:ident => $s:literal),+ $(,)? }) => {
        impl $t {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$v => $s),+ }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $t {
            type Err = NnError;
            fn from_str(s: &str) -> Result<Self, NnError> {
                match s.to_ascii_lowercase().as_str() {
                    $($s => Ok(Self::$v),)+
                    other => Err(NnError::Config(format!(
                        concat!("unknown ", stringify!($t), " `{}`"), other
                    ))),
                }
            }
        }
    };
}

str_enum!(Direction { Unidirectional => "uni", Bidirectional => "bi" });
str_enum!(Readout { Last => "last", Mean => "mean" });
str_enum!(Merge { Concat => "concat", Sum => "sum" });

/// Layer layout options.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Architecture {
    pub direction: Direction,
    pub merge: Merge,
    pub readout: Readout,
}

/// Shapes and initialization options for a fresh model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub arch: Architecture,
    pub forget_bias_one: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: Architecture,
    pub forward: LstmParams,
    pub backward: Option<LstmParams>,
    pub dense: DenseParams,
}

/// Gradients share the parameter layout.
pub type Gradients = ModelParams;

impl ModelParams {
    /// Seeded initialization; draws the forward layer, then the backward
    /// layer, then the dense layer from one ChaCha8 stream.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self, NnError> {
        if cfg.input_dim == 0 || cfg.hidden == 0 {
            return Err(NnError::Config("input_dim and hidden must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let forward = LstmParams::init_uniform(cfg.input_dim, cfg.hidden, cfg.forget_bias_one, &mut rng);
        let backward = (cfg.arch.direction == Direction::Bidirectional)
            .then(|| LstmParams::init_uniform(cfg.input_dim, cfg.hidden, cfg.forget_bias_one, &mut rng));
        let dense = DenseParams::init_uniform(readout_dim(cfg.arch, cfg.hidden), &mut rng);
        Self::new(cfg.arch, forward, backward, dense)
    }

    pub fn new(
        arch: Architecture,
        forward: LstmParams,
        backward: Option<LstmParams>,
        dense: DenseParams,
    ) -> Result<Self, NnError> {
        let m = Self {
            arch,
            forward,
            backward,
            dense,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        match (self.arch.direction, &self.backward) {
            (Direction::Unidirectional, Some(_)) => {
                return Err(NnError::Shape(
                    "unidirectional model carries backward parameters".into(),
                ))
            }
            (Direction::Bidirectional, None) => {
                return Err(NnError::Shape("bidirectional model lacks backward parameters".into()))
            }
            (Direction::Bidirectional, Some(b)) if !b.same_shape(&self.forward) => {
                return Err(NnError::Shape(
                    "backward parameters differ in shape from forward".into(),
                ))
            }
            _ => {}
        }
        let want = readout_dim(self.arch, self.hidden());
        if self.dense.w.shape() != (NUM_CLASSES, want) || self.dense.b.len() != NUM_CLASSES {
            return Err(NnError::Shape(format!(
                "dense layer is {:?}, expected ({NUM_CLASSES}, {want})",
                self.dense.w.shape()
            )));
        }
        if !self.blocks().iter().all(|b| b.iter().all(|x| x.is_finite())) {
            return Err(NnError::NonFinite);
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim()
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }

    /// Zero-valued gradients with this model's shapes.
    pub fn zeros_like(&self) -> Self {
        let (d, h) = (self.input_dim(), self.hidden());
        Self {
            arch: self.arch,
            forward: LstmParams::zeros(d, h),
            backward: self.backward.as_ref().map(|_| LstmParams::zeros(d, h)),
            dense: DenseParams::zeros(self.dense.input_dim()),
        }
    }

    /// Parameter blocks in fixed order: forward gates (W_i W_f W_o W_g b_i b_f
    /// b_o b_g), the same for the backward layer if present, dense W, dense b.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.forward.blocks().to_vec();
        if let Some(b) = &self.backward {
            v.extend(b.blocks());
        }
        v.push(self.dense.w.as_slice());
        v.push(&self.dense.b);
        v
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::with_capacity(18);
        v.extend(self.forward.blocks_mut());
        if let Some(b) = &mut self.backward {
            v.extend(b.blocks_mut());
        }
        v.push(self.dense.w.as_mut_slice());
        v.push(&mut self.dense.b);
        v
    }

    pub fn block_names(&self) -> Vec<&'static str> {
        const GATES: [&str; 8] = ["W_i", "W_f", "W_o", "W_g", "b_i", "b_f", "b_o", "b_g"];
        const BACK: [&str; 8] = [
            "bwd.W_i", "bwd.W_f", "bwd.W_o", "bwd.W_g", "bwd.b_i", "bwd.b_f", "bwd.b_o", "bwd.b_g",
        ];
        let mut v = GATES.to_vec();
        if self.backward.is_some() {
            v.extend(BACK);
        }
        v.extend(["dense.W", "dense.b"]);
        v
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.arch == other.arch
            && self
                .blocks()
                .iter()
                .map(|b| b.len())
                .eq(other.blocks().iter().map(|b| b.len()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|b| b.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, alpha: f64) {
        for b in self.blocks_mut() {
            b.iter_mut().for_each(|x| *x *= alpha);
        }
    }

    /// Adds `other` into `self` elementwise.
    pub fn accumulate(&mut self, other: &Self) -> Result<(), NnError> {
        if !self.same_shape(other) {
            return Err(NnError::Shape("gradient accumulation shape mismatch".into()));
        }
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            a.iter_mut().zip(b).for_each(|(a, b)| *a += b);
        }
        Ok(())
    }
}

fn readout_dim(arch: Architecture, hidden: usize) -> usize {
    match (arch.direction, arch.merge) {
        (Direction::Bidirectional, Merge::Concat) => 2 * hidden,
        _ => hidden,
    }
}

/// Everything produced by a forward pass that the backward pass consumes.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub forward_caches: Vec<StepCache>,
    pub backward_caches: Option<Vec<StepCache>>,
    /// Per-step layer outputs (merged in bidirectional mode).
    pub outputs: Vec<Vec<f64>>,
    /// Dense-layer input after readout.
    pub readout: Vec<f64>,
    pub probs: Vec<f64>,
}

pub fn model_forward(m: &ModelParams, xs: &FeatureMatrix) -> Result<ForwardPass, NnError> {
    if xs.dim() != m.input_dim() {
        return Err(NnError::Shape(format!(
            "features have D = {}, model expects {}",
            xs.dim(),
            m.input_dim()
        )));
    }
    let (outputs, forward_caches, backward_caches) = match &m.backward {
        None => {
            let (ys, caches) = lstm_sequence_forward(&m.forward, xs)?;
            (ys, caches, None)
        }
        Some(pb) => {
            let pass = blstm_forward(&m.forward, pb, xs, m.arch.merge)?;
            (pass.merged, pass.forward_caches, Some(pass.backward_caches))
        }
    };
    let readout = match m.arch.readout {
        Readout::Last => outputs.last().expect("non-empty sequence").clone(),
        Readout::Mean => {
            let n = outputs.len() as f64;
            let mut acc = vec![0.0; outputs[0].len()];
            for y in &outputs {
                acc.iter_mut().zip(y).for_each(|(a, v)| *a += v);
            }
            acc.into_iter().map(|a| a / n).collect()
        }
    };
    let probs = dense_softmax_forward(&m.dense, &readout)?;
    Ok(ForwardPass {
        forward_caches,
        backward_caches,
        outputs,
        readout,
        probs,
    })
}

fn check_label(label: usize) -> Result<(), NnError> {
    if label >= NUM_CLASSES {
        return Err(NnError::InvalidLabel(label));
    }
    Ok(())
}

/// Softmax cross-entropy of one sequence.
pub fn loss(m: &ModelParams, xs: &FeatureMatrix, label: usize) -> Result<f64, NnError> {
    check_label(label)?;
    Ok(cross_entropy(&model_forward(m, xs)?.probs, label))
}

/// Probability vector for one sequence.
pub fn predict_proba(m: &ModelParams, xs: &FeatureMatrix) -> Result<Vec<f64>, NnError> {
    Ok(model_forward(m, xs)?.probs)
}

/// Exact gradient of the cross-entropy loss by backpropagation through time.
pub fn model_backward(m: &ModelParams, pass: &ForwardPass, label: usize) -> Result<Gradients, NnError> {
    check_label(label)?;
    let t_len = pass.forward_caches.len();
    if t_len == 0 || pass.outputs.len() != t_len || pass.backward_caches.is_some() != m.backward.is_some() {
        return Err(NnError::Shape("forward pass does not match model".into()));
    }
    let h = m.hidden();
    let mut grads = m.zeros_like();

    // softmax + cross-entropy; the floored branch of the loss is flat
    let mut dlogits = pass.probs.clone();
    if pass.probs[label] < PROB_FLOOR {
        dlogits.fill(0.0);
    } else {
        dlogits[label] -= 1.0;
    }
    grads.dense.w.add_outer(&dlogits, &pass.readout);
    grads.dense.b.copy_from_slice(&dlogits);
    let mut dreadout = vec![0.0; m.dense.input_dim()];
    m.dense.w.matvec_transpose_acc(&dlogits, &mut dreadout);

    let mut d_out = vec![vec![0.0; dreadout.len()]; t_len];
    match m.arch.readout {
        Readout::Last => d_out[t_len - 1].copy_from_slice(&dreadout),
        Readout::Mean => {
            let inv = 1.0 / t_len as f64;
            for d in &mut d_out {
                d.iter_mut().zip(&dreadout).for_each(|(d, g)| *d = g * inv);
            }
        }
    }

    match (&m.backward, &pass.backward_caches) {
        (None, _) => {
            grads.forward = lstm_sequence_backward(&m.forward, &pass.forward_caches, &d_out)?;
        }
        (Some(pb), Some(bcaches)) => {
            let mut dyf = vec![vec![0.0; h]; t_len];
            let mut dyb = vec![vec![0.0; h]; t_len];
            for (t, d) in d_out.iter().enumerate() {
                let s = t_len - 1 - t;
                let (df, db) = match m.arch.merge {
                    Merge::Concat => (&d[..h], &d[h..]),
                    Merge::Sum => (&d[..], &d[..]),
                };
                dyf[t].iter_mut().zip(df).for_each(|(a, b)| *a += b);
                dyb[s].iter_mut().zip(db).for_each(|(a, b)| *a += b);
            }
            grads.forward = lstm_sequence_backward(&m.forward, &pass.forward_caches, &dyf)?;
            grads.backward = Some(lstm_sequence_backward(pb, bcaches, &dyb)?);
        }
        (Some(_), None) => return Err(NnError::Shape("missing backward caches".into())),
    }
    Ok(grads)
}

/// Loss and gradients for one example.
pub fn loss_and_gradients(m: &ModelParams, xs: &FeatureMatrix, label: usize) -> Result<(f64, Gradients), NnError> {
    check_label(label)?;
    let pass = model_forward(m, xs)?;
    let l = cross_entropy(&pass.probs, label);
    Ok((l, model_backward(m, &pass, label)?))
}

/// `θ ← θ − lr · g` in place.
pub fn sgd_step(m: &mut ModelParams, g: &Gradients, lr: f64) -> Result<(), NnError> {
    if !(lr >= 0.0) || !lr.is_finite() {
        return Err(NnError::Config(format!("learning rate {lr} must be finite and >= 0")));
    }
    if !m.same_shape(g) {
        return Err(NnError::Shape("gradient shape does not match parameters".into()));
    }
    for (p, d) in m.blocks_mut().into_iter().zip(g.blocks()) {
        p.iter_mut().zip(d).for_each(|(p, d)| *p -= lr * d);
    }
    Ok(())
}
