//! Central finite-difference oracle for [`model_backward`](super::model_backward).
//!
//! Loss differences are taken in `f64` through the production forward pass.
//! A parameter whose gradient is too small for `f64` differences to resolve
//! (absolute roundoff is around 1e-11 at `eps = 1e-5`) is re-differenced with
//! an independent double-double evaluation of the same loss.

use super::model::{loss, loss_and_gradients, Direction, ModelParams, Readout};
use super::{Merge, NnError};
use crate::ddouble::DoubleDouble as Dd;
use crate::features::FeatureMatrix;

/// Which evaluator supplies `L(θ ± ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FdPrecision {
    /// Production forward pass in `f64` only.
    Double,
    /// Double-double evaluator for every parameter.
    Extended,
    /// `f64`, re-evaluated in double-double where the `f64` difference
    /// disagrees with the analytic gradient by more than 1e-7 relative.
    #[default]
    Adaptive,
}

/// Worst disagreement between analytic and numerical gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_block: &'static str,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub params_checked: usize,
    /// Parameters differenced with the double-double evaluator.
    pub params_extended: usize,
}

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

const REFINE_REL: f64 = 1e-7;

/// Perturbs every scalar parameter by `±eps` and compares
/// `(L(θ+ε) − L(θ−ε)) / 2ε` with the backpropagated gradient.
pub fn grad_check(m: &ModelParams, xs: &FeatureMatrix, label: usize, eps: f64) -> Result<GradCheckReport, NnError> {
    grad_check_with(m, xs, label, eps, FdPrecision::default())
}

pub fn grad_check_with(
    m: &ModelParams,
    xs: &FeatureMatrix,
    label: usize,
    eps: f64,
    precision: FdPrecision,
) -> Result<GradCheckReport, NnError> {
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(NnError::Config(format!("eps {eps} outside (0, 1e-2]")));
    }
    let (_, grads) = loss_and_gradients(m, xs, label)?;
    let names = m.block_names();
    let analytic_blocks = grads.blocks();
    let extended = ExtendedLoss::new(m, xs, label);
    let mut probe = m.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_block: names[0],
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        params_checked: 0,
        params_extended: 0,
    };
    for (b, name) in names.iter().enumerate() {
        for i in 0..analytic_blocks[b].len() {
            let analytic = analytic_blocks[b][i];
            let mut numeric = match precision {
                FdPrecision::Extended => f64::NAN,
                _ => {
                    let orig = probe.blocks()[b][i];
                    probe.blocks_mut()[b][i] = orig + eps;
                    let up = loss(&probe, xs, label)?;
                    probe.blocks_mut()[b][i] = orig - eps;
                    let down = loss(&probe, xs, label)?;
                    probe.blocks_mut()[b][i] = orig;
                    (up - down) / (2.0 * eps)
                }
            };
            let refine = match precision {
                FdPrecision::Double => false,
                FdPrecision::Extended => true,
                FdPrecision::Adaptive => !(relative_error(analytic, numeric) <= REFINE_REL),
            };
            if refine {
                numeric = extended.central_difference(b, i, eps);
                report.params_extended += 1;
            }
            let err = relative_error(analytic, numeric);
            report.params_checked += 1;
            if err > report.max_rel_error || err.is_nan() {
                report.max_rel_error = err;
                report.worst_block = name;
                report.worst_index = i;
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

/// Double-double transliteration of the model loss. Shares no code with the
/// production forward pass. Unperturbed direction outputs are cached so a
/// perturbation only re-runs the recurrence it touches.
struct ExtendedLoss<'a> {
    model: &'a ModelParams,
    blocks: Vec<Vec<Dd>>,
    steps: Vec<Vec<Dd>>,
    label: usize,
    fwd: Vec<Vec<Dd>>,
    bwd: Option<Vec<Vec<Dd>>>,
}

impl<'a> ExtendedLoss<'a> {
    fn new(model: &'a ModelParams, xs: &FeatureMatrix, label: usize) -> Self {
        let blocks: Vec<Vec<Dd>> = model
            .blocks()
            .iter()
            .map(|b| b.iter().map(|&v| Dd::from_f64(v)).collect())
            .collect();
        let steps: Vec<Vec<Dd>> = (0..xs.steps())
            .map(|t| xs.step(t).iter().map(|&v| Dd::from_f64(v)).collect())
            .collect();
        let (d, h) = (model.input_dim(), model.hidden());
        let fwd = run_lstm(&blocks[0..8], d, h, steps.iter());
        let bwd = (model.arch.direction == Direction::Bidirectional)
            .then(|| run_lstm(&blocks[8..16], d, h, steps.iter().rev()));
        Self {
            model,
            blocks,
            steps,
            label,
            fwd,
            bwd,
        }
    }

    fn central_difference(&self, block: usize, index: usize, eps: f64) -> f64 {
        let orig = self.blocks[block][index].hi;
        let up = self.loss_with(block, index, Dd::sum_f64(orig, eps));
        let down = self.loss_with(block, index, Dd::sum_f64(orig, -eps));
        ((up - down) / Dd::from_f64(2.0 * eps)).to_f64()
    }

    fn loss_with(&self, block: usize, index: usize, value: Dd) -> Dd {
        let (d, h) = (self.model.input_dim(), self.model.hidden());
        let nb = self.blocks.len();
        let perturbed = |range: std::ops::Range<usize>| {
            let mut p = self.blocks[range.clone()].to_vec();
            p[block - range.start][index] = value;
            p
        };
        let recomputed;
        let (fwd, bwd) = if block < 8 {
            recomputed = run_lstm(&perturbed(0..8), d, h, self.steps.iter());
            (&recomputed, self.bwd.as_ref())
        } else if block < nb - 2 {
            recomputed = run_lstm(&perturbed(8..16), d, h, self.steps.iter().rev());
            (&self.fwd, Some(&recomputed))
        } else {
            (&self.fwd, self.bwd.as_ref())
        };
        let head = if block >= nb - 2 {
            perturbed(nb - 2..nb)
        } else {
            self.blocks[nb - 2..].to_vec()
        };

        let t_len = self.steps.len();
        let merged: Vec<Vec<Dd>> = match bwd {
            None => fwd.clone(),
            Some(bwd) => (0..t_len)
                .map(|t| {
                    let yb = &bwd[t_len - 1 - t];
                    match self.model.arch.merge {
                        Merge::Concat => fwd[t].iter().chain(yb).copied().collect(),
                        Merge::Sum => fwd[t].iter().zip(yb).map(|(&a, &b)| a + b).collect(),
                    }
                })
                .collect(),
        };
        let readout: Vec<Dd> = match self.model.arch.readout {
            Readout::Last => merged[t_len - 1].clone(),
            Readout::Mean => {
                let mut acc = vec![Dd::ZERO; merged[0].len()];
                for y in &merged {
                    for (a, &v) in acc.iter_mut().zip(y) {
                        *a = *a + v;
                    }
                }
                let n = Dd::from_f64(t_len as f64);
                acc.into_iter().map(|a| a / n).collect()
            }
        };
        let (dense_w, dense_b) = (&head[0], &head[1]);
        let width = readout.len();
        let logits: Vec<Dd> = (0..dense_b.len())
            .map(|k| {
                readout
                    .iter()
                    .enumerate()
                    .fold(dense_b[k], |acc, (j, &v)| acc + dense_w[k * width + j] * v)
            })
            .collect();
        let max = logits.iter().copied().fold(logits[0], |m, z| if z > m { z } else { m });
        let exps: Vec<Dd> = logits.iter().map(|&z| (z - max).exp()).collect();
        let total = exps.iter().copied().fold(Dd::ZERO, |a, e| a + e);
        let p_label = exps[self.label] / total;
        let floor = Dd::from_f64(super::PROB_FLOOR);
        -(if p_label > floor { p_label } else { floor }).ln()
    }
}

/// Runs one recurrence; `gates` holds W_i W_f W_o W_g b_i b_f b_o b_g.
fn run_lstm<'s>(gates: &[Vec<Dd>], d: usize, h: usize, steps: impl Iterator<Item = &'s Vec<Dd>>) -> Vec<Vec<Dd>> {
    let width = d + h;
    let mut c = vec![Dd::ZERO; h];
    let mut y = vec![Dd::ZERO; h];
    let mut out = Vec::new();
    for x in steps {
        let z: Vec<Dd> = x.iter().chain(&y).copied().collect();
        let pre = |g: usize, k: usize| {
            let w = &gates[g][k * width..(k + 1) * width];
            w.iter().zip(&z).fold(gates[g + 4][k], |acc, (&a, &b)| acc + a * b)
        };
        let mut next_y = vec![Dd::ZERO; h];
        for k in 0..h {
            let i = pre(0, k).sigmoid();
            let f = pre(1, k).sigmoid();
            let o = pre(2, k).sigmoid();
            let g = pre(3, k).tanh();
            c[k] = f * c[k] + i * g;
            next_y[k] = o * c[k].tanh();
        }
        y = next_y;
        out.push(y.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;
    use crate::nn::{Architecture, ModelConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(d: usize, h: usize, t: usize, arch: Architecture, seed: u64) -> (ModelParams, FeatureMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs = FeatureMatrix::from_rows(
            (0..t)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
            FeatureKind::Raw,
        )
        .unwrap();
        let cfg = ModelConfig {
            input_dim: d,
            hidden: h,
            arch,
            forget_bias_one: false,
        };
        (ModelParams::init(&cfg, seed).unwrap(), xs)
    }

    #[test]
    fn extended_loss_matches_production_loss() {
        for (seed, direction, merge, readout) in [
            (1, Direction::Unidirectional, Merge::Concat, Readout::Last),
            (2, Direction::Bidirectional, Merge::Concat, Readout::Mean),
            (3, Direction::Bidirectional, Merge::Sum, Readout::Last),
        ] {
            let arch = Architecture {
                direction,
                merge,
                readout,
            };
            let (m, xs) = instance(3, 4, 6, arch, seed);
            let ext = ExtendedLoss::new(&m, &xs, 5);
            let v = ext.blocks[0][0];
            let l_ext = ext.loss_with(0, 0, v).to_f64();
            let l = loss(&m, &xs, 5).unwrap();
            assert!((l - l_ext).abs() < 1e-13, "{l} vs {l_ext}");
        }
    }

    #[test]
    fn small_instance_passes_all_modes() {
        for (seed, direction, merge, readout) in [
            (10, Direction::Unidirectional, Merge::Concat, Readout::Last),
            (11, Direction::Unidirectional, Merge::Concat, Readout::Mean),
            (12, Direction::Bidirectional, Merge::Concat, Readout::Last),
            (13, Direction::Bidirectional, Merge::Sum, Readout::Mean),
        ] {
            let arch = Architecture {
                direction,
                merge,
                readout,
            };
            let (m, xs) = instance(3, 4, 5, arch, seed);
            let r = grad_check(&m, &xs, (seed % 8) as usize, 1e-5).unwrap();
            assert!(r.max_rel_error <= 1e-6, "{arch:?}: {r:?}");
            assert_eq!(r.params_checked, m.num_params());
        }
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // perturbing the model after the fact breaks agreement
        let (m, xs) = instance(2, 3, 4, Architecture::default(), 3);
        let (_, g) = loss_and_gradients(&m, &xs, 1).unwrap();
        let mut shifted = m.clone();
        shifted.forward.w_f.as_mut_slice()[0] += 0.5;
        let (_, g2) = loss_and_gradients(&shifted, &xs, 1).unwrap();
        assert!(relative_error(g.forward.w_f.as_slice()[0], g2.forward.w_f.as_slice()[0]) > 1e-3);
    }

    #[test]
    fn rejects_bad_eps() {
        let (m, xs) = instance(2, 2, 2, Architecture::default(), 0);
        assert!(grad_check(&m, &xs, 0, 0.0).is_err());
        assert!(grad_check(&m, &xs, 0, 0.1).is_err());
    }
}
