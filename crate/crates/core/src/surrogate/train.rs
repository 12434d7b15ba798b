//! Plain SGD over whole-window BPTT gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{forward_sequence, sequence_loss_and_grad, LstmParams};
use crate::error::{Error, Result};

/// One training sequence: inputs and targets aligned step by step.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainHyper {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub clip_norm: f64,
    pub init_scale: f64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            lr: 0.01,
            epochs: 300,
            seed: 42,
            clip_norm: 5.0,
            init_scale: 0.1,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config(
                "train.lr",
                format!("must be finite and >= 0, got {}", self.lr),
            ));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::config(
                "train.clip_norm",
                format!("must be > 0, got {}", self.clip_norm),
            ));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::config(
                "train.init_scale",
                format!("must be finite and >= 0, got {}", self.init_scale),
            ));
        }
        Ok(())
    }
}

/// Mean squared errors after an epoch; epoch 0 is the initialisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub test_mse: Option<f64>,
}

/// Seeded uniform initialisation.
pub fn init_params(hidden: usize, input: usize, output: usize, hyper: &TrainHyper) -> LstmParams {
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    LstmParams::random(hidden, input, output, hyper.init_scale, &mut rng)
}

/// Element-weighted MSE over a set of sequences.
pub fn dataset_mse(params: &LstmParams, seqs: &[Sequence]) -> Result<f64> {
    let mut sse = 0.0;
    let mut count = 0usize;
    for s in seqs {
        let pred = forward_sequence(params, &s.inputs)?;
        for (p, y) in pred.iter().zip(&s.targets) {
            for (a, b) in p.iter().zip(y) {
                sse += (a - b) * (a - b);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::Input("no sequences to evaluate".into()));
    }
    Ok(sse / count as f64)
}

fn zero_like(p: &LstmParams) -> LstmParams {
    LstmParams::zeros(p.hidden_size, p.input_size, p.output_size)
}

/// Trains from `init`, one update per sequence in a seeded shuffled order.
/// Each update uses the full-window gradient clipped to `clip_norm` in global
/// L2 norm.
pub fn train_bptt(
    init: LstmParams,
    train: &[Sequence],
    test: &[Sequence],
    hyper: &TrainHyper,
) -> Result<(LstmParams, Vec<LossRecord>)> {
    hyper.validate()?;
    init.validate()?;
    if train.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    let mut params = init;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grad = zero_like(&params);

    let record = |epoch: usize, p: &LstmParams| -> Result<LossRecord> {
        let train_mse = dataset_mse(p, train)?;
        let test_mse = if test.is_empty() {
            None
        } else {
            Some(dataset_mse(p, test)?)
        };
        if !train_mse.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                loss: train_mse,
            });
        }
        Ok(LossRecord {
            epoch,
            train_mse,
            test_mse,
        })
    };
    let mut curve = vec![record(0, &params)?];

    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        for &s in &order {
            grad.blocks_mut().iter_mut().for_each(|b| b.fill(0.0));
            let loss =
                sequence_loss_and_grad(&params, &train[s].inputs, &train[s].targets, &mut grad)?;
            let norm = grad.norm();
            if !loss.is_finite() || !norm.is_finite() {
                return Err(Error::TrainingDiverged { epoch, loss });
            }
            let factor = if norm > hyper.clip_norm {
                hyper.clip_norm / norm
            } else {
                1.0
            };
            let step = hyper.lr * factor;
            for (p, g) in params.blocks_mut().into_iter().zip(grad.blocks()) {
                for (pv, gv) in p.iter_mut().zip(g) {
                    *pv -= step * gv;
                }
            }
        }
        curve.push(record(epoch, &params)?);
    }
    Ok((params, curve))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One-step-ahead prediction over a single period sampled 10 times.
    fn sine_fixture() -> Sequence {
        let s = |k: i32| vec![(2.0 * std::f64::consts::PI * k as f64 / 10.0).sin()];
        Sequence {
            inputs: (0..10).map(|k| s(k - 1)).collect(),
            targets: (0..10).map(s).collect(),
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let hyper = TrainHyper {
            lr: 0.0,
            epochs: 5,
            ..TrainHyper::default()
        };
        let init = init_params(4, 1, 1, &hyper);
        let (p, curve) = train_bptt(init.clone(), &[sine_fixture()], &[], &hyper).unwrap();
        assert_eq!(p, init);
        assert_eq!(curve.len(), 6);
        assert!(curve
            .iter()
            .all(|r| r.train_mse == curve[0].train_mse && r.test_mse.is_none()));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let h = TrainHyper::default();
        let a = init_params(5, 2, 3, &h);
        assert_eq!(a, init_params(5, 2, 3, &h));
        assert_ne!(a, init_params(5, 2, 3, &TrainHyper { seed: 7, ..h }));
        assert!(a
            .blocks()
            .iter()
            .flat_map(|b| b.iter())
            .all(|v| v.abs() <= 0.1));
    }

    #[test]
    fn overfits_sine() {
        let hyper = TrainHyper {
            epochs: 2000,
            ..TrainHyper::default()
        };
        let seq = sine_fixture();
        let (_, curve) = train_bptt(init_params(8, 1, 1, &hyper), &[seq], &[], &hyper).unwrap();
        let last = curve.last().unwrap().train_mse;
        assert!(last < 1e-3, "final mse {last}");
    }

    #[test]
    fn divergence_is_reported() {
        let hyper = TrainHyper {
            epochs: 3,
            ..TrainHyper::default()
        };
        let mut seq = sine_fixture();
        seq.targets[3][0] = f64::INFINITY;
        let err = train_bptt(init_params(3, 1, 1, &hyper), &[seq], &[], &hyper).unwrap_err();
        assert!(
            matches!(err, Error::TrainingDiverged { epoch: 0, .. }),
            "{err:?}"
        );
    }
}
