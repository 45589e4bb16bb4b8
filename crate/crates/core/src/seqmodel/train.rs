use std::io::Write;
use std::path::Path;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{loss, save_checkpoint, AdamState, ModelError, ModelHyperparams, ModelParams, TrainingExample};

/// Examples per parallel work unit. Fixed so the reduction order never
/// depends on the thread count.
const CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of examples held out for reporting only.
    pub holdout_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 10, seed: 0, holdout_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub holdout_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Mean loss on the training split before the first update.
    pub initial_loss: f64,
    pub train_examples: usize,
    pub holdout_examples: usize,
}

/// Mean loss over `batch` and the gradient of that mean.
pub fn batch_gradient(params: &ModelParams, batch: &[&TrainingExample]) -> (f64, Vec<f64>) {
    let n = params.len();
    if batch.is_empty() {
        return (0.0, vec![0.0; n]);
    }
    let scale = 1.0 / batch.len() as f64;
    let parts: Vec<(f64, Vec<f64>)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0; n];
            let mut l = 0.0;
            for ex in chunk {
                l += params.accumulate_gradient(&ex.inputs(params), &ex.target, scale, &mut g);
            }
            (l, g)
        })
        .collect();
    let mut grad = vec![0.0; n];
    let mut total = 0.0;
    for (l, g) in parts {
        total += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    (total * scale, grad)
}

fn mean_loss(params: &ModelParams, examples: &[&TrainingExample]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let sum: f64 = examples
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().map(|ex| loss(&params.forward_sparse(&ex.inputs(params)), &ex.target)).sum::<f64>())
        .collect::<Vec<_>>()
        .iter()
        .sum();
    sum / examples.len() as f64
}

fn check_example(params: &ModelParams, ex: &TrainingExample) -> Result<(), ModelError> {
    let d = params.dims();
    if ex.plan.len() != d.plan_width {
        return Err(ModelError::Dimension { what: "plan width".into(), expected: d.plan_width, found: ex.plan.len() });
    }
    if ex.target.pitch.len() != d.n_streams {
        return Err(ModelError::Dimension { what: "target streams".into(), expected: d.n_streams, found: ex.target.pitch.len() });
    }
    let frame_len = d.frame_len();
    for f in &ex.context {
        if let Some(&bad) = f.iter().find(|&&i| i as usize >= frame_len) {
            return Err(ModelError::Dimension { what: "frame index bound".into(), expected: frame_len, found: bad as usize });
        }
    }
    if let Some(&bad) = ex.target.duration.iter().find(|&&i| i >= d.n_durations) {
        return Err(ModelError::Dimension { what: "duration class bound".into(), expected: d.n_durations, found: bad });
    }
    Ok(())
}

/// Minibatch Adam training. The split between training and holdout examples
/// and each epoch's shuffle are fixed by `config.seed`. When
/// `checkpoint_dir` is given, `epoch-NNN.json` is written after every epoch.
pub fn train(
    params: &mut ModelParams,
    hyper: &ModelHyperparams,
    examples: &[TrainingExample],
    config: &TrainConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainReport, ModelError> {
    if examples.is_empty() {
        return Err(ModelError::NoExamples);
    }
    for ex in examples {
        check_example(params, ex)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut rng);
    let n_hold = ((examples.len() as f64) * config.holdout_fraction.clamp(0.0, 0.5)).floor() as usize;
    let (hold_idx, train_idx) = order.split_at(n_hold);
    let holdout: Vec<&TrainingExample> = hold_idx.iter().map(|&i| &examples[i]).collect();
    let mut train_set: Vec<&TrainingExample> = train_idx.iter().map(|&i| &examples[i]).collect();

    let mut report = TrainReport {
        initial_loss: mean_loss(params, &train_set),
        train_examples: train_set.len(),
        holdout_examples: holdout.len(),
        ..TrainReport::default()
    };
    info!("training on {} examples, {} held out, initial loss {:.4}", train_set.len(), holdout.len(), report.initial_loss);
    if let Some(dir) = checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }

    let batch_size = hyper.batch_size.max(1);
    let mut adam = AdamState::new(params.len());
    for epoch in 1..=config.epochs {
        train_set.shuffle(&mut rng);
        let mut sum = 0.0;
        for (b, batch) in train_set.chunks(batch_size).enumerate() {
            let (l, grad) = batch_gradient(params, batch);
            if !l.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(ModelError::NonFiniteLoss { epoch, batch: b });
            }
            sum += l * batch.len() as f64;
            adam.step(params.data_mut(), &grad, &hyper.adam);
            debug!("epoch {epoch} batch {b} loss {l:.5}");
        }
        let stats = EpochStats {
            epoch,
            mean_loss: sum / train_set.len() as f64,
            holdout_loss: (!holdout.is_empty()).then(|| mean_loss(params, &holdout)),
        };
        info!("epoch {epoch}: loss {:.4}, holdout {:?}", stats.mean_loss, stats.holdout_loss);
        report.epochs.push(stats);
        if let Some(dir) = checkpoint_dir {
            save_checkpoint(params, hyper, &dir.join(format!("epoch-{epoch:03}.json")))?;
        }
    }
    Ok(report)
}

/// CSV with header `epoch,mean_loss,holdout_loss`; missing holdout values are empty.
pub fn write_loss_trace<W: Write>(mut w: W, epochs: &[EpochStats]) -> std::io::Result<()> {
    writeln!(w, "epoch,mean_loss,holdout_loss")?;
    for e in epochs {
        match e.holdout_loss {
            Some(h) => writeln!(w, "{},{},{}", e.epoch, e.mean_loss, h)?,
            None => writeln!(w, "{},{},", e.epoch, e.mean_loss)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqmodel::{ModelDims, Target};

    fn tiny() -> (ModelParams, TrainingExample) {
        let dims = ModelDims { n_streams: 2, n_durations: 2, plan_width: 1, layers: 1, units: 6 };
        let p = ModelParams::init(dims, &mut ChaCha8Rng::seed_from_u64(1));
        let ex = TrainingExample {
            context: vec![vec![0, 90, 92, 182], vec![5, 91, 97, 183]],
            plan: vec![1.0],
            target: Target { pitch: vec![12, 89], duration: vec![1, 0], masked: vec![false, false] },
            song: 0,
        };
        (p, ex)
    }

    #[test]
    fn zero_epochs_changes_nothing() {
        let (mut p, ex) = tiny();
        let before = p.clone();
        let cfg = TrainConfig { epochs: 0, seed: 0, holdout_fraction: 0.0 };
        let r = train(&mut p, &ModelHyperparams::default(), &[ex], &cfg, None).unwrap();
        assert!(r.epochs.is_empty());
        assert_eq!(p, before);
    }

    #[test]
    fn empty_input_is_an_error() {
        let (mut p, _) = tiny();
        let cfg = TrainConfig::default();
        assert!(matches!(train(&mut p, &ModelHyperparams::default(), &[], &cfg, None), Err(ModelError::NoExamples)));
    }

    #[test]
    fn batch_gradient_is_mean_of_examples() {
        let (p, ex) = tiny();
        let mut other = ex.clone();
        other.target.pitch = vec![40, 3];
        let (l, g) = batch_gradient(&p, &[&ex, &other]);
        let mut g1 = vec![0.0; p.len()];
        let l1 = p.accumulate_gradient(&ex.inputs(&p), &ex.target, 1.0, &mut g1);
        let mut g2 = vec![0.0; p.len()];
        let l2 = p.accumulate_gradient(&other.inputs(&p), &other.target, 1.0, &mut g2);
        assert!((l - (l1 + l2) / 2.0).abs() < 1e-12);
        for i in 0..p.len() {
            assert!((g[i] - (g1[i] + g2[i]) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_trace_csv() {
        let mut out = Vec::new();
        let e = [EpochStats { epoch: 1, mean_loss: 2.5, holdout_loss: Some(3.0) }, EpochStats { epoch: 2, mean_loss: 1.25, holdout_loss: None }];
        write_loss_trace(&mut out, &e).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "epoch,mean_loss,holdout_loss\n1,2.5,3\n2,1.25,\n");
    }
}
