use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Architecture, Dropout, GraphInput, Model, Tensor};
use crate::dataset::make_batches;
use crate::error::{Error, Result};
use crate::graph::{ActivityGraph, FeatureSet, LabelAlphabet};
use crate::model::Minutes;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            learning_rate: 1e-5,
            batch_size: 50,
            epochs: 200,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainParams {
    pub fn check(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return Err(Error::Config("learning rate and batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::Config("invalid Adam constants".into()));
        }
        Ok(())
    }
}

pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(tensors: &[Tensor], params: &TrainParams) -> Self {
        let zeros = || tensors.iter().map(|t| vec![0.0; t.data.len()]).collect();
        Adam {
            lr: params.learning_rate,
            beta1: params.beta1,
            beta2: params.beta2,
            epsilon: params.epsilon,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn step(&mut self, tensors: &mut [Tensor], grads: &[Tensor]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (i, (p, g)) in tensors.iter_mut().zip(grads).enumerate() {
            for (j, (w, &gv)) in p.data.iter_mut().zip(&g.data).enumerate() {
                let m = &mut self.m[i][j];
                let v = &mut self.v[i][j];
                *m = self.beta1 * *m + (1.0 - self.beta1) * gv;
                *v = self.beta2 * *v + (1.0 - self.beta2) * gv * gv;
                *w -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
            }
        }
    }
}

/// Mini-batch Adam on mean cross-entropy; returns the mean training loss of
/// each epoch (measured with dropout active, as seen by the optimiser).
pub fn train(model: &mut Model, data: &[(GraphInput, u8)], params: &TrainParams) -> Result<Vec<f64>> {
    params.check()?;
    if data.is_empty() {
        return Err(Error::Config("cannot train on an empty dataset".into()));
    }
    model.check()?;
    let mut adam = Adam::new(&model.tensors, params);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut curve = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        let mut total = 0.0;
        for batch in make_batches(data.len(), params.batch_size, params.seed, epoch as u64) {
            let mut grads = model.zero_grads();
            let scale = 1.0 / batch.len() as f64;
            for &i in &batch {
                let (input, label) = &data[i];
                let act = model.forward(input, Dropout::Sample(&mut rng))?;
                total += act.loss(*label);
                model.backward(input, &act, *label, scale, &mut grads);
            }
            adam.step(&mut model.tensors, &grads);
        }
        curve.push(total / data.len() as f64);
        model.epochs_trained += 1;
    }
    Ok(curve)
}

/// Builds the alphabet and `k` from the training graphs, then trains a fresh model.
pub fn fit(
    examples: &[(&ActivityGraph, Minutes, u8)],
    architecture: &Architecture,
    feature_set: FeatureSet,
    params: &TrainParams,
) -> Result<(Model, Vec<f64>)> {
    if examples.is_empty() {
        return Err(Error::Config("cannot train on an empty dataset".into()));
    }
    let alphabet = LabelAlphabet::build(examples.iter().map(|e| e.0));
    let counts: Vec<usize> = examples.iter().map(|e| e.0.n()).collect();
    let k = architecture.select_k(&counts)?;
    let mut model = Model::new(architecture.clone(), alphabet, feature_set, k, params.seed)?;
    let data: Vec<(GraphInput, u8)> = examples
        .iter()
        .map(|&(g, horizon, y)| (model.graph_input(g, horizon), y))
        .collect();
    let curve = train(&mut model, &data, params)?;
    Ok((model, curve))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_neg: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_pos: u64,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl Confusion {
    pub fn add(&mut self, label: u8, predicted: u8) {
        match (label, predicted) {
            (0, 0) => self.true_neg += 1,
            (0, _) => self.false_pos += 1,
            (_, 0) => self.false_neg += 1,
            _ => self.true_pos += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_neg + self.false_pos + self.false_neg + self.true_pos
    }

    /// Rates are 0 when their class is absent.
    pub fn tpr(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_neg)
    }

    pub fn tnr(&self) -> f64 {
        ratio(self.true_neg, self.true_neg + self.false_pos)
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.false_pos, self.true_neg + self.false_pos)
    }

    pub fn fnr(&self) -> f64 {
        ratio(self.false_neg, self.true_pos + self.false_neg)
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.true_pos + self.true_neg, self.total())
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            accuracy: self.accuracy(),
            balanced_accuracy: 0.5 * (self.tpr() + self.tnr()),
            tpr: self.tpr(),
            tnr: self.tnr(),
            confusion: *self,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub confusion: Confusion,
}

/// Predicts feasible when the class-1 probability exceeds one half.
pub fn evaluate(model: &Model, data: &[(GraphInput, u8)]) -> Result<Metrics> {
    let mut c = Confusion::default();
    for (input, label) in data {
        let predicted = u8::from(model.score(input)? > 0.5);
        c.add(*label, predicted);
    }
    Ok(c.metrics())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_rates() {
        let c = Confusion { true_neg: 543, false_pos: 250, false_neg: 284, true_pos: 523 };
        assert_eq!(c.total(), 1600);
        assert!((c.accuracy() - 1066.0 / 1600.0).abs() < 1e-15);
        assert!((c.tnr() + c.fpr() - 1.0).abs() < 1e-15);
        let constant = Confusion { true_neg: 0, false_pos: 50, false_neg: 0, true_pos: 50 };
        assert_eq!((constant.accuracy(), constant.tpr(), constant.tnr()), (0.5, 1.0, 0.0));
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut t = vec![Tensor { name: "w".into(), shape: vec![2], data: vec![1.0, 1.0] }];
        let g = vec![Tensor { name: "w".into(), shape: vec![2], data: vec![3.0, -0.5] }];
        let params = TrainParams { learning_rate: 0.1, ..TrainParams::default() };
        let mut adam = Adam::new(&t, &params);
        adam.step(&mut t, &g);
        // Bias-corrected first step is lr * sign(g) up to epsilon.
        assert!((t[0].data[0] - 0.9).abs() < 1e-7);
        assert!((t[0].data[1] - 1.1).abs() < 1e-7);
    }
}
