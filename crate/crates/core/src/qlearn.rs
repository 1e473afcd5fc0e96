//! Linear Q-head over RBF features, trained with a semi-gradient TD loss and Adam.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{Decoder, Encoder};
use crate::error::{check_len, Error, Result};
use crate::rbf::FeatureVector;

const HEAD_MAGIC: &[u8; 8] = b"VRBQHEAD";
const HEAD_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("adam betas must lie in [0,1)".into()));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::Config("adam eps must be positive".into()));
        }
        Ok(())
    }
}

/// `Q(s, a) = sum_i w[a, i] * h_i(s)`, no bias, with Adam moment state.
#[derive(Debug, Clone, PartialEq)]
pub struct QHead {
    n_actions: usize,
    n_features: usize,
    /// Row-major `n_actions x n_features`.
    weights: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    step_count: u64,
    adam: AdamConfig,
}

/// A training batch in feature space.
#[derive(Debug, Clone)]
pub struct TdBatch {
    pub features: Vec<FeatureVector>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_features: Vec<FeatureVector>,
    pub terminal: Vec<bool>,
}

impl TdBatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn validate(&self, head: &QHead) -> Result<()> {
        let b = self.actions.len();
        if b == 0 {
            return Err(Error::State("empty batch".into()));
        }
        check_len("batch features", b, self.features.len())?;
        check_len("batch rewards", b, self.rewards.len())?;
        check_len("batch next_features", b, self.next_features.len())?;
        check_len("batch terminal", b, self.terminal.len())?;
        for (x, x2) in self.features.iter().zip(&self.next_features) {
            check_len("feature length", head.n_features, x.len())?;
            check_len("next feature length", head.n_features, x2.len())?;
        }
        if let Some(&a) = self.actions.iter().find(|&&a| a >= head.n_actions) {
            return Err(Error::Config(format!(
                "action {a} out of range for {} actions",
                head.n_actions
            )));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl QHead {
    /// A zero-initialised head with zeroed Adam moments.
    pub fn zeros(n_actions: usize, n_features: usize, adam: AdamConfig) -> Result<Self> {
        if n_actions == 0 || n_features == 0 {
            return Err(Error::Config("head dimensions must be positive".into()));
        }
        adam.validate()?;
        let n = n_actions * n_features;
        Ok(Self {
            n_actions,
            n_features,
            weights: vec![0.0; n],
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
            step_count: 0,
            adam,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, action: usize) -> &[f64] {
        &self.weights[action * self.n_features..(action + 1) * self.n_features]
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn adam(&self) -> &AdamConfig {
        &self.adam
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.adam_m, &self.adam_v)
    }

    /// Replaces the weights wholesale, leaving optimizer state untouched.
    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        check_len("weights", self.weights.len(), weights.len())?;
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numeric("non-finite weight".into()));
        }
        self.weights = weights;
        Ok(())
    }

    /// Resets weights to zero. Optimizer state is left as is.
    pub fn zero_weights(&mut self) {
        self.weights.iter_mut().for_each(|w| *w = 0.0);
    }

    /// Keeps only the listed feature columns (all three arrays), in order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<QHead> {
        if columns.is_empty() {
            return Err(Error::State("no columns selected".into()));
        }
        if let Some(&c) = columns.iter().find(|&&c| c >= self.n_features) {
            return Err(Error::Config(format!("feature column {c} out of range")));
        }
        let pick = |src: &[f64]| -> Vec<f64> {
            (0..self.n_actions)
                .flat_map(|a| columns.iter().map(move |&c| src[a * self.n_features + c]))
                .collect()
        };
        Ok(QHead {
            n_actions: self.n_actions,
            n_features: columns.len(),
            weights: pick(&self.weights),
            adam_m: pick(&self.adam_m),
            adam_v: pick(&self.adam_v),
            step_count: self.step_count,
            adam: self.adam,
        })
    }

    pub fn q_values(&self, features: &[f64]) -> Result<Vec<f64>> {
        check_len("feature length", self.n_features, features.len())?;
        Ok(self.q_unchecked(features))
    }

    fn q_unchecked(&self, features: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.n_features)
            .map(|row| dot(row, features))
            .collect()
    }

    fn max_q(&self, features: &[f64]) -> f64 {
        self.weights
            .chunks_exact(self.n_features)
            .map(|row| dot(row, features))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Bootstrapped targets `r` (terminal) or `r + gamma * max_a' Q(s', a')`
    /// evaluated with `self`, which may be the online head or a frozen copy.
    pub fn td_target(&self, batch: &TdBatch, gamma: f64) -> Result<Vec<f64>> {
        check_gamma(gamma)?;
        batch.validate(self)?;
        Ok(self.targets_unchecked(batch, gamma))
    }

    fn targets_unchecked(&self, batch: &TdBatch, gamma: f64) -> Vec<f64> {
        batch
            .rewards
            .iter()
            .zip(&batch.terminal)
            .zip(&batch.next_features)
            .map(|((&r, &done), next)| {
                if done {
                    r
                } else {
                    r + gamma * self.max_q(next)
                }
            })
            .collect()
    }

    /// Mean squared TD error and its gradient with respect to the weights.
    ///
    /// Targets come from `target_head` (pass `self` for the online variant) and
    /// are held constant when differentiating.
    pub fn loss_and_gradient(
        &self,
        batch: &TdBatch,
        target_head: &QHead,
        gamma: f64,
    ) -> Result<(f64, Vec<f64>)> {
        check_gamma(gamma)?;
        batch.validate(self)?;
        check_len(
            "target head features",
            self.n_features,
            target_head.n_features,
        )?;
        check_len("target head actions", self.n_actions, target_head.n_actions)?;
        let targets = target_head.targets_unchecked(batch, gamma);
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.weights.len()];
        for ((x, &a), y) in batch.features.iter().zip(&batch.actions).zip(&targets) {
            let err = y - dot(self.row(a), x);
            loss += err * err;
            let coef = -2.0 * err * scale;
            let g = &mut grad[a * self.n_features..(a + 1) * self.n_features];
            for (gi, xi) in g.iter_mut().zip(x.iter()) {
                *gi += coef * xi;
            }
        }
        Ok((loss * scale, grad))
    }

    /// Loss only; used for finite-difference checks and logging.
    pub fn loss(&self, batch: &TdBatch, target_head: &QHead, gamma: f64) -> Result<f64> {
        check_gamma(gamma)?;
        batch.validate(self)?;
        let targets = target_head.targets_unchecked(batch, gamma);
        let sum: f64 = batch
            .features
            .iter()
            .zip(&batch.actions)
            .zip(&targets)
            .map(|((x, &a), y)| {
                let e = y - dot(self.row(a), x);
                e * e
            })
            .sum();
        Ok(sum / batch.len() as f64)
    }

    /// One bias-corrected Adam update. A non-finite gradient leaves the head untouched.
    pub fn adam_step(&mut self, grad: &[f64]) -> Result<()> {
        check_len("gradient", self.weights.len(), grad.len())?;
        if let Some(g) = grad.iter().find(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient entry {g}")));
        }
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.adam;
        let t = self.step_count + 1;
        let bc1 = 1.0 - beta1.powf(t as f64);
        let bc2 = 1.0 - beta2.powf(t as f64);
        for (((w, m), v), &g) in self
            .weights
            .iter_mut()
            .zip(self.adam_m.iter_mut())
            .zip(self.adam_v.iter_mut())
            .zip(grad)
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
        self.step_count = t;
        Ok(())
    }

    /// Epsilon-greedy choice; ties in the argmax go to the lowest action index.
    ///
    /// `rng` is only consulted when `epsilon > 0`.
    pub fn greedy_action<R: Rng + ?Sized>(
        &self,
        features: &[f64],
        rng: Option<&mut R>,
        epsilon: f64,
    ) -> Result<usize> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Config(format!("epsilon {epsilon} outside [0,1]")));
        }
        if epsilon > 0.0 {
            let rng =
                rng.ok_or_else(|| Error::Config("epsilon > 0 requires a random generator".into()))?;
            if rng.random::<f64>() < epsilon {
                return Ok(rng.random_range(0..self.n_actions));
            }
        }
        Ok(argmax(&self.q_values(features)?))
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<W> {
        let mut enc = Encoder::new(w);
        enc.header(HEAD_MAGIC, HEAD_VERSION)?;
        enc.u32(self.n_actions as u32)?;
        enc.u32(self.n_features as u32)?;
        enc.u64(self.step_count)?;
        enc.f64s(&[
            self.adam.learning_rate,
            self.adam.beta1,
            self.adam.beta2,
            self.adam.eps,
        ])?;
        enc.f64s(&self.weights)?;
        enc.f64s(&self.adam_m)?;
        enc.f64s(&self.adam_v)?;
        enc.finish()
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut dec = Decoder::new(r);
        dec.header(HEAD_MAGIC, HEAD_VERSION)?;
        let n_actions = dec.u32()? as usize;
        let n_features = dec.u32()? as usize;
        let step_count = dec.u64()?;
        let hp = dec.f64s(4)?;
        let adam = AdamConfig {
            learning_rate: hp[0],
            beta1: hp[1],
            beta2: hp[2],
            eps: hp[3],
        };
        let mut head = QHead::zeros(n_actions, n_features, adam)
            .map_err(|e| Error::Format(format!("invalid checkpoint header: {e}")))?;
        let n = n_actions * n_features;
        head.weights = dec.f64s(n)?;
        head.adam_m = dec.f64s(n)?;
        head.adam_v = dec.f64s(n)?;
        head.step_count = step_count;
        dec.end()?;
        if head.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Format("checkpoint holds non-finite weights".into()));
        }
        Ok(head)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::Config(format!("gamma {gamma} outside [0,1]")))
    }
}
