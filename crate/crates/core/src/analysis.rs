//! Neuron-activity analysis: active/inactive split, pairwise activation
//! differences, single-neuron pose traces and active-only pruning.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::qlearn::QHead;
use crate::rbf::{Frame, RbfLayer, State};

pub const DEFAULT_THRESHOLD: f64 = 0.01;
pub const DEFAULT_CALIBRATION_STATES: usize = 1000;
/// Upper bound on the random number of ticks an action is repeated for.
pub const MAX_RANDOM_REPEAT: u32 = 12;

/// Random-policy states where each action is repeated for a random 0..=12 ticks.
///
/// The environment is reset from `seed`-derived episode seeds whenever an
/// episode ends.
pub fn generate_calibration_states(
    env: &mut dyn Environment,
    n_states: usize,
    seed: u64,
) -> Result<Vec<State>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_actions = env.n_actions();
    let mut states = Vec::with_capacity(n_states);
    env.reset(rng.random())?;
    while states.len() < n_states {
        let action = rng.random_range(0..n_actions);
        let repeat = rng.random_range(0..=MAX_RANDOM_REPEAT);
        let step = env.act(action, repeat)?;
        states.push(step.state);
        if step.terminal {
            env.reset(rng.random())?;
        }
    }
    Ok(states)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronClassification {
    pub active: Vec<usize>,
    pub inactive: Vec<usize>,
    /// Largest activation seen for each neuron over every frame slot of every state.
    pub max_activation: Vec<f64>,
    pub threshold: f64,
    pub n_states: usize,
}

impl NeuronClassification {
    fn from_max(max_activation: Vec<f64>, threshold: f64, n_states: usize) -> Self {
        let (active, inactive) =
            (0..max_activation.len()).partition(|&i| max_activation[i] > threshold);
        Self {
            active,
            inactive,
            max_activation,
            threshold,
            n_states,
        }
    }

    pub fn n_neurons(&self) -> usize {
        self.max_activation.len()
    }

    pub fn is_active(&self, neuron: usize) -> bool {
        self.max_activation[neuron] > self.threshold
    }

    pub fn active_fraction(&self) -> f64 {
        self.active.len() as f64 / self.n_neurons() as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<W> {
        writeln!(w, "neuron,max_activation,label")?;
        for (i, m) in self.max_activation.iter().enumerate() {
            let label = if self.is_active(i) {
                "active"
            } else {
                "inactive"
            };
            writeln!(w, "{i},{m},{label}")?;
        }
        w.flush()?;
        Ok(w)
    }

    /// Parses the output of [`write_csv`](Self::write_csv); labels are recomputed from `threshold`.
    pub fn read_csv(text: &str, threshold: f64) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "neuron,max_activation,label" => {}
            _ => return Err(Error::Format("classification header missing".into())),
        }
        let mut max = Vec::new();
        for (n, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let mut cols = line.split(',');
            let idx: usize = cols
                .next()
                .and_then(|c| c.trim().parse().ok())
                .ok_or_else(|| Error::Format(format!("bad neuron index on row {}", n + 2)))?;
            if idx != n {
                return Err(Error::Format(format!(
                    "neuron {idx} out of order on row {}",
                    n + 2
                )));
            }
            let m: f64 = cols
                .next()
                .and_then(|c| c.trim().parse().ok())
                .ok_or_else(|| Error::Format(format!("bad activation on row {}", n + 2)))?;
            max.push(m);
        }
        if max.is_empty() {
            return Err(Error::Format("classification has no rows".into()));
        }
        Ok(Self::from_max(max, threshold, 0))
    }
}

/// A neuron is active iff some frame slot of some state drives it above `threshold`.
pub fn classify_neurons(
    layer: &RbfLayer,
    states: &[State],
    threshold: f64,
) -> Result<NeuronClassification> {
    if states.is_empty() {
        return Err(Error::State(
            "classification needs at least one state".into(),
        ));
    }
    let mut max = vec![0.0f64; layer.len()];
    for state in states {
        for frame in state.frames() {
            for (m, a) in max.iter_mut().zip(layer.activate(frame)?) {
                *m = m.max(a);
            }
        }
    }
    Ok(NeuronClassification::from_max(max, threshold, states.len()))
}

/// Per-neuron `|N(s) - N(s2)|`, taking the largest change over frame slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationDiff {
    pub delta: Vec<f64>,
    pub active: Vec<bool>,
    /// Spatial centres `(mu_x, mu_y)` in normalized image coordinates.
    pub centers: Vec<(f64, f64)>,
}

impl ActivationDiff {
    pub fn deltas(&self, active: bool) -> Vec<f64> {
        self.delta
            .iter()
            .zip(&self.active)
            .filter(|(_, &a)| a == active)
            .map(|(&d, _)| d)
            .collect()
    }

    pub fn histogram(&self, active: bool, bins: usize) -> Histogram {
        Histogram::new(&self.deltas(active), bins, 0.0, 1.0)
    }

    /// `group,bin_lo,bin_hi,count` for active then inactive neurons.
    pub fn write_histogram_csv<W: Write>(&self, bins: usize, mut w: W) -> Result<W> {
        writeln!(w, "group,bin_lo,bin_hi,count")?;
        for (group, active) in [("active", true), ("inactive", false)] {
            let h = self.histogram(active, bins);
            for (i, c) in h.counts.iter().enumerate() {
                writeln!(w, "{group},{},{},{c}", h.edges[i], h.edges[i + 1])?;
            }
        }
        w.flush()?;
        Ok(w)
    }

    pub fn write_neurons_csv<W: Write>(&self, mut w: W) -> Result<W> {
        writeln!(w, "neuron,mu_x,mu_y,label,delta")?;
        for (i, d) in self.delta.iter().enumerate() {
            let (x, y) = self.centers[i];
            let label = if self.active[i] { "active" } else { "inactive" };
            writeln!(w, "{i},{x},{y},{label},{d}")?;
        }
        w.flush()?;
        Ok(w)
    }
}

pub fn activation_diff(
    layer: &RbfLayer,
    s: &State,
    s2: &State,
    classification: &NeuronClassification,
) -> Result<ActivationDiff> {
    if s.stack_len() != s2.stack_len() {
        return Err(Error::Shape {
            what: "stack length",
            expected: s.stack_len(),
            actual: s2.stack_len(),
        });
    }
    if classification.n_neurons() != layer.len() {
        return Err(Error::Shape {
            what: "classified neurons",
            expected: layer.len(),
            actual: classification.n_neurons(),
        });
    }
    let mut delta = vec![0.0f64; layer.len()];
    for (f1, f2) in s.frames().iter().zip(s2.frames()) {
        let a1 = layer.activate(f1)?;
        let a2 = layer.activate(f2)?;
        for (d, (x, y)) in delta.iter_mut().zip(a1.iter().zip(&a2)) {
            *d = d.max((x - y).abs());
        }
    }
    Ok(ActivationDiff {
        delta,
        active: (0..layer.len())
            .map(|i| classification.is_active(i))
            .collect(),
        centers: layer.neurons().iter().map(|n| (n.mu_x, n.mu_y)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins over `[lo, hi]`; the last bin is closed and out-of-range values are clamped.
    pub fn new(values: &[f64], bins: usize, lo: f64, hi: f64) -> Self {
        let bins = bins.max(1);
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let b = ((v - lo) / width).floor();
            let b = if b.is_nan() {
                0
            } else {
                (b.max(0.0) as usize).min(bins - 1)
            };
            counts[b] += 1;
        }
        Self { edges, counts }
    }
}

/// Gray map of `|s - s2|` (newest frames, channel mean) with neuron centres marked.
///
/// Active neurons are drawn white, inactive ones mid-gray.
pub fn overlay_frame(
    layer: &RbfLayer,
    s: &State,
    s2: &State,
    diff: &ActivationDiff,
) -> Result<Frame> {
    let mut img = s.newest().abs_diff(s2.newest())?;
    let (w, h) = (img.width(), img.height());
    for (i, &(mx, my)) in diff.centers.iter().enumerate() {
        let x = ((mx * w as f64).round() as usize).min(w - 1);
        let y = ((my * h as f64).round() as usize).min(h - 1);
        img.set(x, y, 0, if diff.active[i] { 1.0 } else { 0.5 });
    }
    debug_assert_eq!(layer.len(), diff.centers.len());
    Ok(img)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub activation: f64,
    /// Activation strictly below the threshold.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronTrace {
    pub neuron: usize,
    pub threshold: f64,
    pub records: Vec<TraceRecord>,
}

impl NeuronTrace {
    pub fn flagged(&self) -> usize {
        self.records.iter().filter(|r| r.flagged).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<W> {
        writeln!(w, "x,y,heading,activation,flagged")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.x, r.y, r.heading, r.activation, r.flagged as u8
            )?;
        }
        w.flush()?;
        Ok(w)
    }
}

/// Random-policy rollout recording the simulator pose and one neuron's response to the current frame.
pub fn neuron_trace(
    layer: &RbfLayer,
    env: &mut dyn Environment,
    n_samples: usize,
    neuron: usize,
    threshold: f64,
    seed: u64,
) -> Result<NeuronTrace> {
    if neuron >= layer.len() {
        return Err(Error::Config(format!(
            "neuron {neuron} out of range for {} neurons",
            layer.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_actions = env.n_actions();
    let mut records = Vec::with_capacity(n_samples);
    if n_samples > 0 {
        env.reset(rng.random())?;
    }
    while records.len() < n_samples {
        let action = rng.random_range(0..n_actions);
        let repeat = rng.random_range(0..=MAX_RANDOM_REPEAT);
        let step = env.act(action, repeat)?;
        let activation = layer.activate_one(neuron, step.state.newest())?;
        let pose = env.pose();
        records.push(TraceRecord {
            x: pose.x,
            y: pose.y,
            heading: pose.heading,
            activation,
            flagged: activation < threshold,
        });
        if step.terminal {
            env.reset(rng.random())?;
        }
    }
    Ok(NeuronTrace {
        neuron,
        threshold,
        records,
    })
}

fn stack_of(layer: &RbfLayer, head: &QHead) -> Result<usize> {
    let n = layer.len();
    if n == 0 || !head.n_features().is_multiple_of(n) {
        return Err(Error::Config(format!(
            "head has {} features, not a multiple of {n} neurons",
            head.n_features()
        )));
    }
    Ok(head.n_features() / n)
}

/// Feature columns of `neurons` for every frame slot, slot-major.
fn columns(neurons: &[usize], n: usize, k: usize) -> Vec<usize> {
    (0..k)
        .flat_map(|slot| neurons.iter().map(move |&i| slot * n + i))
        .collect()
}

/// Drops inactive neurons from the layer and their columns from the head.
pub fn prune_to_active(
    layer: &RbfLayer,
    head: &QHead,
    classification: &NeuronClassification,
) -> Result<(RbfLayer, QHead)> {
    if classification.n_neurons() != layer.len() {
        return Err(Error::Shape {
            what: "classified neurons",
            expected: layer.len(),
            actual: classification.n_neurons(),
        });
    }
    if classification.active.is_empty() {
        return Err(Error::State("no active neurons to keep".into()));
    }
    let k = stack_of(layer, head)?;
    let pruned_layer = layer.select(&classification.active)?;
    let pruned_head = head.select_columns(&columns(&classification.active, layer.len(), k))?;
    Ok((pruned_layer, pruned_head))
}

/// Per action, `threshold * sum |w|` over the inactive columns.
pub fn pruning_bound(
    layer: &RbfLayer,
    head: &QHead,
    classification: &NeuronClassification,
) -> Result<Vec<f64>> {
    let k = stack_of(layer, head)?;
    let cols = columns(&classification.inactive, layer.len(), k);
    Ok((0..head.n_actions())
        .map(|a| {
            let row = head.row(a);
            classification.threshold * cols.iter().map(|&c| row[c].abs()).sum::<f64>()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_env, EnvConfig, ScenarioKind};
    use crate::qlearn::AdamConfig;
    use crate::rbf::{sample_layer, LayerSpec};

    fn small_spec() -> LayerSpec {
        LayerSpec {
            neurons: 24,
            width: 16,
            height: 16,
            ..LayerSpec::desk()
        }
    }

    fn small_env(kind: ScenarioKind) -> Box<dyn Environment> {
        make_env(&EnvConfig {
            width: 16,
            height: 16,
            ..EnvConfig::desk(kind)
        })
        .unwrap()
    }

    fn brute_max(layer: &RbfLayer, states: &[State]) -> Vec<f64> {
        let mut max = vec![0.0f64; layer.len()];
        for s in states {
            for f in s.frames() {
                for (i, m) in max.iter_mut().enumerate() {
                    *m = m.max(layer.activate_one(i, f).unwrap());
                }
            }
        }
        max
    }

    #[test]
    fn calibration_states_are_deterministic() {
        let mut env = small_env(ScenarioKind::Shooter);
        let a = generate_calibration_states(env.as_mut(), 50, 3).unwrap();
        let b = generate_calibration_states(env.as_mut(), 50, 3).unwrap();
        assert_eq!(a.len(), 50);
        assert_eq!(a, b);
    }

    #[test]
    fn classification_matches_brute_force() {
        let layer = sample_layer(5, &small_spec()).unwrap();
        let mut env = small_env(ScenarioKind::Gather);
        let states = generate_calibration_states(env.as_mut(), 40, 1).unwrap();
        let c = classify_neurons(&layer, &states, DEFAULT_THRESHOLD).unwrap();
        let max = brute_max(&layer, &states);
        assert_eq!(c.max_activation, max);
        for i in 0..layer.len() {
            assert_eq!(c.active.contains(&i), max[i] > DEFAULT_THRESHOLD);
            assert_ne!(c.active.contains(&i), c.inactive.contains(&i));
        }
        assert_eq!(c.n_states, 40);
    }

    #[test]
    fn threshold_extremes() {
        let layer = sample_layer(2, &small_spec()).unwrap();
        let mut env = small_env(ScenarioKind::Shooter);
        let states = generate_calibration_states(env.as_mut(), 10, 2).unwrap();
        let c = classify_neurons(&layer, &states, 1.0).unwrap();
        assert!(c.active.is_empty());
        let c = classify_neurons(&layer, &states, 0.0).unwrap();
        // Only neurons whose activation underflows to 0.0 everywhere can be inactive.
        for &i in &c.inactive {
            assert_eq!(c.max_activation[i], 0.0);
        }
    }

    #[test]
    fn empty_state_set_is_rejected() {
        let layer = sample_layer(2, &small_spec()).unwrap();
        assert!(matches!(
            classify_neurons(&layer, &[], 0.01),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn classification_csv_roundtrip() {
        let layer = sample_layer(4, &small_spec()).unwrap();
        let mut env = small_env(ScenarioKind::Gather);
        let states = generate_calibration_states(env.as_mut(), 20, 4).unwrap();
        let c = classify_neurons(&layer, &states, 0.01).unwrap();
        let text = String::from_utf8(c.write_csv(Vec::new()).unwrap()).unwrap();
        let back = NeuronClassification::read_csv(&text, 0.01).unwrap();
        assert_eq!(back.active, c.active);
        assert_eq!(back.max_activation, c.max_activation);
        assert!(NeuronClassification::read_csv("x\n", 0.01).is_err());
    }

    #[test]
    fn self_diff_is_zero() {
        let layer = sample_layer(6, &small_spec()).unwrap();
        let mut env = small_env(ScenarioKind::Shooter);
        let states = generate_calibration_states(env.as_mut(), 5, 6).unwrap();
        let c = classify_neurons(&layer, &states, 0.01).unwrap();
        let d = activation_diff(&layer, &states[0], &states[0], &c).unwrap();
        assert!(d.delta.iter().all(|&x| x == 0.0));
        let h = d.histogram(true, 10);
        assert_eq!(h.counts[0] as usize, c.active.len());
        let d = activation_diff(&layer, &states[0], &states[4], &c).unwrap();
        assert!(d.delta.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn histogram_binning() {
        let h = Histogram::new(&[0.0, 0.05, 0.1, 0.99, 1.0, 2.0], 10, 0.0, 1.0);
        assert_eq!(h.edges.len(), 11);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[1], 1);
        assert_eq!(h.counts[9], 3);
    }

    #[test]
    fn trace_edges() {
        let layer = sample_layer(7, &small_spec()).unwrap();
        let mut env = small_env(ScenarioKind::Gather);
        let t = neuron_trace(&layer, env.as_mut(), 0, 0, 0.5, 1).unwrap();
        assert!(t.records.is_empty());
        let t = neuron_trace(&layer, env.as_mut(), 30, 3, 0.0, 1).unwrap();
        assert_eq!(t.records.len(), 30);
        assert_eq!(t.flagged(), 0);
        assert!(neuron_trace(&layer, env.as_mut(), 3, 99, 0.0, 1).is_err());
    }

    #[test]
    fn pruning_keeps_both_slots_in_order() {
        let layer = sample_layer(8, &small_spec()).unwrap();
        let n = layer.len();
        let mut head = QHead::zeros(3, 2 * n, AdamConfig::with_learning_rate(0.01)).unwrap();
        head.set_weights((0..3 * 2 * n).map(|i| i as f64).collect())
            .unwrap();
        let mut max = vec![0.0; n];
        for i in [1, 4, 9] {
            max[i] = 0.5;
        }
        let c = NeuronClassification::from_max(max, 0.01, 1);
        let (pl, ph) = prune_to_active(&layer, &head, &c).unwrap();
        assert_eq!(pl.len(), 3);
        assert_eq!(pl.neurons()[1], layer.neurons()[4]);
        assert_eq!(ph.n_features(), 6);
        let cols = [1, 4, 9, n + 1, n + 4, n + 9];
        for a in 0..3 {
            for (j, &c) in cols.iter().enumerate() {
                assert_eq!(ph.row(a)[j], head.row(a)[c]);
            }
        }
        let none = NeuronClassification::from_max(vec![0.0; n], 0.01, 1);
        assert!(matches!(
            prune_to_active(&layer, &head, &none),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn pruning_everything_active_is_identity() {
        let layer = sample_layer(9, &small_spec()).unwrap();
        let n = layer.len();
        let mut head = QHead::zeros(2, 2 * n, AdamConfig::with_learning_rate(0.01)).unwrap();
        head.set_weights((0..4 * n).map(|i| (i as f64).sin()).collect())
            .unwrap();
        let c = NeuronClassification::from_max(vec![0.9; n], 0.01, 1);
        let (pl, ph) = prune_to_active(&layer, &head, &c).unwrap();
        assert_eq!(pl, layer);
        assert_eq!(ph.weights(), head.weights());
        assert!(pruning_bound(&layer, &head, &c)
            .unwrap()
            .iter()
            .all(|&b| b == 0.0));
    }
}
