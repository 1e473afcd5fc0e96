//! Fixed random Gaussian receptive fields over raw pixel frames.
//!
//! Each neuron looks at the image through a spatial Gaussian attention
//! filter and responds with a Gaussian of the filtered intensity residual:
//!
//! ```text
//! G[px,py] = exp(-((px/w - mu_x)^2 / (2 sigma_x^2) + (py/h - mu_y)^2 / (2 sigma_y^2)))
//! h        = exp(-sum_c sum_p ((S[p,c] - mu_z[c]) * G[p])^2 / (2 sigma_z[c]^2))
//! ```
//!
//! The parameters are sampled once and never trained.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Deref;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{Decoder, Encoder};
use crate::error::{check_len, Error, Result};

const LAYER_MAGIC: &[u8; 8] = b"VRBQLAYR";
const LAYER_VERSION: u32 = 1;

/// One pixel buffer, row-major with interleaved channels: `data[(y * w + x) * c + ch]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::Config("frame dimensions must be positive".into()));
        }
        check_len("frame buffer", width * height * channels, data.len())?;
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Numeric(format!("pixel intensity {v} outside [0,1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
        )
    }

    /// Builds a frame from 8-bit pixels, mapping `0..=255` onto `[0,1]`.
    pub fn from_u8(width: usize, height: usize, channels: usize, raw: &[u8]) -> Result<Self> {
        let data = raw.iter().map(|&b| f64::from(b) / 255.0).collect();
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, ch: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + ch]
    }

    pub fn set(&mut self, x: usize, y: usize, ch: usize, value: f64) {
        self.data[(y * self.width + x) * self.channels + ch] = value.clamp(0.0, 1.0);
    }

    /// Pixel-wise absolute difference averaged over channels, as a gray frame.
    pub fn abs_diff(&self, other: &Frame) -> Result<Frame> {
        self.check_same_shape(other)?;
        let c = self.channels;
        let data = self
            .data
            .chunks(c)
            .zip(other.data.chunks(c))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / c as f64)
            .collect();
        Frame::new(self.width, self.height, 1, data)
    }

    fn check_same_shape(&self, other: &Frame) -> Result<()> {
        check_len("frame width", self.width, other.width)?;
        check_len("frame height", self.height, other.height)?;
        check_len("frame channels", self.channels, other.channels)
    }
}

/// A stack of `K` consecutive frames, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    frames: Vec<Frame>,
}

impl State {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Config("a state needs at least one frame".into()))?;
        for f in &frames[1..] {
            first.check_same_shape(f)?;
        }
        Ok(Self { frames })
    }

    /// `k` copies of the same frame, as at the start of an episode.
    pub fn repeated(frame: Frame, k: usize) -> Result<Self> {
        Self::new(vec![frame; k])
    }

    /// Drops the oldest frame and appends `frame` as the newest.
    pub fn push_frame(&self, frame: Frame) -> Result<Self> {
        self.frames[0].check_same_shape(&frame)?;
        let mut frames = Vec::with_capacity(self.frames.len());
        frames.extend(self.frames[1..].iter().cloned());
        frames.push(frame);
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn newest(&self) -> &Frame {
        self.frames.last().expect("state is never empty")
    }

    pub fn stack_len(&self) -> usize {
        self.frames.len()
    }
}

/// Activations of a state, frame-major (all neurons of the oldest frame first).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Arc<[f64]>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values.into())
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfNeuron {
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Intensity centre, one per input channel.
    pub mu_z: Vec<f64>,
    /// Intensity width, one per input channel.
    pub sigma_z: Vec<f64>,
}

impl RbfNeuron {
    fn validate(&self, channels: usize) -> Result<()> {
        check_len("neuron mu_z", channels, self.mu_z.len())?;
        check_len("neuron sigma_z", channels, self.sigma_z.len())?;
        let centers = [self.mu_x, self.mu_y]
            .into_iter()
            .chain(self.mu_z.iter().copied());
        for m in centers {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::Config(format!("neuron centre {m} outside [0,1]")));
            }
        }
        let widths = [self.sigma_x, self.sigma_y]
            .into_iter()
            .chain(self.sigma_z.iter().copied());
        for s in widths {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("neuron width {s} must be positive")));
            }
        }
        Ok(())
    }
}

/// Spatial attention of one neuron, indexed `values[py * w + px]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionFilter {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl AttentionFilter {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, px: usize, py: usize) -> f64 {
        self.values[py * self.width + px]
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

/// Evaluates the Gaussian attention window of `neuron` on a `w x h` pixel grid.
///
/// Pixel coordinates are zero-based and normalised by `w` and `h` (not `w - 1`),
/// so the last column sits at `(w - 1) / w`. Entries far from the centre may
/// underflow to exactly zero for narrow windows.
pub fn compute_filter(neuron: &RbfNeuron, w: usize, h: usize) -> AttentionFilter {
    let kx = 1.0 / (2.0 * neuron.sigma_x * neuron.sigma_x);
    let ky = 1.0 / (2.0 * neuron.sigma_y * neuron.sigma_y);
    let col: Vec<f64> = (0..w)
        .map(|px| {
            let dx = px as f64 / w as f64 - neuron.mu_x;
            dx * dx * kx
        })
        .collect();
    let mut values = Vec::with_capacity(w * h);
    for py in 0..h {
        let dy = py as f64 / h as f64 - neuron.mu_y;
        let ey = dy * dy * ky;
        values.extend(col.iter().map(|ex| (-(ex + ey)).exp()));
    }
    AttentionFilter {
        width: w,
        height: h,
        values,
    }
}

/// Sampling ranges for a freshly drawn layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub neurons: usize,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Spatial widths are drawn uniformly from `[lo, hi]`.
    pub sigma_xy: (f64, f64),
    /// Intensity width shared by every neuron and channel.
    pub sigma_z: f64,
}

impl LayerSpec {
    /// 2001 gray or 667 rgb neurons at 120x160 (rows x columns).
    pub fn paper(channels: usize) -> Self {
        Self {
            neurons: if channels == 3 { 667 } else { 2001 },
            width: 160,
            height: 120,
            channels,
            sigma_xy: (0.02, 0.2),
            sigma_z: 1.0,
        }
    }

    /// 256 gray neurons on 32x32 frames.
    pub fn desk() -> Self {
        Self {
            neurons: 256,
            width: 32,
            height: 32,
            channels: 1,
            sigma_xy: (0.02, 0.2),
            sigma_z: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.neurons == 0 {
            return Err(Error::Config("layer needs at least one neuron".into()));
        }
        if self.width == 0 || self.height == 0 || self.channels == 0 {
            return Err(Error::Config("layer geometry must be positive".into()));
        }
        let (lo, hi) = self.sigma_xy;
        if !(lo > 0.0 && lo < hi && hi <= 1.0) {
            return Err(Error::Config(format!(
                "sigma_xy range [{lo}, {hi}] must satisfy 0 < lo < hi <= 1"
            )));
        }
        if !(self.sigma_z > 0.0 && self.sigma_z.is_finite()) {
            return Err(Error::Config(format!(
                "sigma_z {} must be positive",
                self.sigma_z
            )));
        }
        Ok(())
    }
}

/// `N` neurons with their precomputed attention filters. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfLayer {
    neurons: Vec<RbfNeuron>,
    filters: Vec<AttentionFilter>,
    width: usize,
    height: usize,
    channels: usize,
    seed: u64,
}

/// Draws a layer from `spec`; the same seed always yields the same layer.
///
/// Per neuron the draw order is `mu_x, mu_y, sigma_x, sigma_y, mu_z[0..c]`.
pub fn sample_layer(seed: u64, spec: &LayerSpec) -> Result<RbfLayer> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = spec.sigma_xy;
    let neurons = (0..spec.neurons)
        .map(|_| {
            let mu_x = rng.random::<f64>();
            let mu_y = rng.random::<f64>();
            let sigma_x = rng.random_range(lo..=hi);
            let sigma_y = rng.random_range(lo..=hi);
            let mu_z = (0..spec.channels).map(|_| rng.random::<f64>()).collect();
            RbfNeuron {
                mu_x,
                mu_y,
                sigma_x,
                sigma_y,
                mu_z,
                sigma_z: vec![spec.sigma_z; spec.channels],
            }
        })
        .collect();
    RbfLayer::from_neurons(neurons, spec.width, spec.height, spec.channels, seed)
}

impl RbfLayer {
    pub fn from_neurons(
        neurons: Vec<RbfNeuron>,
        width: usize,
        height: usize,
        channels: usize,
        seed: u64,
    ) -> Result<Self> {
        if neurons.is_empty() {
            return Err(Error::Config("layer needs at least one neuron".into()));
        }
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::Config("layer geometry must be positive".into()));
        }
        for n in &neurons {
            n.validate(channels)?;
        }
        let filters = neurons
            .iter()
            .map(|n| compute_filter(n, width, height))
            .collect();
        Ok(Self {
            neurons,
            filters,
            width,
            height,
            channels,
            seed,
        })
    }

    pub fn neurons(&self) -> &[RbfNeuron] {
        &self.neurons
    }

    pub fn filters(&self) -> &[AttentionFilter] {
        &self.filters
    }

    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Feature dimension produced for a `k`-frame state.
    pub fn feature_len(&self, k: usize) -> usize {
        k * self.neurons.len()
    }

    /// Keeps the listed neurons, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<RbfLayer> {
        let mut neurons = Vec::with_capacity(indices.len());
        let mut filters = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.neurons.len() {
                return Err(Error::Config(format!("neuron index {i} out of range")));
            }
            neurons.push(self.neurons[i].clone());
            filters.push(self.filters[i].clone());
        }
        if neurons.is_empty() {
            return Err(Error::State("selection is empty".into()));
        }
        Ok(RbfLayer {
            neurons,
            filters,
            width: self.width,
            height: self.height,
            channels: self.channels,
            seed: self.seed,
        })
    }

    pub fn check_frame(&self, frame: &Frame) -> Result<()> {
        check_len("frame width", self.width, frame.width)?;
        check_len("frame height", self.height, frame.height)?;
        check_len("frame channels", self.channels, frame.channels)
    }

    fn neuron_activation(&self, i: usize, frame: &Frame) -> f64 {
        let neuron = &self.neurons[i];
        let g = &self.filters[i].values;
        let c = self.channels;
        let mut exponent = 0.0;
        for ch in 0..c {
            let mu = neuron.mu_z[ch];
            let mut acc = 0.0;
            for (p, &gv) in g.iter().enumerate() {
                let d = (frame.data[p * c + ch] - mu) * gv;
                acc += d * d;
            }
            let s = neuron.sigma_z[ch];
            exponent += acc / (2.0 * s * s);
        }
        (-exponent).exp()
    }

    /// Activations of every neuron on a single frame.
    pub fn activate(&self, frame: &Frame) -> Result<Vec<f64>> {
        self.check_frame(frame)?;
        Ok((0..self.neurons.len())
            .map(|i| self.neuron_activation(i, frame))
            .collect())
    }

    /// Activation of one neuron on a single frame.
    pub fn activate_one(&self, neuron: usize, frame: &Frame) -> Result<f64> {
        self.check_frame(frame)?;
        if neuron >= self.neurons.len() {
            return Err(Error::Config(format!("neuron index {neuron} out of range")));
        }
        Ok(self.neuron_activation(neuron, frame))
    }

    /// Activates each frame of the stack independently and concatenates, oldest first.
    pub fn activate_state(&self, state: &State) -> Result<FeatureVector> {
        let mut out = Vec::with_capacity(self.feature_len(state.stack_len()));
        for frame in state.frames() {
            out.extend(self.activate(frame)?);
        }
        Ok(FeatureVector::new(out))
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<W> {
        let mut enc = Encoder::new(w);
        enc.header(LAYER_MAGIC, LAYER_VERSION)?;
        enc.u64(self.seed)?;
        enc.u32(self.width as u32)?;
        enc.u32(self.height as u32)?;
        enc.u32(self.channels as u32)?;
        enc.u32(self.neurons.len() as u32)?;
        for n in &self.neurons {
            enc.f64s(&[n.mu_x, n.mu_y, n.sigma_x, n.sigma_y])?;
            enc.f64s(&n.mu_z)?;
            enc.f64s(&n.sigma_z)?;
        }
        enc.finish()
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut dec = Decoder::new(r);
        dec.header(LAYER_MAGIC, LAYER_VERSION)?;
        let seed = dec.u64()?;
        let width = dec.u32()? as usize;
        let height = dec.u32()? as usize;
        let channels = dec.u32()? as usize;
        let n = dec.u32()? as usize;
        if channels == 0 || channels > 64 {
            return Err(Error::Format(format!(
                "implausible channel count {channels}"
            )));
        }
        let mut neurons = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let head = dec.f64s(4)?;
            neurons.push(RbfNeuron {
                mu_x: head[0],
                mu_y: head[1],
                sigma_x: head[2],
                sigma_y: head[3],
                mu_z: dec.f64s(channels)?,
                sigma_z: dec.f64s(channels)?,
            });
        }
        dec.end()?;
        RbfLayer::from_neurons(neurons, width, height, channels, seed)
            .map_err(|e| Error::Format(format!("invalid layer contents: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn centered(sigma: f64, mu_z: f64) -> RbfNeuron {
        RbfNeuron {
            mu_x: 0.5,
            mu_y: 0.5,
            sigma_x: sigma,
            sigma_y: sigma,
            mu_z: vec![mu_z],
            sigma_z: vec![1.0],
        }
    }

    #[test]
    fn filter_peaks_at_centre_pixel() {
        let g = compute_filter(&centered(0.5, 0.0), 2, 2);
        assert_eq!(g.get(1, 1), 1.0);
        // Independent high-precision evaluation: exp(-1).
        assert!((g.get(0, 0) - 0.367_879_441_171_442_3).abs() < 1e-15);
    }

    #[test]
    fn wide_filter_is_flat() {
        let g = compute_filter(&centered(1e6, 0.0), 7, 5);
        assert!(g.values().iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn hand_checked_activation() {
        let layer = RbfLayer::from_neurons(vec![centered(0.5, 0.0)], 2, 2, 1, 0).unwrap();
        let frame = Frame::filled(2, 2, 1, 1.0).unwrap();
        let h = layer.activate(&frame).unwrap();
        // mpmath: exp(-(1 + 2e^-1 + e^-2) / 2)
        assert!((h[0] - 0.392_371_147_300_667_3).abs() < 1e-12);

        let state = State::repeated(frame, 2).unwrap();
        let f = layer.activate_state(&state).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[0], h[0]);
        assert_eq!(f[1], h[0]);
    }

    #[test]
    fn zero_residual_gives_one() {
        let layer = RbfLayer::from_neurons(vec![centered(0.1, 0.3)], 6, 4, 1, 0).unwrap();
        let frame = Frame::filled(6, 4, 1, 0.3).unwrap();
        assert_eq!(layer.activate(&frame).unwrap(), vec![1.0]);
    }

    #[test]
    fn sample_rejects_bad_ranges() {
        let mut spec = LayerSpec::desk();
        spec.sigma_xy = (0.2, 0.02);
        assert!(matches!(sample_layer(1, &spec), Err(Error::Config(_))));
        spec.sigma_xy = (0.0, 0.2);
        assert!(matches!(sample_layer(1, &spec), Err(Error::Config(_))));
        spec.sigma_xy = (0.1, 0.1);
        assert!(matches!(sample_layer(1, &spec), Err(Error::Config(_))));
    }

    #[test]
    fn paper_sized_layers() {
        let gray = sample_layer(7, &LayerSpec::paper(1)).unwrap();
        assert_eq!(gray.len(), 2001);
        for n in gray.neurons() {
            assert!((0.0..=1.0).contains(&n.mu_x) && (0.0..=1.0).contains(&n.mu_y));
            assert!((0.02..=0.2).contains(&n.sigma_x) && (0.02..=0.2).contains(&n.sigma_y));
            assert_eq!(n.sigma_z, vec![1.0]);
        }
        let rgb = sample_layer(7, &LayerSpec::paper(3)).unwrap();
        assert_eq!(rgb.len(), 667);
        assert!(rgb
            .neurons()
            .iter()
            .all(|n| n.mu_z.len() == 3 && n.sigma_z.len() == 3));
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = LayerSpec::desk();
        assert_eq!(
            sample_layer(7, &spec).unwrap(),
            sample_layer(7, &spec).unwrap()
        );
        assert_ne!(
            sample_layer(7, &spec).unwrap(),
            sample_layer(8, &spec).unwrap()
        );
    }

    #[test]
    fn shape_errors() {
        let layer = sample_layer(1, &LayerSpec::desk()).unwrap();
        let frame = Frame::filled(16, 32, 1, 0.5).unwrap();
        assert!(matches!(layer.activate(&frame), Err(Error::Shape { .. })));
        let rgb = Frame::filled(32, 32, 3, 0.5).unwrap();
        assert!(matches!(layer.activate(&rgb), Err(Error::Shape { .. })));
    }

    #[test]
    fn frame_rejects_out_of_range_pixels() {
        assert!(Frame::new(1, 1, 1, vec![1.5]).is_err());
        assert!(Frame::new(2, 1, 1, vec![0.5]).is_err());
    }

    #[test]
    fn layer_file_roundtrip_is_bit_exact() {
        let mut spec = LayerSpec::desk();
        spec.channels = 3;
        spec.neurons = 17;
        let layer = sample_layer(99, &spec).unwrap();
        let bytes = layer.write_to(Vec::new()).unwrap();
        let back = RbfLayer::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, layer);

        let mut corrupt = bytes.clone();
        corrupt[0] = b'X';
        assert!(matches!(
            RbfLayer::read_from(corrupt.as_slice()),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            RbfLayer::read_from(&bytes[..bytes.len() - 3]),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn select_keeps_order() {
        let layer = sample_layer(3, &LayerSpec::desk()).unwrap();
        let sub = layer.select(&[5, 2]).unwrap();
        assert_eq!(sub.neurons()[0], layer.neurons()[5]);
        assert_eq!(sub.filters()[1], layer.filters()[2]);
        assert!(layer.select(&[]).is_err());
    }
}
