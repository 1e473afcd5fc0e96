use proptest::prelude::*;
use vrbqn_core::{Frame, RbfLayer, RbfNeuron};

/// Straight transcription of the activation formula, one pixel at a time.
fn oracle(n: &RbfNeuron, frame: &Frame) -> f64 {
    let (w, h, c) = (frame.width(), frame.height(), frame.channels());
    let mut exponent = 0.0;
    for ch in 0..c {
        let mut sum = 0.0;
        for py in 0..h {
            for px in 0..w {
                let dx = px as f64 / w as f64 - n.mu_x;
                let dy = py as f64 / h as f64 - n.mu_y;
                let g = (-(dx * dx / (2.0 * n.sigma_x * n.sigma_x)
                    + dy * dy / (2.0 * n.sigma_y * n.sigma_y)))
                    .exp();
                let r = (frame.get(px, py, ch) - n.mu_z[ch]) * g;
                sum += r * r;
            }
        }
        exponent += sum / (2.0 * n.sigma_z[ch] * n.sigma_z[ch]);
    }
    (-exponent).exp()
}

fn neuron(c: usize) -> impl Strategy<Value = RbfNeuron> {
    (
        0.0..=1.0f64,
        0.0..=1.0f64,
        0.02..=0.5f64,
        0.02..=0.5f64,
        prop::collection::vec(0.0..=1.0f64, c),
        prop::collection::vec(0.3..=2.0f64, c),
    )
        .prop_map(|(mu_x, mu_y, sigma_x, sigma_y, mu_z, sigma_z)| RbfNeuron {
            mu_x,
            mu_y,
            sigma_x,
            sigma_y,
            mu_z,
            sigma_z,
        })
}

fn case() -> impl Strategy<Value = (Vec<RbfNeuron>, Frame)> {
    (
        1usize..=8,
        1usize..=8,
        prop_oneof![Just(1usize), Just(3usize)],
        1usize..=16,
    )
        .prop_flat_map(|(w, h, c, n)| {
            (
                prop::collection::vec(neuron(c), n),
                prop::collection::vec(0.0..=1.0f64, w * h * c)
                    .prop_map(move |d| Frame::new(w, h, c, d).unwrap()),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn layer_matches_scalar_oracle((neurons, frame) in case()) {
        let layer = RbfLayer::from_neurons(neurons.clone(), frame.width(), frame.height(), frame.channels(), 0).unwrap();
        let got = layer.activate(&frame).unwrap();
        for (n, a) in neurons.iter().zip(&got) {
            let want = oracle(n, &frame);
            prop_assert!((a - want).abs() <= 1e-9, "got {a}, oracle {want}");
            prop_assert!((0.0..=1.0).contains(a));
        }
    }

    #[test]
    fn activation_decays_with_intensity_distance(
        (neurons, _) in case(),
        base in 0.0..=1.0f64,
        step in 0.0..=0.5f64,
    ) {
        // Uniform frames: the residual grows with |value - mu_z| in every channel.
        let n = &neurons[0];
        let c = n.mu_z.len();
        let near: Vec<f64> = n.mu_z.iter().map(|m| (m + (base - m) * 0.5).clamp(0.0, 1.0)).collect();
        let far: Vec<f64> = n.mu_z.iter().zip(&near).map(|(m, v)| {
            let dir = if v >= m { 1.0 } else { -1.0 };
            (v + dir * step).clamp(0.0, 1.0)
        }).collect();
        let frame = |vals: &[f64]| Frame::new(4, 4, c, (0..16).flat_map(|_| vals.iter().copied()).collect()).unwrap();
        let layer = RbfLayer::from_neurons(vec![n.clone()], 4, 4, c, 0).unwrap();
        let a_near = layer.activate(&frame(&near)).unwrap()[0];
        let a_far = layer.activate(&frame(&far)).unwrap()[0];
        prop_assert!(a_far <= a_near);
    }

    #[test]
    fn filter_peaks_at_pixel_nearest_centre(
        w in 2usize..=12, h in 2usize..=12,
        ix in 0usize..12, iy in 0usize..12,
        sx in 0.02..=0.5f64, sy in 0.02..=0.5f64,
    ) {
        let (px, py) = (ix % w, iy % h);
        let n = RbfNeuron {
            mu_x: px as f64 / w as f64,
            mu_y: py as f64 / h as f64,
            sigma_x: sx,
            sigma_y: sy,
            mu_z: vec![0.5],
            sigma_z: vec![1.0],
        };
        let layer = RbfLayer::from_neurons(vec![n], w, h, 1, 0).unwrap();
        let f = &layer.filters()[0];
        prop_assert_eq!(f.get(px, py), 1.0);
        for y in 0..h {
            for x in 0..w {
                let v = f.get(x, y);
                prop_assert!((0.0..=1.0).contains(&v));
                if (x, y) != (px, py) {
                    prop_assert!(v < 1.0);
                }
            }
        }
    }
}

#[test]
fn constant_frame_at_centre_intensity_gives_one() {
    let n = RbfNeuron {
        mu_x: 0.3,
        mu_y: 0.7,
        sigma_x: 0.1,
        sigma_y: 0.2,
        mu_z: vec![0.2, 0.4, 0.6],
        sigma_z: vec![1.0; 3],
    };
    let layer = RbfLayer::from_neurons(vec![n], 5, 5, 3, 0).unwrap();
    let data = (0..25).flat_map(|_| [0.2, 0.4, 0.6]).collect();
    let a = layer.activate(&Frame::new(5, 5, 3, data).unwrap()).unwrap();
    assert_eq!(a, vec![1.0]);
}
