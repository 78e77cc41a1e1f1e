#![allow(clippy::needless_range_loop)]

use rand::Rng as _;

use super::*;
use crate::datasets::TargetMode;
use crate::encoders::{make_encoding, EncodingKind, EncodingSpec};

fn random_params(d_in: usize, n: usize, seed: u64) -> NetParams {
    let mut p = init_params(d_in, n, seed).unwrap();
    let mut r = rng::stream(seed, "test_biases");
    for b in [&mut p.b1, &mut p.b2, &mut p.k1b, &mut p.k2b, &mut p.ktb] {
        b.iter_mut().for_each(|v| *v = r.random_range(-0.1..0.1));
    }
    p
}

fn random_vec(len: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, "test_vec");
    (0..len).map(|_| r.random_range(-1.0..1.0)).collect()
}

/// Direct loops over the defining sums, sharing no code with the library path.
fn naive_forward(p: &NetParams, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = p.n as isize;
    let px = p.n * p.n;
    let mut h1 = vec![0.0; px];
    for i in 0..px {
        let mut s = p.b1[i];
        for j in 0..p.d_in {
            s += p.w1[i * p.d_in + j] * x[j];
        }
        h1[i] = s.tanh();
    }
    let mut h2 = vec![0.0; px];
    for i in 0..px {
        let mut s = p.b2[i];
        for j in 0..px {
            s += p.w2[i * px + j] * h1[j];
        }
        h2[i] = s.tanh();
    }
    let at = |img: &[f64], y: isize, x: isize| {
        if y < 0 || x < 0 || y >= n || x >= n {
            0.0
        } else {
            img[(y * n + x) as usize]
        }
    };
    let mut c1 = vec![0.0; CHANNELS * px];
    for o in 0..CHANNELS {
        for y in 0..n {
            for xx in 0..n {
                let mut s = p.k1b[o];
                for ky in 0..5 {
                    for kx in 0..5 {
                        s += p.k1[o * 25 + ky * 5 + kx] * at(&h2, y + ky as isize - 2, xx + kx as isize - 2);
                    }
                }
                c1[o * px + (y * n + xx) as usize] = s.max(0.0);
            }
        }
    }
    let mut c2 = vec![0.0; CHANNELS * px];
    for o in 0..CHANNELS {
        for y in 0..n {
            for xx in 0..n {
                let mut s = p.k2b[o];
                for c in 0..CHANNELS {
                    let plane = &c1[c * px..(c + 1) * px];
                    for ky in 0..5 {
                        for kx in 0..5 {
                            s += p.k2[((o * CHANNELS + c) * 5 + ky) * 5 + kx]
                                * at(plane, y + ky as isize - 2, xx + kx as isize - 2);
                        }
                    }
                }
                c2[o * px + (y * n + xx) as usize] = s.max(0.0);
            }
        }
    }
    let mut out = vec![p.ktb[0]; px];
    for c in 0..CHANNELS {
        for y in 0..n {
            for xx in 0..n {
                let v = c2[c * px + (y * n + xx) as usize];
                for i in 0..7 {
                    for j in 0..7 {
                        let (oy, ox) = (y + i as isize - 3, xx + j as isize - 3);
                        if oy >= 0 && ox >= 0 && oy < n && ox < n {
                            out[(oy * n + ox) as usize] += v * p.kt[c * 49 + i * 7 + j];
                        }
                    }
                }
            }
        }
    }
    (out, c2)
}

fn full_loss(p: &NetParams, x: &[f64], t: &[f64], lambda: f64) -> f64 {
    let (out, trace) = forward(p, x, true).unwrap();
    loss(&out, t, &trace.unwrap().c2_act, lambda).unwrap()
}

#[test]
fn zero_params_give_zero_output_and_shapes() {
    let p = NetParams::zeros(20, 8);
    let (out, trace) = forward(&p, &random_vec(20, 1), true).unwrap();
    assert!(out.iter().all(|&v| v == 0.0));
    let t = trace.unwrap();
    assert_eq!(t.fc2_act.len(), 64);
    assert_eq!(t.fc3_act.len(), 64);
    assert_eq!(t.c1_act.len(), 64 * 64);
    assert_eq!(t.c2_act.len(), 64 * 64);
    assert_eq!(t.output.len(), 64);
}

#[test]
fn init_is_deterministic_and_bounded() {
    let a = init_params(30, 8, 5).unwrap();
    assert_eq!(a, init_params(30, 8, 5).unwrap());
    assert_ne!(a.w1, init_params(30, 8, 6).unwrap().w1);
    assert!(a.b1.iter().all(|&b| b == 0.0));
    let bound = (6.0 / (30.0 + 64.0_f64)).sqrt();
    assert!(a.w1.iter().all(|w| w.abs() <= bound));
    assert!(init_params(0, 8, 1).is_err());
    assert!(init_params(4, 3, 1).is_err());
}

#[test]
fn forward_matches_naive_oracle() {
    let p = random_params(128, 8, 11);
    let x = random_vec(128, 12);
    let (out, trace) = forward(&p, &x, true).unwrap();
    let (want, c2) = naive_forward(&p, &x);
    for (a, b) in out.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    for (a, b) in trace.unwrap().c2_act.iter().zip(&c2) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn forward_is_deterministic_and_bounded() {
    let p = random_params(40, 8, 3);
    let x = random_vec(40, 4);
    let (a, ta) = forward(&p, &x, true).unwrap();
    let (b, _) = forward(&p, &x, false).unwrap();
    assert_eq!(a, b);
    let t = ta.unwrap();
    assert!(t.fc2_act.iter().chain(&t.fc3_act).all(|v| v.abs() < 1.0));
    assert!(t.c1_act.iter().chain(&t.c2_act).all(|&v| v >= 0.0));
}

#[test]
fn forward_errors() {
    let mut p = random_params(10, 8, 1);
    assert!(matches!(forward(&p, &[0.0; 9], false), Err(Error::Dimension(_))));
    p.w2[3] = f64::NAN;
    match forward(&p, &[0.5; 10], false) {
        Err(Error::Numeric(msg)) => assert!(msg.contains("fc3"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn loss_examples() {
    let t = vec![0.3; 16];
    assert_eq!(loss(&t, &t, &[0.0; 32], 1e-4).unwrap(), 0.0);
    let o: Vec<f64> = t.iter().map(|v| v + 1.0).collect();
    assert!((loss(&o, &t, &[5.0; 32], 0.0).unwrap() - 1.0).abs() < 1e-15);
    assert!((loss(&t, &t, &[2.0; 32], 1e-4).unwrap() - 2e-4).abs() < 1e-18);
    assert!(matches!(loss(&t, &t[..4], &[], 0.0), Err(Error::Dimension(_))));
}

#[test]
fn backward_loss_equals_forward_loss() {
    let p = random_params(32, 8, 9);
    let x = random_vec(32, 10);
    let t = random_vec(64, 11);
    let (l, _) = backward(&p, &x, &t, 1e-4).unwrap();
    assert_eq!(l.to_bits(), full_loss(&p, &x, &t, 1e-4).to_bits());
}

#[test]
fn zero_point_gradient_closed_form() {
    let mut p = NetParams::zeros(16, 8);
    p.ktb[0] = 0.25;
    let t = random_vec(64, 2);
    let (_, g) = backward(&p, &random_vec(16, 3), &t, 1e-4).unwrap();
    for z in [&g.w2, &g.k1, &g.k2, &g.kt] {
        assert!(z.iter().all(|&v| v == 0.0));
    }
    let want = 2.0 * t.iter().map(|v| 0.25 - v).sum::<f64>() / 64.0;
    assert!((g.ktb[0] - want).abs() < 1e-14);
}

#[test]
fn gradient_matches_finite_differences_on_sampled_coordinates() {
    let p = random_params(32, 8, 21);
    let x = random_vec(32, 22);
    let t = random_vec(64, 23);
    let lambda = 1e-2;
    let (_, g) = backward(&p, &x, &t, lambda).unwrap();
    let mut r = rng::stream(24, "coords");
    let h = 1e-5;
    for k in 0..10 {
        let len = p.tensors()[k].len();
        for _ in 0..12 {
            let i = r.random_range(0..len);
            let mut q = p.clone();
            q.tensors_mut()[k][i] += h;
            let up = full_loss(&q, &x, &t, lambda);
            q.tensors_mut()[k][i] -= 2.0 * h;
            let down = full_loss(&q, &x, &t, lambda);
            let fd = (up - down) / (2.0 * h);
            let an = g.tensors()[k][i];
            let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
            assert!(rel < 1e-4, "{}[{i}]: analytic {an}, numeric {fd}", TENSOR_NAMES[k]);
        }
    }
}

#[test]
fn lambda_only_touches_the_conv_chain() {
    let p = random_params(32, 8, 31);
    let x = random_vec(32, 32);
    let t = random_vec(64, 33);
    let (_, g0) = backward(&p, &x, &t, 0.0).unwrap();
    let (_, g1) = backward(&p, &x, &t, 1e-4).unwrap();
    // KT sits downstream of c2, so the penalty cannot reach it.
    assert_eq!(g0.kt, g1.kt);
    assert_eq!(g0.ktb, g1.ktb);
    assert_ne!(g0.k2, g1.k2);
    // The W1 difference is the gradient of the penalty alone.
    let penalty = |q: &NetParams| {
        let (_, tr) = forward(q, &x, true).unwrap();
        let c2 = tr.unwrap().c2_act;
        1e-4 * c2.iter().sum::<f64>() / c2.len() as f64
    };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in (0..p.w1.len()).step_by(97) {
        let mut q = p.clone();
        q.w1[i] += h;
        let up = penalty(&q);
        q.w1[i] -= 2.0 * h;
        let fd = (up - penalty(&q)) / (2.0 * h);
        worst = worst.max((g1.w1[i] - g0.w1[i] - fd).abs());
    }
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn severed_conv_path_leaves_fc_gradients_free_of_penalty() {
    let mut p = random_params(32, 8, 41);
    p.k1.fill(0.0);
    p.k1b.fill(0.3);
    let x = random_vec(32, 42);
    let t = random_vec(64, 43);
    let (_, g0) = backward(&p, &x, &t, 0.0).unwrap();
    let (_, g1) = backward(&p, &x, &t, 1e-2).unwrap();
    for (a, b) in [(&g0.w1, &g1.w1), (&g0.b1, &g1.b1), (&g0.w2, &g1.w2), (&g0.b2, &g1.b2)] {
        assert_eq!(a, b);
        assert!(a.iter().all(|&v| v == 0.0));
    }
    assert_ne!(g0.k2b, g1.k2b);
}

#[test]
fn checkpoint_round_trips_bit_exactly() {
    let enc = make_encoding(&EncodingSpec::default_for(EncodingKind::Cartesian, 8), 8, 3).unwrap();
    let ck = Checkpoint {
        params: random_params(128, 8, 51),
        meta: CheckpointMeta {
            sensor_scale: 0.1 + 0.2,
            encoding: enc.to_json_value(),
            target_mode: TargetMode::Magnitude,
            train_seed: 7,
            phase_seed: None,
            epoch: 3,
        },
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.ckpt");
    ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ck);
    assert_eq!(back.to_bytes(), ck.to_bytes());
    assert_eq!(&std::fs::read(&path).unwrap()[..4], b"AMAP");
    assert_eq!(back.encoding().unwrap().to_json(), enc.to_json());
    let mut bytes = ck.to_bytes();
    bytes.truncate(bytes.len() - 8);
    assert!(Checkpoint::from_bytes(&bytes).is_err());
}
