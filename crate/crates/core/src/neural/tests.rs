use rand::Rng;

use super::checkpoint;
use super::network::*;
use super::ops::*;
use crate::error::Error;
use crate::rng;

fn spec(input: usize, hidden: &[usize], out: usize, ln: bool, sn: bool) -> NetworkSpec {
    NetworkSpec {
        input_dim: input,
        hidden_layers: hidden.to_vec(),
        output_dim: out,
        layer_norm: ln,
        spectral_norm: sn,
    }
}

fn zeroed(mut p: NetworkParams) -> NetworkParams {
    for t in p.tensors_mut() {
        t.iter_mut().for_each(|v| *v = 0.0);
    }
    p
}

#[test]
fn zero_weights_give_one_half() {
    let p = zeroed(NetworkParams::init(&spec(4, &[3], 1, false, false), &mut rng::stream(1, "t")).unwrap());
    let c = Network::new(&p).forward(Input::Dense(&[1.0, -2.0, 3.0, 0.5])).unwrap();
    assert_eq!(c.output, vec![0.5]);
}

#[test]
fn zero_weights_with_output_bias() {
    let mut p = zeroed(NetworkParams::init(&spec(4, &[3], 1, false, false), &mut rng::stream(1, "t")).unwrap());
    p.layers[1].bias[0] = 1.3;
    p.power_iterate();
    let c = Network::new(&p).forward(Input::Dense(&[1.0, -2.0, 3.0, 0.5])).unwrap();
    assert!((c.output[0] - sigmoid(1.3)).abs() < 1e-15);
}

#[test]
fn forward_matches_straight_line_reimplementation() {
    let s = spec(5, &[4], 1, false, false);
    let p = NetworkParams::init(&s, &mut rng::stream(42, "t")).unwrap();
    let x = [0.3, -1.2, 0.0, 2.0, 0.7];
    let (w1, b1, w2, b2) = (&p.layers[0].weight, &p.layers[0].bias, &p.layers[1].weight, &p.layers[1].bias);
    let mut h = [0.0; 4];
    for j in 0..4 {
        let mut acc = b1[j];
        for i in 0..5 {
            acc += x[i] * w1[i * 4 + j];
        }
        h[j] = acc.max(0.0);
    }
    let mut z = b2[0];
    for j in 0..4 {
        z += h[j] * w2[j];
    }
    let expected = 1.0 / (1.0 + (-z).exp());
    let net = Network::new(&p);
    let got = net.forward(Input::Dense(&x)).unwrap();
    assert!((got.output[0] - expected).abs() < 1e-12);
    let sparse = net
        .forward(Input::Sparse { indices: &[0, 1, 3, 4], values: &[0.3, -1.2, 2.0, 0.7] })
        .unwrap();
    assert!((sparse.output[0] - expected).abs() < 1e-12);
}

#[test]
fn forward_is_deterministic() {
    let p = NetworkParams::init(&spec(6, &[5, 4], 3, true, true), &mut rng::stream(3, "t")).unwrap();
    let x = [0.1, 0.2, -0.3, 0.4, 0.0, 1.0];
    let a = Network::new(&p).forward(Input::Dense(&x)).unwrap();
    let b = Network::new(&p).forward(Input::Dense(&x)).unwrap();
    assert_eq!(a.output, b.output);
    assert!((a.output.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn dimension_mismatch_and_stale_cache_are_contract_errors() {
    let mut p = NetworkParams::init(&spec(3, &[2], 1, false, false), &mut rng::stream(3, "t")).unwrap();
    assert!(matches!(Network::new(&p).forward(Input::Dense(&[1.0])), Err(Error::Contract(_))));
    assert!(matches!(
        Network::new(&p).forward(Input::Sparse { indices: &[5], values: &[1.0] }),
        Err(Error::Contract(_))
    ));
    let cache = Network::new(&p).forward(Input::Dense(&[1.0, 2.0, 3.0])).unwrap();
    p.layers[0].bias[0] += 1.0;
    p.power_iterate();
    let mut g = p.zero_grads();
    assert!(matches!(Network::new(&p).backward(&cache, &[1.0], &mut g), Err(Error::Contract(_))));
}

#[test]
fn non_finite_activation_names_the_layer() {
    let mut p = NetworkParams::init(&spec(2, &[2], 1, false, false), &mut rng::stream(3, "t")).unwrap();
    p.layers[0].weight[0] = f64::INFINITY;
    p.power_iterate();
    match Network::new(&p).forward(Input::Dense(&[1.0, 0.0])) {
        Err(Error::Numeric { location, .. }) => assert_eq!(location, "layer 0"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn zero_loss_gradient_gives_zero_parameter_gradients() {
    let p = NetworkParams::init(&spec(4, &[3, 3], 2, true, true), &mut rng::stream(8, "t")).unwrap();
    let net = Network::new(&p);
    let c = net.forward(Input::Dense(&[0.5, -0.5, 1.0, 2.0])).unwrap();
    let mut g = p.zero_grads();
    let dx = net.backward(&c, &[0.0, 0.0], &mut g).unwrap();
    net.finish_gradients(&mut g);
    assert!(g.is_zero());
    assert!(dx.iter().all(|&v| v == 0.0));
}

#[test]
fn zeroed_input_coordinate_gets_no_weight_gradient() {
    let p = NetworkParams::init(&spec(4, &[3], 1, true, false), &mut rng::stream(8, "t")).unwrap();
    let net = Network::new(&p);
    for input in [Input::Dense(&[0.5, 0.0, 1.0, 2.0]), Input::Sparse { indices: &[0, 2, 3], values: &[0.5, 1.0, 2.0] }] {
        let c = net.forward(input).unwrap();
        let mut g = p.zero_grads();
        net.backward(&c, &[bce_logit_grad(c.output[0], 1)], &mut g).unwrap();
        assert!(g.tensors[0][3..6].iter().all(|&v| v == 0.0));
        assert!(g.tensors[0][0..3].iter().any(|&v| v != 0.0));
    }
}

enum Target {
    Label(u8),
    Group(usize),
}

fn loss_of(params: &NetworkParams, xs: &[Vec<f64>], targets: &[Target]) -> (f64, Vec<Vec<bool>>) {
    let net = Network::new(params);
    let mut total = 0.0;
    let mut patterns = Vec::new();
    for (x, t) in xs.iter().zip(targets) {
        let c = net.forward(Input::Dense(x)).unwrap();
        total += match t {
            Target::Label(y) => binary_cross_entropy(c.output[0], *y),
            Target::Group(z) => multiclass_cross_entropy(&c.output, *z),
        };
        patterns.push(c.activation_pattern());
    }
    (total / xs.len() as f64, patterns)
}

/// Central-difference check of every parameter and input gradient.
fn gradient_check(s: &NetworkSpec, seed: u64) -> (usize, usize) {
    let mut r = rng::stream(seed, "gradcheck");
    let mut params = NetworkParams::init(s, &mut r).unwrap();
    // move gamma/beta away from their initial values
    for layer in &mut params.layers {
        if let Some(n) = &mut layer.norm {
            n.gamma.iter_mut().for_each(|g| *g = r.random_range(0.5..1.5));
            n.beta.iter_mut().for_each(|b| *b = r.random_range(-0.3..0.3));
        }
    }
    params.power_iterate();
    let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..s.input_dim).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let targets: Vec<Target> = (0..3)
        .map(|_| if s.output_dim == 1 { Target::Label(r.random_range(0..2)) } else { Target::Group(r.random_range(0..s.output_dim)) })
        .collect();

    let net = Network::new(&params);
    let mut grads = params.zero_grads();
    let mut input_grads = Vec::new();
    for (x, t) in xs.iter().zip(&targets) {
        let c = net.forward(Input::Dense(x)).unwrap();
        let d = match t {
            Target::Label(y) => vec![bce_logit_grad(c.output[0], *y)],
            Target::Group(z) => ce_logit_grad(&c.output, *z),
        };
        input_grads.push(net.backward(&c, &d, &mut grads).unwrap());
    }
    net.finish_gradients(&mut grads);
    grads.scale(1.0 / 3.0);

    let h = 1e-5;
    let (_, base_pattern) = loss_of(&params, &xs, &targets);
    let (mut checked, mut skipped) = (0, 0);
    let n_tensors = grads.tensors.len();
    for t in 0..n_tensors {
        for i in 0..grads.tensors[t].len() {
            let mut plus = params.clone();
            plus.tensors_mut()[t][i] += h;
            let mut minus = params.clone();
            minus.tensors_mut()[t][i] -= h;
            let (lp, pp) = loss_of(&plus, &xs, &targets);
            let (lm, pm) = loss_of(&minus, &xs, &targets);
            if pp != base_pattern || pm != base_pattern {
                skipped += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = grads.tensors[t][i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            assert!(rel < 1e-4, "{s:?} tensor {t}[{i}]: analytic {analytic} numeric {numeric}");
            checked += 1;
        }
    }
    // input gradients (what the adversarial classifier step relies on)
    for (k, x) in xs.iter().enumerate() {
        for i in 0..x.len() {
            let single = |delta: f64| {
                let mut xp = x.clone();
                xp[i] += delta;
                let c = Network::new(&params).forward(Input::Dense(&xp)).unwrap();
                let l = match &targets[k] {
                    Target::Label(y) => binary_cross_entropy(c.output[0], *y),
                    Target::Group(z) => multiclass_cross_entropy(&c.output, *z),
                };
                (l, c.activation_pattern())
            };
            let (lp, pp) = single(h);
            let (lm, pm) = single(-h);
            if pp != base_pattern[k] || pm != base_pattern[k] {
                skipped += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = input_grads[k][i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            assert!(rel < 1e-4, "{s:?} input {k}[{i}]: analytic {analytic} numeric {numeric}");
            checked += 1;
        }
    }
    (checked, skipped)
}

#[test]
fn gradients_match_finite_differences_three_layer_layer_norm() {
    let (checked, skipped) = gradient_check(&spec(6, &[8, 7], 1, true, false), 1);
    assert!(checked > 100 && skipped * 20 < checked);
}

#[test]
fn gradients_match_finite_differences_spectral_discriminator() {
    for (seed, ln) in [(2, false), (3, true)] {
        let (checked, skipped) = gradient_check(&spec(2, &[8, 6], 4, ln, true), seed);
        assert!(checked > 50 && skipped * 20 < checked);
    }
}

#[test]
fn sparse_and_dense_gradients_agree() {
    let p = NetworkParams::init(&spec(6, &[5], 1, true, false), &mut rng::stream(4, "t")).unwrap();
    let net = Network::new(&p);
    let dense = [0.0, 1.0, 0.0, 1.0, 0.0, -0.4];
    let mut gd = p.zero_grads();
    let c = net.forward(Input::Dense(&dense)).unwrap();
    net.backward(&c, &[0.3], &mut gd).unwrap();
    let mut gs = p.zero_grads();
    let c = net.forward(Input::Sparse { indices: &[1, 3, 5], values: &[1.0, 1.0, -0.4] }).unwrap();
    net.backward(&c, &[0.3], &mut gs).unwrap();
    for (a, b) in gd.tensors.iter().flatten().zip(gs.tensors.iter().flatten()) {
        assert!((a - b).abs() < 1e-14);
    }
}

fn largest_singular_value(w: &[f64], rows: usize, cols: usize) -> f64 {
    let m = nalgebra::DMatrix::from_row_slice(rows, cols, w);
    m.singular_values().max()
}

#[test]
fn converged_spectral_normalization_is_unit_norm() {
    let mut r = rng::stream(77, "svd");
    for trial in 0..50 {
        let rows = r.random_range(1..7);
        let cols = r.random_range(1..7);
        let w: Vec<f64> = (0..rows * cols).map(|_| r.random_range(-2.0..2.0)).collect();
        let u0: Vec<f64> = (0..rows).map(|_| r.random_range(-1.0..1.0)).collect();
        let est = spectral_normalize(&w, rows, cols, &u0, 500);
        let top = largest_singular_value(&est.normalized, rows, cols);
        assert!((top - 1.0).abs() < 1e-3, "trial {trial}: {top}");
        assert!((est.sigma - largest_singular_value(&w, rows, cols)).abs() < 1e-3 * est.sigma);
    }
}

#[test]
fn spectral_discriminator_layers_are_one_lipschitz_after_convergence() {
    let mut p = NetworkParams::init(&spec(2, &[16, 16], 6, true, true), &mut rng::stream(5, "t")).unwrap();
    for _ in 0..300 {
        p.power_iterate();
    }
    let net = Network::new(&p);
    for (l, layer) in p.layers.iter().enumerate() {
        let top = largest_singular_value(net.effective_weight(l), layer.in_dim, layer.out_dim);
        assert!((top - 1.0).abs() < 1e-3, "layer {l}: {top}");
    }
}

#[test]
fn checkpoint_round_trip_and_corruption() {
    let p = NetworkParams::init(&spec(5, &[4, 3], 2, true, true), &mut rng::stream(9, "t")).unwrap();
    let bytes = checkpoint::encode(&p, "{\"arm\":\"standard\"}");
    assert_eq!(&bytes[..8], b"EQODDSCK");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
    let (back, meta) = checkpoint::decode(&bytes).unwrap();
    assert_eq!(back.layers, p.layers);
    assert_eq!(back.spec, p.spec);
    assert_eq!(meta, "{\"arm\":\"standard\"}");
    assert!(checkpoint::decode(&bytes[..bytes.len() - 3]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(checkpoint::decode(&bad).is_err());
}

#[test]
fn layout_is_documented_row_major() {
    let s = spec(2, &[], 1, false, false);
    let mut p = NetworkParams::init(&s, &mut rng::stream(1, "t")).unwrap();
    p.layers[0].weight = vec![1.5, -2.0];
    p.layers[0].bias = vec![0.25];
    let bytes = checkpoint::encode(&p, "");
    let tail = &bytes[bytes.len() - 24..];
    let vals: Vec<f64> = tail.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    assert_eq!(vals, vec![1.5, -2.0, 0.25]);
}
