//! Backpropagation checked against independent oracles: central finite
//! differences for continuous networks, a scalar straight-through reference
//! for discretized ones, and large-L convergence to tanh.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sudonet::datasets::gen_parabola;
use sudonet::network::Dense;
use sudonet::training::train;
use sudonet::{
    ActivationKind, LayerActivation, LayerSpec, Loss, Matrix, Network, NetworkSpec, OptimizerKind, TrainConfig,
};

const H: f64 = 1e-5;

fn random_net(rng: &mut ChaCha8Rng, hidden: &[usize], act: ActivationKind, inputs: usize, loss: Loss) -> Network {
    let (outputs, out_act) = match loss {
        Loss::Sse => (rng.gen_range(1..=3), if rng.gen() { LayerActivation::Linear } else { ActivationKind::Tanh.into() }),
        Loss::SoftmaxCrossEntropy => (rng.gen_range(2..=4), LayerActivation::Softmax),
    };
    let spec = NetworkSpec::mlp(inputs, hidden, act, outputs, out_act, loss).unwrap();
    let mut net = Network::init(spec, rng.gen());
    // non-zero biases so every parameter matters
    for d in net.layers_mut() {
        for b in d.bias.as_mut_slice() {
            *b = rng.gen_range(-0.5..0.5);
        }
    }
    net
}

fn targets_for(rng: &mut ChaCha8Rng, net: &Network, rows: usize) -> Matrix {
    let k = net.spec().output_dim();
    match net.spec().loss() {
        Loss::Sse => Matrix::from_fn(rows, k, |_, _| rng.gen_range(-0.9..0.9)),
        Loss::SoftmaxCrossEntropy => {
            let labels: Vec<usize> = (0..rows).map(|_| rng.gen_range(0..k)).collect();
            Matrix::from_fn(rows, k, |i, j| if labels[i] == j { 1.0 } else { 0.0 })
        }
    }
}

fn loss_at(net: &Network, x: &Matrix, y: &Matrix) -> f64 {
    net.loss(&net.forward(x).unwrap(), y).unwrap()
}

/// Smallest |pre-activation| over every relu unit of the batch.
fn relu_margin(net: &Network, x: &Matrix) -> f64 {
    let trace = net.forward(x).unwrap();
    let mut m = f64::INFINITY;
    for (spec, z) in net.spec().layers().iter().zip(&trace.preactivations) {
        if spec.activation == ActivationKind::Relu.into() {
            m = z.as_slice().iter().fold(m, |m, v| m.min(v.abs()));
        }
    }
    m
}

fn check_finite_differences(mut net: Network, x: &Matrix, y: &Matrix, rel: f64, abs: f64) {
    let grads = net.backward(&net.forward(x).unwrap(), y).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|m| m.as_slice().to_vec()).collect();
    for (t, tensor) in analytic.iter().enumerate() {
        for (k, &a) in tensor.iter().enumerate() {
            let original = net.parameters_mut()[t].as_slice()[k];
            net.parameters_mut()[t].as_mut_slice()[k] = original + H;
            let plus = loss_at(&net, x, y);
            net.parameters_mut()[t].as_mut_slice()[k] = original - H;
            let minus = loss_at(&net, x, y);
            net.parameters_mut()[t].as_mut_slice()[k] = original;
            let numeric = (plus - minus) / (2.0 * H);
            let err = (a - numeric).abs();
            assert!(
                err <= abs || err <= rel * a.abs().max(numeric.abs()),
                "tensor {t} entry {k}: analytic {a} vs numeric {numeric}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn continuous_gradients_match_finite_differences(
        seed in any::<u64>(),
        depth in 1usize..=2,
        relu in any::<bool>(),
        ce in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=8)).collect();
        let act = if relu { ActivationKind::Relu } else { ActivationKind::Tanh };
        let loss = if ce { Loss::SoftmaxCrossEntropy } else { Loss::Sse };
        let inputs = rng.gen_range(1..=4);
        let net = random_net(&mut rng, &hidden, act, inputs, loss);
        let rows = rng.gen_range(1..=6);
        let x = Matrix::from_fn(rows, inputs, |_, _| rng.gen_range(-1.5..1.5));
        let y = targets_for(&mut rng, &net, rows);
        // stay clear of relu kinks, where the derivative is one-sided
        prop_assume!(!relu || relu_margin(&net, &x) > 1e-3);
        check_finite_differences(net, &x, &y, 1e-4, 1e-7);
    }
}

#[test]
fn tanh_network_gradient_within_tighter_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        let net = random_net(&mut rng, &[6, 5], ActivationKind::Tanh, 3, Loss::Sse);
        let x = Matrix::from_fn(5, 3, |_, _| rng.gen_range(-1.0..1.0));
        let y = targets_for(&mut rng, &net, 5);
        check_finite_differences(net, &x, &y, 1e-5, 1e-9);
    }
}

/// Scalar reference: forward with the discretized values, backward with
/// `1 - tanh²(z)` at every discretized unit. Written with plain loops over
/// `Vec<Vec<f64>>` and no library matrix code.
fn straight_through_reference(net: &Network, x: &Matrix, y: &Matrix) -> Vec<Vec<f64>> {
    let layers = net.spec().layers();
    let rows = x.rows();
    let mut acts: Vec<Vec<Vec<f64>>> = vec![(0..rows).map(|i| x.row(i).to_vec()).collect()];
    let mut pres: Vec<Vec<Vec<f64>>> = Vec::new();
    for (spec, d) in layers.iter().zip(net.layers()) {
        let input = acts.last().unwrap();
        let mut z = vec![vec![0.0; spec.output_dim]; rows];
        let mut a = vec![vec![0.0; spec.output_dim]; rows];
        for r in 0..rows {
            for o in 0..spec.output_dim {
                let mut s = d.bias.get(0, o);
                for i in 0..spec.input_dim {
                    s += input[r][i] * d.weights.get(i, o);
                }
                z[r][o] = s;
                a[r][o] = match spec.activation {
                    LayerActivation::Linear => s,
                    LayerActivation::Unit(k) => k.forward(s).unwrap(),
                    LayerActivation::Softmax => unreachable!("reference covers SSE only"),
                };
            }
        }
        pres.push(z);
        acts.push(a);
    }
    let local = |act: LayerActivation, z: f64| match act {
        LayerActivation::Linear => 1.0,
        LayerActivation::Unit(ActivationKind::Relu) => f64::from(u8::from(z > 0.0)),
        LayerActivation::Unit(ActivationKind::RSudo(_)) if z.tanh() <= 0.0 => 0.0,
        LayerActivation::Unit(_) => 1.0 - z.tanh() * z.tanh(),
        LayerActivation::Softmax => unreachable!(),
    };
    let n = layers.len();
    let out = &acts[n];
    let mut delta: Vec<Vec<f64>> = (0..rows)
        .map(|r| (0..layers[n - 1].output_dim).map(|o| 2.0 * (out[r][o] - y.get(r, o)) * local(layers[n - 1].activation, pres[n - 1][r][o])).collect())
        .collect();
    let mut grads = vec![Vec::new(); 2 * n];
    for l in (0..n).rev() {
        let (fan_in, fan_out) = (layers[l].input_dim, layers[l].output_dim);
        let mut gw = vec![0.0; fan_in * fan_out];
        let mut gb = vec![0.0; fan_out];
        for r in 0..rows {
            for o in 0..fan_out {
                gb[o] += delta[r][o];
                for i in 0..fan_in {
                    gw[i * fan_out + o] += acts[l][r][i] * delta[r][o];
                }
            }
        }
        grads[2 * l] = gw;
        grads[2 * l + 1] = gb;
        if l > 0 {
            let w = &net.layers()[l].weights;
            delta = (0..rows)
                .map(|r| {
                    (0..fan_in)
                        .map(|i| {
                            let up: f64 = (0..fan_out).map(|o| delta[r][o] * w.get(i, o)).sum();
                            up * local(layers[l - 1].activation, pres[l - 1][r][i])
                        })
                        .collect()
                })
                .collect();
        }
    }
    grads
}

#[test]
fn discretized_gradients_match_straight_through_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..40 {
        let l = [2, 3, 4, 8, 64, 256][case % 6];
        let act = if case % 2 == 0 { ActivationKind::sudo(l).unwrap() } else { ActivationKind::rsudo(l).unwrap() };
        let hidden: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(1..=8)).collect();
        let net = random_net(&mut rng, &hidden, act, 2, Loss::Sse);
        let x = Matrix::from_fn(6, 2, |_, _| rng.gen_range(-2.0..2.0));
        let y = targets_for(&mut rng, &net, 6);
        let got = net.backward(&net.forward(&x).unwrap(), &y).unwrap();
        let want = straight_through_reference(&net, &x, &y);
        for (t, (g, w)) in got.tensors().iter().zip(&want).enumerate() {
            for (a, b) in g.as_slice().iter().zip(w) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "case {case} tensor {t}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn huge_level_count_converges_to_tanh_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let tanh_net = random_net(&mut rng, &[6, 6], ActivationKind::Tanh, 2, Loss::Sse);
        let layers: Vec<LayerSpec> = tanh_net
            .spec()
            .layers()
            .iter()
            .map(|l| LayerSpec {
                activation: if l.activation == ActivationKind::Tanh.into() && l.output_dim == 6 {
                    ActivationKind::sudo(1_000_000).unwrap().into()
                } else {
                    l.activation
                },
                ..*l
            })
            .collect();
        let sudo_spec = NetworkSpec::new(layers, Loss::Sse).unwrap();
        let params: Vec<Dense<f64>> = tanh_net.layers().to_vec();
        let sudo_net = Network::from_parts(sudo_spec, params).unwrap();
        let x = Matrix::from_fn(8, 2, |_, _| rng.gen_range(-1.0..1.0));
        let y = targets_for(&mut rng, &tanh_net, 8);
        let a = tanh_net.backward(&tanh_net.forward(&x).unwrap(), &y).unwrap();
        let b = sudo_net.backward(&sudo_net.forward(&x).unwrap(), &y).unwrap();
        for (ga, gb) in a.tensors().iter().zip(b.tensors()) {
            for (u, v) in ga.as_slice().iter().zip(gb.as_slice()) {
                assert!((u - v).abs() <= 1e-3, "{u} vs {v}");
            }
        }
    }
}

#[test]
fn parabola_training_halves_loss() {
    let data = gen_parabola::<f64>(200).unwrap();
    for seed in 0..3 {
        let spec = NetworkSpec::mlp(1, &[2], ActivationKind::Tanh, 1, LayerActivation::Linear, Loss::Sse).unwrap();
        let mut net = Network::init(spec, seed);
        let cfg = TrainConfig {
            optimizer: OptimizerKind::SGD,
            learning_rate: 1e-3,
            epochs: 500,
            batch_size: None,
            seed,
        };
        let report = train(&mut net, &data.inputs, &data.targets, &cfg, |_, _| Ok(())).unwrap();
        assert!(report.final_loss() < 0.5 * report.initial_loss, "seed {seed}: {report:?}");
    }
}
