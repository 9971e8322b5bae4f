use qlayers::data::{HeatmapSample, Label, GRID};
use qlayers::encodings::FeatureMapName;
use qlayers::nn::*;
use qlayers::training::{cross_entropy, HybridModel, ModelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn close(analytic: f64, numeric: f64, rel: f64) -> bool {
    (analytic - numeric).abs() <= rel * analytic.abs().max(numeric.abs()) + 1e-7
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Central difference of `f` along coordinate `i` of `v`.
fn fd(v: &[f64], i: usize, h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut p = v.to_vec();
    p[i] += h;
    let up = f(&p);
    p[i] -= 2.0 * h;
    let down = f(&p);
    (up - down) / (2.0 * h)
}

#[test]
fn conv_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random(&mut rng, &[2, 4, 4]);
    let w = random(&mut rng, &[3, 2, 3, 3]);
    let b: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let r = random(&mut rng, &[3, 4, 4]);
    let (dw, db, dx) = conv2d_backward(&x, &w, &r).unwrap();
    let loss = |x: &[f64], w: &[f64], b: &[f64]| {
        let xt = Tensor::new(vec![2, 4, 4], x.to_vec()).unwrap();
        let wt = Tensor::new(vec![3, 2, 3, 3], w.to_vec()).unwrap();
        dot(conv2d_forward(&xt, &wt, b).unwrap().data(), r.data())
    };
    for i in 0..x.len() {
        let n = fd(x.data(), i, 1e-4, |v| loss(v, w.data(), &b));
        assert!(close(dx.data()[i], n, 1e-4), "dx[{i}]");
    }
    for i in 0..w.len() {
        let n = fd(w.data(), i, 1e-4, |v| loss(x.data(), v, &b));
        assert!(close(dw.data()[i], n, 1e-4), "dw[{i}]");
    }
    for i in 0..3 {
        let n = fd(&b, i, 1e-4, |v| loss(x.data(), w.data(), v));
        assert!(close(db[i], n, 1e-4), "db[{i}]");
    }
}

#[test]
fn relu_pool_dropout_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = random(&mut rng, &[2, 4, 4]);
    let r = random(&mut rng, &[2, 4, 4]);
    let g = relu_backward(&x, &r);
    for i in 0..x.len() {
        let n = fd(x.data(), i, 1e-6, |v| {
            dot(relu(&Tensor::new(vec![2, 4, 4], v.to_vec()).unwrap()).data(), r.data())
        });
        assert!(close(g.data()[i], n, 1e-4));
    }

    let r = random(&mut rng, &[2, 2, 2]);
    let (_, argmax) = maxpool2x2(&x).unwrap();
    let g = maxpool_backward(&[2, 4, 4], &argmax, &r);
    for i in 0..x.len() {
        let n = fd(x.data(), i, 1e-6, |v| {
            let (y, _) = maxpool2x2(&Tensor::new(vec![2, 4, 4], v.to_vec()).unwrap()).unwrap();
            dot(y.data(), r.data())
        });
        assert!(close(g.data()[i], n, 1e-4));
    }

    let r = random(&mut rng, &[2, 4, 4]);
    let (_, scale) = dropout(&x, 0.5, Mode::Train, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let g = dropout_backward(&scale, &r);
    for i in 0..x.len() {
        let n = fd(x.data(), i, 1e-6, |v| {
            let t = Tensor::new(vec![2, 4, 4], v.to_vec()).unwrap();
            let (y, _) = dropout(&t, 0.5, Mode::Train, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
            dot(y.data(), r.data())
        });
        assert!(close(g.data()[i], n, 1e-4));
    }
}

#[test]
fn linear_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w = random(&mut rng, &[4, 6]);
    let b: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let r: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (dw, db, dx) = linear_backward(&x, &w, &r);
    for i in 0..6 {
        let n = fd(&x, i, 1e-5, |v| dot(&linear_forward(v, &w, &b).unwrap(), &r));
        assert!(close(dx[i], n, 1e-4));
    }
    for i in 0..w.len() {
        let n = fd(w.data(), i, 1e-5, |v| {
            let wt = Tensor::new(vec![4, 6], v.to_vec()).unwrap();
            dot(&linear_forward(&x, &wt, &b).unwrap(), &r)
        });
        assert!(close(dw.data()[i], n, 1e-4));
    }
    for i in 0..4 {
        let n = fd(&b, i, 1e-5, |v| dot(&linear_forward(&x, &w, v).unwrap(), &r));
        assert!(close(db[i], n, 1e-4));
    }
}

fn stack_loss(stack: &LayerStack, inputs: &[Tensor], targets: &[usize]) -> f64 {
    inputs
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(k, (x, &t))| {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
            let (y, _) = stack.forward(x, Mode::Train, &mut rng).unwrap();
            cross_entropy(t, y.data()).unwrap().0
        })
        .sum()
}

#[test]
fn full_stack_with_cross_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut stack = LayerStack::feature_extractor(&mut rng, 3, 0.5, true);
    let inputs: Vec<Tensor> = (0..4).map(|_| random(&mut rng, &[1, GRID, GRID])).collect();
    let targets = [0, 1, 2, 1];

    let mut grad = vec![0.0; stack.param_len()];
    let mut grad_inputs = Vec::new();
    for (k, (x, &t)) in inputs.iter().zip(&targets).enumerate() {
        let mut r = ChaCha8Rng::seed_from_u64(100 + k as u64);
        let (y, cache) = stack.forward(x, Mode::Train, &mut r).unwrap();
        let (_, g) = cross_entropy(t, y.data()).unwrap();
        let (gp, gx) = stack.backward(&cache, &Tensor::new(vec![3], g.to_vec()).unwrap()).unwrap();
        grad.iter_mut().zip(gp).for_each(|(a, b)| *a += b);
        grad_inputs.push(gx);
    }

    let base = stack.params();
    let mut probe = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..200 {
        let i = probe.random_range(0..base.len());
        let n = fd(&base, i, 1e-5, |p| {
            stack.set_params(p).unwrap();
            stack_loss(&stack, &inputs, &targets)
        });
        assert!(close(grad[i], n, 1e-3), "param {i}: {} vs {n}", grad[i]);
    }
    stack.set_params(&base).unwrap();
    for i in 0..GRID * GRID {
        let n = fd(inputs[0].data(), i, 1e-5, |v| {
            let mut xs = inputs.clone();
            xs[0] = Tensor::new(vec![1, GRID, GRID], v.to_vec()).unwrap();
            stack_loss(&stack, &xs, &targets)
        });
        assert!(close(grad_inputs[0].data()[i], n, 1e-3), "input {i}");
    }
}

#[test]
fn hybrid_gradient_every_group() {
    let spec = ModelSpec::new(FeatureMapName::PauliXyz1Rep, 2, 1);
    let mut model = HybridModel::build(&spec, 21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let batch: Vec<HeatmapSample> = (0..4)
        .map(|k| HeatmapSample {
            bins: GRID,
            grid: (0..GRID * GRID).map(|_| rng.random_range(0.0..1.0)).collect(),
            label: Label::ALL[k % 3],
        })
        .collect();
    let total = |m: &HybridModel| -> f64 {
        batch
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let mut r = ChaCha8Rng::seed_from_u64(k as u64);
                m.sample_grad(s, Mode::Train, &mut r).unwrap().loss
            })
            .sum()
    };
    let mut grad = vec![0.0; model.param_len()];
    for (k, s) in batch.iter().enumerate() {
        let mut r = ChaCha8Rng::seed_from_u64(k as u64);
        let g = model.sample_grad(s, Mode::Train, &mut r).unwrap().grad;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }

    let n_classical = model.classical.param_len();
    let n_theta = model.quantum.theta.len();
    let n_head = model.param_len() - n_classical - n_theta;
    let conv_end = n_classical - (64 * 2 + 2);
    let groups = [
        ("conv", 0, conv_end),
        ("linear", conv_end, n_classical),
        ("theta", n_classical, n_classical + n_theta),
        ("head", n_classical + n_theta, n_classical + n_theta + n_head),
    ];
    let base = model.params();
    let mut probe = ChaCha8Rng::seed_from_u64(23);
    for (name, lo, hi) in groups {
        let picks: Vec<usize> = if hi - lo <= 40 {
            (lo..hi).collect()
        } else {
            (0..40).map(|_| probe.random_range(lo..hi)).collect()
        };
        for i in picks {
            let n = fd(&base, i, 1e-5, |p| {
                model.set_params(p).unwrap();
                total(&model)
            });
            assert!(close(grad[i], n, 1e-3), "{name} param {i}: {} vs {n}", grad[i]);
        }
    }
}

#[test]
fn table_one_shape_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let stack = LayerStack::feature_extractor(&mut rng, 3, 0.5, true);
    let rows = stack.shape_chain(&[1, 8, 8]).unwrap();
    let want: [(&str, &[usize]); 9] = [
        ("Input", &[1, 8, 8]),
        ("Conv1", &[16, 8, 8]),
        ("Pool1", &[16, 4, 4]),
        ("Conv2", &[32, 4, 4]),
        ("Pool2", &[32, 2, 2]),
        ("Conv3", &[64, 2, 2]),
        ("Pool3", &[64, 1, 1]),
        ("Flatten", &[64]),
        ("Linear", &[3]),
    ];
    assert_eq!(rows.len(), 9);
    for (row, (name, shape)) in rows.iter().zip(want) {
        assert_eq!(row.layer, name);
        assert_eq!(row.shape, shape);
    }
}
