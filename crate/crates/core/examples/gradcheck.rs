//! Finite-difference verification of the autodiff engine on a small
//! conv -> pool -> linear network, then a few Adam steps on a toy fit.
//!
//! `cargo run --release --example gradcheck`

use rand::Rng;

use cqsurrogate::autodiff::{grad_check, step_decay, AdamConfig, AdamState, Graph, ParamStore, Tensor};
use cqsurrogate::rng::rng;

fn random(r: &mut cqsurrogate::rng::Rng, shape: Vec<usize>) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

fn main() -> cqsurrogate::Result<()> {
    let mut r = rng(1);
    let leaves = vec![
        random(&mut r, vec![2, 1, 6, 6, 6]),
        random(&mut r, vec![3, 1, 3, 3, 3]),
        random(&mut r, vec![3]),
        random(&mut r, vec![4, 3]),
        random(&mut r, vec![4]),
    ];
    let report = grad_check(&leaves, 5, |g, v| {
        let y = g.conv3d(v[0], v[1], v[2], 2, 1)?;
        let y = g.relu(y);
        let y = g.global_avg_pool(y)?;
        let y = g.linear(y, v[3], v[4])?;
        g.softmax(y)
    })?;
    println!(
        "conv/pool/linear/softmax: max relative error {:.2e}",
        report.max_rel_error
    );

    // Fit y = 3x - 1 with one linear layer.
    let mut store = ParamStore::new();
    let w = store.add_he("w", vec![1, 1], 1, &mut r);
    let b = store.add_zeros("b", vec![1]);
    let xs: Vec<f32> = (0..32).map(|i| i as f32 / 16.0 - 1.0).collect();
    let ys: Vec<f32> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
    let mut adam = AdamState::new(&store, AdamConfig::default());
    for epoch in 0..300 {
        let mut g = Graph::<f32>::new();
        let p = store.bind(&mut g);
        let x = g.input(Tensor::new(vec![32, 1], xs.clone())?);
        let y = g.input(Tensor::new(vec![32, 1], ys.clone())?);
        let pred = g.linear(x, p[w], p[b])?;
        let loss = g.mse(pred, y)?;
        let value = g.value(loss).data()[0];
        let mut grads = g.backward(loss);
        let grads = store.collect_grads(&p, &mut grads);
        adam.step(&mut store, &grads, step_decay(0.05, epoch, 300))?;
        if epoch % 100 == 0 || epoch == 299 {
            println!("epoch {epoch:>3}: mse {value:.6}");
        }
    }
    println!(
        "w = {:.4}, b = {:.4}",
        store.get(w).tensor.data()[0],
        store.get(b).tensor.data()[0]
    );
    Ok(())
}
