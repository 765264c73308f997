//! Looks inside an untrained mixture-of-experts head: router weights per
//! error bound and the effect of tying all experts together.
//!
//! `cargo run --release --example moe_head`

use rand::Rng;

use cqsurrogate::rng::rng;
use cqsurrogate::surrogate::{HeadConfig, HeadKind, Metric, PredictionHead};

fn main() -> cqsurrogate::Result<()> {
    let mut r = rng(11);
    let mut head = PredictionHead::new(HeadConfig::new(HeadKind::Moe, Metric::Cr), 64, &mut r)?;
    let features = vec![(0..64).map(|_| r.random_range(-1.0..1.0)).collect::<Vec<f32>>()];
    let ebs = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1];

    let (pred, weights) = head.predict_normalized(&features, &ebs)?;
    for ((eb, p), w) in ebs.iter().zip(&pred).zip(&weights) {
        let w: Vec<String> = w.iter().map(|x| format!("{x:.3}")).collect();
        println!("eb {eb:.0e}: prediction {p:+.4}, router [{}]", w.join(", "));
    }

    head.tie_experts();
    let (tied, _) = head.predict_normalized(&features, &ebs)?;
    println!(
        "tied experts: {:?}",
        tied.iter().map(|v| format!("{v:+.4}")).collect::<Vec<_>>()
    );
    println!(
        "{} parameters in {} tensors",
        head.params().num_values(),
        head.params().len()
    );
    Ok(())
}
