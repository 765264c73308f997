//! Central-difference verification of analytic gradients in f64.

use rand::Rng as _;

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::Result;

/// Gradients smaller than this are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(leaf index, element index)` of the worst entry.
    pub worst: (usize, usize),
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Checks `build` with respect to every element of `leaves`.
///
/// `build` receives a fresh graph and the leaf variables and returns the
/// output node. Non-scalar outputs are reduced with fixed random weights
/// (seeded by `seed`) so every output element contributes.
pub fn grad_check<F>(leaves: &[Tensor<f64>], seed: u64, build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut projection: Option<Vec<f64>> = None;
    let mut eval = |leaves: &[Tensor<f64>], with_grad: bool| -> Result<(f64, Vec<Vec<f64>>)> {
        let mut g = Graph::new();
        let vars: Vec<Var> = leaves.iter().map(|t| g.param(t.clone())).collect();
        let out = build(&mut g, &vars)?;
        let n = g.value(out).len();
        let w = projection
            .get_or_insert_with(|| {
                if n == 1 {
                    vec![1.0]
                } else {
                    let mut r = crate::rng::rng(seed);
                    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
                }
            })
            .clone();
        let loss = g.weighted_sum(out, w)?;
        let value = g.value(loss).item();
        let grads = if with_grad {
            let mut gr = g.backward(loss);
            vars.iter()
                .zip(leaves)
                .map(|(&v, t)| gr.take(v).unwrap_or_else(|| vec![0.0; t.len()]))
                .collect()
        } else {
            Vec::new()
        };
        Ok((value, grads))
    };

    let (_, analytic) = eval(leaves, true)?;
    let mut work: Vec<Tensor<f64>> = leaves.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        checked: 0,
    };
    for li in 0..work.len() {
        for ei in 0..work[li].len() {
            let x = work[li].data()[ei];
            let h = 1e-5 * x.abs().max(1.0);
            work[li].data_mut()[ei] = x + h;
            let (fp, _) = eval(&work, false)?;
            work[li].data_mut()[ei] = x - h;
            let (fm, _) = eval(&work, false)?;
            work[li].data_mut()[ei] = x;
            let numeric = (fp - fm) / (2.0 * h);
            let err = relative_error(analytic[li][ei], numeric);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (li, ei);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
