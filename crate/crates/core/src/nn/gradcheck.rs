use ndarray::{Array2, ArrayView2};

use super::QNetwork;

/// Outcome of comparing analytic and central-difference gradients.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub checked: usize,
}

/// Compares `backward` against central differences of the scalar loss
/// `sum(Q ⊙ weights)`, checking every parameter.
pub fn check_gradients(
    net: &QNetwork,
    input: &ArrayView2<'_, f64>,
    weights: &Array2<f64>,
    h: f64,
) -> GradCheck {
    let spec = net.spec().clone();
    let loss = |n: &QNetwork| -> f64 {
        let q = n.q_values(input).expect("shape checked by caller");
        (&q * weights).sum()
    };
    let cache = net.forward(input).expect("shape checked by caller");
    let analytic = net.backward(input, &cache, &weights.view()).flat_params();
    let base = net.flat_params();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for idx in 0..base.len() {
        let mut shifted = base.clone();
        shifted[idx] = base[idx] + h;
        probe.set_flat_params(&shifted).expect("same layout");
        let plus = loss(&probe);
        shifted[idx] = base[idx] - h;
        probe.set_flat_params(&shifted).expect("same layout");
        let minus = loss(&probe);
        let numeric = (plus - minus) / (2.0 * h);
        let denom = analytic[idx].abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((analytic[idx] - numeric).abs() / denom);
    }
    debug_assert_eq!(spec, *probe.spec());
    GradCheck {
        max_relative_error: worst,
        checked: base.len(),
    }
}
