use ndarray::{Array2, ArrayView2};

/// `Q(a) = V + (A(a) - mean A)` for one head, evaluated as
/// `V + (k A(a) - sum A) / k` so that adding a constant to every advantage
/// cancels exactly whenever the scaled sums are representable.
pub fn aggregate(value: f64, advantages: &[f64]) -> Vec<f64> {
    let k = advantages.len() as f64;
    let total: f64 = advantages.iter().sum();
    advantages.iter().map(|a| value + (k * a - total) / k).collect()
}

/// Batched aggregation over a raw output matrix laid out as
/// `[advantages (heads × actions) | values (heads)]`.
pub fn aggregate_batch(raw: &ArrayView2<'_, f64>, heads: usize, actions: usize) -> Array2<f64> {
    let mut q = Array2::zeros((raw.nrows(), heads * actions));
    for (row, mut out) in raw.rows().into_iter().zip(q.rows_mut()) {
        for head in 0..heads {
            let adv = row.slice(ndarray::s![head * actions..(head + 1) * actions]);
            let k = actions as f64;
            let total = adv.sum();
            let value = row[heads * actions + head];
            for (a, &x) in adv.iter().enumerate() {
                out[head * actions + a] = value + (k * x - total) / k;
            }
        }
    }
    q
}

/// Maps a gradient on aggregated Q-values back onto the raw outputs.
pub fn backward_batch(d_q: &ArrayView2<'_, f64>, heads: usize, actions: usize) -> Array2<f64> {
    let mut d_raw = Array2::zeros((d_q.nrows(), heads * actions + heads));
    for (row, mut out) in d_q.rows().into_iter().zip(d_raw.rows_mut()) {
        for head in 0..heads {
            let dq = row.slice(ndarray::s![head * actions..(head + 1) * actions]);
            let total = dq.sum();
            let mean = total / actions as f64;
            for (a, &g) in dq.iter().enumerate() {
                out[head * actions + a] = g - mean;
            }
            out[heads * actions + head] = total;
        }
    }
    d_raw
}
