//! Products with mostly-zero left operands. Observations are dominated by
//! one-hot association bits, so skipping zero entries saves most of the
//! first-layer work.

use ndarray::{Array2, ArrayView2, ArrayViewMut2};

/// Below this fraction of non-zeros the row-gather path wins.
const SPARSE_DENSITY: f64 = 0.35;

fn is_sparse(x: &ArrayView2<'_, f64>) -> bool {
    let nonzero = x.iter().filter(|v| **v != 0.0).count();
    (nonzero as f64) < SPARSE_DENSITY * x.len() as f64
}

/// `x · w`.
pub fn matmul(x: &ArrayView2<'_, f64>, w: &Array2<f64>) -> Array2<f64> {
    if !is_sparse(x) {
        return x.dot(w);
    }
    let n = w.ncols();
    let ws = w.as_slice().expect("standard layout");
    let mut out = Array2::zeros((x.nrows(), n));
    let os = out.as_slice_mut().expect("fresh array");
    for (xrow, orow) in x.rows().into_iter().zip(os.chunks_exact_mut(n)) {
        for (k, &v) in xrow.iter().enumerate() {
            if v != 0.0 {
                axpy(orow, v, &ws[k * n..(k + 1) * n]);
            }
        }
    }
    out
}

/// `grad += xᵀ · dy`.
pub fn accumulate_outer(grad: &mut ArrayViewMut2<'_, f64>, x: &ArrayView2<'_, f64>, dy: &ArrayView2<'_, f64>) {
    if !is_sparse(x) {
        *grad += &x.t().dot(dy);
        return;
    }
    let n = grad.ncols();
    let dy = dy.as_standard_layout();
    let ds = dy.as_slice().expect("standard layout");
    let gs = grad.as_slice_mut().expect("standard layout");
    for (xrow, drow) in x.rows().into_iter().zip(ds.chunks_exact(n)) {
        for (k, &v) in xrow.iter().enumerate() {
            if v != 0.0 {
                axpy(&mut gs[k * n..(k + 1) * n], v, drow);
            }
        }
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
        // SAFETY: the required CPU features were just detected.
        unsafe { axpy_fma(y, a, x) };
        return;
    }
    for (y, x) in y.iter_mut().zip(x) {
        *y += a * x;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn axpy_fma(y: &mut [f64], a: f64, x: &[f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y = a.mul_add(*x, *y);
    }
}
