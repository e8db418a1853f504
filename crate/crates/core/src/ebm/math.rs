use ndarray::{Array1, ArrayView1, ArrayView2};

/// Logistic function, stable for arguments of any magnitude.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `out += Σ_i coeffs[i] · mat.row(i)`, skipping zero coefficients.
///
/// Computes `matᵀ · coeffs` touching rows contiguously, which is what makes
/// sparse binary inputs cheap.
pub(crate) fn add_weighted_rows(out: &mut Array1<f64>, mat: ArrayView2<f64>, coeffs: ArrayView1<f64>) {
    debug_assert_eq!(mat.nrows(), coeffs.len());
    debug_assert_eq!(mat.ncols(), out.len());
    let out = out.as_slice_mut().expect("owned vectors are contiguous");
    for (row, &c) in mat.rows().into_iter().zip(coeffs.iter()) {
        if c == 0.0 {
            continue;
        }
        match row.as_slice() {
            Some(r) if c == 1.0 => out.iter_mut().zip(r).for_each(|(o, w)| *o += w),
            Some(r) => out.iter_mut().zip(r).for_each(|(o, w)| *o += c * w),
            None => out.iter_mut().zip(row.iter()).for_each(|(o, w)| *o += c * w),
        }
    }
}

/// `mat · vec` as one dot product per contiguous row.
pub(crate) fn row_dots(mat: ArrayView2<f64>, vec: ArrayView1<f64>) -> Array1<f64> {
    debug_assert_eq!(mat.ncols(), vec.len());
    match vec.as_slice() {
        Some(v) => mat
            .rows()
            .into_iter()
            .map(|row| match row.as_slice() {
                Some(r) => dot(r, v),
                None => row.dot(&vec),
            })
            .collect(),
        None => mat.dot(&vec),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // independent accumulators let the loop vectorize
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let pairs = [acc[0] + acc[4], acc[1] + acc[5], acc[2] + acc[6], acc[3] + acc[7]];
    (pairs[0] + pairs[1]) + (pairs[2] + pairs[3]) + tail
}
