use nalgebra::DMatrix;

/// Cosine-similarity affinity between the rows of `x`.
///
/// A zero row has affinity 0 with every other row and 1 with itself.
pub fn build_affinity(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let norms: Vec<f64> = x.row_iter().map(|r| r.norm()).collect();
    let gram = x * x.transpose();
    let mut w = DMatrix::zeros(n, n);
    for a in 0..n {
        w[(a, a)] = 1.0;
        for b in a + 1..n {
            let v = if norms[a] == 0.0 || norms[b] == 0.0 {
                0.0
            } else {
                (gram[(a, b)] / (norms[a] * norms[b])).clamp(-1.0, 1.0)
            };
            w[(a, b)] = v;
            w[(b, a)] = v;
        }
    }
    w
}

/// Affinity used by the smoothness term. Unless `signed` is set, negative
/// cosines are clipped to 0 so the Laplacian stays positive semidefinite;
/// with signed weights the coding objective can be unbounded below.
pub fn smoothing_affinity(x: &DMatrix<f64>, signed: bool) -> DMatrix<f64> {
    let w = build_affinity(x);
    if signed {
        w
    } else {
        w.map(|v| v.max(0.0))
    }
}

/// Graph Laplacian `diag(W 1) - W`.
pub fn laplacian(w: &DMatrix<f64>) -> DMatrix<f64> {
    let mut l = -w.clone();
    for (a, row) in w.row_iter().enumerate() {
        l[(a, a)] += row.sum();
    }
    l
}
