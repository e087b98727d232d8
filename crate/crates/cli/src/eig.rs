//! Closed-form eigenpairs of symmetric 2x2 matrices.

/// Eigenvalues `l1 >= l2` and unit eigenvectors (columns `vectors[0]`,
/// `vectors[1]`) of the symmetric part of `m`. Each vector's first nonzero
/// component is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eig2 {
    pub values: [f64; 2],
    pub vectors: [[f64; 2]; 2],
}

pub fn eig2x2_symmetric(m: &[[f64; 2]; 2]) -> Eig2 {
    let (a, d) = (m[0][0], m[1][1]);
    let b = 0.5 * (m[0][1] + m[1][0]);
    let mid = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let rad = half.hypot(b);
    let values = [mid + rad, mid - rad];
    // angle of the first eigenvector; atan2 keeps it stable when b is tiny
    let phi = 0.5 * b.atan2(half);
    let (s, c) = phi.sin_cos();
    let v1 = fix_sign([c, s]);
    let v2 = fix_sign([-s, c]);
    Eig2 { values, vectors: [v1, v2] }
}

fn fix_sign(v: [f64; 2]) -> [f64; 2] {
    let first = if v[0] != 0.0 { v[0] } else { v[1] };
    if first < 0.0 {
        [-v[0], -v[1]]
    } else {
        [v[0] + 0.0, v[1] + 0.0]
    }
}

/// `max |l| / min |l|`, the anisotropy of a definite 2x2 tensor; `None` when
/// the smaller magnitude vanishes.
pub fn magnitude_ratio(values: [f64; 2]) -> Option<f64> {
    let (x, y) = (values[0].abs(), values[1].abs());
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    (lo > 0.0).then(|| hi / lo)
}
