//! Small fixed-size linear algebra over jet scalars.
//!
//! Hand-rolled because the entries are generic jets, not plain floats; every
//! helper is a direct transcription of the 2x2 / 3x3 formula it implements.

use crate::jet::Scalar;

pub type V3<S> = [S; 3];
pub type M2<S> = [[S; 2]; 2];
pub type M3<S> = [[S; 3]; 3];

pub fn v3_from_fn<S>(f: impl Fn(usize) -> S) -> V3<S> {
    std::array::from_fn(f)
}

pub fn m3_from_fn<S>(f: impl Fn(usize, usize) -> S) -> M3<S> {
    std::array::from_fn(|i| std::array::from_fn(|j| f(i, j)))
}

pub fn v3_add<S: Scalar>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    v3_from_fn(|i| a[i].clone() + b[i].clone())
}

pub fn v3_sub<S: Scalar>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    v3_from_fn(|i| a[i].clone() - b[i].clone())
}

pub fn v3_scale<S: Scalar>(a: &V3<S>, c: f64) -> V3<S> {
    v3_from_fn(|i| a[i].scale(c))
}

pub fn v3_mul<S: Scalar>(a: &V3<S>, c: &S) -> V3<S> {
    v3_from_fn(|i| a[i].clone() * c.clone())
}

/// Euclidean dot product (component sum, no metric weight).
pub fn dot_e<S: Scalar>(a: &V3<S>, b: &V3<S>) -> S {
    a[0].clone() * b[0].clone() + a[1].clone() * b[1].clone() + a[2].clone() * b[2].clone()
}

/// Euclidean cross product.
pub fn cross_e<S: Scalar>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    [
        a[1].clone() * b[2].clone() - a[2].clone() * b[1].clone(),
        a[2].clone() * b[0].clone() - a[0].clone() * b[2].clone(),
        a[0].clone() * b[1].clone() - a[1].clone() * b[0].clone(),
    ]
}

pub fn det2<S: Scalar>(m: &M2<S>) -> S {
    m[0][0].clone() * m[1][1].clone() - m[0][1].clone() * m[1][0].clone()
}

pub fn det3(m: &M3<f64>) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse of a 2x2 with jet entries; the caller guarantees det != 0
/// (regularity is checked before any division in the surface pipeline).
pub fn inv2<S: Scalar>(m: &M2<S>) -> M2<S> {
    let det = det2(m);
    let r = det
        .try_recip()
        .expect("inv2 called on a singular matrix; regularity must be checked first");
    [
        [m[1][1].clone() * r.clone(), -(m[0][1].clone() * r.clone())],
        [-(m[1][0].clone() * r.clone()), m[0][0].clone() * r],
    ]
}

pub fn mat2_mul_vec<S: Scalar>(m: &M2<S>, v: &[S; 2]) -> [S; 2] {
    [
        m[0][0].clone() * v[0].clone() + m[0][1].clone() * v[1].clone(),
        m[1][0].clone() * v[0].clone() + m[1][1].clone() * v[1].clone(),
    ]
}

/// Eigen-decomposition of the generalized symmetric pencil `h v = lambda g v`
/// with `g` positive definite, returned with `lambda1 >= lambda2`.
///
/// Eigenvectors come back in the same (chart) basis as the inputs and are
/// g-orthogonal for separated eigenvalues; they are not normalized here.
pub fn generalized_sym_eig2(h: &M2<f64>, g: &M2<f64>) -> [(f64, [f64; 2]); 2] {
    let a = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let b = -(h[0][0] * g[1][1] - 2.0 * h[0][1] * g[0][1] + h[1][1] * g[0][0]);
    let c = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let sq = disc.sqrt();
    // near-cancellation-free quadratic roots
    let q = -0.5 * (b + b.signum() * sq);
    let (mut l1, mut l2) = if q == 0.0 {
        (0.0, 0.0)
    } else {
        (q / a, c / q)
    };
    if l1 < l2 {
        std::mem::swap(&mut l1, &mut l2);
    }
    let vec_for = |lambda: f64| -> [f64; 2] {
        // rows of (h - lambda g) are both orthogonal to the eigenvector
        let r0 = [h[0][0] - lambda * g[0][0], h[0][1] - lambda * g[0][1]];
        let r1 = [h[1][0] - lambda * g[1][0], h[1][1] - lambda * g[1][1]];
        let n0 = r0[0] * r0[0] + r0[1] * r0[1];
        let n1 = r1[0] * r1[0] + r1[1] * r1[1];
        let r = if n0 >= n1 { r0 } else { r1 };
        if n0.max(n1) == 0.0 {
            [1.0, 0.0]
        } else {
            [-r[1], r[0]]
        }
    };
    [(l1, vec_for(l1)), (l2, vec_for(l2))]
}

/// Deterministic pairwise summation; the result depends only on the order of
/// `values`, never on thread count.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cross_product_is_orthogonal() {
        let a = [1.0, 2.0, 3.0];
        let b = [-0.5, 0.25, 2.0];
        let c = cross_e(&a, &b);
        assert_relative_eq!(dot_e(&a, &c), 0.0, epsilon = 1e-14);
        assert_relative_eq!(dot_e(&b, &c), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn generalized_eig_reproduces_pencil() {
        let h = [[2.0, 0.7], [0.7, -1.0]];
        let g = [[1.3, 0.2], [0.2, 0.9]];
        for (lambda, v) in generalized_sym_eig2(&h, &g) {
            let hv = mat2_mul_vec(&h, &v);
            let gv = mat2_mul_vec(&g, &v);
            assert_relative_eq!(hv[0], lambda * gv[0], epsilon = 1e-10, max_relative = 1e-10);
            assert_relative_eq!(hv[1], lambda * gv[1], epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn pairwise_sum_matches_naive_on_smooth_data() {
        let values: Vec<f64> = (0..1000).map(|i| ((i as f64) * 0.37).sin()).collect();
        let naive: f64 = values.iter().sum();
        assert_relative_eq!(pairwise_sum(&values), naive, epsilon = 1e-10);
    }
}
