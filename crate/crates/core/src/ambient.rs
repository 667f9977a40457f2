//! Geometry of the ambient space `(R^3, exp(sigma) <,>)`.
//!
//! All tensors are expressed in the Cartesian coordinate basis of the flat
//! background metric. The conformal 1-form is `omega = d sigma`, its metric
//! dual `omega_sharp = exp(-sigma) grad sigma`, and the auxiliary bilinear
//! form `B(X, Y) = Hess_flat(sigma)(X, Y) - omega(X) omega(Y) / 2` is the
//! building block of the curvature transformation law.
//!
//! Curvature is computed along two independent routes: directly from
//! Christoffel derivatives, and assembled from `B`, the metric, `omega`, and
//! the covariant derivative of `omega_sharp`. Their agreement is one of the
//! main verification gates.
//!
//! Everything here is generic over the jet scalar, so the same assembly
//! serves plain evaluation at an ambient point and chart-jet evaluation along
//! an immersed surface.

use crate::algebra::{dot_e, m3_from_fn, v3_from_fn, V3};
use crate::error::{ExprError, GeomError};
use crate::expr::{jet_eval, FieldExpr, Func};
use crate::jet::{Jet, Scalar};

/// Riemann tensor layout: `r[i][j][k][l]` is the `l`-th component of
/// `R(e_i, e_j) e_k` in the coordinate basis.
pub type Riemann<S> = [[[[S; 3]; 3]; 3]; 3];

/// The conformal factor `sigma` of the ambient metric `exp(sigma) <,>`.
#[derive(Debug, Clone)]
pub struct ConformalFactor {
    sigma: FieldExpr,
    harmonic_intent: bool,
    validity_note: Option<String>,
}

impl ConformalFactor {
    pub fn from_expr(sigma: FieldExpr) -> Self {
        Self {
            sigma,
            harmonic_intent: false,
            validity_note: None,
        }
    }

    /// The flat case `sigma = 0`.
    pub fn flat() -> Self {
        Self::from_expr(FieldExpr::constant(0.0)).with_harmonic_intent(true)
    }

    /// Build `sigma = 2 ln h` from a positive flat-harmonic potential `h`.
    ///
    /// For the metric `exp(sigma) <,>` in dimension three,
    /// `Lap(sigma) = exp(-sigma) (Lap_flat(sigma) + |grad sigma|^2 / 2)`,
    /// which vanishes exactly when `exp(sigma / 2) = h` is flat-harmonic.
    /// The generated factor carries the harmonic intent flag; the check
    /// suite (not the constructor) verifies the residual numerically.
    pub fn harmonic_from_potential(h: FieldExpr) -> Self {
        let sigma = FieldExpr::binary(
            crate::expr::BinOp::Mul,
            FieldExpr::constant(2.0),
            FieldExpr::func(Func::Ln, h.clone()),
        );
        Self {
            sigma,
            harmonic_intent: true,
            validity_note: Some(format!("requires {h} > 0")),
        }
    }

    pub fn with_harmonic_intent(mut self, intent: bool) -> Self {
        self.harmonic_intent = intent;
        self
    }

    pub fn with_validity_note(mut self, note: impl Into<String>) -> Self {
        self.validity_note = Some(note.into());
        self
    }

    pub fn sigma(&self) -> &FieldExpr {
        &self.sigma
    }

    pub fn harmonic_intent(&self) -> bool {
        self.harmonic_intent
    }

    pub fn validity_note(&self) -> Option<&str> {
        self.validity_note.as_deref()
    }
}

/// First and second partials of `sigma`, over any jet scalar.
#[derive(Clone)]
pub struct SigmaJets<S> {
    pub sigma: S,
    pub d1: [S; 3],
    pub d2: [[S; 3]; 3],
}

impl SigmaJets<f64> {
    /// Extract from an ambient jet of order >= 2.
    pub fn from_jet(jet: &Jet) -> Self {
        let idx = |a: usize, b: usize| {
            let mut e = [0u8; 3];
            e[a] += 1;
            e[b] += 1;
            e
        };
        SigmaJets {
            sigma: jet.value(),
            d1: v3_from_fn(|i| {
                let mut e = [0u8; 3];
                e[i] = 1;
                jet.partial(&e)
            }),
            d2: m3_from_fn(|i, j| jet.partial(&idx(i, j))),
        }
    }
}

impl SigmaJets<Jet> {
    /// Extract chart-jet partials from a nested ambient-over-chart jet.
    pub fn from_nested(jet: &Jet<Jet>) -> Self {
        let idx = |a: usize, b: usize| {
            let mut e = [0u8; 3];
            e[a] += 1;
            e[b] += 1;
            e
        };
        SigmaJets {
            sigma: jet.taylor(&[0, 0, 0]),
            d1: v3_from_fn(|i| {
                let mut e = [0u8; 3];
                e[i] = 1;
                jet.partial(&e)
            }),
            d2: m3_from_fn(|i, j| jet.partial(&idx(i, j))),
        }
    }
}

/// All pointwise ambient tensors derived from `sigma`'s 2-jet, generic over
/// the coefficient scalar.
#[derive(Clone)]
pub struct AmbientFrame<S> {
    pub sigma: S,
    pub exp_sigma: S,
    pub exp_neg_sigma: S,
    /// `omega_i = d_i sigma` (coordinate components of the 1-form).
    pub omega: [S; 3],
    /// `omega_sharp^i = exp(-sigma) d_i sigma` (metric dual vector).
    pub omega_sharp: [S; 3],
    /// Squared flat gradient `sum_i (d_i sigma)^2`.
    pub grad_sq_flat: S,
    /// `|omega_sharp|^2` in the ambient metric, `= exp(-sigma) grad_sq_flat`.
    pub omega_sharp_norm_sq: S,
    /// `B_ij = d_i d_j sigma - d_i sigma d_j sigma / 2`.
    pub b_tensor: [[S; 3]; 3],
    /// `(nabla_i omega_sharp)^k`.
    pub nabla_omega_sharp: [[S; 3]; 3],
    pub d2: [[S; 3]; 3],
}

impl<S: Scalar> AmbientFrame<S> {
    pub fn new(sj: &SigmaJets<S>) -> Self {
        let exp_sigma = sj.sigma.exp();
        let exp_neg_sigma = (-sj.sigma.clone()).exp();
        let omega = sj.d1.clone();
        let omega_sharp = v3_from_fn(|i| exp_neg_sigma.clone() * sj.d1[i].clone());
        let grad_sq_flat = dot_e(&sj.d1, &sj.d1);
        let omega_sharp_norm_sq = exp_neg_sigma.clone() * grad_sq_flat.clone();
        let b_tensor = m3_from_fn(|i, j| {
            sj.d2[i][j].clone() - (sj.d1[i].clone() * sj.d1[j].clone()).scale(0.5)
        });
        // (nabla_i omega_sharp)^k = exp(-sigma) (s_ki - s_i s_k + delta_ik |grad|^2 / 2)
        let nabla_omega_sharp = m3_from_fn(|i, k| {
            let mut t = sj.d2[k][i].clone() - sj.d1[i].clone() * sj.d1[k].clone();
            if i == k {
                t = t + grad_sq_flat.scale(0.5);
            }
            exp_neg_sigma.clone() * t
        });
        AmbientFrame {
            sigma: sj.sigma.clone(),
            exp_sigma,
            exp_neg_sigma,
            omega,
            omega_sharp,
            grad_sq_flat,
            omega_sharp_norm_sq,
            b_tensor,
            nabla_omega_sharp,
            d2: sj.d2.clone(),
        }
    }

    /// Ambient metric pairing of two coordinate-component vectors.
    pub fn metric_dot(&self, a: &V3<S>, b: &V3<S>) -> S {
        self.exp_sigma.clone() * dot_e(a, b)
    }

    /// `omega(a)` for coordinate components `a`.
    pub fn omega_apply(&self, a: &V3<S>) -> S {
        dot_e(&self.omega, a)
    }

    /// `Gamma(a, b)^k`, using the closed form of the conformal connection:
    /// `Gamma(a, b) = (omega(b) a + omega(a) b - <a, b>_flat grad_flat sigma) / 2`.
    pub fn christoffel_contract(&self, a: &V3<S>, b: &V3<S>) -> V3<S> {
        let wa = self.omega_apply(a);
        let wb = self.omega_apply(b);
        let ab = dot_e(a, b);
        v3_from_fn(|k| {
            (a[k].clone() * wb.clone() + b[k].clone() * wa.clone()
                - ab.clone() * self.omega[k].clone())
            .scale(0.5)
        })
    }

    /// Full Christoffel array `Gamma^k_ij` (k outermost).
    pub fn christoffels(&self) -> [[[S; 3]; 3]; 3] {
        std::array::from_fn(|k| {
            m3_from_fn(|i, j| {
                let mut t = self.omega[0].like(0.0);
                if k == i {
                    t = t + self.omega[j].clone();
                }
                if k == j {
                    t = t + self.omega[i].clone();
                }
                if i == j {
                    t = t - self.omega[k].clone();
                }
                t.scale(0.5)
            })
        })
    }

    /// `nabla_a omega_sharp` contracted against coordinate components `a`.
    pub fn nabla_omega_sharp_along(&self, a: &V3<S>) -> V3<S> {
        v3_from_fn(|k| {
            self.nabla_omega_sharp[0][k].clone() * a[0].clone()
                + self.nabla_omega_sharp[1][k].clone() * a[1].clone()
                + self.nabla_omega_sharp[2][k].clone() * a[2].clone()
        })
    }

    /// `B(a, b)`.
    pub fn b_apply(&self, a: &V3<S>, b: &V3<S>) -> S {
        let mut acc = self.omega[0].like(0.0);
        for i in 0..3 {
            for j in 0..3 {
                acc = acc + self.b_tensor[i][j].clone() * a[i].clone() * b[j].clone();
            }
        }
        acc
    }

    /// Curvature from Christoffel derivatives (the direct route).
    pub fn riemann_direct(&self) -> Riemann<S> {
        let gamma = self.christoffels();
        // d_i Gamma^l_jk = (delta^l_j s_ki + delta^l_k s_ji - delta_jk s_li) / 2
        let dgamma = |i: usize, l: usize, j: usize, k: usize| -> S {
            let mut t = self.omega[0].like(0.0);
            if l == j {
                t = t + self.d2[k][i].clone();
            }
            if l == k {
                t = t + self.d2[j][i].clone();
            }
            if j == k {
                t = t - self.d2[l][i].clone();
            }
            t.scale(0.5)
        };
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                std::array::from_fn(|k| {
                    std::array::from_fn(|l| {
                        let mut t = dgamma(i, l, j, k) - dgamma(j, l, i, k);
                        for m in 0..3 {
                            t = t + gamma[l][i][m].clone() * gamma[m][j][k].clone()
                                - gamma[l][j][m].clone() * gamma[m][i][k].clone();
                        }
                        t
                    })
                })
            })
        })
    }

    /// Curvature assembled from `B`, the metric, `omega`, and
    /// `nabla omega_sharp` (the transformation route):
    ///
    /// `R(X,Y)Z = [B(X,Z) Y - B(Y,Z) X + g(X,Z) nabla_Y omega_sharp
    ///            - g(Y,Z) nabla_X omega_sharp] / 2
    ///            - [g(Y,Z) omega(X) - g(X,Z) omega(Y)] omega_sharp / 4`.
    ///
    /// The sign of the quarter term is fixed by the cross-oracle against the
    /// direct route (and by hand expansion of the flat-background
    /// Christoffels); with the opposite sign the two routes disagree at
    /// second order in `d sigma` and the sectional curvature loses its
    /// frame symmetry.
    pub fn riemann_transform(&self) -> Riemann<S> {
        let g = m3_from_fn(|i, j| {
            if i == j {
                self.exp_sigma.clone()
            } else {
                self.exp_sigma.like(0.0)
            }
        });
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                std::array::from_fn(|k| {
                    std::array::from_fn(|l| {
                        let mut t = self.omega[0].like(0.0);
                        if l == j {
                            t = t + self.b_tensor[i][k].clone();
                        }
                        if l == i {
                            t = t - self.b_tensor[j][k].clone();
                        }
                        t = t + g[i][k].clone() * self.nabla_omega_sharp[j][l].clone()
                            - g[j][k].clone() * self.nabla_omega_sharp[i][l].clone();
                        t = t.scale(0.5);
                        let quarter = (g[j][k].clone() * self.omega[i].clone()
                            - g[i][k].clone() * self.omega[j].clone())
                            * self.omega_sharp[l].clone();
                        t - quarter.scale(0.25)
                    })
                })
            })
        })
    }

    /// Laplace-Beltrami of `sigma` in the ambient metric:
    /// `exp(-sigma) (Lap_flat sigma + |grad_flat sigma|^2 / 2)`.
    pub fn laplacian_sigma(&self) -> S {
        let trace = self.d2[0][0].clone() + self.d2[1][1].clone() + self.d2[2][2].clone();
        self.exp_neg_sigma.clone() * (trace + self.grad_sq_flat.scale(0.5))
    }
}

/// Contract `R(x, y) z` into coordinate components.
pub fn riemann_apply<S: Scalar>(r: &Riemann<S>, x: &V3<S>, y: &V3<S>, z: &V3<S>) -> V3<S> {
    v3_from_fn(|l| {
        let mut acc = x[0].like(0.0);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    acc = acc
                        + r[i][j][k][l].clone() * x[i].clone() * y[j].clone() * z[k].clone();
                }
            }
        }
        acc
    })
}

/// Everything about the ambient space at one point, in plain numbers.
#[derive(Debug, Clone)]
pub struct AmbientPointGeometry {
    pub point: [f64; 3],
    pub sigma_jet: Jet,
    pub sigma: f64,
    pub omega: [f64; 3],
    pub omega_sharp: [f64; 3],
    pub omega_sharp_norm_sq: f64,
    pub metric: [[f64; 3]; 3],
    pub christoffels: [[[f64; 3]; 3]; 3],
    pub riemann: Riemann<f64>,
    pub ricci: [[f64; 3]; 3],
    pub b_tensor: [[f64; 3]; 3],
    pub harmonic_residual: f64,
}

fn sigma_jets_at(
    factor: &ConformalFactor,
    point: &[f64; 3],
    order: usize,
) -> Result<(Jet, SigmaJets<f64>), ExprError> {
    let jet = jet_eval(factor.sigma(), point, 3, order)?;
    let sj = SigmaJets::from_jet(&jet);
    Ok((jet, sj))
}

/// Assemble the full ambient geometry at `point` from an order->=3 jet of
/// `sigma`.
pub fn ambient_at(
    factor: &ConformalFactor,
    point: [f64; 3],
    order: usize,
) -> Result<AmbientPointGeometry, GeomError> {
    assert!(order >= 2, "ambient geometry needs a 2-jet of sigma");
    let (sigma_jet, sj) = sigma_jets_at(factor, &point, order)?;
    let frame = AmbientFrame::new(&sj);
    let riemann = frame.riemann_direct();
    let ricci = m3_from_fn(|j, k| (0..3).map(|i| riemann[i][j][k][i]).sum());
    let metric = m3_from_fn(|i, j| if i == j { frame.exp_sigma } else { 0.0 });
    Ok(AmbientPointGeometry {
        point,
        sigma: sj.sigma,
        omega: frame.omega,
        omega_sharp: frame.omega_sharp,
        omega_sharp_norm_sq: frame.omega_sharp_norm_sq,
        metric,
        christoffels: frame.christoffels(),
        riemann,
        ricci,
        b_tensor: frame.b_tensor,
        harmonic_residual: frame.laplacian_sigma(),
        sigma_jet,
    })
}

/// Curvature by the direct route at a point.
pub fn curvature_direct(
    factor: &ConformalFactor,
    point: [f64; 3],
) -> Result<Riemann<f64>, GeomError> {
    let (_, sj) = sigma_jets_at(factor, &point, 3)?;
    Ok(AmbientFrame::new(&sj).riemann_direct())
}

/// Curvature by the transformation route at a point.
pub fn curvature_via_transform(
    factor: &ConformalFactor,
    point: [f64; 3],
) -> Result<Riemann<f64>, GeomError> {
    let (_, sj) = sigma_jets_at(factor, &point, 3)?;
    Ok(AmbientFrame::new(&sj).riemann_transform())
}

/// `Lap_ambient sigma` at a point; zero iff the factor is harmonic there.
pub fn harmonicity_residual(factor: &ConformalFactor, point: [f64; 3]) -> Result<f64, GeomError> {
    let (_, sj) = sigma_jets_at(factor, &point, 2)?;
    Ok(AmbientFrame::new(&sj).laplacian_sigma())
}

/// Max-norm of a Riemann tensor, for relative comparisons.
pub fn riemann_max_abs(r: &Riemann<f64>) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    m = m.max(r[i][j][k][l].abs());
                }
            }
        }
    }
    m
}

/// Max-norm of the difference of two Riemann tensors.
pub fn riemann_max_diff(a: &Riemann<f64>, b: &Riemann<f64>) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    m = m.max((a[i][j][k][l] - b[i][j][k][l]).abs());
                }
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expect;
    use approx::assert_relative_eq;

    fn linear_harmonic() -> ConformalFactor {
        ConformalFactor::harmonic_from_potential(parse_expect("1 + 0.3*x"))
    }

    #[test]
    fn flat_factor_has_trivial_geometry() {
        let g = ambient_at(&ConformalFactor::flat(), [0.4, -1.0, 2.0], 3).unwrap();
        assert_eq!(g.omega, [0.0; 3]);
        assert_eq!(g.omega_sharp, [0.0; 3]);
        assert_relative_eq!(riemann_max_abs(&g.riemann), 0.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(g.christoffels[i][j][0], 0.0);
                assert_relative_eq!(g.b_tensor[i][j], 0.0);
            }
        }
        assert_relative_eq!(g.harmonic_residual, 0.0);
    }

    #[test]
    fn christoffels_of_linear_harmonic_factor_at_origin() {
        let g = ambient_at(&linear_harmonic(), [0.0; 3], 3).unwrap();
        assert_relative_eq!(g.omega[0], 0.6, epsilon = 1e-14);
        assert_relative_eq!(g.omega[1], 0.0);
        assert_relative_eq!(g.christoffels[0][0][0], 0.3, epsilon = 1e-14);
        assert_relative_eq!(g.christoffels[1][0][1], 0.3, epsilon = 1e-14);
        assert_relative_eq!(g.christoffels[0][1][1], -0.3, epsilon = 1e-14);
        // B(d1, d1) = s_xx - s_x^2 / 2 = -0.18 - 0.18
        assert_relative_eq!(g.b_tensor[0][0], -0.36, epsilon = 1e-14);
    }

    #[test]
    fn christoffels_match_finite_differences_of_metric() {
        // standard formula Gamma^k_ij = g^kl (d_i g_jl + d_j g_il - d_l g_ij) / 2
        // with metric derivatives from central differences
        let factor = linear_harmonic();
        let p = [0.2, -0.4, 0.7];
        let g = ambient_at(&factor, p, 3).unwrap();
        let h = 1e-5;
        let metric_at = |q: [f64; 3]| -> [[f64; 3]; 3] {
            let s = factor
                .sigma()
                .eval_f64(crate::expr::VarSpace::Ambient, &q)
                .unwrap();
            m3_from_fn(|i, j| if i == j { s.exp() } else { 0.0 })
        };
        let mut dg = [[[0.0; 3]; 3]; 3]; // dg[l][i][j] = d_l g_ij
        for l in 0..3 {
            let mut qp = p;
            let mut qm = p;
            qp[l] += h;
            qm[l] -= h;
            let (mp, mm) = (metric_at(qp), metric_at(qm));
            for i in 0..3 {
                for j in 0..3 {
                    dg[l][i][j] = (mp[i][j] - mm[i][j]) / (2.0 * h);
                }
            }
        }
        let ginv = (-g.sigma).exp();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let fd = 0.5 * ginv * (dg[i][j][k] + dg[j][i][k] - dg[k][i][j]);
                    assert_relative_eq!(g.christoffels[k][i][j], fd, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn curvature_routes_agree_for_harmonic_and_generic_factors() {
        let factors = [
            linear_harmonic(),
            ConformalFactor::harmonic_from_potential(parse_expect(
                "1 + 1/sqrt((x-3)^2 + y^2 + z^2)",
            )),
            ConformalFactor::from_expr(parse_expect("0.3*sin(x)*cos(y) + 0.1*z^2")),
        ];
        let points = [
            [0.0, 0.0, 0.0],
            [0.5, -0.3, 0.8],
            [-0.9, 0.2, -0.4],
            [1.1, 1.0, -1.2],
        ];
        for factor in &factors {
            for &p in &points {
                let direct = curvature_direct(factor, p).unwrap();
                let transform = curvature_via_transform(factor, p).unwrap();
                let scale = riemann_max_abs(&direct).max(1e-30);
                assert!(
                    riemann_max_diff(&direct, &transform) / scale < 1e-12,
                    "routes disagree at {p:?}"
                );
            }
        }
    }

    #[test]
    fn riemann_symmetries_hold() {
        let factor = ConformalFactor::from_expr(parse_expect("0.4*x*y - 0.2*z^2 + 0.1*sin(y)"));
        let g = ambient_at(&factor, [0.3, 0.6, -0.2], 3).unwrap();
        let r = &g.riemann;
        let es = g.sigma.exp();
        let scale = riemann_max_abs(r).max(1.0);
        let lower = |i: usize, j: usize, k: usize, l: usize| es * r[i][j][k][l];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        // antisymmetry in the first slots
                        assert!(
                            (r[i][j][k][l] + r[j][i][k][l]).abs() < 1e-12 * scale,
                            "antisymmetry"
                        );
                        // pair symmetry g(R(ei,ej)ek, el) = g(R(ek,el)ei, ej)
                        assert!(
                            (lower(i, j, k, l) - lower(k, l, i, j)).abs() < 1e-10 * scale,
                            "pair symmetry"
                        );
                    }
                }
            }
        }
        // Ricci symmetry
        for j in 0..3 {
            for k in 0..3 {
                assert!((g.ricci[j][k] - g.ricci[k][j]).abs() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn metric_compatibility_via_jets() {
        // d_k g_ij - Gamma^l_ki g_lj - Gamma^l_kj g_il = 0, with the metric
        // derivative taken from the sigma jet directly
        let factor = ConformalFactor::from_expr(parse_expect("0.3*sin(x)*cos(y) + 0.1*z^2"));
        let p = [0.7, -0.2, 0.4];
        let g = ambient_at(&factor, p, 3).unwrap();
        let es = g.sigma.exp();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let dg = if i == j { es * g.omega[k] } else { 0.0 };
                    let mut res = dg;
                    for l in 0..3 {
                        let glj = if l == j { es } else { 0.0 };
                        let gil = if i == l { es } else { 0.0 };
                        res -= g.christoffels[l][k][i] * glj + g.christoffels[l][k][j] * gil;
                    }
                    assert!(res.abs() < 1e-12 * es.max(1.0), "compatibility at ({k},{i},{j})");
                }
            }
        }
    }

    #[test]
    fn omega_sharp_is_metric_dual_of_omega() {
        let factor = linear_harmonic();
        let p = [0.4, 0.9, -0.6];
        let g = ambient_at(&factor, p, 2).unwrap();
        let v = [0.3, -1.4, 0.8];
        let gv: f64 = (0..3).map(|i| g.metric[i][i] * g.omega_sharp[i] * v[i]).sum();
        let wv: f64 = (0..3).map(|i| g.omega[i] * v[i]).sum();
        assert_relative_eq!(gv, wv, epsilon = 1e-14, max_relative = 1e-12);
    }

    #[test]
    fn b_tensor_is_symmetric() {
        let factor = ConformalFactor::from_expr(parse_expect("0.2*x*y*z + sin(x + 2*y)"));
        let g = ambient_at(&factor, [0.1, 0.5, -0.3], 2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(g.b_tensor[i][j], g.b_tensor[j][i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn harmonicity_residual_examples() {
        // sigma = x^2: flat Laplacian 2, gradient 0 at the origin, e^{-0} = 1
        let factor = ConformalFactor::from_expr(parse_expect("x^2"));
        assert_relative_eq!(
            harmonicity_residual(&factor, [0.0; 3]).unwrap(),
            2.0,
            epsilon = 1e-13
        );
        // harmonic generators are harmonic everywhere sampled
        for factor in [
            linear_harmonic(),
            ConformalFactor::harmonic_from_potential(parse_expect(
                "1 + 1/sqrt((x-3)^2 + y^2 + z^2)",
            )),
        ] {
            for p in [[0.0, 0.0, 0.0], [1.2, -0.8, 0.5], [-2.0, 1.5, 1.0]] {
                let res = harmonicity_residual(&factor, p).unwrap();
                assert!(res.abs() < 1e-12, "residual {res} at {p:?}");
            }
        }
    }

    #[test]
    fn harmonic_potential_of_one_gives_flat_sigma() {
        let factor = ConformalFactor::harmonic_from_potential(parse_expect("1"));
        let g = ambient_at(&factor, [0.3, 0.4, 0.5], 2).unwrap();
        assert_relative_eq!(g.sigma, 0.0);
        assert_eq!(g.omega, [0.0; 3]);
    }

    #[test]
    fn domain_error_propagates() {
        let factor = linear_harmonic();
        // 1 + 0.3 x <= 0 at x = -4
        assert!(ambient_at(&factor, [-4.0, 0.0, 0.0], 2).is_err());
    }
}
