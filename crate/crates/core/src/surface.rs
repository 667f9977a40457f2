//! Extrinsic and intrinsic geometry of closed parametric surfaces.
//!
//! A [`ClosedSurface`] is an immersion `X(u, v)` of a torus-like or
//! sphere-like chart into the conformally rescaled ambient space. At every
//! chart point the pipeline produces a [`SurfacePointGeometry`]: the induced
//! metric, area density, unit normal, shape operator, principal curvatures
//! and directions, mean curvature, intrinsic Gauss curvature (Brioschi, from
//! the induced metric alone), the ambient sectional curvature of the tangent
//! plane, and tangency data for the conformal vector field.
//!
//! Every scalar in the pipeline is carried as a chart jet so that surface
//! differential operators (Laplace-Beltrami, divergence, Hessians) consume
//! exact derivatives. A pipeline run at chart order `m` leaves the immersion
//! valid to order `m`, tangents and normal to `m - 1`, and the shape operator
//! and mean curvature to `m - 2`; operators check the order they need.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebra::{
    cross_e, det2, det3, dot_e, generalized_sym_eig2, inv2, mat2_mul_vec, v3_from_fn, M2, V3,
};
use crate::ambient::{riemann_apply, AmbientFrame, ConformalFactor, Riemann, SigmaJets};
use crate::error::GeomError;
use crate::expr::{nested_eval, ExprTriple, VarSpace};
use crate::jet::{Jet, Jet2, JetShape, Scalar, MAX_ORDER};

/// Gram determinant floor below which a chart point counts as degenerate.
pub const REGULARITY_FLOOR: f64 = 1e-10;
/// Principal-curvature gap below which a point is treated as umbilic.
pub const UMBILIC_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    SphereLike,
    TorusLike,
}

impl Topology {
    /// Per-axis periodicity flags `(u, v)`.
    pub fn periodicity(self) -> (bool, bool) {
        match self {
            Topology::SphereLike => (true, false),
            Topology::TorusLike => (true, true),
        }
    }

    pub fn euler_characteristic(self) -> f64 {
        match self {
            Topology::SphereLike => 2.0,
            Topology::TorusLike => 0.0,
        }
    }
}

/// Sign choice for the unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Orientation {
    /// Toward the enclosed volume (round sphere gets positive curvatures).
    #[default]
    Inward,
    Outward,
    /// Whatever the chart cross product `X_u x X_v` gives.
    Chart,
}

/// How the immersion is represented.
#[derive(Debug, Clone)]
pub enum Immersion {
    /// Three closed-form chart expressions.
    Exprs(ExprTriple),
    /// A base surface displaced along its normal (see the variation module).
    Varied(Box<crate::variation::VariedImmersion>),
    /// A truncated double-trigonometric representation (see the flow module).
    Spectral(Box<crate::flow::SpectralSurface>),
}

impl Immersion {
    /// Chart jets of the three ambient components at `uv`.
    pub fn jets_at(&self, uv: [f64; 2], order: usize) -> Result<[Jet2; 3], GeomError> {
        match self {
            Immersion::Exprs(exprs) => {
                let shape = JetShape::get(2, order);
                let seeds = [
                    Jet::variable(shape.clone(), 0, uv[0]),
                    Jet::variable(shape, 1, uv[1]),
                ];
                let mut out: [Jet2; 3] = std::array::from_fn(|_| seeds[0].like(0.0));
                for k in 0..3 {
                    out[k] = exprs[k].eval(VarSpace::Chart, &seeds)?;
                }
                Ok(out)
            }
            Immersion::Varied(varied) => varied.jets_at(uv, order),
            Immersion::Spectral(spec) => Ok(spec.jets_at(uv, order)),
        }
    }
}

/// A closed parametric surface with its chart rectangle and normal choice.
#[derive(Debug, Clone)]
pub struct ClosedSurface {
    pub name: String,
    pub topology: Topology,
    pub immersion: Immersion,
    /// Chart rectangle `[[u0, u1], [v0, v1]]`.
    pub domain: [[f64; 2]; 2],
    /// Resolved sign applied to the chart normal.
    orientation_sign: f64,
    pub orientation: Orientation,
}

impl ClosedSurface {
    pub fn new(
        name: impl Into<String>,
        topology: Topology,
        immersion: Immersion,
        domain: [[f64; 2]; 2],
    ) -> Self {
        ClosedSurface {
            name: name.into(),
            topology,
            immersion,
            domain,
            orientation_sign: 1.0,
            orientation: Orientation::Chart,
        }
    }

    /// Resolve `orientation` against an outward direction hint evaluated at a
    /// few probe points.
    pub fn orient(
        mut self,
        orientation: Orientation,
        outward_hint: impl Fn([f64; 2], [f64; 3]) -> [f64; 3],
    ) -> Result<Self, GeomError> {
        self.orientation = orientation;
        if orientation == Orientation::Chart {
            self.orientation_sign = 1.0;
            return Ok(self);
        }
        let probes = [[0.18, 0.41], [0.52, 0.23], [0.81, 0.67]];
        let mut sign = 0.0f64;
        for frac in probes {
            let uv = self.uv_at_fraction(frac[0], frac[1]);
            let jets = self.immersion.jets_at(uv, 1)?;
            let pos = [jets[0].value(), jets[1].value(), jets[2].value()];
            let tu = v3_from_fn(|k| jets[k].partial(&[1, 0]));
            let tv = v3_from_fn(|k| jets[k].partial(&[0, 1]));
            let chart_normal = cross_e(&tu, &tv);
            let hint = outward_hint(uv, pos);
            let d = dot_e(&chart_normal, &hint);
            let s = if d > 0.0 { 1.0 } else { -1.0 };
            if sign == 0.0 {
                sign = s;
            } else if sign != s {
                return Err(GeomError::IrregularPoint {
                    u: uv[0],
                    v: uv[1],
                    gram: d,
                });
            }
        }
        self.orientation_sign = match orientation {
            Orientation::Outward => sign,
            Orientation::Inward => -sign,
            Orientation::Chart => 1.0,
        };
        Ok(self)
    }

    pub fn orientation_sign(&self) -> f64 {
        self.orientation_sign
    }

    /// Carry a resolved sign over (varied and spectral surfaces inherit the
    /// base orientation rather than re-probing).
    pub fn with_orientation_sign(mut self, sign: f64, orientation: Orientation) -> Self {
        self.orientation_sign = sign;
        self.orientation = orientation;
        self
    }

    /// Flip the normal.
    pub fn flipped(mut self) -> Self {
        self.orientation_sign = -self.orientation_sign;
        self
    }

    fn uv_at_fraction(&self, fu: f64, fv: f64) -> [f64; 2] {
        let [u_range, v_range] = self.domain;
        [
            u_range[0] + fu.fract() * (u_range[1] - u_range[0]),
            v_range[0] + (0.1 + 0.8 * fv.fract()) * (v_range[1] - v_range[0]),
        ]
    }

    /// Rough diameter from a coarse sample, used to scale variation steps.
    pub fn diameter_estimate(&self) -> f64 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for i in 0..8 {
            for j in 0..7 {
                let uv = self.uv_at_fraction(i as f64 / 8.0, j as f64 / 7.0);
                if let Ok(jets) = self.immersion.jets_at(uv, 1) {
                    for k in 0..3 {
                        let x = jets[k].value();
                        lo[k] = lo[k].min(x);
                        hi[k] = hi[k].max(x);
                    }
                }
            }
        }
        let mut d2 = 0.0;
        for k in 0..3 {
            let e = hi[k] - lo[k];
            d2 += e * e;
        }
        d2.sqrt().max(1e-6)
    }
}

/// Chart-jet fields computed by the pipeline, kept for downstream operators.
#[derive(Clone)]
pub struct SurfaceJets {
    /// Immersion components, valid to the full pipeline order.
    pub x: [Jet2; 3],
    /// `dX/du`, `dX/dv`; valid to order - 1.
    pub tangents: [[Jet2; 3]; 2],
    /// Induced metric in the chart basis; valid to order - 1.
    pub metric: M2<Jet2>,
    pub inv_metric: M2<Jet2>,
    /// `sqrt(det metric)`; valid to order - 1.
    pub area_density: Jet2,
    /// g-unit normal components; valid to order - 1.
    pub normal: [Jet2; 3],
    /// Shape operator (chart basis, mixed indices); valid to order - 2.
    pub shape: M2<Jet2>,
    /// Mean curvature; valid to order - 2.
    pub mean: Jet2,
    /// Ambient tensors along the surface as chart jets; valid to full order.
    pub ambient: AmbientFrame<Jet2>,
}

/// Everything about the immersed surface at one chart point.
#[derive(Clone)]
pub struct SurfacePointGeometry {
    pub uv: [f64; 2],
    /// Chart-jet order the pipeline ran at.
    pub order: usize,
    pub position: [f64; 3],
    pub tangent_u: [f64; 3],
    pub tangent_v: [f64; 3],
    pub induced_metric: M2<f64>,
    pub inv_induced_metric: M2<f64>,
    pub area_density: f64,
    pub normal: [f64; 3],
    /// Matrix of `A` in the chart basis (`A(d_b) = A^a_b d_a`).
    pub shape_operator: M2<f64>,
    /// Second fundamental form `h_ab = g(A d_a, d_b)`.
    pub second_fundamental: M2<f64>,
    /// `lambda_1 >= lambda_2`.
    pub principal_curvatures: [f64; 2],
    /// g-orthonormal principal directions, ambient components.
    pub principal_directions: [V3<f64>; 2],
    /// The same directions in chart components.
    pub principal_chart: [[f64; 2]; 2],
    pub mean_curvature: f64,
    /// Intrinsic Gauss curvature by the Brioschi formula (NaN below order 3).
    pub gauss_intrinsic: f64,
    /// `lambda_1 lambda_2 = det A`.
    pub gauss_extrinsic: f64,
    /// Ambient sectional curvature of the tangent plane.
    pub ambient_sectional: f64,
    /// `|g(omega_sharp, N)|`.
    pub tangency_residual: f64,
    /// Angle between the tangential part of `omega_sharp` and `e_1`.
    pub tangency_angle: f64,
    pub sigma: f64,
    pub omega: [f64; 3],
    pub omega_sharp: [f64; 3],
    pub omega_sharp_norm_sq: f64,
    /// Ambient curvature tensor at the point (plain values).
    pub riemann: Riemann<f64>,
    /// Ambient frame at the point (plain values).
    pub ambient_values: AmbientFrame<f64>,
    pub jets: SurfaceJets,
}

impl SurfacePointGeometry {
    /// Metric pairing of ambient-component vectors at this point.
    pub fn metric_dot(&self, a: &V3<f64>, b: &V3<f64>) -> f64 {
        self.sigma.exp() * dot_e(a, b)
    }

    /// Chart components -> ambient components through the tangent basis.
    pub fn chart_to_ambient(&self, w: [f64; 2]) -> V3<f64> {
        v3_from_fn(|k| w[0] * self.tangent_u[k] + w[1] * self.tangent_v[k])
    }

    /// Ambient tangent vector -> chart components (through the induced
    /// metric; exact for tangent vectors).
    pub fn ambient_to_chart(&self, w: &V3<f64>) -> [f64; 2] {
        let b = [
            self.metric_dot(w, &self.tangent_u),
            self.metric_dot(w, &self.tangent_v),
        ];
        mat2_mul_vec(&self.inv_induced_metric, &b)
    }

    /// `omega(w)` for ambient components `w`.
    pub fn omega_apply(&self, w: &V3<f64>) -> f64 {
        dot_e(&self.omega, w)
    }

    /// Apply the shape operator to an ambient tangent vector.
    pub fn shape_apply(&self, w: &V3<f64>) -> V3<f64> {
        let wc = self.ambient_to_chart(w);
        let ac = mat2_mul_vec(&self.shape_operator, &wc);
        self.chart_to_ambient(ac)
    }

    /// `g(R(a, b) c, d)` with the stored ambient curvature.
    pub fn riemann_pair(&self, a: &V3<f64>, b: &V3<f64>, c: &V3<f64>, d: &V3<f64>) -> f64 {
        let rc = riemann_apply(&self.riemann, a, b, c);
        self.metric_dot(&rc, d)
    }
}

pub(crate) fn chart_seeds(uv: [f64; 2], order: usize) -> [Jet2; 2] {
    let shape = JetShape::get(2, order);
    [
        Jet::variable(shape.clone(), 0, uv[0]),
        Jet::variable(shape, 1, uv[1]),
    ]
}

/// Run the full pipeline at one chart point.
///
/// `order` is the chart-jet order; 2 suffices for pointwise curvatures,
/// 3 adds the intrinsic Gauss curvature and first derivatives of the shape
/// operator, 4 is needed by anything consuming `Lap H`.
pub fn surface_at(
    surface: &ClosedSurface,
    factor: &ConformalFactor,
    uv: [f64; 2],
    order: usize,
) -> Result<SurfacePointGeometry, GeomError> {
    assert!((2..=MAX_ORDER).contains(&order), "chart order must be 2..=6");
    let x = surface.immersion.jets_at(uv, order)?;
    let tangents = [
        v3_from_fn(|k| x[k].derive(0)),
        v3_from_fn(|k| x[k].derive(1)),
    ];

    // ambient fields along the surface, with every partial an exact chart jet
    let nested = nested_eval(factor.sigma(), &x, 2).map_err(GeomError::from)?;
    let sj = SigmaJets::from_nested(&nested);
    let ambient = AmbientFrame::new(&sj);

    let metric: M2<Jet2> = std::array::from_fn(|a| {
        std::array::from_fn(|b| ambient.metric_dot(&tangents[a], &tangents[b]))
    });
    let gram = det2(&metric);
    if !(gram.value() > REGULARITY_FLOOR) {
        return Err(GeomError::IrregularPoint {
            u: uv[0],
            v: uv[1],
            gram: gram.value(),
        });
    }
    let inv_metric = inv2(&metric);
    let area_density = gram.try_sqrt().map_err(crate::error::ExprError::from)?;

    // g-unit normal from the flat cross product (flat-orthogonal is
    // g-orthogonal under a conformal rescaling)
    let cross = cross_e(&tangents[0], &tangents[1]);
    let cross_norm = ambient
        .metric_dot(&cross, &cross)
        .try_sqrt()
        .map_err(crate::error::ExprError::from)?;
    let inv_norm = cross_norm
        .try_recip()
        .map_err(crate::error::ExprError::from)?
        .scale(surface.orientation_sign);
    let normal = v3_from_fn(|k| cross[k].clone() * inv_norm.clone());

    // h_ab = g(nabla_{d_a} X_b, N); A = g^{-1} h
    let second: M2<Jet2> = std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            let ddx = v3_from_fn(|k| tangents[b][k].derive(a));
            let gamma = ambient.christoffel_contract(&tangents[a], &tangents[b]);
            let cov = v3_from_fn(|k| ddx[k].clone() + gamma[k].clone());
            ambient.metric_dot(&cov, &normal)
        })
    });
    let shape: M2<Jet2> = std::array::from_fn(|c| {
        std::array::from_fn(|b| {
            inv_metric[c][0].clone() * second[0][b].clone()
                + inv_metric[c][1].clone() * second[1][b].clone()
        })
    });
    let mean = (shape[0][0].clone() + shape[1][1].clone()).scale(0.5);

    // pointwise eigen-structure
    let metric_val: M2<f64> =
        std::array::from_fn(|a| std::array::from_fn(|b| metric[a][b].value()));
    let second_val: M2<f64> =
        std::array::from_fn(|a| std::array::from_fn(|b| second[a][b].value()));
    let inv_metric_val: M2<f64> =
        std::array::from_fn(|a| std::array::from_fn(|b| inv_metric[a][b].value()));
    let shape_val: M2<f64> = std::array::from_fn(|a| std::array::from_fn(|b| shape[a][b].value()));
    let eig = generalized_sym_eig2(&second_val, &metric_val);
    let tangent_u_val = v3_from_fn(|k| tangents[0][k].value());
    let tangent_v_val = v3_from_fn(|k| tangents[1][k].value());
    let exp_sigma = ambient.exp_sigma.value();
    let gdot = |a: &V3<f64>, b: &V3<f64>| exp_sigma * dot_e(a, b);

    let to_ambient = |w: [f64; 2]| -> V3<f64> {
        v3_from_fn(|k| w[0] * tangent_u_val[k] + w[1] * tangent_v_val[k])
    };
    let lambda = [eig[0].0, eig[1].0];
    // Gram-Schmidt frame of the chart basis, the umbilic tie-break;
    // downstream formulas summing symmetrically over the frame don't care
    let gram_schmidt_frame = || {
        let e1a = tangent_u_val;
        let n1 = gdot(&e1a, &e1a).sqrt();
        let e1 = v3_from_fn(|k| e1a[k] / n1);
        let proj = gdot(&tangent_v_val, &e1);
        let e2a = v3_from_fn(|k| tangent_v_val[k] - proj * e1[k]);
        let n2 = gdot(&e2a, &e2a).sqrt();
        let e2 = v3_from_fn(|k| e2a[k] / n2);
        let c1 = [1.0 / n1, 0.0];
        let c2 = [-proj / (n1 * n2), 1.0 / n2];
        ([c1, c2], [e1, e2])
    };
    let (principal_chart, principal_dirs) = if (lambda[0] - lambda[1]).abs() < UMBILIC_GAP {
        gram_schmidt_frame()
    } else {
        let mut chart = [[0.0; 2]; 2];
        let mut dirs = [[0.0; 3]; 2];
        for (i, (_, vec)) in eig.iter().enumerate() {
            let amb = to_ambient(*vec);
            let n = gdot(&amb, &amb).sqrt();
            chart[i] = [vec[0] / n, vec[1] / n];
            dirs[i] = v3_from_fn(|k| amb[k] / n);
        }
        // a nearly multiple eigenvalue (roundoff gap above the tie-break
        // threshold) yields a degenerate eigenframe; detect it by loss of
        // g-orthogonality and fall back to the tie-break frame
        if gdot(&dirs[0], &dirs[1]).abs() > 1e-6 {
            gram_schmidt_frame()
        } else {
            (chart, dirs)
        }
    };

    let gauss_intrinsic = if order >= 3 { brioschi(&metric) } else { f64::NAN };

    // plain ambient values at the point
    let sj_val = SigmaJets::<f64> {
        sigma: sj.sigma.value(),
        d1: v3_from_fn(|i| sj.d1[i].value()),
        d2: std::array::from_fn(|i| v3_from_fn(|j| sj.d2[i][j].value())),
    };
    let ambient_values = AmbientFrame::new(&sj_val);
    let riemann = ambient_values.riemann_direct();

    let normal_val = v3_from_fn(|k| normal[k].value());
    let e1 = principal_dirs[0];
    let e2 = principal_dirs[1];
    let r_e1e2e2 = riemann_apply(&riemann, &e1, &e2, &e2);
    let ambient_sectional = gdot(&r_e1e2e2, &e1);

    let omega_sharp_val = ambient_values.omega_sharp;
    let osn = gdot(&omega_sharp_val, &normal_val);
    let tangency_residual = osn.abs();
    let omega_tan = v3_from_fn(|k| omega_sharp_val[k] - osn * normal_val[k]);
    let otn = gdot(&omega_tan, &omega_tan).sqrt();
    let tangency_angle = if otn < 1e-14 {
        0.0
    } else {
        (gdot(&omega_tan, &e1) / otn).clamp(-1.0, 1.0).acos()
    };

    let gauss_extrinsic = shape_val[0][0] * shape_val[1][1] - shape_val[0][1] * shape_val[1][0];

    Ok(SurfacePointGeometry {
        uv,
        order,
        position: v3_from_fn(|k| x[k].value()),
        tangent_u: tangent_u_val,
        tangent_v: tangent_v_val,
        induced_metric: metric_val,
        inv_induced_metric: inv_metric_val,
        area_density: area_density.value(),
        normal: normal_val,
        shape_operator: shape_val,
        second_fundamental: second_val,
        principal_curvatures: lambda,
        principal_directions: principal_dirs,
        principal_chart,
        mean_curvature: mean.value(),
        gauss_intrinsic,
        gauss_extrinsic,
        ambient_sectional,
        tangency_residual,
        tangency_angle,
        sigma: sj_val.sigma,
        omega: sj_val.d1,
        omega_sharp: omega_sharp_val,
        omega_sharp_norm_sq: ambient_values.omega_sharp_norm_sq,
        riemann,
        ambient_values,
        jets: SurfaceJets {
            x,
            tangents,
            metric,
            inv_metric,
            area_density,
            normal,
            shape,
            mean,
            ambient,
        },
    })
}

/// Matrix of the shape operator in the chart basis.
pub fn shape_operator(
    surface: &ClosedSurface,
    factor: &ConformalFactor,
    uv: [f64; 2],
) -> Result<M2<f64>, GeomError> {
    Ok(surface_at(surface, factor, uv, 2)?.shape_operator)
}

/// Gauss curvature of the induced metric by the Brioschi formula, an oracle
/// genuinely independent of the extrinsic (normal / shape operator) path.
fn brioschi(metric: &M2<Jet2>) -> f64 {
    let e = &metric[0][0];
    let f = &metric[0][1];
    let g = &metric[1][1];
    let val = |j: &Jet2| j.value();
    let du = |j: &Jet2| j.derive(0);
    let dv = |j: &Jet2| j.derive(1);
    let (eu, ev) = (du(e), dv(e));
    let (fu, fv) = (du(f), dv(f));
    let (gu, gv) = (du(g), dv(g));
    let evv = val(&dv(&ev));
    let fuv = val(&dv(&fu));
    let guu = val(&du(&gu));
    let m1 = [
        [
            -0.5 * evv + fuv - 0.5 * guu,
            0.5 * val(&eu),
            val(&fu) - 0.5 * val(&ev),
        ],
        [val(&fv) - 0.5 * val(&gu), val(e), val(f)],
        [0.5 * val(&gv), val(f), val(g)],
    ];
    let m2 = [
        [0.0, 0.5 * val(&ev), 0.5 * val(&gu)],
        [0.5 * val(&ev), val(e), val(f)],
        [0.5 * val(&gu), val(f), val(g)],
    ];
    let det = val(e) * val(g) - val(f) * val(f);
    (det3(&m1) - det3(&m2)) / (det * det)
}

/// Laplace-Beltrami of a chart-jet field at the point:
/// `(1 / sqrt(det g)) d_a (sqrt(det g) g^{ab} d_b f)`.
///
/// `field_valid_order` is how many derivative orders of `field` are
/// trustworthy; two are consumed.
pub fn laplacian_of(
    pt: &SurfacePointGeometry,
    field: &Jet2,
    field_valid_order: usize,
) -> Result<f64, GeomError> {
    if field_valid_order < 2 {
        return Err(GeomError::InsufficientOrder {
            available: field_valid_order,
            needed: 2,
            what: "surface Laplacian",
        });
    }
    if pt.order < 3 {
        return Err(GeomError::InsufficientOrder {
            available: pt.order,
            needed: 3,
            what: "surface Laplacian (metric derivatives)",
        });
    }
    let sqrtg = &pt.jets.area_density;
    let mut div = field.like(0.0);
    for a in 0..2 {
        let mut flux = field.like(0.0);
        for b in 0..2 {
            flux = flux + pt.jets.inv_metric[a][b].clone() * field.derive(b);
        }
        div = div + (sqrtg.clone() * flux).derive(a);
    }
    Ok(div.value() / sqrtg.value())
}

/// Surface gradient of a chart-jet scalar, as ambient-component chart jets.
pub fn surface_gradient(pt: &SurfacePointGeometry, field: &Jet2) -> [Jet2; 3] {
    let mut chart = [field.like(0.0), field.like(0.0)];
    for a in 0..2 {
        for b in 0..2 {
            chart[a] = chart[a].clone() + pt.jets.inv_metric[a][b].clone() * field.derive(b);
        }
    }
    v3_from_fn(|k| {
        chart[0].clone() * pt.jets.tangents[0][k].clone()
            + chart[1].clone() * pt.jets.tangents[1][k].clone()
    })
}

/// Project an ambient-component jet field onto the tangent plane.
pub fn tangential_part(pt: &SurfacePointGeometry, field: &[Jet2; 3]) -> [Jet2; 3] {
    let wn = pt.jets.ambient.metric_dot(field, &pt.jets.normal);
    v3_from_fn(|k| field[k].clone() - wn.clone() * pt.jets.normal[k].clone())
}

/// Ambient covariant derivative of a jet field along a tangent direction
/// given in chart components, evaluated to plain components.
pub fn covariant_derivative_along(
    pt: &SurfacePointGeometry,
    field: &[Jet2; 3],
    dir_chart: [f64; 2],
) -> V3<f64> {
    let dir_amb = pt.chart_to_ambient(dir_chart);
    let field_val = v3_from_fn(|k| field[k].value());
    let gamma = pt.ambient_values.christoffel_contract(&dir_amb, &field_val);
    v3_from_fn(|k| {
        dir_chart[0] * field[k].derive(0).value()
            + dir_chart[1] * field[k].derive(1).value()
            + gamma[k]
    })
}

/// Surface divergence: trace over the principal (g-orthonormal) frame of the
/// covariant derivative of the tangential part of `field`.
pub fn surface_divergence(pt: &SurfacePointGeometry, field: &[Jet2; 3]) -> Result<f64, GeomError> {
    if pt.order < 2 {
        return Err(GeomError::InsufficientOrder {
            available: pt.order,
            needed: 2,
            what: "surface divergence",
        });
    }
    let tangential = tangential_part(pt, field);
    Ok(frame_trace_of_derivative(pt, &tangential))
}

/// `sum_i g(nabla_{e_i} field, e_i)` without projecting `field` first.
pub fn frame_trace_of_derivative(pt: &SurfacePointGeometry, field: &[Jet2; 3]) -> f64 {
    let mut acc = 0.0;
    for i in 0..2 {
        let d = covariant_derivative_along(pt, field, pt.principal_chart[i]);
        acc += pt.metric_dot(&d, &pt.principal_directions[i]);
    }
    acc
}

/// Frame trace of `nabla omega_sharp` over the tangent frame (the surface
/// divergence in the sense used with tangent conformal fields).
pub fn omega_sharp_frame_trace(pt: &SurfacePointGeometry) -> f64 {
    let mut acc = 0.0;
    for i in 0..2 {
        let e = pt.principal_directions[i];
        let mut d = [0.0; 3];
        for k in 0..3 {
            d[k] = (0..3)
                .map(|m| pt.ambient_values.nabla_omega_sharp[m][k] * e[m])
                .sum();
        }
        acc += pt.metric_dot(&d, &e);
    }
    acc
}

/// `g(nabla_N omega_sharp, N)`, the normal complement of the frame trace;
/// frame trace plus this is the full ambient divergence of `omega_sharp`.
pub fn omega_sharp_normal_trace(pt: &SurfacePointGeometry) -> f64 {
    let n = &pt.normal;
    let mut d = [0.0; 3];
    for k in 0..3 {
        d[k] = (0..3)
            .map(|i| pt.ambient_values.nabla_omega_sharp[i][k] * n[i])
            .sum();
    }
    pt.metric_dot(&d, n)
}

/// Surface Christoffel symbols `Gamma^c_{ab}` of the induced metric.
pub fn induced_christoffels(pt: &SurfacePointGeometry) -> [[[f64; 2]; 2]; 2] {
    let mut dg = [[[0.0; 2]; 2]; 2]; // dg[d][a][b] = d_d g_ab
    for d in 0..2 {
        for a in 0..2 {
            for b in 0..2 {
                dg[d][a][b] = pt.jets.metric[a][b].derive(d).value();
            }
        }
    }
    std::array::from_fn(|c| {
        std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                0.5 * (0..2)
                    .map(|d| {
                        pt.inv_induced_metric[c][d] * (dg[a][b][d] + dg[b][a][d] - dg[d][a][b])
                    })
                    .sum::<f64>()
            })
        })
    })
}

/// Residual of the conformal Codazzi relation at a point, for tangent chart
/// vectors `X`, `Y`, `Z`:
///
/// `g((nabla_X A) Y - (nabla_Y A) X, Z) - [omega(AY) g(X, Z) - omega(AX) g(Y, Z)] / 2`.
///
/// The left side is assembled from jet-differentiated `A` and the induced
/// connection; the right side is the closed form, which holds when the
/// surface is tangent to the conformal vector field.
pub fn codazzi_residual(
    surface: &ClosedSurface,
    factor: &ConformalFactor,
    uv: [f64; 2],
    x: [f64; 2],
    y: [f64; 2],
    z: [f64; 2],
) -> Result<f64, GeomError> {
    let pt = surface_at(surface, factor, uv, 3)?;
    Ok(codazzi_residual_at(&pt, x, y, z))
}

/// Same as [`codazzi_residual`] on an already computed point (order >= 3).
pub fn codazzi_residual_at(
    pt: &SurfacePointGeometry,
    x: [f64; 2],
    y: [f64; 2],
    z: [f64; 2],
) -> f64 {
    let gamma = induced_christoffels(pt);
    // (nabla_a A)^c_b = d_a A^c_b + Gamma^c_{ad} A^d_b - Gamma^d_{ab} A^c_d
    let nabla_a = |a: usize, c: usize, b: usize| -> f64 {
        let mut t = pt.jets.shape[c][b].derive(a).value();
        for d in 0..2 {
            t += gamma[c][a][d] * pt.shape_operator[d][b]
                - gamma[d][a][b] * pt.shape_operator[c][d];
        }
        t
    };
    let mut lhs = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for e in 0..2 {
                    lhs += pt.induced_metric[c][e]
                        * z[e]
                        * x[a]
                        * y[b]
                        * (nabla_a(a, c, b) - nabla_a(b, c, a));
                }
            }
        }
    }
    let xa = pt.chart_to_ambient(x);
    let ya = pt.chart_to_ambient(y);
    let za = pt.chart_to_ambient(z);
    let ax = pt.shape_apply(&xa);
    let ay = pt.shape_apply(&ya);
    let rhs = 0.5
        * (pt.omega_apply(&ay) * pt.metric_dot(&xa, &za)
            - pt.omega_apply(&ax) * pt.metric_dot(&ya, &za));
    (lhs - rhs).abs()
}

/// Hessian form of a surface scalar on tangent vectors:
/// `Hess_f(X, Y) = g(nabla_X grad f, Y)`, with `grad f` passed in as
/// ambient-component jets (see [`surface_gradient`]).
pub fn hessian_form(
    pt: &SurfacePointGeometry,
    grad_field: &[Jet2; 3],
    x_chart: [f64; 2],
    y_amb: &V3<f64>,
) -> f64 {
    let d = covariant_derivative_along(pt, grad_field, x_chart);
    pt.metric_dot(&d, y_amb)
}

/// Evaluate a chart expression as a jet at the point's order.
pub fn chart_field_jet(
    pt: &SurfacePointGeometry,
    field: &crate::expr::FieldExpr,
) -> Result<Jet2, GeomError> {
    let seeds = chart_seeds(pt.uv, pt.order);
    Ok(field.eval(VarSpace::Chart, &seeds)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::expr::parse_expect;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn flat() -> ConformalFactor {
        ConformalFactor::flat()
    }

    #[test]
    fn round_sphere_curvatures() {
        let s = catalog::sphere(2.0, [0.0; 3]);
        let pt = surface_at(&s, &flat(), [1.0, 1.2], 3).unwrap();
        assert_relative_eq!(pt.principal_curvatures[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(pt.principal_curvatures[1], 0.5, epsilon = 1e-12);
        assert_relative_eq!(pt.mean_curvature, 0.5, epsilon = 1e-12);
        assert_relative_eq!(pt.gauss_intrinsic, 0.25, epsilon = 1e-10);
        assert_relative_eq!(pt.ambient_sectional, 0.0, epsilon = 1e-13);
        assert_relative_eq!(pt.metric_dot(&pt.normal, &pt.normal), 1.0, epsilon = 1e-13);
        assert!(pt.metric_dot(&pt.normal, &pt.tangent_u).abs() < 1e-13);
        assert!(pt.metric_dot(&pt.normal, &pt.tangent_v).abs() < 1e-13);
    }

    #[test]
    fn textbook_torus_principal_curvatures() {
        let (big_r, small_r) = (2.0, 0.5);
        let s = catalog::torus(big_r, small_r);
        for (u, v) in [(0.3, 0.9), (1.0, 2.5), (4.4, 5.2)] {
            let pt = surface_at(&s, &flat(), [u, v], 3).unwrap();
            let expect_meridian = 1.0 / small_r;
            let expect_parallel = v.cos() / (big_r + small_r * v.cos());
            let mut expected = [expect_meridian, expect_parallel];
            expected.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert_relative_eq!(pt.principal_curvatures[0], expected[0], epsilon = 1e-11);
            assert_relative_eq!(pt.principal_curvatures[1], expected[1], epsilon = 1e-11);
        }
    }

    #[test]
    fn shape_operator_is_self_adjoint_and_eigenpairs_hold() {
        let s = catalog::torus(2.0, 0.5);
        let factor = ConformalFactor::harmonic_from_potential(parse_expect("1 + 0.2*x"));
        let pt = surface_at(&s, &factor, [0.8, 1.7], 3).unwrap();
        let xs = [[1.0, 0.0], [0.0, 1.0], [0.7, -0.4]];
        for x in xs {
            for y in xs {
                let xa = pt.chart_to_ambient(x);
                let ya = pt.chart_to_ambient(y);
                let lhs = pt.metric_dot(&pt.shape_apply(&xa), &ya);
                let rhs = pt.metric_dot(&xa, &pt.shape_apply(&ya));
                assert_relative_eq!(lhs, rhs, epsilon = 1e-11, max_relative = 1e-10);
            }
        }
        for i in 0..2 {
            let ae = pt.shape_apply(&pt.principal_directions[i]);
            for k in 0..3 {
                assert_relative_eq!(
                    ae[k],
                    pt.principal_curvatures[i] * pt.principal_directions[i][k],
                    epsilon = 1e-9,
                    max_relative = 1e-9
                );
            }
            assert_relative_eq!(
                pt.metric_dot(&pt.principal_directions[i], &pt.principal_directions[i]),
                1.0,
                epsilon = 1e-12
            );
        }
        assert!(
            pt.metric_dot(&pt.principal_directions[0], &pt.principal_directions[1])
                .abs()
                < 1e-10
        );
    }

    #[test]
    fn gauss_equation_on_ellipsoid_with_conformal_factor() {
        let s = catalog::ellipsoid(1.0, 1.0, 1.3);
        let factor = ConformalFactor::harmonic_from_potential(parse_expect("1 + 0.1*x"));
        for (u, v) in [(0.5, 0.8), (2.2, 1.9), (5.6, 2.6), (3.3, 0.4)] {
            let pt = surface_at(&s, &factor, [u, v], 3).unwrap();
            let residual = pt.gauss_intrinsic - (pt.ambient_sectional + pt.gauss_extrinsic);
            assert!(
                residual.abs() < 1e-8,
                "Gauss equation residual {residual:.3e} at ({u}, {v})"
            );
        }
    }

    #[test]
    fn orientation_flip_negates_shape_and_keeps_curvatures() {
        let s = catalog::torus(2.0, 0.5);
        let factor = ConformalFactor::harmonic_from_potential(parse_expect("1 + 0.2*x"));
        let uv = [1.3, 2.1];
        let a = surface_at(&s, &factor, uv, 3).unwrap();
        let flipped = s.clone().flipped();
        let b = surface_at(&flipped, &factor, uv, 3).unwrap();
        assert_relative_eq!(a.mean_curvature, -b.mean_curvature, epsilon = 1e-12);
        assert_relative_eq!(
            a.principal_curvatures[0],
            -b.principal_curvatures[1],
            epsilon = 1e-11
        );
        assert_relative_eq!(
            a.principal_curvatures[1],
            -b.principal_curvatures[0],
            epsilon = 1e-11
        );
        assert_relative_eq!(a.gauss_intrinsic, b.gauss_intrinsic, epsilon = 1e-10);
        assert_relative_eq!(a.ambient_sectional, b.ambient_sectional, epsilon = 1e-12);
        for k in 0..3 {
            assert_relative_eq!(a.normal[k], -b.normal[k], epsilon = 1e-13);
        }
    }

    #[test]
    fn sectional_curvature_matches_conformal_trace_identity() {
        // K~ = |w#|^2/4 - trace/2 - (w(e1)^2 + w(e2)^2)/4 for any orthonormal
        // tangent frame; exercises curvature, duality, and nabla(w#) jointly.
        let cases: Vec<(ClosedSurface, ConformalFactor)> = vec![
            (catalog::torus(2.0, 0.5), catalog::factor_azimuthal(0.4)),
            (
                catalog::sphere(1.0, [0.0; 3]),
                ConformalFactor::harmonic_from_potential(parse_expect("1 + 0.3*x")),
            ),
            (
                catalog::ellipsoid(1.0, 1.0, 1.3),
                ConformalFactor::from_expr(parse_expect("0.3*sin(x)*cos(y) + 0.1*z^2")),
            ),
        ];
        for (surface, factor) in &cases {
            for (u, v) in [(0.7, 1.1), (2.9, 2.3), (5.1, 0.6)] {
                let pt = surface_at(surface, factor, [u, v], 3).unwrap();
                let trace = omega_sharp_frame_trace(&pt);
                let w1 = pt.omega_apply(&pt.principal_directions[0]);
                let w2 = pt.omega_apply(&pt.principal_directions[1]);
                let predicted =
                    0.25 * pt.omega_sharp_norm_sq - 0.5 * trace - 0.25 * (w1 * w1 + w2 * w2);
                assert!(
                    (pt.ambient_sectional - predicted).abs() < 1e-10,
                    "trace identity off by {:.3e} on {} at ({u}, {v})",
                    pt.ambient_sectional - predicted,
                    surface.name
                );
            }
        }
    }

    #[test]
    fn azimuthal_factor_is_tangent_to_surfaces_of_revolution() {
        let s = catalog::torus(2.0, 0.5);
        let factor = catalog::factor_azimuthal(0.4);
        for (u, v) in [(0.1, 0.5), (1.9, 3.3), (4.2, 5.9)] {
            let pt = surface_at(&s, &factor, [u, v], 2).unwrap();
            assert!(
                pt.tangency_residual < 1e-10,
                "tangency residual {} at ({u}, {v})",
                pt.tangency_residual
            );
        }
    }

    #[test]
    fn laplacian_eigenfunction_on_unit_sphere() {
        // On the unit sphere with polar angle v, cos v is a degree-1
        // spherical harmonic: Lap(cos v) = -2 cos v.
        let s = catalog::sphere(1.0, [0.0; 3]);
        let factor = flat();
        let field = parse_expect("cos(v)");
        for (u, v) in [(0.4, 0.9), (2.2, 1.8), (5.0, 2.4)] {
            let pt = surface_at(&s, &factor, [u, v], 4).unwrap();
            let f = chart_field_jet(&pt, &field).unwrap();
            let lap = laplacian_of(&pt, &f, 4).unwrap();
            assert_relative_eq!(lap, -2.0 * v.cos(), epsilon = 1e-8);
        }
        let pt = surface_at(&s, &factor, [1.0, 1.0], 4).unwrap();
        let c = pt.jets.mean.like(3.7);
        assert_relative_eq!(laplacian_of(&pt, &c, 4).unwrap(), 0.0, epsilon = 1e-12);
        // mean curvature of the round sphere is constant
        let lap_h = laplacian_of(&pt, &pt.jets.mean, pt.order - 2).unwrap();
        assert_relative_eq!(lap_h, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn laplacian_rejects_insufficient_order() {
        let s = catalog::sphere(1.0, [0.0; 3]);
        let pt = surface_at(&s, &flat(), [1.0, 1.0], 3).unwrap();
        assert!(matches!(
            laplacian_of(&pt, &pt.jets.mean, pt.order - 2),
            Err(GeomError::InsufficientOrder { .. })
        ));
    }

    #[test]
    fn codazzi_holds_in_flat_ambient_and_for_tangent_pairs() {
        let mut rng = crate::sampling::rng_for(11, "codazzi");
        use rand::Rng;
        let torus = catalog::torus(2.0, 0.5);
        for (factor, tol) in [(flat(), 1e-9), (catalog::factor_azimuthal(0.4), 1e-8)] {
            for _ in 0..40 {
                let uv = [
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.0..2.0 * PI),
                ];
                let rv = |rng: &mut rand_chacha::ChaCha8Rng| {
                    [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
                };
                let (x, y, z) = (rv(&mut rng), rv(&mut rng), rv(&mut rng));
                let res = codazzi_residual(&torus, &factor, uv, x, y, z).unwrap();
                assert!(res < tol, "codazzi residual {res:.3e} under {}", factor.sigma());
            }
        }
    }

    #[test]
    fn codazzi_scales_linearly_in_each_slot() {
        let torus = catalog::torus(2.0, 0.5);
        let factor = catalog::factor_azimuthal(0.4);
        let pt = surface_at(&torus, &factor, [1.1, 0.7], 3).unwrap();
        let (x, y, z) = ([0.4, -0.3], [0.9, 0.2], [-0.5, 0.8]);
        let r1 = codazzi_residual_at(&pt, x, y, z);
        let r2 = codazzi_residual_at(&pt, [2.0 * x[0], 2.0 * x[1]], y, z);
        assert!(r1 < 1e-8 && r2 < 1e-8);
    }

    #[test]
    fn degenerate_chart_is_rejected() {
        let exprs: ExprTriple = Arc::new([
            parse_expect("u"),
            parse_expect("u"),
            parse_expect("0*v"),
        ]);
        let s = ClosedSurface::new(
            "degenerate",
            Topology::TorusLike,
            Immersion::Exprs(exprs),
            [[0.0, 2.0 * PI], [0.0, 2.0 * PI]],
        );
        match surface_at(&s, &flat(), [1.0, 1.0], 2) {
            Err(GeomError::IrregularPoint { .. }) => {}
            Err(other) => panic!("expected regularity failure, got {other}"),
            Ok(_) => panic!("degenerate chart was accepted"),
        }
    }

    #[test]
    fn umbilic_tie_break_gives_orthonormal_frame() {
        let s = catalog::sphere(1.5, [0.0; 3]);
        let pt = surface_at(&s, &flat(), [0.7, 1.9], 2).unwrap();
        let e1 = pt.principal_directions[0];
        let e2 = pt.principal_directions[1];
        assert_relative_eq!(pt.metric_dot(&e1, &e1), 1.0, epsilon = 1e-12);
        assert_relative_eq!(pt.metric_dot(&e2, &e2), 1.0, epsilon = 1e-12);
        assert!(pt.metric_dot(&e1, &e2).abs() < 1e-12);
    }
}
