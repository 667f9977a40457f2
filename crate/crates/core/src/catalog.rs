//! Named surface and conformal-factor catalogs.
//!
//! Catalog surfaces are built from parsed chart expressions, so they exercise
//! the same expression pipeline as user-supplied immersions. Default
//! orientation is inward (round spheres get positive principal curvatures).

use std::f64::consts::PI;
use std::sync::Arc;

use crate::ambient::ConformalFactor;
use crate::expr::{parse_expect, ExprTriple, FieldExpr};
use crate::surface::{ClosedSurface, Immersion, Orientation, Topology};

fn exprs(x: &str, y: &str, z: &str) -> ExprTriple {
    Arc::new([parse_expect(x), parse_expect(y), parse_expect(z)])
}

fn sphere_domain() -> [[f64; 2]; 2] {
    [[0.0, 2.0 * PI], [0.0, PI]]
}

fn torus_domain() -> [[f64; 2]; 2] {
    [[0.0, 2.0 * PI], [0.0, 2.0 * PI]]
}

/// Round sphere of radius `r` centered at `center`, inward normal.
pub fn sphere(r: f64, center: [f64; 3]) -> ClosedSurface {
    assert!(r > 0.0);
    let [cx, cy, cz] = center;
    let imm = exprs(
        &format!("{cx} + {r}*sin(v)*cos(u)"),
        &format!("{cy} + {r}*sin(v)*sin(u)"),
        &format!("{cz} + {r}*cos(v)"),
    );
    ClosedSurface::new(
        format!("sphere(r={r})"),
        Topology::SphereLike,
        Immersion::Exprs(imm),
        sphere_domain(),
    )
    .orient(Orientation::Inward, move |_, p| {
        [p[0] - cx, p[1] - cy, p[2] - cz]
    })
    .expect("sphere orientation")
}

/// Axis-aligned ellipsoid with semi-axes `(a, b, c)`, inward normal.
pub fn ellipsoid(a: f64, b: f64, c: f64) -> ClosedSurface {
    assert!(a > 0.0 && b > 0.0 && c > 0.0);
    let imm = exprs(
        &format!("{a}*sin(v)*cos(u)"),
        &format!("{b}*sin(v)*sin(u)"),
        &format!("{c}*cos(v)"),
    );
    ClosedSurface::new(
        format!("ellipsoid({a},{b},{c})"),
        Topology::SphereLike,
        Immersion::Exprs(imm),
        sphere_domain(),
    )
    .orient(Orientation::Inward, |_, p| p)
    .expect("ellipsoid orientation")
}

/// Torus of revolution about the z-axis with major radius `big_r` and tube
/// radius `small_r`, normal pointing into the tube.
pub fn torus(big_r: f64, small_r: f64) -> ClosedSurface {
    assert!(big_r > small_r && small_r > 0.0);
    let imm = exprs(
        &format!("({big_r} + {small_r}*cos(v))*cos(u)"),
        &format!("({big_r} + {small_r}*cos(v))*sin(u)"),
        &format!("{small_r}*sin(v)"),
    );
    ClosedSurface::new(
        format!("torus(R={big_r},r={small_r})"),
        Topology::TorusLike,
        Immersion::Exprs(imm),
        torus_domain(),
    )
    .orient(Orientation::Inward, move |uv, p| {
        // outward = away from the center circle of the tube
        let ring = [big_r * uv[0].cos(), big_r * uv[0].sin(), 0.0];
        [p[0] - ring[0], p[1] - ring[1], p[2] - ring[2]]
    })
    .expect("torus orientation")
}

/// Torus at the energy-minimizing aspect ratio `R/r = sqrt(2)` (unit tube).
pub fn clifford_torus() -> ClosedSurface {
    torus(std::f64::consts::SQRT_2, 1.0)
}

/// Sphere of radius `r` with a radial perturbation
/// `r (1 + eps * mode(u, v))`, for a chart-expression `mode`.
pub fn perturbed_sphere(r: f64, eps: f64, mode: &FieldExpr) -> ClosedSurface {
    assert!(r > 0.0);
    let radial = format!("{r}*(1 + {eps}*({mode}))");
    let imm = exprs(
        &format!("{radial}*sin(v)*cos(u)"),
        &format!("{radial}*sin(v)*sin(u)"),
        &format!("{radial}*cos(v)"),
    );
    ClosedSurface::new(
        format!("perturbed_sphere(r={r},eps={eps})"),
        Topology::SphereLike,
        Immersion::Exprs(imm),
        sphere_domain(),
    )
    .orient(Orientation::Inward, |_, p| p)
    .expect("perturbed sphere orientation")
}

/// A user-supplied immersion.
pub fn custom(
    name: impl Into<String>,
    topology: Topology,
    components: [FieldExpr; 3],
) -> ClosedSurface {
    let domain = match topology {
        Topology::SphereLike => sphere_domain(),
        Topology::TorusLike => torus_domain(),
    };
    ClosedSurface::new(name, topology, Immersion::Exprs(Arc::new(components)), domain)
}

/// The flat factor `sigma = 0`.
pub fn factor_zero() -> ConformalFactor {
    ConformalFactor::flat()
}

/// Harmonic factor from the linear potential `h = 1 + a x` (valid on
/// `1 + a x > 0`).
pub fn factor_linear_harmonic(a: f64) -> ConformalFactor {
    ConformalFactor::harmonic_from_potential(parse_expect(&format!("1 + {a}*x")))
}

/// Harmonic factor from the point-source potential
/// `h = 1 + 1 / |x - center|` (valid away from the pole).
pub fn factor_point_source(center: [f64; 3]) -> ConformalFactor {
    let [cx, cy, cz] = center;
    ConformalFactor::harmonic_from_potential(parse_expect(&format!(
        "1 + 1/sqrt((x - {cx})^2 + (y - {cy})^2 + (z - {cz})^2)"
    )))
}

/// Azimuthal factor `sigma = a cos(theta)` with `theta` the angle about the
/// z-axis; its conformal vector field is tangent to every surface of
/// revolution about that axis. Written as `a x / sqrt(x^2 + y^2)`, valid off
/// the axis. Not harmonic.
pub fn factor_azimuthal(a: f64) -> ConformalFactor {
    ConformalFactor::from_expr(parse_expect(&format!("{a}*x/sqrt(x^2 + y^2)")))
        .with_validity_note("requires x^2 + y^2 > 0")
}

/// A smooth non-harmonic factor exercising all derivative paths.
pub fn factor_wavy(a: f64) -> ConformalFactor {
    ConformalFactor::from_expr(parse_expect(&format!("{a}*sin(x)*cos(y) + {a}*0.5*z^2")))
}

/// The five standard factors used by verification sweeps.
pub fn standard_factors() -> Vec<(String, ConformalFactor)> {
    vec![
        ("zero".into(), factor_zero()),
        ("linear_harmonic".into(), factor_linear_harmonic(0.3)),
        ("point_source".into(), factor_point_source([3.0, 0.0, 0.0])),
        ("azimuthal".into(), factor_azimuthal(0.4)),
        ("wavy".into(), factor_wavy(0.3)),
    ]
}

/// The standard closed surfaces used by verification sweeps.
pub fn standard_surfaces() -> Vec<ClosedSurface> {
    vec![
        sphere(1.0, [0.0; 3]),
        ellipsoid(1.0, 1.0, 1.3),
        torus(2.0, 0.5),
        clifford_torus(),
        perturbed_sphere(1.0, 0.05, &parse_expect("cos(2*u)*sin(v)^3")),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Scalar;
    use crate::surface::surface_at;
    use approx::assert_relative_eq;

    #[test]
    fn torus_is_periodic_on_the_domain_boundary() {
        let t = torus(2.0, 0.5);
        let [u_range, v_range] = t.domain;
        for w in [0.3, 1.7, 4.1] {
            let a = t.immersion.jets_at([u_range[0], w], 1).unwrap();
            let b = t.immersion.jets_at([u_range[1], w], 1).unwrap();
            let c = t.immersion.jets_at([w, v_range[0]], 1).unwrap();
            let d = t.immersion.jets_at([w, v_range[1]], 1).unwrap();
            for k in 0..3 {
                assert_relative_eq!(a[k].value(), b[k].value(), epsilon = 1e-13);
                assert_relative_eq!(c[k].value(), d[k].value(), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn catalog_surfaces_are_regular_on_interior_probes() {
        let factor = factor_zero();
        for s in standard_surfaces() {
            for (fu, fv) in [(0.13, 0.27), (0.55, 0.72), (0.91, 0.44)] {
                let [ur, vr] = s.domain;
                let uv = [
                    ur[0] + fu * (ur[1] - ur[0]),
                    vr[0] + (0.05 + 0.9 * fv) * (vr[1] - vr[0]),
                ];
                surface_at(&s, &factor, uv, 2)
                    .unwrap_or_else(|e| panic!("{} at {uv:?}: {e}", s.name));
            }
        }
    }

    #[test]
    fn inward_sphere_has_positive_curvature() {
        let s = sphere(1.0, [0.2, -0.3, 0.5]);
        let pt = surface_at(&s, &factor_zero(), [2.0, 1.4], 2).unwrap();
        assert_relative_eq!(pt.mean_curvature, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn standard_factors_avoid_surface_domains() {
        for (name, factor) in standard_factors() {
            for s in standard_surfaces() {
                let pt = surface_at(&s, &factor, [1.1, 1.9], 2)
                    .unwrap_or_else(|e| panic!("{name} on {}: {e}", s.name));
                assert!(pt.sigma.is_finite());
            }
        }
    }
}
