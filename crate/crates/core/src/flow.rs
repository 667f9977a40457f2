//! Willmore gradient flow on a spectral surface representation.
//!
//! The evolving immersion is a truncated double-trigonometric series: all
//! three components for torus charts, a radial graph `c + r(u, v) n(u, v)`
//! over the round sphere for sphere charts (the latitude basis mixes
//! `cos(l v)` and `sin(l v)`, i.e. Chebyshev polynomials in `cos v` and their
//! second-kind companions). Derivatives of any order come from exact
//! differentiation of the basis.
//!
//! Each step moves grid nodes by `-dt W N` (the Willmore operator as inward
//! speed), refits the series, applies a mild exponential filter against
//! aliasing from the nonlinear speed, and accepts only energy-decreasing
//! steps, halving `dt` otherwise.

use serde::{Deserialize, Serialize};

use crate::algebra::pairwise_sum;
use crate::ambient::ConformalFactor;
use crate::error::{FlowError, GeomError};
use crate::jet::{Jet, Jet2, JetShape, Scalar};
use crate::parallel::{map_with, ExecMode};
use crate::quadrature::QuadratureGrid;
use crate::surface::{surface_at, ClosedSurface, Immersion, Orientation, Topology};
use crate::variation::willmore_el_residual_at;

/// Reconstruction error above which a projection is rejected as aliased.
pub const ALIASING_LIMIT: f64 = 1e-8;

/// One trig axis: index 0 is the constant, odd `2k-1` is `cos(k w)`, even
/// `2k` is `sin(k w)`.
fn axis_len(bandlimit: usize) -> usize {
    2 * bandlimit + 1
}

fn axis_mode(idx: usize) -> (usize, bool) {
    // (wavenumber, is_cos)
    if idx == 0 {
        (0, true)
    } else if idx % 2 == 1 {
        (idx.div_ceil(2), true)
    } else {
        (idx / 2, false)
    }
}

fn axis_eval(idx: usize, w: f64) -> f64 {
    let (k, is_cos) = axis_mode(idx);
    if is_cos {
        (k as f64 * w).cos()
    } else {
        (k as f64 * w).sin()
    }
}

/// Taylor coefficients (derivative / j!) of the basis function at `w`.
fn axis_taylor(idx: usize, w: f64, order: usize) -> Vec<f64> {
    let (k, is_cos) = axis_mode(idx);
    let kf = k as f64;
    let (c, s) = ((kf * w).cos(), (kf * w).sin());
    let mut out = Vec::with_capacity(order + 1);
    let mut fact = 1.0;
    for j in 0..=order {
        if j > 0 {
            fact *= j as f64;
        }
        let cycle = if is_cos {
            match j % 4 {
                0 => c,
                1 => -s,
                2 => -c,
                _ => s,
            }
        } else {
            match j % 4 {
                0 => s,
                1 => c,
                2 => -s,
                _ => -c,
            }
        };
        out.push(cycle * kf.powi(j as i32) / fact);
    }
    out
}

/// Coefficient table over the tensor-product trig basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrigTable {
    pub bandlimit: (usize, usize),
    /// `coeffs[iu][iv]`.
    pub coeffs: Vec<Vec<f64>>,
}

impl TrigTable {
    fn zeros(bandlimit: (usize, usize)) -> Self {
        TrigTable {
            bandlimit,
            coeffs: vec![vec![0.0; axis_len(bandlimit.1)]; axis_len(bandlimit.0)],
        }
    }

    /// Drop coefficients below roundoff scale. High modes at 1e-15 carry no
    /// information but get amplified catastrophically by fourth-order
    /// operators near sphere-chart poles.
    fn denoise(&mut self) {
        let max = self
            .coeffs
            .iter()
            .flatten()
            .fold(0.0f64, |m, c| m.max(c.abs()));
        let floor = 1e-13 * max;
        for row in &mut self.coeffs {
            for c in row.iter_mut() {
                if c.abs() < floor {
                    *c = 0.0;
                }
            }
        }
    }

    fn value(&self, uv: [f64; 2]) -> f64 {
        let mut acc = 0.0;
        for (iu, row) in self.coeffs.iter().enumerate() {
            let fu = axis_eval(iu, uv[0]);
            if fu == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for (iv, c) in row.iter().enumerate() {
                if *c != 0.0 {
                    inner += c * axis_eval(iv, uv[1]);
                }
            }
            acc += fu * inner;
        }
        acc
    }

    /// Exact chart jet of the series at `uv`.
    fn jet(&self, uv: [f64; 2], order: usize) -> Jet2 {
        let shape = JetShape::get(2, order);
        let nu = self.coeffs.len();
        let nv = self.coeffs[0].len();
        let tu: Vec<Vec<f64>> = (0..nu).map(|iu| axis_taylor(iu, uv[0], order)).collect();
        let tv: Vec<Vec<f64>> = (0..nv).map(|iv| axis_taylor(iv, uv[1], order)).collect();
        let mut coeffs = vec![0.0; shape.len()];
        for (idx, c) in coeffs.iter_mut().enumerate() {
            let m = shape.monomial(idx);
            let (a, b) = (m[0] as usize, m[1] as usize);
            let mut acc = 0.0;
            for iu in 0..nu {
                let fu = tu[iu][a];
                if fu == 0.0 {
                    continue;
                }
                let row = &self.coeffs[iu];
                let mut inner = 0.0;
                for iv in 0..nv {
                    let cc = row[iv];
                    if cc != 0.0 {
                        inner += cc * tv[iv][b];
                    }
                }
                acc += fu * inner;
            }
            *c = acc;
        }
        Jet::from_coeffs(shape, coeffs)
    }
}

/// The evolving surface: a spectral representation per topology.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum SpectralShape {
    /// Three independent double-periodic series.
    TorusComponents([TrigTable; 3]),
    /// Radial graph `center + r(u, v) n(u, v)` over the round sphere chart.
    SphereRadial { center: [f64; 3], radial: TrigTable },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralSurface {
    pub topology: Topology,
    pub shape: SpectralShape,
    pub bandlimit: (usize, usize),
    /// Collocation grid the coefficients were fit on.
    pub fit_resolution: (usize, usize),
    /// Max nodal reconstruction error of the last fit.
    pub reconstruction_error: f64,
}

impl SpectralSurface {
    /// Chart jets of the immersion (exact basis derivatives).
    pub fn jets_at(&self, uv: [f64; 2], order: usize) -> [Jet2; 3] {
        match &self.shape {
            SpectralShape::TorusComponents(tables) => {
                std::array::from_fn(|k| tables[k].jet(uv, order))
            }
            SpectralShape::SphereRadial { center, radial } => {
                let r = radial.jet(uv, order);
                let shape = JetShape::get(2, order);
                let u = Jet::variable(shape.clone(), 0, uv[0]);
                let v = Jet::variable(shape, 1, uv[1]);
                let (su, cu) = (u.sin(), u.cos());
                let (sv, cv) = (v.sin(), v.cos());
                let n = [&sv * &cu, &sv * &su, cv];
                std::array::from_fn(|k| {
                    let disp = &r * &n[k];
                    let c = disp.like(center[k]);
                    disp + c
                })
            }
        }
    }

    pub fn value_at(&self, uv: [f64; 2]) -> [f64; 3] {
        match &self.shape {
            SpectralShape::TorusComponents(tables) => {
                std::array::from_fn(|k| tables[k].value(uv))
            }
            SpectralShape::SphereRadial { center, radial } => {
                let r = radial.value(uv);
                let n = [
                    uv[1].sin() * uv[0].cos(),
                    uv[1].sin() * uv[0].sin(),
                    uv[1].cos(),
                ];
                std::array::from_fn(|k| center[k] + r * n[k])
            }
        }
    }

    /// Wrap as a `ClosedSurface` (inward orientation like the catalog).
    pub fn as_surface(&self, name: impl Into<String>) -> ClosedSurface {
        let domain = match self.topology {
            Topology::SphereLike => [[0.0, 2.0 * std::f64::consts::PI], [0.0, std::f64::consts::PI]],
            Topology::TorusLike => [
                [0.0, 2.0 * std::f64::consts::PI],
                [0.0, 2.0 * std::f64::consts::PI],
            ],
        };
        ClosedSurface::new(
            name,
            self.topology,
            Immersion::Spectral(Box::new(self.clone())),
            domain,
        )
        .with_orientation_sign(1.0, Orientation::Chart)
    }

    /// Multiply coefficients by an exponential low-pass factor with the given
    /// log-strength at the Nyquist mode.
    pub fn apply_filter(&mut self, strength_log10: f64, order: u32) {
        let alpha = strength_log10 * std::f64::consts::LN_10;
        let (mu, mv) = self.bandlimit;
        let damp = |table: &mut TrigTable| {
            for iu in 0..table.coeffs.len() {
                let (ku, _) = axis_mode(iu);
                for iv in 0..table.coeffs[iu].len() {
                    let (kv, _) = axis_mode(iv);
                    let eta_u = if mu == 0 { 0.0 } else { ku as f64 / mu as f64 };
                    let eta_v = if mv == 0 { 0.0 } else { kv as f64 / mv as f64 };
                    let f = (-alpha * (eta_u.powi(order as i32) + eta_v.powi(order as i32))).exp();
                    table.coeffs[iu][iv] *= f;
                }
            }
        };
        match &mut self.shape {
            SpectralShape::TorusComponents(tables) => {
                for t in tables.iter_mut() {
                    damp(t);
                }
            }
            SpectralShape::SphereRadial { radial, .. } => damp(radial),
        }
    }
}

fn check_nyquist(
    topology: Topology,
    bandlimit: (usize, usize),
    resolution: (usize, usize),
) -> Result<(), FlowError> {
    let (mu, mv) = bandlimit;
    let (nu, nv) = resolution;
    let ok_u = 2 * mu + 1 <= nu;
    let ok_v = match topology {
        Topology::TorusLike => 2 * mv + 1 <= nv,
        Topology::SphereLike => 2 * mv + 1 <= nv,
    };
    if ok_u && ok_v {
        Ok(())
    } else {
        Err(FlowError::BandlimitTooHigh { mu, mv, nu, nv })
    }
}

/// Exact discrete trig projection on an equispaced periodic axis.
fn periodic_axis_fit(values: &[Vec<f64>], bandlimit: usize, ws: &[f64]) -> Vec<Vec<f64>> {
    // values[j][col]: rows indexed by the axis being fit
    let n = values.len();
    let cols = values[0].len();
    let mut out = vec![vec![0.0; cols]; axis_len(bandlimit)];
    for (idx, row_out) in out.iter_mut().enumerate() {
        let (k, _) = axis_mode(idx);
        let norm = if k == 0 { 1.0 / n as f64 } else { 2.0 / n as f64 };
        for col in 0..cols {
            let mut acc = 0.0;
            for (j, w) in ws.iter().enumerate() {
                acc += values[j][col] * axis_eval(idx, *w);
            }
            row_out[col] = norm * acc;
        }
    }
    out
}

/// Weighted least squares on arbitrary axis nodes (Gauss-Legendre latitude).
///
/// The mixed `cos(l v)` / `sin(l v)` family restricted to a half period is
/// numerically rank-deficient at useful bandlimits, so the solve goes through
/// a rank-revealing pivoted QR instead of normal equations; representable
/// data is still reproduced to roundoff, with surplus directions dropped.
fn least_squares_axis_fit(
    values: &[Vec<f64>],
    bandlimit: usize,
    ws: &[f64],
    weights: &[f64],
) -> Vec<Vec<f64>> {
    let n = ws.len();
    let m = axis_len(bandlimit);
    let cols = values[0].len();
    // weighted design matrix and right-hand sides: rows sqrt(w_j) phi(v_j)
    let mut a = vec![vec![0.0; m]; n];
    let mut rhs = vec![vec![0.0; cols]; n];
    for j in 0..n {
        let sw = weights[j].sqrt();
        for i in 0..m {
            a[j][i] = sw * axis_eval(i, ws[j]);
        }
        for col in 0..cols {
            rhs[j][col] = sw * values[j][col];
        }
    }
    let coeffs = pivoted_qr_lstsq(&mut a, &mut rhs, 1e-12);
    let mut out = vec![vec![0.0; cols]; m];
    for (i, row) in coeffs.into_iter().enumerate() {
        out[i] = row;
    }
    out
}

/// Least squares by Householder QR with column pivoting; columns whose pivot
/// falls below `rel_tol` times the leading pivot are treated as dependent and
/// their coefficients set to zero. `a` is n x m (n >= m), `rhs` is n x cols;
/// both are consumed. Returns m x cols coefficients.
fn pivoted_qr_lstsq(
    a: &mut [Vec<f64>],
    rhs: &mut [Vec<f64>],
    rel_tol: f64,
) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = a[0].len();
    let cols = rhs[0].len();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut rank = m;
    for j in 0..m {
        // pivot: remaining column with the largest trailing norm
        let mut best = j;
        let mut best_norm = 0.0;
        for c in j..m {
            let norm: f64 = (j..n).map(|r| a[r][c] * a[r][c]).sum();
            if norm > best_norm {
                best_norm = norm;
                best = c;
            }
        }
        if best != j {
            for row in a.iter_mut() {
                row.swap(j, best);
            }
            perm.swap(j, best);
        }
        let norm = best_norm.sqrt();
        if j == 0 && norm == 0.0 {
            rank = 0;
            break;
        }
        if j > 0 && norm < rel_tol * a[0][0].abs() {
            rank = j;
            break;
        }
        // Householder vector for column j
        let alpha = if a[j][j] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..n).map(|r| a[r][j]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for c in j..m {
                let dot: f64 = (j..n).map(|r| v[r - j] * a[r][c]).sum();
                let s = 2.0 * dot / vnorm2;
                for r in j..n {
                    a[r][c] -= s * v[r - j];
                }
            }
            for col in 0..cols {
                let dot: f64 = (j..n).map(|r| v[r - j] * rhs[r][col]).sum();
                let s = 2.0 * dot / vnorm2;
                for r in j..n {
                    rhs[r][col] -= s * v[r - j];
                }
            }
        }
        a[j][j] = alpha;
    }
    // back-substitute on the leading rank x rank block
    let mut out = vec![vec![0.0; cols]; m];
    for col in 0..cols {
        let mut x = vec![0.0; rank];
        for i in (0..rank).rev() {
            let mut sum = rhs[i][col];
            for k in i + 1..rank {
                sum -= a[i][k] * x[k];
            }
            x[i] = sum / a[i][i];
        }
        for i in 0..rank {
            out[perm[i]][col] = x[i];
        }
    }
    out
}

/// Fit nodal positions (laid out grid-major like `QuadratureGrid::nodes`)
/// into a spectral surface.
fn fit_nodal_positions(
    topology: Topology,
    grid: &QuadratureGrid,
    positions: &[[f64; 3]],
    bandlimit: (usize, usize),
) -> SpectralSurface {
    let (nu, nv) = grid.resolution;
    let us: Vec<f64> = (0..nu).map(|i| grid.nodes[i][0]).collect();
    let vs: Vec<f64> = (0..nv).map(|j| grid.nodes[j * nu][1]).collect();
    match topology {
        Topology::TorusLike => {
            let tables: [TrigTable; 3] = std::array::from_fn(|comp| {
                // stage 1: u-projection per v-row
                let rows: Vec<Vec<f64>> = (0..nu)
                    .map(|i| (0..nv).map(|j| positions[j * nu + i][comp]).collect())
                    .collect();
                let stage1 = periodic_axis_fit(&rows, bandlimit.0, &us);
                // stage 2: v-projection per u-mode
                let cols: Vec<Vec<f64>> = (0..nv)
                    .map(|j| (0..axis_len(bandlimit.0)).map(|iu| stage1[iu][j]).collect())
                    .collect();
                let stage2 = periodic_axis_fit(&cols, bandlimit.1, &vs);
                let mut table = TrigTable::zeros(bandlimit);
                for iu in 0..axis_len(bandlimit.0) {
                    for (iv, row) in stage2.iter().enumerate() {
                        table.coeffs[iu][iv] = row[iu];
                    }
                }
                let mut table = TrigTable {
                    bandlimit,
                    coeffs: table.coeffs,
                };
                table.denoise();
                table
            });
            SpectralSurface {
                topology,
                shape: SpectralShape::TorusComponents(tables),
                bandlimit,
                fit_resolution: grid.resolution,
                reconstruction_error: f64::NAN,
            }
        }
        Topology::SphereLike => {
            let mut center = [0.0; 3];
            for p in positions {
                for k in 0..3 {
                    center[k] += p[k];
                }
            }
            for c in center.iter_mut() {
                *c /= positions.len() as f64;
            }
            let radii: Vec<Vec<f64>> = (0..nu)
                .map(|i| {
                    (0..nv)
                        .map(|j| {
                            let p = positions[j * nu + i];
                            ((p[0] - center[0]).powi(2)
                                + (p[1] - center[1]).powi(2)
                                + (p[2] - center[2]).powi(2))
                            .sqrt()
                        })
                        .collect()
                })
                .collect();
            let stage1 = periodic_axis_fit(&radii, bandlimit.0, &us);
            let cols: Vec<Vec<f64>> = (0..nv)
                .map(|j| (0..axis_len(bandlimit.0)).map(|iu| stage1[iu][j]).collect())
                .collect();
            // latitude weights for the least-squares stage
            let wv: Vec<f64> = (0..nv).map(|j| grid.weights[j * nu]).collect();
            let stage2 = least_squares_axis_fit(&cols, bandlimit.1, &vs, &wv);
            let mut radial = TrigTable::zeros(bandlimit);
            for iu in 0..axis_len(bandlimit.0) {
                for (iv, row) in stage2.iter().enumerate() {
                    radial.coeffs[iu][iv] = row[iu];
                }
            }
            radial.denoise();
            SpectralSurface {
                topology,
                shape: SpectralShape::SphereRadial { center, radial },
                bandlimit,
                fit_resolution: grid.resolution,
                reconstruction_error: f64::NAN,
            }
        }
    }
}

fn reconstruction_error(
    state: &SpectralSurface,
    grid: &QuadratureGrid,
    positions: &[[f64; 3]],
) -> f64 {
    let mut err: f64 = 0.0;
    for (node, p) in grid.nodes.iter().zip(positions) {
        let q = state.value_at(*node);
        for k in 0..3 {
            err = err.max((q[k] - p[k]).abs());
        }
    }
    err
}

/// Project a surface into the spectral basis by collocation on its
/// quadrature grid; rejects fits whose nodal reconstruction error exceeds
/// [`ALIASING_LIMIT`].
pub fn project_to_spectral(
    surface: &ClosedSurface,
    factor: &ConformalFactor,
    bandlimit: (usize, usize),
    resolution: (usize, usize),
) -> Result<SpectralSurface, FlowError> {
    check_nyquist(surface.topology, bandlimit, resolution)?;
    let grid = QuadratureGrid::for_surface(surface, resolution.0, resolution.1);
    let positions_r = map_with(ExecMode::Parallel, &grid.nodes, |&uv| {
        surface
            .immersion
            .jets_at(uv, 1)
            .map(|jets| [jets[0].value(), jets[1].value(), jets[2].value()])
    });
    let mut positions = Vec::with_capacity(positions_r.len());
    for (r, uv) in positions_r.into_iter().zip(&grid.nodes) {
        positions.push(r.map_err(|e| FlowError::Geom(GeomError::at_node(uv[0], uv[1], e)))?);
    }
    let _ = factor;
    let mut state = fit_nodal_positions(surface.topology, &grid, &positions, bandlimit);
    let err = reconstruction_error(&state, &grid, &positions);
    state.reconstruction_error = err;
    if err > ALIASING_LIMIT {
        return Err(FlowError::Aliasing {
            error: err,
            limit: ALIASING_LIMIT,
        });
    }
    Ok(state)
}

/// Flow parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowConfig {
    pub max_steps: usize,
    /// Initial step; `None` derives `1e-3 L^4 / max |W|` from the surface
    /// scale `L` (the operator is fourth order in space).
    pub dt0: Option<f64>,
    /// Terminate when the L2 norm of the Willmore operator drops below this.
    pub tol: f64,
    pub max_halvings: usize,
    /// Exponential filter strength in decades at the Nyquist mode;
    /// `None` disables filtering.
    pub filter_decades: Option<f64>,
    pub filter_order: u32,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            max_steps: 20_000,
            dt0: None,
            tol: 1e-4,
            max_halvings: 20,
            filter_decades: Some(36.0),
            filter_order: 8,
        }
    }
}

/// Per-node data gathered in the diagnostics pass.
struct NodalState {
    position: [f64; 3],
    normal: [f64; 3],
    willmore: f64,
    density: f64,
    h2: f64,
    gauss: f64,
}

/// Global diagnostics of a state.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlowDiagnostics {
    pub energy: f64,
    pub w_sup: f64,
    pub w_l2: f64,
    pub area: f64,
    pub total_gauss: f64,
}

/// One trace row.
#[derive(Debug, Clone, Serialize)]
pub struct FlowStepRecord {
    pub step: usize,
    pub dt: f64,
    pub energy: f64,
    pub w_sup: f64,
    pub w_l2: f64,
    pub area: f64,
    pub total_gauss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    Converged,
    MaxSteps,
    Stalled,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowTrace {
    pub records: Vec<FlowStepRecord>,
    pub termination: Termination,
}

fn nodal_pass(
    state: &SpectralSurface,
    factor: &ConformalFactor,
    grid: &QuadratureGrid,
) -> Result<(Vec<NodalState>, FlowDiagnostics), FlowError> {
    let surface = state.as_surface("flow state");
    let results = map_with(ExecMode::Parallel, &grid.nodes, |&uv| {
        surface_at(&surface, factor, uv, 4).and_then(|pt| {
            let w = willmore_el_residual_at(&pt)?;
            Ok(NodalState {
                position: pt.position,
                normal: pt.normal,
                willmore: w,
                density: pt.area_density,
                h2: pt.mean_curvature * pt.mean_curvature,
                gauss: pt.gauss_intrinsic,
            })
        })
    });
    let mut nodes = Vec::with_capacity(results.len());
    for (r, uv) in results.into_iter().zip(&grid.nodes) {
        nodes.push(r.map_err(|e| FlowError::Geom(GeomError::at_node(uv[0], uv[1], e)))?);
    }
    let energy_terms: Vec<f64> = grid
        .weights
        .iter()
        .zip(&nodes)
        .map(|(w, n)| w * n.density * n.h2)
        .collect();
    let area_terms: Vec<f64> = grid
        .weights
        .iter()
        .zip(&nodes)
        .map(|(w, n)| w * n.density)
        .collect();
    let gauss_terms: Vec<f64> = grid
        .weights
        .iter()
        .zip(&nodes)
        .map(|(w, n)| w * n.density * n.gauss)
        .collect();
    let w2_terms: Vec<f64> = grid
        .weights
        .iter()
        .zip(&nodes)
        .map(|(w, n)| w * n.density * n.willmore * n.willmore)
        .collect();
    let diagnostics = FlowDiagnostics {
        energy: pairwise_sum(&energy_terms),
        w_sup: nodes.iter().map(|n| n.willmore.abs()).fold(0.0, f64::max),
        w_l2: pairwise_sum(&w2_terms).max(0.0).sqrt(),
        area: pairwise_sum(&area_terms),
        total_gauss: pairwise_sum(&gauss_terms),
    };
    Ok((nodes, diagnostics))
}

fn energy_of(
    state: &SpectralSurface,
    factor: &ConformalFactor,
    grid: &QuadratureGrid,
) -> Result<f64, FlowError> {
    let surface = state.as_surface("flow trial");
    let results = map_with(ExecMode::Parallel, &grid.nodes, |&uv| {
        surface_at(&surface, factor, uv, 2)
            .map(|pt| pt.mean_curvature * pt.mean_curvature * pt.area_density)
    });
    let mut terms = Vec::with_capacity(results.len());
    for (r, (uv, w)) in results.into_iter().zip(grid.nodes.iter().zip(&grid.weights)) {
        terms.push(w * r.map_err(|e| FlowError::Geom(GeomError::at_node(uv[0], uv[1], e)))?);
    }
    Ok(pairwise_sum(&terms))
}

pub struct StepOutcome {
    pub state: SpectralSurface,
    /// Step size actually accepted.
    pub dt_used: f64,
    pub halvings: usize,
    pub pre_diagnostics: FlowDiagnostics,
    pub post_energy: f64,
}

/// One explicit descent step with energy backtracking.
pub fn flow_step(
    state: &SpectralSurface,
    factor: &ConformalFactor,
    dt: f64,
    config: &FlowConfig,
    step_index: usize,
) -> Result<StepOutcome, FlowError> {
    assert!(dt > 0.0);
    let grid = QuadratureGrid::for_surface(
        &state.as_surface("flow grid"),
        state.fit_resolution.0,
        state.fit_resolution.1,
    );
    let (nodes, pre) = nodal_pass(state, factor, &grid)?;
    let mut dt_try = dt;
    for halving in 0..=config.max_halvings {
        let moved: Vec<[f64; 3]> = nodes
            .iter()
            .map(|n| std::array::from_fn(|k| n.position[k] - dt_try * n.willmore * n.normal[k]))
            .collect();
        let mut trial = fit_nodal_positions(state.topology, &grid, &moved, state.bandlimit);
        if let Some(decades) = config.filter_decades {
            trial.apply_filter(decades, config.filter_order);
        }
        trial.reconstruction_error = reconstruction_error(&trial, &grid, &moved);
        let post_energy = match energy_of(&trial, factor, &grid) {
            Ok(e) if e.is_finite() => e,
            _ => {
                // geometry broke at this step size; treat like an energy rise
                dt_try *= 0.5;
                continue;
            }
        };
        if post_energy < pre.energy {
            return Ok(StepOutcome {
                state: trial,
                dt_used: dt_try,
                halvings: halving,
                pre_diagnostics: pre,
                post_energy,
            });
        }
        dt_try *= 0.5;
    }
    Err(FlowError::Stall {
        step: step_index,
        halvings: config.max_halvings,
    })
}

/// Automatic initial step from the fourth-order character of the operator.
pub fn auto_dt0(state: &SpectralSurface, factor: &ConformalFactor) -> Result<f64, FlowError> {
    let surface = state.as_surface("flow scale");
    let l = surface.diameter_estimate();
    let grid = QuadratureGrid::for_surface(&surface, state.fit_resolution.0, state.fit_resolution.1);
    let (_, d) = nodal_pass(state, factor, &grid)?;
    let wmax = d.w_sup.max(1e-12);
    Ok(1e-3 * l.powi(4) / wmax)
}

/// Run the flow until convergence, step exhaustion, or stall.
pub fn run_flow(
    initial: &SpectralSurface,
    factor: &ConformalFactor,
    config: &FlowConfig,
) -> Result<(FlowTrace, SpectralSurface), FlowError> {
    let grid = QuadratureGrid::for_surface(
        &initial.as_surface("flow grid"),
        initial.fit_resolution.0,
        initial.fit_resolution.1,
    );
    let mut state = initial.clone();
    let mut records = Vec::new();
    let mut dt = match config.dt0 {
        Some(v) => v,
        None => auto_dt0(&state, factor)?,
    };
    let dt_cap = dt * 100.0;
    let mut step = 0usize;
    loop {
        let (_, diag) = nodal_pass(&state, factor, &grid)?;
        records.push(FlowStepRecord {
            step,
            dt,
            energy: diag.energy,
            w_sup: diag.w_sup,
            w_l2: diag.w_l2,
            area: diag.area,
            total_gauss: diag.total_gauss,
        });
        if diag.w_l2 < config.tol {
            return Ok((
                FlowTrace {
                    records,
                    termination: Termination::Converged,
                },
                state,
            ));
        }
        if step >= config.max_steps {
            return Ok((
                FlowTrace {
                    records,
                    termination: Termination::MaxSteps,
                },
                state,
            ));
        }
        match flow_step(&state, factor, dt, config, step) {
            Ok(outcome) => {
                state = outcome.state;
                dt = (outcome.dt_used * 1.2).min(dt_cap);
            }
            Err(FlowError::Stall { .. }) => {
                return Ok((
                    FlowTrace {
                        records,
                        termination: Termination::Stalled,
                    },
                    state,
                ));
            }
            Err(e) => return Err(e),
        }
        step += 1;
    }
}
