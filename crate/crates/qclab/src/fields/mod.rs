//! Planar mappings sampled on uniform rectangular grids, plus the quadrature
//! diagnostics built on them: dilatation-integrability scans and the
//! area-formula check `int |det Du| dx = |u(E)|` for injective maps.
//!
//! Conventions: a [`GridSpec`] describes the node lattice
//! `x_i = x_min + i h_x`, `y_j = y_min + j h_y` with `h = (max - min)/(n - 1)`;
//! values are stored row-major with `x` fastest (`idx = j * nx + i`).
//! Quadrature routines use the midpoint rule, so their grids are built with
//! [`GridSpec::cell_centered`], which also keeps Example-1's seam `x_1 = 0`
//! and other non-smooth lines off the sample set.

pub mod catalog;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matalg::Mat2;
use catalog::AnalyticMap;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("invalid grid spec: {reason}")]
    InvalidSpec { reason: String },
    #[error("map undefined at sample ({x:.6}, {y:.6})")]
    EvaluationDomain { x: f64, y: f64 },
    #[error("non-positive Jacobian {det:.3e} inside scan region at ({x:.6}, {y:.6})")]
    DegenerateGradient { x: f64, y: f64, det: f64 },
    #[error("point ({x:.6}, {y:.6}) outside the field's grid")]
    OutsideGrid { x: f64, y: f64 },
    #[error("scan deltas must be positive and strictly descending")]
    BadDeltas,
}

/// Uniform rectangular node grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Self {
        GridSpec {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
        }
    }

    /// Square grid over `[lo, hi]^2` with `n` nodes per axis.
    pub fn square(lo: f64, hi: f64, n: usize) -> Self {
        GridSpec::new(lo, hi, lo, hi, n, n)
    }

    /// Nodes at the centers of an `nx x ny` cell partition of the rectangle.
    ///
    /// Node spacing equals the cell size, so summing `f(node) * hx * hy` is the
    /// midpoint rule over the full rectangle.
    pub fn cell_centered(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Self {
        let hx = (x1 - x0) / nx as f64;
        let hy = (y1 - y0) / ny as f64;
        GridSpec::new(
            x0 + 0.5 * hx,
            x1 - 0.5 * hx,
            y0 + 0.5 * hy,
            y1 - 0.5 * hy,
            nx,
            ny,
        )
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return Err(FieldError::InvalidSpec {
                reason: format!(
                    "empty extent [{}, {}] x [{}, {}]",
                    self.x_min, self.x_max, self.y_min, self.y_max
                ),
            });
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(FieldError::InvalidSpec {
                reason: format!("need at least 2 nodes per axis, got {}x{}", self.nx, self.ny),
            });
        }
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.y_min.is_finite() && self.y_max.is_finite()) {
            return Err(FieldError::InvalidSpec {
                reason: "non-finite bounds".into(),
            });
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.hy()
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x(i), self.y(j)]
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i > 0 && j > 0 && i + 1 < self.nx && j + 1 < self.ny
    }

    /// Whether `p` lies at least `margin_cells` node spacings inside the grid.
    pub fn contains_with_margin(&self, p: [f64; 2], margin_cells: f64) -> bool {
        let mx = margin_cells * self.hx();
        let my = margin_cells * self.hy();
        p[0] >= self.x_min + mx
            && p[0] <= self.x_max - mx
            && p[1] >= self.y_min + my
            && p[1] <= self.y_max - my
    }
}

/// Whether a field's gradients came from closed forms or from differencing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Analytic,
    Numeric,
}

/// A planar mapping on a grid: per-node values and gradient matrices.
#[derive(Debug, Clone)]
pub struct GridField {
    pub spec: GridSpec,
    pub values: Vec<[f64; 2]>,
    pub gradients: Vec<Mat2>,
    pub provenance: Provenance,
}

impl GridField {
    pub fn value(&self, i: usize, j: usize) -> [f64; 2] {
        self.values[self.spec.idx(i, j)]
    }

    pub fn value_c(&self, i: usize, j: usize) -> Complex64 {
        let v = self.value(i, j);
        Complex64::new(v[0], v[1])
    }

    pub fn gradient(&self, i: usize, j: usize) -> Mat2 {
        self.gradients[self.spec.idx(i, j)]
    }

    /// Bilinear interpolation of the mapping at `p`.
    pub fn interp_value(&self, p: [f64; 2]) -> Result<[f64; 2], FieldError> {
        let (i, j, s, t) = self.locate(p)?;
        let f = |di: usize, dj: usize| self.value(i + di, j + dj);
        let (v00, v10, v01, v11) = (f(0, 0), f(1, 0), f(0, 1), f(1, 1));
        let lerp = |k: usize| {
            (1.0 - t) * ((1.0 - s) * v00[k] + s * v10[k]) + t * ((1.0 - s) * v01[k] + s * v11[k])
        };
        Ok([lerp(0), lerp(1)])
    }

    /// Bilinear interpolation of the stored gradient at `p`.
    pub fn interp_gradient(&self, p: [f64; 2]) -> Result<Mat2, FieldError> {
        let (i, j, s, t) = self.locate(p)?;
        let g = |di: usize, dj: usize| self.gradient(i + di, j + dj);
        let (g00, g10, g01, g11) = (g(0, 0), g(1, 0), g(0, 1), g(1, 1));
        let lerp = |e: fn(&Mat2) -> f64| {
            (1.0 - t) * ((1.0 - s) * e(&g00) + s * e(&g10))
                + t * ((1.0 - s) * e(&g01) + s * e(&g11))
        };
        Ok(Mat2::new(
            lerp(|m| m.a11),
            lerp(|m| m.a12),
            lerp(|m| m.a21),
            lerp(|m| m.a22),
        ))
    }

    /// Jacobian of the bilinear interpolant itself at `p` (piecewise in each cell).
    pub fn interp_jacobian(&self, p: [f64; 2]) -> Result<Mat2, FieldError> {
        let (i, j, s, t) = self.locate(p)?;
        let f = |di: usize, dj: usize| self.value(i + di, j + dj);
        let (v00, v10, v01, v11) = (f(0, 0), f(1, 0), f(0, 1), f(1, 1));
        let hx = self.spec.hx();
        let hy = self.spec.hy();
        let dxd = |k: usize| {
            ((1.0 - t) * (v10[k] - v00[k]) + t * (v11[k] - v01[k])) / hx
        };
        let dyd = |k: usize| {
            ((1.0 - s) * (v01[k] - v00[k]) + s * (v11[k] - v10[k])) / hy
        };
        Ok(Mat2::new(dxd(0), dyd(0), dxd(1), dyd(1)))
    }

    fn locate(&self, p: [f64; 2]) -> Result<(usize, usize, f64, f64), FieldError> {
        let gx = (p[0] - self.spec.x_min) / self.spec.hx();
        let gy = (p[1] - self.spec.y_min) / self.spec.hy();
        let eps = 1e-9;
        if gx < -eps || gy < -eps || gx > (self.spec.nx - 1) as f64 + eps || gy > (self.spec.ny - 1) as f64 + eps {
            return Err(FieldError::OutsideGrid { x: p[0], y: p[1] });
        }
        let i = (gx.floor() as usize).min(self.spec.nx - 2);
        let j = (gy.floor() as usize).min(self.spec.ny - 2);
        Ok((i, j, gx - i as f64, gy - j as f64))
    }

    /// Smallest Jacobian determinant over interior nodes.
    pub fn min_interior_det(&self) -> f64 {
        let mut m = f64::INFINITY;
        for j in 1..self.spec.ny - 1 {
            for i in 1..self.spec.nx - 1 {
                m = m.min(self.gradient(i, j).det());
            }
        }
        m
    }
}

/// Complex scalar field on a grid (coefficients, residuals, meromorphic data).
#[derive(Debug, Clone)]
pub struct ComplexGrid {
    pub spec: GridSpec,
    pub values: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        ComplexGrid {
            spec,
            values: vec![Complex64::new(0.0, 0.0); spec.len()],
        }
    }

    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.spec.idx(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let k = self.spec.idx(i, j);
        self.values[k] = v;
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Grid l2 norm `sqrt(sum |v|^2 hx hy)`.
    pub fn l2_norm(&self) -> f64 {
        let w = self.spec.hx() * self.spec.hy();
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * w).sqrt()
    }

    pub fn interp(&self, p: [f64; 2]) -> Result<Complex64, FieldError> {
        let gx = (p[0] - self.spec.x_min) / self.spec.hx();
        let gy = (p[1] - self.spec.y_min) / self.spec.hy();
        let eps = 1e-9;
        if gx < -eps || gy < -eps || gx > (self.spec.nx - 1) as f64 + eps || gy > (self.spec.ny - 1) as f64 + eps {
            return Err(FieldError::OutsideGrid { x: p[0], y: p[1] });
        }
        let i = (gx.floor() as usize).min(self.spec.nx - 2);
        let j = (gy.floor() as usize).min(self.spec.ny - 2);
        let (s, t) = (gx - i as f64, gy - j as f64);
        Ok((1.0 - t) * ((1.0 - s) * self.value(i, j) + s * self.value(i + 1, j))
            + t * ((1.0 - s) * self.value(i, j + 1) + s * self.value(i + 1, j + 1)))
    }
}

/// Sample an analytic map and its closed-form gradient on a grid.
pub fn sample(map: &AnalyticMap, spec: &GridSpec) -> Result<GridField, FieldError> {
    spec.validate()?;
    let mut values = Vec::with_capacity(spec.len());
    let mut gradients = Vec::with_capacity(spec.len());
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let p = spec.node(i, j);
            values.push(map.eval(p)?);
            gradients.push(map.grad(p)?);
        }
    }
    Ok(GridField {
        spec: *spec,
        values,
        gradients,
        provenance: Provenance::Analytic,
    })
}

/// Rebuild gradients from the stored values: central differences in the
/// interior, one-sided at the boundary. Exact on affine maps.
pub fn finite_diff_gradients(field: &GridField) -> GridField {
    let spec = field.spec;
    let hx = spec.hx();
    let hy = spec.hy();
    let mut gradients = Vec::with_capacity(spec.len());
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let dx = |k: usize| -> f64 {
                if i == 0 {
                    (field.value(1, j)[k] - field.value(0, j)[k]) / hx
                } else if i == spec.nx - 1 {
                    (field.value(i, j)[k] - field.value(i - 1, j)[k]) / hx
                } else {
                    (field.value(i + 1, j)[k] - field.value(i - 1, j)[k]) / (2.0 * hx)
                }
            };
            let dy = |k: usize| -> f64 {
                if j == 0 {
                    (field.value(i, 1)[k] - field.value(i, 0)[k]) / hy
                } else if j == spec.ny - 1 {
                    (field.value(i, j)[k] - field.value(i, j - 1)[k]) / hy
                } else {
                    (field.value(i, j + 1)[k] - field.value(i, j - 1)[k]) / (2.0 * hy)
                }
            };
            gradients.push(Mat2::new(dx(0), dy(0), dx(1), dy(1)));
        }
    }
    GridField {
        spec,
        values: field.values.clone(),
        gradients,
        provenance: Provenance::Numeric,
    }
}

fn quotient_at(g: &Mat2, x: f64, y: f64) -> Result<f64, FieldError> {
    let det = g.det();
    if det <= 0.0 {
        return Err(FieldError::DegenerateGradient { x, y, det });
    }
    let n = g.op_norm();
    Ok(n * n / det)
}

/// Midpoint-rule integral of the dilatation quotient `||Du||^2/det Du` over
/// the part of the field's rectangle with `x > delta`, for each delta in
/// descending order.
///
/// Resolution is limited by the grid: a delta below one cell width stops
/// enlarging the captured region. Use [`integrability_scan_map`] when the map
/// is known in closed form and small deltas must be resolved.
pub fn integrability_scan(
    field: &GridField,
    deltas: &[f64],
) -> Result<Vec<(f64, f64)>, FieldError> {
    check_deltas(deltas)?;
    let spec = field.spec;
    let w = spec.hx() * spec.hy();
    // quotient per column, reused across deltas
    let mut integrals = vec![0.0; deltas.len()];
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let x = spec.x(i);
            let smallest = *deltas.last().unwrap();
            if x <= smallest {
                continue;
            }
            let q = quotient_at(&field.gradient(i, j), x, spec.y(j))? * w;
            for (k, &d) in deltas.iter().enumerate() {
                if x > d {
                    integrals[k] += q;
                }
            }
        }
    }
    Ok(deltas.iter().copied().zip(integrals).collect())
}

/// Closed-form variant of [`integrability_scan`]: integrates the dilatation
/// quotient of `map` over `(delta, x_max) x (y_min, y_max)` by per-strip
/// midpoint quadrature, resolving deltas far below any storable grid.
pub fn integrability_scan_map(
    map: &AnalyticMap,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    deltas: &[f64],
    cells_per_strip: usize,
) -> Result<Vec<(f64, f64)>, FieldError> {
    check_deltas(deltas)?;
    let strip = |a: f64, b: f64, cols: usize| -> Result<f64, FieldError> {
        let rows = cells_per_strip;
        let gx = (b - a) / cols as f64;
        let gy = (y_max - y_min) / rows as f64;
        let mut acc = 0.0;
        for jj in 0..rows {
            let y = y_min + (jj as f64 + 0.5) * gy;
            for ii in 0..cols {
                let x = a + (ii as f64 + 0.5) * gx;
                let g = map.grad([x, y])?;
                acc += quotient_at(&g, x, y)? * gx * gy;
            }
        }
        Ok(acc)
    };
    let mut out = Vec::with_capacity(deltas.len());
    // base region (deltas[0], x_max), then one strip per halving
    let mut total = strip(deltas[0], x_max, 4 * cells_per_strip)?;
    out.push((deltas[0], total));
    for k in 1..deltas.len() {
        total += strip(deltas[k], deltas[k - 1], cells_per_strip)?;
        out.push((deltas[k], total));
    }
    Ok(out)
}

fn check_deltas(deltas: &[f64]) -> Result<(), FieldError> {
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(FieldError::BadDeltas);
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(FieldError::BadDeltas);
    }
    Ok(())
}

/// Area-formula check for an injective field on the rectangle `region`:
/// returns `(int |det Du|, shoelace area of the mapped boundary polygon)`.
///
/// The integral uses midpoint quadrature on an `nx x ny` cell partition of
/// `region`; the boundary polygon is sampled at `4 (nx + ny)` points.
pub fn area_check(field: &GridField, region: &GridSpec) -> Result<(f64, f64), FieldError> {
    region.validate()?;
    let (nx, ny) = (region.nx, region.ny);
    let centers = GridSpec::cell_centered(
        region.x_min,
        region.x_max,
        region.y_min,
        region.y_max,
        nx,
        ny,
    );
    let w = centers.hx() * centers.hy();
    let mut integral = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let p = centers.node(i, j);
            integral += field.interp_gradient(p)?.det().abs() * w;
        }
    }

    // mapped boundary polygon, counterclockwise
    let m = 4 * (nx + ny);
    let mut poly = Vec::with_capacity(m);
    let (x0, x1, y0, y1) = (region.x_min, region.x_max, region.y_min, region.y_max);
    let side = |a: [f64; 2], b: [f64; 2], n: usize, poly: &mut Vec<[f64; 2]>| {
        for k in 0..n {
            let t = k as f64 / n as f64;
            poly.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    };
    side([x0, y0], [x1, y0], 2 * nx, &mut poly);
    side([x1, y0], [x1, y1], 2 * ny, &mut poly);
    side([x1, y1], [x0, y1], 2 * nx, &mut poly);
    side([x0, y1], [x0, y0], 2 * ny, &mut poly);
    let mut image = Vec::with_capacity(poly.len());
    for p in poly {
        image.push(field.interp_value(p)?);
    }
    let mut area2 = 0.0;
    for k in 0..image.len() {
        let a = image[k];
        let b = image[(k + 1) % image.len()];
        area2 += a[0] * b[1] - b[0] * a[1];
    }
    Ok((integral, 0.5 * area2.abs()))
}
