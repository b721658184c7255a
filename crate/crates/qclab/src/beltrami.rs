//! Principal solution of the Beltrami equation `df/dzbar = mu df/dz` for
//! compactly supported coefficients, normalized by `f(z) = z + O(1/z)`.
//!
//! The singular integrals are realized as Fourier multipliers on a padded
//! periodic box: the Beurling transform is `xi_bar / xi` and the Cauchy
//! transform (the right inverse of `d/dzbar`) is `1 / ((i/2) xi)`, both with
//! the zero mode set to 0, which pins the additive normalization. The solve
//! itself is the Neumann iteration `g <- mu (B g + 1)` for `g = df/dzbar`,
//! a contraction with factor `kappa = sup |mu|` since the discrete Beurling
//! multiplier has unit modulus away from the zero mode. Periodization error
//! is not estimated a priori; it shows up in the reported pointwise residual.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;
use thiserror::Error;

use crate::fields::{ComplexGrid, GridField, GridSpec, Provenance};
use crate::matalg::{beltrami_of, Mat2, MatalgError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("sup |mu| = {kappa:.4} exceeds the solver limit {limit:.4}")]
    KappaTooLarge { kappa: f64, limit: f64 },
    #[error("invalid solver configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error("grids do not match: {reason}")]
    GridMismatch { reason: String },
    #[error("spectral transforms need square cells, got hx={hx:.3e}, hy={hy:.3e}")]
    AnisotropicGrid { hx: f64, hy: f64 },
    #[error(transparent)]
    Matalg(#[from] MatalgError),
}

/// A Beltrami coefficient field, zero outside its support box.
#[derive(Debug, Clone)]
pub struct MuField {
    pub grid: ComplexGrid,
    pub support_box: GridSpec,
    pub kappa: f64,
}

impl MuField {
    /// Wrap a sampled coefficient, zeroing anything outside the support box
    /// and recording `kappa = sup |mu|`.
    pub fn new(mut grid: ComplexGrid, support_box: GridSpec) -> Result<Self, SolverError> {
        let spec = grid.spec;
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let p = spec.node(i, j);
                if p[0] < support_box.x_min
                    || p[0] > support_box.x_max
                    || p[1] < support_box.y_min
                    || p[1] > support_box.y_max
                {
                    grid.set(i, j, Complex64::new(0.0, 0.0));
                }
            }
        }
        let kappa = grid.max_modulus();
        if !(kappa < 1.0) {
            return Err(SolverError::KappaTooLarge { kappa, limit: 1.0 });
        }
        Ok(MuField {
            grid,
            support_box,
            kappa,
        })
    }

    /// Coefficient of a sampled mapping: `beltrami_of` at every node.
    pub fn from_field(field: &GridField, support_box: GridSpec) -> Result<Self, SolverError> {
        let spec = field.spec;
        let mut grid = ComplexGrid::zeros(spec);
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let mu = beltrami_of(&field.gradient(i, j))?;
                grid.set(i, j, mu.to_complex());
            }
        }
        MuField::new(grid, support_box)
    }

    pub fn from_fn(
        spec: GridSpec,
        support_box: GridSpec,
        f: impl Fn([f64; 2]) -> Complex64,
    ) -> Result<Self, SolverError> {
        let mut grid = ComplexGrid::zeros(spec);
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                grid.set(i, j, f(spec.node(i, j)));
            }
        }
        MuField::new(grid, support_box)
    }
}

/// Controls for one principal-solution solve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverConfig {
    /// Truncation level used by coefficient truncation (Hilbert-Schmidt cap
    /// `sqrt(2) - epsilon`); carried here so pipeline configs are one value.
    pub epsilon_trunc: f64,
    pub max_neumann_iters: usize,
    pub residual_tol: f64,
    /// Ratio of computational box side to the coefficient grid side.
    pub padding_factor: f64,
    /// Coefficients with `kappa` at or above this are rejected.
    pub kappa_max: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon_trunc: 0.05,
            max_neumann_iters: 2000,
            residual_tol: 1e-6,
            padding_factor: 2.0,
            kappa_max: 0.95,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |reason: String| Err(SolverError::InvalidConfig { reason });
        if !(self.epsilon_trunc > 0.0 && self.epsilon_trunc < std::f64::consts::SQRT_2) {
            return bad(format!("epsilon_trunc {} outside (0, sqrt(2))", self.epsilon_trunc));
        }
        if self.max_neumann_iters == 0 {
            return bad("max_neumann_iters must be positive".into());
        }
        if !(self.residual_tol > 0.0) {
            return bad(format!("residual_tol {} must be positive", self.residual_tol));
        }
        if !(self.padding_factor >= 2.0) {
            return bad(format!("padding_factor {} must be >= 2", self.padding_factor));
        }
        if !(self.kappa_max > 0.0 && self.kappa_max < 1.0) {
            return bad(format!("kappa_max {} must lie in (0, 1)", self.kappa_max));
        }
        Ok(())
    }
}

/// Output of [`solve_principal`].
#[derive(Debug, Clone)]
pub struct PrincipalSolution {
    /// The solution sampled on the coefficient grid, gradients from the
    /// spectral derivative pair `(1 + Bg, g)`.
    pub f: GridField,
    /// Pointwise `df/dzbar - mu df/dz` on the coefficient grid.
    pub dbar_residual: ComplexGrid,
    pub iterations_used: usize,
    pub neumann_converged: bool,
    pub max_residual: f64,
    /// Grid l2 distance between successive Neumann iterates.
    pub change_history: Vec<f64>,
}

/// Truncate a coefficient at Hilbert-Schmidt norm `sqrt(2) - epsilon`
/// (complex modulus `1 - epsilon/sqrt(2)`), preserving the argument, and
/// zero it outside the support box. Idempotent.
pub fn truncate_mu(mu: &MuField, epsilon: f64) -> MuField {
    assert!(
        epsilon > 0.0 && epsilon < std::f64::consts::SQRT_2,
        "truncation level must lie in (0, sqrt(2))"
    );
    let cap = 1.0 - epsilon / std::f64::consts::SQRT_2;
    let mut grid = mu.grid.clone();
    for v in grid.values.iter_mut() {
        let m = v.norm();
        if m > cap {
            *v *= cap / m;
        }
    }
    MuField::new(grid, mu.support_box).expect("cap below 1 keeps kappa below 1")
}

// ---------------------------------------------------------------------------
// periodic spectral machinery
// ---------------------------------------------------------------------------

fn fftfreq(n: usize, i: usize) -> f64 {
    if i < (n + 1) / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

struct Spectral {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl Spectral {
    fn for_grid(spec: &GridSpec) -> Result<Self, SolverError> {
        let (hx, hy) = (spec.hx(), spec.hy());
        if ((hx - hy) / hx).abs() > 1e-9 {
            return Err(SolverError::AnisotropicGrid { hx, hy });
        }
        Ok(Spectral {
            nx: spec.nx,
            ny: spec.ny,
            lx: spec.nx as f64 * hx,
            ly: spec.ny as f64 * hy,
        })
    }

    /// Complex frequency `xi = kx + i ky` for mode `(i, j)`.
    fn xi(&self, i: usize, j: usize) -> Complex64 {
        let kx = 2.0 * std::f64::consts::PI * fftfreq(self.nx, i) / self.lx;
        let ky = 2.0 * std::f64::consts::PI * fftfreq(self.ny, j) / self.ly;
        Complex64::new(kx, ky)
    }

    /// Apply a Fourier multiplier in place. The zero mode is always zeroed.
    fn apply(&self, data: &mut [Complex64], mult: impl Fn(Complex64) -> Complex64) {
        fft2(data, self.nx, self.ny, true);
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = j * self.nx + i;
                if i == 0 && j == 0 {
                    data[k] = Complex64::new(0.0, 0.0);
                } else {
                    data[k] *= mult(self.xi(i, j));
                }
            }
        }
        fft2(data, self.nx, self.ny, false);
        let scale = 1.0 / (self.nx * self.ny) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Row-column 2D FFT, unnormalized.
fn fft2(data: &mut [Complex64], nx: usize, ny: usize, forward: bool) {
    let mut planner = FftPlanner::new();
    let fft_x = if forward {
        planner.plan_fft_forward(nx)
    } else {
        planner.plan_fft_inverse(nx)
    };
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft_x.get_inplace_scratch_len()];
    for row in data.chunks_exact_mut(nx) {
        fft_x.process_with_scratch(row, &mut scratch);
    }
    let fft_y = if forward {
        planner.plan_fft_forward(ny)
    } else {
        planner.plan_fft_inverse(ny)
    };
    scratch.resize(fft_y.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
    let mut col = vec![Complex64::new(0.0, 0.0); ny];
    for i in 0..nx {
        for j in 0..ny {
            col[j] = data[j * nx + i];
        }
        fft_y.process_with_scratch(&mut col, &mut scratch);
        for j in 0..ny {
            data[j * nx + i] = col[j];
        }
    }
}

/// Beurling transform as the periodic multiplier `xi_bar / xi` on the field's
/// own grid (period = node count times spacing per axis).
pub fn beurling_transform(g: &ComplexGrid) -> Result<ComplexGrid, SolverError> {
    let sp = Spectral::for_grid(&g.spec)?;
    let mut out = g.clone();
    sp.apply(&mut out.values, |xi| xi.conj() / xi);
    Ok(out)
}

/// Cauchy transform: the periodic right inverse of `d/dzbar` with zero mean.
pub fn cauchy_transform(g: &ComplexGrid) -> Result<ComplexGrid, SolverError> {
    let sp = Spectral::for_grid(&g.spec)?;
    let mut out = g.clone();
    sp.apply(&mut out.values, |xi| (Complex64::new(0.0, 0.5) * xi).finv());
    Ok(out)
}

/// Spectral `d/dz` on the field's periodic grid.
pub fn spectral_dz(g: &ComplexGrid) -> Result<ComplexGrid, SolverError> {
    let sp = Spectral::for_grid(&g.spec)?;
    let mut out = g.clone();
    sp.apply(&mut out.values, |xi| Complex64::new(0.0, 0.5) * xi.conj());
    Ok(out)
}

/// Spectral `d/dzbar` on the field's periodic grid.
pub fn spectral_dzbar(g: &ComplexGrid) -> Result<ComplexGrid, SolverError> {
    let sp = Spectral::for_grid(&g.spec)?;
    let mut out = g.clone();
    sp.apply(&mut out.values, |xi| Complex64::new(0.0, 0.5) * xi);
    Ok(out)
}

/// Solve the Beltrami equation with coefficient `mu` for the principal
/// solution on a padded periodic box.
///
/// The returned field carries the solution restricted to the coefficient
/// grid. Non-convergence within the iteration budget is reported through
/// `neumann_converged` / `max_residual`, not as an error.
pub fn solve_principal(
    mu: &MuField,
    config: &SolverConfig,
) -> Result<PrincipalSolution, SolverError> {
    config.validate()?;
    if mu.kappa >= config.kappa_max {
        return Err(SolverError::KappaTooLarge {
            kappa: mu.kappa,
            limit: config.kappa_max,
        });
    }
    let spec = mu.grid.spec;
    let h = spec.hx();
    if ((spec.hx() - spec.hy()) / h).abs() > 1e-9 {
        return Err(SolverError::AnisotropicGrid {
            hx: spec.hx(),
            hy: spec.hy(),
        });
    }

    // padded box aligned with the coefficient nodes
    let n = ((config.padding_factor * spec.nx.max(spec.ny) as f64).ceil()) as usize;
    let off_x = (n - spec.nx) / 2;
    let off_y = (n - spec.ny) / 2;
    let box_spec = GridSpec::new(
        spec.x_min - off_x as f64 * h,
        spec.x_min + (n - 1 - off_x) as f64 * h,
        spec.y_min - off_y as f64 * h,
        spec.y_min + (n - 1 - off_y) as f64 * h,
        n,
        n,
    );
    let sp = Spectral::for_grid(&box_spec)?;
    let cell = h * h;

    let mut mu_box = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            mu_box[(j + off_y) * n + (i + off_x)] = mu.grid.value(i, j);
        }
    }

    // Neumann iteration g <- mu (B g + 1)
    let mut g = vec![Complex64::new(0.0, 0.0); n * n];
    let mut change_history = Vec::new();
    let mut iterations_used = 0;
    let mut l2_converged = false;
    for it in 1..=config.max_neumann_iters {
        let mut bg = g.clone();
        sp.apply(&mut bg, |xi| xi.conj() / xi);
        let mut change_sq = 0.0;
        for k in 0..g.len() {
            let next = mu_box[k] * (bg[k] + 1.0);
            change_sq += (next - g[k]).norm_sqr();
            g[k] = next;
        }
        let change = (change_sq * cell).sqrt();
        change_history.push(change);
        iterations_used = it;
        if change < config.residual_tol / 10.0 {
            l2_converged = true;
            break;
        }
    }

    // final derivative pair and the honest pointwise residual
    let mut bg = g.clone();
    sp.apply(&mut bg, |xi| xi.conj() / xi);
    let mut f_pert = g.clone();
    sp.apply(&mut f_pert, |xi| (Complex64::new(0.0, 0.5) * xi).finv());

    let mut values = Vec::with_capacity(spec.len());
    let mut gradients = Vec::with_capacity(spec.len());
    let mut residual = ComplexGrid::zeros(spec);
    let mut max_residual = 0.0f64;
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let k = (j + off_y) * n + (i + off_x);
            let p = spec.node(i, j);
            let fz = 1.0 + bg[k];
            let fzb = g[k];
            values.push([p[0] + f_pert[k].re, p[1] + f_pert[k].im]);
            gradients.push(Mat2::from_wirtinger(fz, fzb));
            let r = fzb - mu.grid.value(i, j) * fz;
            residual.set(i, j, r);
            max_residual = max_residual.max(r.norm());
        }
    }

    Ok(PrincipalSolution {
        f: GridField {
            spec,
            values,
            gradients,
            provenance: Provenance::Analytic,
        },
        dbar_residual: residual,
        iterations_used,
        neumann_converged: l2_converged && max_residual <= config.residual_tol,
        max_residual,
        change_history,
    })
}

/// Pointwise Beltrami-equation residual `df/dzbar - mu df/dz` of a sampled
/// mapping, read through the matrix dictionary `[f_z]_M = [Df]_c`,
/// `[f_zbar]_M I = [Df]_a`.
pub fn dbar_residual(f: &GridField, mu: &MuField) -> Result<ComplexGrid, SolverError> {
    if f.spec != mu.grid.spec {
        return Err(SolverError::GridMismatch {
            reason: "mapping and coefficient live on different grids".into(),
        });
    }
    let mut out = ComplexGrid::zeros(f.spec);
    for j in 0..f.spec.ny {
        for i in 0..f.spec.nx {
            let (fz, fzb) = f.gradient(i, j).wirtinger();
            out.set(i, j, fzb - mu.grid.value(i, j) * fz);
        }
    }
    Ok(out)
}
