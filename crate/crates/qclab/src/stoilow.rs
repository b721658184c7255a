//! The factorization pipeline for a pair `u, v` with matching Beltrami
//! coefficients and integrable dilatation: truncate the coefficient at a
//! falling schedule of levels, solve for the principal homeomorphism `w` of
//! each truncated coefficient, invert it numerically, form the compositions
//! `phi_u = u o h` and `phi_v = v o h` (which become conformal as the
//! truncation level drops), and recover the meromorphic ratio
//! `psi = phi_v' / phi_u'` that links the two gradients pointwise:
//! `Dv(z) = P(psi(w(z))) Du(z)`.
//!
//! Energy accounting per truncation level uses the exact product split
//! `[Dphi]_a = (mu_Du - mu_Dw) [Du]_c I [Dh]_c` (and its conformal twin),
//! evaluated on the coefficient grid with the Jacobian of `w` as the change
//! of variables. This keeps the trace meaningful where the inverse map is
//! numerically hostile; the composed fields themselves are still built and
//! checked through the inversion path.
//!
//! Also here: the least-squares rotation fit behind the rigidity verdict
//! `Dv = R Du`.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::beltrami::{solve_principal, truncate_mu, MuField, SolverConfig, SolverError};
use crate::fields::{ComplexGrid, FieldError, GridField, GridSpec, Provenance};
use crate::matalg::{beltrami_of, polar, ConformalMat, Mat2};

#[derive(Debug, Error)]
pub enum StoilowError {
    #[error("Beltrami coefficients differ by {max_defect:.3e} (tolerance {tol:.1e}); worst samples {worst:?}")]
    CoefficientMismatch {
        max_defect: f64,
        tol: f64,
        worst: Vec<(usize, usize, f64)>,
    },
    #[error("symmetric polar factors differ by {max_defect:.3e} (tolerance {tol:.1e}); worst samples {worst:?}")]
    PreconditionViolated {
        max_defect: f64,
        tol: f64,
        worst: Vec<(usize, usize, f64)>,
    },
    #[error("degenerate input: {reason}")]
    DegenerateInput { reason: String },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("energy trace has {converged} converged levels, need at least {need}")]
    InsufficientTrace { converged: usize, need: usize },
    #[error("no truncation level produced a converged principal solution")]
    NoConvergedSolve,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Matalg(#[from] crate::matalg::MatalgError),
}

/// Controls for [`decompose_pair`].
#[derive(Debug, Clone, Serialize)]
pub struct DecomposeConfig {
    pub solver: SolverConfig,
    /// Descending truncation levels; the default is `0.4 * 2^-k`, `k = 0..6`.
    pub eps_schedule: Vec<f64>,
    /// Fraction of nodes trimmed from each side for the comparison subgrid.
    pub comparison_margin: f64,
    /// `|phi_u'| < pole_factor * h` flags a pole sample.
    pub pole_factor: f64,
    /// Gate on `max |mu_Du - mu_Dv|` before anything is solved.
    pub mu_match_tol: f64,
    /// Centered fraction of the domain used for the energy integrals.
    pub energy_region: f64,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig {
            solver: SolverConfig {
                kappa_max: 0.9995,
                max_neumann_iters: 6000,
                residual_tol: 2e-5,
                ..SolverConfig::default()
            },
            eps_schedule: (0..6).map(|k| 0.4 * 0.5f64.powi(k)).collect(),
            comparison_margin: 0.125,
            pole_factor: 10.0,
            mu_match_tol: 1e-6,
            energy_region: 0.8,
        }
    }
}

/// One truncation level of the energy trace.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyEntry {
    pub epsilon: f64,
    /// `int |det [Dphi_u^eps]_a|` over the energy region, in `w`-coordinates.
    pub anticonformal_energy: f64,
    /// `int det [Dphi_u^eps]_c` over the energy region.
    pub conformal_energy: f64,
    /// Samples where the truncation actually rescaled the coefficient.
    pub active_samples: usize,
    pub solver_iterations: usize,
}

/// Energies per truncation level, sorted by decreasing epsilon.
#[derive(Debug, Clone, Default, Serialize)]
pub struct EnergyTrace {
    pub entries: Vec<EnergyEntry>,
}

/// Log-log slope of the anticonformal energy against epsilon.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceSlope {
    pub slope: f64,
    /// Set when some levels never rescaled a sample (energy at the floor),
    /// in which case `slope` covers only the active levels.
    pub at_floor: bool,
}

/// Outcome of the full pipeline at the smallest converged truncation level.
#[derive(Debug, Clone)]
pub struct StoilowResult {
    /// Principal homeomorphism `w` on the input grid.
    pub w: GridField,
    /// Numerical inverse of `w` on the image-side targets grid.
    pub h: GridField,
    /// `u o h` and `v o h` on the targets grid.
    pub phi_u: GridField,
    pub phi_v: GridField,
    /// `phi_v' / phi_u'` in `w`-coordinates.
    pub psi: ComplexGrid,
    /// Targets-grid samples where `|phi_u'|` is below the pole threshold.
    pub pole_flags: Vec<bool>,
    /// Targets-grid samples where inversion or composition failed (outside
    /// the numerically reachable image, or the Newton solve did not settle).
    pub usable: Vec<bool>,
    /// Max Hilbert-Schmidt defect of `Dv - P(psi(w)) Du` over compared samples.
    pub relation_residual: f64,
    /// Compared samples behind `relation_residual`.
    pub compared_samples: usize,
    /// Max of `|phi_u(w(z)) - u(z)|` over compared samples.
    pub composition_defect: f64,
    /// Truncation level the result was built at.
    pub epsilon_used: f64,
}

/// Rotation fit verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RigidityVerdict {
    Rigid,
    NonRigid,
}

/// Best global rotation between two gradient fields and its residuals,
/// relative to the mean gradient size.
#[derive(Debug, Clone, Serialize)]
pub struct RigidityReport {
    pub best_rotation: Mat2,
    pub angle: f64,
    pub mean_residual: f64,
    pub max_residual: f64,
    pub verdict: RigidityVerdict,
}

/// Mean relative residual at or below this is reported rigid.
pub const RIGID_TOL: f64 = 1e-3;

/// Per-target outcome of [`invert_map`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InversionFlag {
    Ok,
    TargetOutsideImage,
    NewtonDiverged,
}

/// Inverse mapping on a targets grid with per-sample outcomes.
#[derive(Debug, Clone)]
pub struct InverseMap {
    pub field: GridField,
    pub flags: Vec<InversionFlag>,
}

impl InverseMap {
    pub fn ok_fraction(&self) -> f64 {
        let ok = self.flags.iter().filter(|f| **f == InversionFlag::Ok).count();
        ok as f64 / self.flags.len().max(1) as f64
    }
}

/// Invert a sampled orientation-preserving map on a grid of target points by
/// damped Newton on the bilinear interpolant, warm-starting each target from
/// its already-solved neighbor.
pub fn invert_map(w: &GridField, targets: &GridSpec) -> Result<InverseMap, StoilowError> {
    targets.validate()?;
    let spec = w.spec;
    let scale = (spec.x_max - spec.x_min).max(spec.y_max - spec.y_min);
    let tol = 1e-11 * scale;
    let n_targets = targets.len();
    let mut values = vec![[f64::NAN, f64::NAN]; n_targets];
    let mut gradients = vec![Mat2::ZERO; n_targets];
    let mut flags = vec![InversionFlag::NewtonDiverged; n_targets];

    // coarse seed table for cold starts
    let stride = (spec.nx.max(spec.ny) / 32).max(1);
    let coarse_seed = |y: [f64; 2]| -> [f64; 2] {
        let mut best = spec.node(0, 0);
        let mut best_d = f64::INFINITY;
        let mut jj = 0;
        while jj < spec.ny {
            let mut ii = 0;
            while ii < spec.nx {
                let v = w.value(ii, jj);
                let d = (v[0] - y[0]).powi(2) + (v[1] - y[1]).powi(2);
                if d < best_d {
                    best_d = d;
                    best = spec.node(ii, jj);
                }
                ii += stride;
            }
            jj += stride;
        }
        best
    };

    let clamp = |p: [f64; 2]| -> [f64; 2] {
        [
            p[0].clamp(spec.x_min, spec.x_max),
            p[1].clamp(spec.y_min, spec.y_max),
        ]
    };
    let on_hull = |p: [f64; 2]| -> bool {
        let m = 1e-9 * scale;
        p[0] <= spec.x_min + m
            || p[0] >= spec.x_max - m
            || p[1] <= spec.y_min + m
            || p[1] >= spec.y_max - m
    };

    for tj in 0..targets.ny {
        for ti in 0..targets.nx {
            let k = targets.idx(ti, tj);
            let y = targets.node(ti, tj);
            let mut p = if ti > 0 && flags[targets.idx(ti - 1, tj)] == InversionFlag::Ok {
                values[targets.idx(ti - 1, tj)]
            } else if tj > 0 && flags[targets.idx(ti, tj - 1)] == InversionFlag::Ok {
                values[targets.idx(ti, tj - 1)]
            } else {
                coarse_seed(y)
            };
            let mut resid = {
                let wv = w.interp_value(p)?;
                (wv[0] - y[0]).hypot(wv[1] - y[1])
            };
            let mut converged = resid <= tol;
            for _ in 0..60 {
                if converged {
                    break;
                }
                let jac = w.interp_jacobian(p)?;
                let det = jac.det();
                if det.abs() < 1e-300 {
                    break;
                }
                let wv = w.interp_value(p)?;
                let r = [wv[0] - y[0], wv[1] - y[1]];
                let step = [
                    (jac.a22 * r[0] - jac.a12 * r[1]) / det,
                    (-jac.a21 * r[0] + jac.a11 * r[1]) / det,
                ];
                let mut lambda = 1.0;
                let mut improved = false;
                for _ in 0..8 {
                    let trial = clamp([p[0] - lambda * step[0], p[1] - lambda * step[1]]);
                    let wt = w.interp_value(trial)?;
                    let rt = (wt[0] - y[0]).hypot(wt[1] - y[1]);
                    if rt < resid {
                        p = trial;
                        resid = rt;
                        improved = true;
                        break;
                    }
                    lambda *= 0.5;
                }
                if !improved {
                    break;
                }
                converged = resid <= tol;
            }
            if converged {
                values[k] = p;
                flags[k] = InversionFlag::Ok;
                let dw = w.interp_gradient(p)?;
                gradients[k] = match dw.inverse_adjugate() {
                    Ok(inv) => inv,
                    Err(_) => {
                        flags[k] = InversionFlag::NewtonDiverged;
                        Mat2::ZERO
                    }
                };
            } else {
                values[k] = p;
                flags[k] = if on_hull(p) {
                    InversionFlag::TargetOutsideImage
                } else {
                    InversionFlag::NewtonDiverged
                };
            }
        }
    }

    Ok(InverseMap {
        field: GridField {
            spec: *targets,
            values,
            gradients,
            provenance: Provenance::Numeric,
        },
        flags,
    })
}

/// Anticonformal defect of a mapping: max interior Hilbert-Schmidt norm of
/// `[Dphi]_a` and the grid integral of its square.
pub fn holomorphy_check(phi: &GridField) -> (f64, f64) {
    let spec = phi.spec;
    let cell = spec.hx() * spec.hy();
    let mut max_dbar = 0.0f64;
    let mut energy = 0.0;
    for j in 1..spec.ny - 1 {
        for i in 1..spec.nx - 1 {
            let hs = phi.gradient(i, j).anticonformal_part().hs_norm();
            max_dbar = max_dbar.max(hs);
            energy += hs * hs * cell;
        }
    }
    (max_dbar, energy)
}

/// Least-squares rotation aligning `Dv` with `R Du` over interior samples.
///
/// Residuals are Hilbert-Schmidt norms of `Dv - R Du` relative to the mean
/// `|Du|`. Errors if the symmetric polar factors of the two fields disagree,
/// which is the hypothesis under which a rigid verdict is meaningful.
pub fn rigidity_fit(u: &GridField, v: &GridField) -> Result<RigidityReport, StoilowError> {
    if u.spec != v.spec {
        return Err(StoilowError::GridMismatch);
    }
    let spec = u.spec;

    // precondition: S(Du) = S(Dv) within tolerance, relative to gradient size
    let mut mean_hs = 0.0;
    let mut count = 0usize;
    for j in 1..spec.ny - 1 {
        for i in 1..spec.nx - 1 {
            mean_hs += u.gradient(i, j).hs_norm();
            count += 1;
        }
    }
    mean_hs /= count.max(1) as f64;
    let s_tol = 1e-6 * mean_hs;
    let mut worst: Vec<(usize, usize, f64)> = Vec::new();
    let mut max_defect = 0.0f64;
    for j in 1..spec.ny - 1 {
        for i in 1..spec.nx - 1 {
            let su = polar(&u.gradient(i, j))?.symmetric;
            let sv = polar(&v.gradient(i, j))?.symmetric;
            let d = su.max_abs_diff(&sv);
            if d > max_defect {
                max_defect = d;
            }
            if d > s_tol {
                worst.push((i, j, d));
                if worst.len() > 4 {
                    let k = worst
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1 .2.total_cmp(&b.1 .2))
                        .map(|(k, _)| k)
                        .unwrap();
                    worst.remove(k);
                }
            }
        }
    }
    if !worst.is_empty() {
        worst.sort_by(|a, b| b.2.total_cmp(&a.2));
        return Err(StoilowError::PreconditionViolated {
            max_defect,
            tol: s_tol,
            worst,
        });
    }

    // Procrustes: the best rotation is the normalized conformal part of
    // sum Dv Du^T
    let mut corr = Mat2::ZERO;
    for j in 1..spec.ny - 1 {
        for i in 1..spec.nx - 1 {
            corr = corr.add(&v.gradient(i, j).mul(&u.gradient(i, j).transpose()));
        }
    }
    let c = corr.conformal_part();
    let angle = c.b.atan2(c.a);
    let best_rotation = Mat2::rotation(angle);

    let mut mean_res = 0.0;
    let mut max_res = 0.0f64;
    for j in 1..spec.ny - 1 {
        for i in 1..spec.nx - 1 {
            let r = v
                .gradient(i, j)
                .sub(&best_rotation.mul(&u.gradient(i, j)))
                .hs_norm();
            mean_res += r;
            max_res = max_res.max(r);
        }
    }
    mean_res /= count.max(1) as f64;
    let mean_residual = mean_res / mean_hs;
    let max_residual = max_res / mean_hs;
    Ok(RigidityReport {
        best_rotation,
        angle,
        mean_residual,
        max_residual,
        verdict: if mean_residual <= RIGID_TOL {
            RigidityVerdict::Rigid
        } else {
            RigidityVerdict::NonRigid
        },
    })
}

/// Least-squares slope of `log(anticonformal energy)` against `log(epsilon)`.
pub fn energy_trace_slope(trace: &EnergyTrace) -> Result<TraceSlope, StoilowError> {
    const FLOOR: f64 = 1e-14;
    let live: Vec<(f64, f64)> = trace
        .entries
        .iter()
        .filter(|e| e.active_samples > 0 && e.anticonformal_energy > FLOOR)
        .map(|e| (e.epsilon.ln(), e.anticonformal_energy.ln()))
        .collect();
    let at_floor = live.len() < trace.entries.len();
    if trace.entries.len() < 3 {
        return Err(StoilowError::InsufficientTrace {
            converged: trace.entries.len(),
            need: 3,
        });
    }
    if live.len() < 2 {
        return Ok(TraceSlope {
            slope: 0.0,
            at_floor: true,
        });
    }
    let n = live.len() as f64;
    let sx: f64 = live.iter().map(|p| p.0).sum();
    let sy: f64 = live.iter().map(|p| p.1).sum();
    let sxx: f64 = live.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = live.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(TraceSlope { slope, at_floor })
}

struct LevelSolve {
    epsilon: f64,
    w: GridField,
    mu_trunc: MuField,
}

/// Run the full pipeline on a pair of sampled mappings.
///
/// Returns the factorization data at the smallest truncation level whose
/// principal solve converged, together with the energy trace over every
/// level that was attempted (the schedule stops at the first failure, so a
/// partial trace is possible).
pub fn decompose_pair(
    u: &GridField,
    v: &GridField,
    config: &DecomposeConfig,
) -> Result<(StoilowResult, EnergyTrace), StoilowError> {
    if u.spec != v.spec {
        return Err(StoilowError::GridMismatch);
    }
    let spec = u.spec;
    if spec.nx < 16 || spec.ny < 16 {
        return Err(StoilowError::DegenerateInput {
            reason: format!("grid {}x{} too coarse for the pipeline", spec.nx, spec.ny),
        });
    }
    let det_u = u.min_interior_det();
    let det_v = v.min_interior_det();
    if det_u <= 0.0 || det_v <= 0.0 {
        return Err(StoilowError::DegenerateInput {
            reason: format!("min interior det: u {det_u:.3e}, v {det_v:.3e}"),
        });
    }

    // hypothesis gate: matching coefficients
    let mut worst: Vec<(usize, usize, f64)> = Vec::new();
    let mut max_defect = 0.0f64;
    for j in 1..spec.ny - 1 {
        for i in 1..spec.nx - 1 {
            let mu_u = beltrami_of(&u.gradient(i, j))?;
            let mu_v = beltrami_of(&v.gradient(i, j))?;
            let d = mu_u.sub(&mu_v).modulus();
            if d > max_defect {
                max_defect = d;
                worst.push((i, j, d));
                if worst.len() > 5 {
                    worst.remove(0);
                }
            }
        }
    }
    if max_defect > config.mu_match_tol {
        worst.reverse();
        return Err(StoilowError::CoefficientMismatch {
            max_defect,
            tol: config.mu_match_tol,
            worst,
        });
    }

    let mu_u = MuField::from_field(u, spec)?;

    // energy region: centered fraction of the domain
    let frac = config.energy_region.clamp(0.1, 1.0);
    let cx = 0.5 * (spec.x_min + spec.x_max);
    let cy = 0.5 * (spec.y_min + spec.y_max);
    let ex = 0.5 * frac * (spec.x_max - spec.x_min);
    let ey = 0.5 * frac * (spec.y_max - spec.y_min);
    let in_energy_region =
        |p: [f64; 2]| (p[0] - cx).abs() <= ex && (p[1] - cy).abs() <= ey;

    let mut trace = EnergyTrace::default();
    let mut last: Option<LevelSolve> = None;
    for &eps in &config.eps_schedule {
        let mu_t = truncate_mu(&mu_u, eps);
        if mu_t.kappa >= config.solver.kappa_max {
            break;
        }
        let sol = match solve_principal(&mu_t, &config.solver) {
            Ok(s) => s,
            Err(SolverError::KappaTooLarge { .. }) => break,
            Err(e) => return Err(e.into()),
        };
        if !sol.neumann_converged {
            break;
        }
        let entry = energies_for_level(u, &mu_u, &mu_t, &sol.f, eps, &in_energy_region);
        trace.entries.push(EnergyEntry {
            solver_iterations: sol.iterations_used,
            ..entry
        });
        last = Some(LevelSolve {
            epsilon: eps,
            w: sol.f,
            mu_trunc: mu_t,
        });
    }
    let level = last.ok_or(StoilowError::NoConvergedSolve)?;

    let result = build_factorization(u, v, level, config)?;
    Ok((result, trace))
}

/// Energies of the composed map at one truncation level, evaluated on the
/// coefficient grid through the exact part-product identities with `det Dw`
/// as the change of variables to `w`-coordinates.
fn energies_for_level(
    u: &GridField,
    mu_u: &MuField,
    mu_t: &MuField,
    w: &GridField,
    epsilon: f64,
    in_region: &impl Fn([f64; 2]) -> bool,
) -> EnergyEntry {
    let spec = u.spec;
    let cell = spec.hx() * spec.hy();
    let mut e_anti = 0.0;
    let mut e_conf = 0.0;
    let mut active = 0usize;
    for j in 1..spec.ny - 1 {
        for i in 1..spec.nx - 1 {
            let mu_raw = mu_u.grid.value(i, j);
            let mu_cap = mu_t.grid.value(i, j);
            if (mu_raw - mu_cap).norm() > 0.0 {
                active += 1;
            }
            if !in_region(spec.node(i, j)) {
                continue;
            }
            let (uz, uzb) = u.gradient(i, j).wirtinger();
            let (wz, wzb) = w.gradient(i, j).wirtinger();
            let jac = wz.norm_sqr() - wzb.norm_sqr();
            if jac <= 0.0 {
                continue;
            }
            // |det [Dphi]_a| dy = |mu_u - mu_w|^2 |u_z|^2 |w_z|^2 / det(Dw) dz
            e_anti += (mu_raw - mu_cap).norm_sqr() * uz.norm_sqr() * wz.norm_sqr() / jac * cell;
            // [Dphi]_c corresponds to (u_z conj(w_z) - u_zbar conj(w_zbar)) / det(Dw)
            let phi_w = (uz * wz.conj() - uzb * wzb.conj()) / jac;
            e_conf += phi_w.norm_sqr() * jac * cell;
        }
    }
    EnergyEntry {
        epsilon,
        anticonformal_energy: e_anti,
        conformal_energy: e_conf,
        active_samples: active,
        solver_iterations: 0,
    }
}

fn build_factorization(
    u: &GridField,
    v: &GridField,
    level: LevelSolve,
    config: &DecomposeConfig,
) -> Result<StoilowResult, StoilowError> {
    let spec = u.spec;
    let w = level.w;
    let _ = &level.mu_trunc;

    // comparison subgrid indices
    let m0x = ((spec.nx as f64 * config.comparison_margin).ceil() as usize).max(1);
    let m0y = ((spec.ny as f64 * config.comparison_margin).ceil() as usize).max(1);
    if spec.nx <= 2 * m0x + 2 || spec.ny <= 2 * m0y + 2 {
        return Err(StoilowError::DegenerateInput {
            reason: "comparison margin leaves no samples".into(),
        });
    }

    // image box of the comparison region, pulled in 3 solver cells
    let mut bx = (f64::INFINITY, f64::NEG_INFINITY);
    let mut by = (f64::INFINITY, f64::NEG_INFINITY);
    for j in m0y..spec.ny - m0y {
        for i in m0x..spec.nx - m0x {
            let p = w.value(i, j);
            bx = (bx.0.min(p[0]), bx.1.max(p[0]));
            by = (by.0.min(p[1]), by.1.max(p[1]));
        }
    }
    let shrink = 3.0 * spec.hx().max(spec.hy());
    let targets = GridSpec::new(
        bx.0 + shrink,
        bx.1 - shrink,
        by.0 + shrink,
        by.1 - shrink,
        spec.nx - 2 * m0x,
        spec.ny - 2 * m0y,
    );
    targets.validate()?;

    let inv = invert_map(&w, &targets)?;
    let h = inv.field;

    // compositions by bilinear interpolation of the input fields at h(y)
    let n_t = targets.len();
    let mut usable = vec![false; n_t];
    let mut phi_u_vals = vec![[0.0; 2]; n_t];
    let mut phi_v_vals = vec![[0.0; 2]; n_t];
    for k in 0..n_t {
        if inv.flags[k] != InversionFlag::Ok {
            continue;
        }
        let p = h.values[k];
        match (u.interp_value(p), v.interp_value(p)) {
            (Ok(a), Ok(b)) => {
                phi_u_vals[k] = a;
                phi_v_vals[k] = b;
                usable[k] = true;
            }
            _ => {}
        }
    }
    let mut phi_u = GridField {
        spec: targets,
        values: phi_u_vals,
        gradients: vec![Mat2::ZERO; n_t],
        provenance: Provenance::Numeric,
    };
    let mut phi_v = GridField {
        spec: targets,
        values: phi_v_vals,
        gradients: vec![Mat2::ZERO; n_t],
        provenance: Provenance::Numeric,
    };
    phi_u = crate::fields::finite_diff_gradients(&phi_u);
    phi_v = crate::fields::finite_diff_gradients(&phi_v);

    // derivative validity needs the FD stencil fully usable
    let stencil_ok = |i: usize, j: usize, usable: &[bool]| -> bool {
        let mut ok = usable[targets.idx(i, j)];
        if i > 0 {
            ok &= usable[targets.idx(i - 1, j)];
        }
        if i + 1 < targets.nx {
            ok &= usable[targets.idx(i + 1, j)];
        }
        if j > 0 {
            ok &= usable[targets.idx(i, j - 1)];
        }
        if j + 1 < targets.ny {
            ok &= usable[targets.idx(i, j + 1)];
        }
        ok
    };

    // psi = phi_v' / phi_u' with pole thresholding
    let pole_threshold = config.pole_factor * targets.hx().max(targets.hy());
    let mut psi = ComplexGrid::zeros(targets);
    let mut pole_flags = vec![false; n_t];
    let mut deriv_ok = vec![false; n_t];
    for j in 0..targets.ny {
        for i in 0..targets.nx {
            let k = targets.idx(i, j);
            if !stencil_ok(i, j, &usable) {
                continue;
            }
            let du = phi_u.gradient(i, j).conformal_part().to_complex();
            let dv = phi_v.gradient(i, j).conformal_part().to_complex();
            if du.norm() < pole_threshold {
                pole_flags[k] = true;
                continue;
            }
            psi.set(i, j, dv / du);
            deriv_ok[k] = true;
        }
    }

    // relation residual on the comparison subgrid, in z-coordinates
    let psi_cell_clean = |p: [f64; 2]| -> Option<Complex64> {
        let gx = (p[0] - targets.x_min) / targets.hx();
        let gy = (p[1] - targets.y_min) / targets.hy();
        if gx < 1.0 || gy < 1.0 || gx > (targets.nx - 2) as f64 || gy > (targets.ny - 2) as f64 {
            return None;
        }
        let i = (gx.floor() as usize).min(targets.nx - 2);
        let j = (gy.floor() as usize).min(targets.ny - 2);
        for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            if !deriv_ok[targets.idx(i + di, j + dj)] {
                return None;
            }
        }
        psi.interp(p).ok()
    };
    let mut relation_residual = 0.0f64;
    let mut composition_defect = 0.0f64;
    let mut compared = 0usize;
    for j in m0y..spec.ny - m0y {
        for i in m0x..spec.nx - m0x {
            let y = w.value(i, j);
            let Some(psi_w) = psi_cell_clean(y) else {
                continue;
            };
            let du = u.gradient(i, j);
            let dv = v.gradient(i, j);
            let r = dv
                .sub(&ConformalMat::from_complex(psi_w).to_mat2().mul(&du))
                .hs_norm();
            relation_residual = relation_residual.max(r);
            compared += 1;
            if let Ok(phi_at_w) = phi_u.interp_value(y) {
                let uz = u.value(i, j);
                composition_defect = composition_defect
                    .max((phi_at_w[0] - uz[0]).hypot(phi_at_w[1] - uz[1]));
            }
        }
    }

    Ok(StoilowResult {
        w,
        h,
        phi_u,
        phi_v,
        psi,
        pole_flags,
        usable,
        relation_residual,
        compared_samples: compared,
        composition_defect,
        epsilon_used: level.epsilon,
    })
}
