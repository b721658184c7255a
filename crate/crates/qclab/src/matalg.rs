//! Closed-form algebra of real 2x2 matrices built around the unique split
//! `A = [A]_c + [A]_a` into a conformal part (rotation-scaling) and an
//! anticonformal part (reflection-scaling).
//!
//! Writing `A = alpha R_theta + beta N_psi` with
//!
//! ```text
//! R_theta = ( cos t  -sin t )      N_psi = ( cos p   sin p )
//!           ( sin t   cos t )              ( sin p  -cos p )
//! ```
//!
//! the module exposes the Beltrami coefficient `mu_A` of a matrix, defined by
//! `[A]_a I = mu_A [A]_c` with `I = diag(1, -1)`, together with the identities
//! that make it useful: determinant additivity `det A = alpha^2 - beta^2`,
//! `det mu_A = beta^2/alpha^2`, the closed-form inverse
//! `A^{-1} = (alpha R_{-t} - beta N_p) / (alpha^2 - beta^2)`, and the
//! equivalence between equal Beltrami coefficients and proportional symmetric
//! polar factors.
//!
//! Everything here is exact arithmetic on value types; the only failure mode
//! is a non-positive determinant where invertibility or orientation is
//! required.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

/// Errors for operations that require an orientation-preserving matrix.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatalgError {
    #[error("matrix determinant {det:.6e} is not positive")]
    NonPositiveDeterminant { det: f64 },
}

/// Real 2x2 matrix, row-major entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

/// `diag(1, -1)`, the reflection that intertwines the two parts.
pub const REFLECTION: Mat2 = Mat2 {
    a11: 1.0,
    a12: 0.0,
    a21: 0.0,
    a22: -1.0,
};

impl Mat2 {
    pub const IDENTITY: Self = Mat2 {
        a11: 1.0,
        a12: 0.0,
        a21: 0.0,
        a22: 1.0,
    };

    pub const ZERO: Self = Mat2 {
        a11: 0.0,
        a12: 0.0,
        a21: 0.0,
        a22: 0.0,
    };

    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2 { a11, a12, a21, a22 }
    }

    /// Rotation by `theta` (counterclockwise).
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    /// Reflection-scaling `N_psi`.
    pub fn anticonformal_reflection(psi: f64) -> Self {
        let (s, c) = psi.sin_cos();
        Mat2::new(c, s, s, -c)
    }

    pub fn diagonal(d1: f64, d2: f64) -> Self {
        Mat2::new(d1, 0.0, 0.0, d2)
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a11, self.a21, self.a12, self.a22)
    }

    /// Hilbert-Schmidt (Frobenius) norm.
    pub fn hs_norm(&self) -> f64 {
        (self.a11 * self.a11 + self.a12 * self.a12 + self.a21 * self.a21 + self.a22 * self.a22)
            .sqrt()
    }

    /// Operator norm, i.e. the largest singular value.
    ///
    /// The singular values of `alpha R_theta + beta N_psi` are `alpha + beta`
    /// and `|alpha - beta|`, and the part amplitudes come straight off the
    /// entries, so this is cancellation-free.
    pub fn op_norm(&self) -> f64 {
        let alpha = self.conformal_part().modulus();
        let anti = self.anticonformal_part();
        let beta = anti.a11.hypot(anti.a21);
        alpha + beta
    }

    pub fn add(&self, b: &Mat2) -> Mat2 {
        Mat2::new(
            self.a11 + b.a11,
            self.a12 + b.a12,
            self.a21 + b.a21,
            self.a22 + b.a22,
        )
    }

    pub fn sub(&self, b: &Mat2) -> Mat2 {
        Mat2::new(
            self.a11 - b.a11,
            self.a12 - b.a12,
            self.a21 - b.a21,
            self.a22 - b.a22,
        )
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(s * self.a11, s * self.a12, s * self.a21, s * self.a22)
    }

    pub fn mul(&self, b: &Mat2) -> Mat2 {
        Mat2::new(
            self.a11 * b.a11 + self.a12 * b.a21,
            self.a11 * b.a12 + self.a12 * b.a22,
            self.a21 * b.a11 + self.a22 * b.a21,
            self.a21 * b.a12 + self.a22 * b.a22,
        )
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a21 * v[0] + self.a22 * v[1],
        ]
    }

    /// Inverse by the adjugate formula; requires `det > 0`.
    pub fn inverse_adjugate(&self) -> Result<Mat2, MatalgError> {
        let d = self.det();
        if d <= 0.0 {
            return Err(MatalgError::NonPositiveDeterminant { det: d });
        }
        Ok(Mat2::new(
            self.a22 / d,
            -self.a12 / d,
            -self.a21 / d,
            self.a11 / d,
        ))
    }

    /// Conformal part `[A]_c`.
    pub fn conformal_part(&self) -> ConformalMat {
        ConformalMat {
            a: 0.5 * (self.a11 + self.a22),
            b: 0.5 * (self.a21 - self.a12),
        }
    }

    /// Anticonformal part `[A]_a`, returned as the full matrix.
    pub fn anticonformal_part(&self) -> Mat2 {
        let p = 0.5 * (self.a11 - self.a22);
        let q = 0.5 * (self.a21 + self.a12);
        Mat2::new(p, q, q, -p)
    }

    /// Complex derivative pair `(f_z, f_zbar)` read from a gradient matrix.
    ///
    /// `[f_z]_M = [A]_c` and `[f_zbar]_M I = [A]_a`, so the anticonformal
    /// entries `(p, q)` give `f_zbar = p + iq` directly.
    pub fn wirtinger(&self) -> (Complex64, Complex64) {
        let fz = self.conformal_part().to_complex();
        let fzb = Complex64::new(
            0.5 * (self.a11 - self.a22),
            0.5 * (self.a21 + self.a12),
        );
        (fz, fzb)
    }

    /// Gradient matrix with prescribed complex derivatives: the inverse of
    /// [`Mat2::wirtinger`].
    pub fn from_wirtinger(fz: Complex64, fzb: Complex64) -> Mat2 {
        // P(fz) + P(fzb) I
        Mat2::new(fz.re + fzb.re, -fz.im + fzb.im, fz.im + fzb.im, fz.re - fzb.re)
    }

    pub fn max_abs_diff(&self, b: &Mat2) -> f64 {
        (self.a11 - b.a11)
            .abs()
            .max((self.a12 - b.a12).abs())
            .max((self.a21 - b.a21).abs())
            .max((self.a22 - b.a22).abs())
    }
}

/// Conformal 2x2 matrix `(a, -b; b, a)`, i.e. the matrix form of `a + ib`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConformalMat {
    pub a: f64,
    pub b: f64,
}

impl ConformalMat {
    pub const ZERO: Self = ConformalMat { a: 0.0, b: 0.0 };
    pub const ONE: Self = ConformalMat { a: 1.0, b: 0.0 };

    pub fn new(a: f64, b: f64) -> Self {
        ConformalMat { a, b }
    }

    pub fn from_complex(z: Complex64) -> Self {
        ConformalMat { a: z.re, b: z.im }
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(self.a, self.b)
    }

    /// The embedding `P(a + ib)` as a full matrix.
    pub fn to_mat2(&self) -> Mat2 {
        Mat2::new(self.a, -self.b, self.b, self.a)
    }

    /// Complex modulus `sqrt(a^2 + b^2)`.
    pub fn modulus(&self) -> f64 {
        self.a.hypot(self.b)
    }

    /// Hilbert-Schmidt norm, `sqrt(2)` times the complex modulus.
    pub fn hs_norm(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.modulus()
    }

    /// `det = a^2 + b^2`, half the squared Hilbert-Schmidt norm.
    pub fn det(&self) -> f64 {
        self.a * self.a + self.b * self.b
    }

    pub fn mul(&self, o: &ConformalMat) -> ConformalMat {
        ConformalMat::from_complex(self.to_complex() * o.to_complex())
    }

    pub fn sub(&self, o: &ConformalMat) -> ConformalMat {
        ConformalMat::new(self.a - o.a, self.b - o.b)
    }
}

/// The split `A = alpha R_theta + beta N_psi` with both parts materialized.
///
/// Angles are reported as `0` with the matching degeneracy flag set when the
/// corresponding amplitude vanishes, so callers never branch on an undefined
/// angle.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConfAntiParts {
    pub conformal: Mat2,
    pub anticonformal: Mat2,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub psi_angle: f64,
    pub conformal_degenerate: bool,
    pub anticonformal_degenerate: bool,
}

/// Polar factors `A = rotation * symmetric` with `symmetric = sqrt(A^T A)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PolarDecomp {
    pub rotation: Mat2,
    pub symmetric: Mat2,
}

fn wrap_angle(t: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut t = t % two_pi;
    if t < 0.0 {
        t += two_pi;
    }
    t
}

/// Split `A` into its conformal and anticonformal parts.
pub fn decompose(a: &Mat2) -> ConfAntiParts {
    let c = a.conformal_part();
    let anti = a.anticonformal_part();
    let alpha = c.modulus();
    let beta = anti.a11.hypot(anti.a21);
    let conformal_degenerate = alpha == 0.0;
    let anticonformal_degenerate = beta == 0.0;
    let theta = if conformal_degenerate {
        0.0
    } else {
        wrap_angle(c.b.atan2(c.a))
    };
    let psi_angle = if anticonformal_degenerate {
        0.0
    } else {
        wrap_angle(anti.a21.atan2(anti.a11))
    };
    ConfAntiParts {
        conformal: c.to_mat2(),
        anticonformal: anti,
        alpha,
        beta,
        theta,
        psi_angle,
        conformal_degenerate,
        anticonformal_degenerate,
    }
}

/// Beltrami coefficient of a matrix: the conformal `mu` with `[A]_a I = mu [A]_c`.
///
/// In complex form this is `f_zbar / f_z` of any map with gradient `A`.
pub fn beltrami_of(a: &Mat2) -> Result<ConformalMat, MatalgError> {
    let d = a.det();
    if d <= 0.0 {
        return Err(MatalgError::NonPositiveDeterminant { det: d });
    }
    let (fz, fzb) = a.wirtinger();
    Ok(ConformalMat::from_complex(fzb / fz))
}

/// Polar decomposition of a `det > 0` matrix via the closed-form 2x2
/// symmetric square root `sqrt(M) = (M + sqrt(det M) Id) / sqrt(tr M + 2 sqrt(det M))`.
pub fn polar(a: &Mat2) -> Result<PolarDecomp, MatalgError> {
    let d = a.det();
    if d <= 0.0 {
        return Err(MatalgError::NonPositiveDeterminant { det: d });
    }
    let m = a.transpose().mul(a);
    let sqrt_det = m.det().max(0.0).sqrt();
    let denom = (m.trace() + 2.0 * sqrt_det).sqrt();
    let symmetric = Mat2::new(
        (m.a11 + sqrt_det) / denom,
        m.a12 / denom,
        m.a21 / denom,
        (m.a22 + sqrt_det) / denom,
    );
    let rotation = a.mul(&symmetric.inverse_adjugate()?);
    Ok(PolarDecomp {
        rotation,
        symmetric,
    })
}

/// Inverse through the part amplitudes:
/// `A^{-1} = (alpha R_{-theta} - beta N_psi) / (alpha^2 - beta^2)`.
pub fn inverse_closed_form(a: &Mat2) -> Result<Mat2, MatalgError> {
    let d = a.det();
    if d <= 0.0 {
        return Err(MatalgError::NonPositiveDeterminant { det: d });
    }
    let parts = decompose(a);
    let denom = parts.alpha * parts.alpha - parts.beta * parts.beta;
    let rot = Mat2::rotation(-parts.theta).scale(parts.alpha / denom);
    let anti = parts.anticonformal.scale(1.0 / denom);
    Ok(rot.sub(&anti))
}

/// Whether `A` and `B` deform the unit disc to similar ellipses, i.e. whether
/// their Beltrami coefficients agree within `tol` (complex modulus).
///
/// Equivalent to the existence of `lambda > 0` with `S(A) = lambda S(B)`.
pub fn similar_ellipse_test(a: &Mat2, b: &Mat2, tol: f64) -> Result<bool, MatalgError> {
    let mu_a = beltrami_of(a)?;
    let mu_b = beltrami_of(b)?;
    Ok(mu_a.sub(&mu_b).modulus() <= tol)
}

/// Dilatation quotient `||A||^2 / det A`, which equals `(alpha + beta)/(alpha - beta)`
/// and `(1 + |mu_A|)/(1 - |mu_A|)`.
pub fn dilatation_quotient(a: &Mat2) -> Result<f64, MatalgError> {
    let d = a.det();
    if d <= 0.0 {
        return Err(MatalgError::NonPositiveDeterminant { det: d });
    }
    let n = a.op_norm();
    Ok(n * n / d)
}

pub mod suite {
    //! Randomized identity suite behind the `algebra-check` command.
    //!
    //! Matrices are rejection-sampled away from the degenerate set
    //! (`det >= 0.1`, entries in `[-2, 2]`) so that round-off is the only
    //! error source and an absolute defect gate is meaningful.

    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Largest defect observed for one identity over the whole sample run.
    #[derive(Debug, Clone, Serialize)]
    pub struct IdentityCheck {
        pub name: &'static str,
        pub max_defect: f64,
    }

    #[derive(Debug, Clone, Serialize)]
    pub struct IdentitySuiteReport {
        pub samples: u64,
        pub seed: u64,
        pub checks: Vec<IdentityCheck>,
        pub max_defect: f64,
    }

    impl IdentitySuiteReport {
        pub fn all_within(&self, tol: f64) -> bool {
            self.max_defect <= tol
        }
    }

    /// Random matrix with `det >= 0.1`, kept away from both degenerate rays
    /// (`beta -> alpha` and `beta -> 0`) so defects stay at round-off scale.
    pub fn sample_positive_det(rng: &mut impl Rng) -> Mat2 {
        loop {
            let m = Mat2::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let parts = decompose(&m);
            if m.det() >= 0.1 && parts.alpha - parts.beta >= 0.05 && parts.beta >= 0.05 {
                return m;
            }
        }
    }

    fn sample_conformal(rng: &mut impl Rng) -> ConformalMat {
        loop {
            let c = ConformalMat::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            if c.modulus() >= 0.3 {
                return c;
            }
        }
    }

    /// Run every section-1/section-2 identity on `samples` random matrices.
    pub fn run_identity_suite(samples: u64, seed: u64) -> IdentitySuiteReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut checks = vec![
            IdentityCheck { name: "det_additivity", max_defect: 0.0 },
            IdentityCheck { name: "recomposition", max_defect: 0.0 },
            IdentityCheck { name: "part_linearity", max_defect: 0.0 },
            IdentityCheck { name: "conformal_left_covariance", max_defect: 0.0 },
            IdentityCheck { name: "conformal_right_covariance", max_defect: 0.0 },
            IdentityCheck { name: "mu_invariance_conformal_scaling", max_defect: 0.0 },
            IdentityCheck { name: "inverse_mu_relation", max_defect: 0.0 },
            IdentityCheck { name: "inverse_mu_modulus", max_defect: 0.0 },
            IdentityCheck { name: "closed_form_inverse", max_defect: 0.0 },
            IdentityCheck { name: "operator_norm_alpha_plus_beta", max_defect: 0.0 },
            IdentityCheck { name: "dilatation_three_ways", max_defect: 0.0 },
            IdentityCheck { name: "similar_ellipse_forward", max_defect: 0.0 },
            IdentityCheck { name: "conformal_det_half_hs", max_defect: 0.0 },
        ];
        let bump = |c: &mut IdentityCheck, d: f64| {
            if d > c.max_defect {
                c.max_defect = d;
            }
        };
        for _ in 0..samples {
            let a = sample_positive_det(&mut rng);
            let b = sample_positive_det(&mut rng);
            let c = sample_conformal(&mut rng);
            let cm = c.to_mat2();
            let parts = decompose(&a);

            // det A = det [A]_c + det [A]_a = alpha^2 - beta^2
            let d0 = (a.det() - (parts.conformal.det() + parts.anticonformal.det())).abs();
            let d0b = (a.det() - (parts.alpha.powi(2) - parts.beta.powi(2))).abs();
            bump(&mut checks[0], d0.max(d0b));

            // [A]_c + [A]_a = A
            bump(&mut checks[1], parts.conformal.add(&parts.anticonformal).max_abs_diff(&a));

            // [A+B]_c = [A]_c + [B]_c and likewise for the anticonformal part
            let ab = a.add(&b);
            let pb = decompose(&b);
            let pab = decompose(&ab);
            let lin = pab
                .conformal
                .max_abs_diff(&parts.conformal.add(&pb.conformal))
                .max(pab.anticonformal.max_abs_diff(&parts.anticonformal.add(&pb.anticonformal)));
            bump(&mut checks[2], lin);

            // [CA]_c = C [A]_c, [CA]_a = C [A]_a
            let ca = cm.mul(&a);
            let pca = decompose(&ca);
            let cov = pca
                .conformal
                .max_abs_diff(&cm.mul(&parts.conformal))
                .max(pca.anticonformal.max_abs_diff(&cm.mul(&parts.anticonformal)));
            bump(&mut checks[3], cov);

            // [AC]_c = [A]_c C, [AC]_a = [A]_a C
            let ac = a.mul(&cm);
            let pac = decompose(&ac);
            let rcov = pac
                .conformal
                .max_abs_diff(&parts.conformal.mul(&cm))
                .max(pac.anticonformal.max_abs_diff(&parts.anticonformal.mul(&cm)));
            bump(&mut checks[4], rcov);

            // mu_{CA} = mu_A
            let mu_a = beltrami_of(&a).unwrap();
            let mu_ca = beltrami_of(&ca).unwrap();
            bump(&mut checks[5], mu_ca.sub(&mu_a).modulus());

            // mu_A [A]_c I = -mu_{A^{-1}} I [A]_c
            let a_inv = a.inverse_adjugate().unwrap();
            let mu_inv = beltrami_of(&a_inv).unwrap();
            let lhs = mu_a.to_mat2().mul(&parts.conformal).mul(&REFLECTION);
            let rhs = mu_inv
                .to_mat2()
                .scale(-1.0)
                .mul(&REFLECTION)
                .mul(&parts.conformal);
            bump(&mut checks[6], lhs.max_abs_diff(&rhs));

            // |mu_{A^{-1}}| = |mu_A|
            bump(&mut checks[7], (mu_inv.modulus() - mu_a.modulus()).abs());

            // closed-form inverse against the adjugate, and A A^{-1} = Id
            let inv_cf = inverse_closed_form(&a).unwrap();
            let d8 = inv_cf
                .max_abs_diff(&a_inv)
                .max(a.mul(&inv_cf).max_abs_diff(&Mat2::IDENTITY));
            bump(&mut checks[8], d8);

            // ||A|| = alpha + beta, against the eigenvalue oracle for A^T A
            let m = a.transpose().mul(&a);
            let t = m.trace();
            let lam = 0.5 * (t + (t * t - 4.0 * m.det()).max(0.0).sqrt());
            let d9 = (a.op_norm() - (parts.alpha + parts.beta))
                .abs()
                .max((a.op_norm() - lam.sqrt()).abs());
            bump(&mut checks[9], d9);

            // ||A||^2/det = (alpha+beta)/(alpha-beta) = (1+|mu|)/(1-|mu|)
            let q = dilatation_quotient(&a).unwrap();
            let q1 = (parts.alpha + parts.beta) / (parts.alpha - parts.beta);
            let q2 = (1.0 + mu_a.modulus()) / (1.0 - mu_a.modulus());
            bump(&mut checks[10], (q - q1).abs().max((q - q2).abs()));

            // B = k R A keeps mu; S(B) = k S(A) comes with it
            let k: f64 = rng.gen_range(0.3..3.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let b_sim = Mat2::rotation(phi).scale(k).mul(&a);
            let mu_sim = beltrami_of(&b_sim).unwrap();
            bump(&mut checks[11], mu_sim.sub(&mu_a).modulus());

            // det C = |C|^2_HS / 2 for conformal C
            bump(&mut checks[12], (c.det() - 0.5 * c.hs_norm().powi(2)).abs());
        }
        let max_defect = checks
            .iter()
            .map(|c| c.max_defect)
            .fold(0.0f64, f64::max);
        IdentitySuiteReport {
            samples,
            seed,
            checks,
            max_defect,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-9;

    #[test]
    fn decompose_identity_is_purely_conformal() {
        let p = decompose(&Mat2::IDENTITY);
        assert!(p.conformal.max_abs_diff(&Mat2::IDENTITY) == 0.0);
        assert!(p.anticonformal.max_abs_diff(&Mat2::ZERO) == 0.0);
        assert_eq!(p.alpha, 1.0);
        assert_eq!(p.beta, 0.0);
        assert!(p.anticonformal_degenerate);
        assert_eq!(p.psi_angle, 0.0);
    }

    #[test]
    fn decompose_diag_half() {
        // diag(1, 0.5) splits into 0.75 Id + diag(0.25, -0.25)
        let p = decompose(&Mat2::diagonal(1.0, 0.5));
        assert!(p.conformal.max_abs_diff(&Mat2::IDENTITY.scale(0.75)) < TOL);
        assert!(p
            .anticonformal
            .max_abs_diff(&Mat2::diagonal(0.25, -0.25))
            < TOL);
    }

    #[test]
    fn decompose_reflection_is_purely_anticonformal() {
        let p = decompose(&REFLECTION);
        assert!(p.conformal.max_abs_diff(&Mat2::ZERO) == 0.0);
        assert!(p.anticonformal.max_abs_diff(&REFLECTION) == 0.0);
        assert_eq!(p.beta, 1.0);
        assert!(p.conformal_degenerate);
    }

    #[test]
    fn beltrami_of_conformal_is_zero() {
        let c = ConformalMat::new(1.3, -0.4).to_mat2();
        let mu = beltrami_of(&c).unwrap();
        assert!(mu.modulus() < TOL);
    }

    #[test]
    fn beltrami_of_diag_third() {
        // f(z) = z + k zbar with k = 1/2 has gradient diag(1+k, 1-k) ~ diag(1, 1/3) scaled
        let mu = beltrami_of(&Mat2::diagonal(1.0, 1.0 / 3.0)).unwrap();
        assert!((mu.a - 0.5).abs() < TOL);
        assert!(mu.b.abs() < TOL);
    }

    #[test]
    fn beltrami_det_is_beta_sq_over_alpha_sq() {
        // A = 2 R_0 + 1 N_0
        let a = Mat2::rotation(0.0)
            .scale(2.0)
            .add(&Mat2::anticonformal_reflection(0.0));
        let mu = beltrami_of(&a).unwrap();
        assert!((mu.det() - 0.25).abs() < TOL);
    }

    #[test]
    fn beltrami_rejects_non_positive_det() {
        assert!(matches!(
            beltrami_of(&REFLECTION),
            Err(MatalgError::NonPositiveDeterminant { .. })
        ));
    }

    #[test]
    fn polar_of_rotation() {
        let r = Mat2::rotation(0.9);
        let p = polar(&r).unwrap();
        assert!(p.symmetric.max_abs_diff(&Mat2::IDENTITY) < TOL);
        assert!(p.rotation.max_abs_diff(&r) < TOL);
    }

    #[test]
    fn polar_of_spd_is_trivial() {
        let a = Mat2::diagonal(2.0, 3.0);
        let p = polar(&a).unwrap();
        assert!(p.symmetric.max_abs_diff(&a) < TOL);
        assert!(p.rotation.max_abs_diff(&Mat2::IDENTITY) < TOL);
    }

    #[test]
    fn polar_recovers_constructed_factors() {
        let a = Mat2::rotation(std::f64::consts::FRAC_PI_4).mul(&Mat2::diagonal(2.0, 1.0));
        let p = polar(&a).unwrap();
        assert!(p.symmetric.max_abs_diff(&Mat2::diagonal(2.0, 1.0)) < TOL);
        assert!(p
            .rotation
            .max_abs_diff(&Mat2::rotation(std::f64::consts::FRAC_PI_4))
            < TOL);
        assert!(p.rotation.mul(&p.symmetric).max_abs_diff(&a) < TOL);
    }

    #[test]
    fn closed_form_inverse_of_diag() {
        // 2 R_0 + 1 N_0 = diag(3, 1)
        let a = Mat2::diagonal(3.0, 1.0);
        let inv = inverse_closed_form(&a).unwrap();
        assert!(inv.max_abs_diff(&Mat2::diagonal(1.0 / 3.0, 1.0)) < TOL);
    }

    #[test]
    fn similar_ellipse_conformal_multiple() {
        let a = Mat2::new(1.0, 0.2, -0.1, 0.8);
        let b = Mat2::rotation(std::f64::consts::FRAC_PI_3).scale(3.0).mul(&a);
        assert!(similar_ellipse_test(&a, &b, 1e-9).unwrap());
        assert!(similar_ellipse_test(&a, &a, 1e-12).unwrap());
    }

    #[test]
    fn similar_ellipse_detects_sign() {
        // mu = +1/2 against mu = -1/2
        let a = Mat2::diagonal(1.0, 1.0 / 3.0);
        let b = Mat2::diagonal(1.0 / 3.0, 1.0);
        assert!(!similar_ellipse_test(&a, &b, 1e-6).unwrap());
    }

    #[test]
    fn dilatation_quotient_cases() {
        assert!((dilatation_quotient(&Mat2::rotation(1.2)).unwrap() - 1.0).abs() < TOL);
        let a = Mat2::rotation(0.0)
            .scale(2.0)
            .add(&Mat2::anticonformal_reflection(0.0));
        assert!((dilatation_quotient(&a).unwrap() - 3.0).abs() < TOL);
        assert!((dilatation_quotient(&Mat2::diagonal(1.0, 1.0 / 3.0)).unwrap() - 3.0).abs() < TOL);
        // diag(1, k) has quotient 1/k, approaching 1 as k -> 1
        let near_one = dilatation_quotient(&Mat2::diagonal(1.0, 0.999)).unwrap();
        assert!((near_one - 1.0 / 0.999).abs() < TOL);
        assert!((near_one - 1.0).abs() < 2e-3);
    }

    #[test]
    fn angles_zero_with_flags_when_degenerate() {
        let p = decompose(&Mat2::rotation(1.0));
        assert!(p.anticonformal_degenerate);
        assert_eq!(p.psi_angle, 0.0);
        assert!((p.theta - 1.0).abs() < TOL);
    }

    #[test]
    fn identity_suite_is_tight_and_deterministic() {
        let r1 = suite::run_identity_suite(2000, 7);
        let r2 = suite::run_identity_suite(2000, 7);
        assert!(r1.all_within(1e-9), "max defect {}", r1.max_defect);
        assert_eq!(r1.max_defect, r2.max_defect);
    }
}
