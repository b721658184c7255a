//! Closed-form test mappings with exact gradients.
//!
//! The catalog covers the behaviors the rest of the crate needs to exercise:
//! conformal maps (monomials), constant Beltrami coefficient (`z + m zbar`),
//! a branch point (`(z - shift)^2`), radial stretches — including a "pinch"
//! profile whose dilatation spikes on a thin annulus while staying integrable
//! and keeping the conformal gradient part square-integrable — and the
//! piecewise pair whose dilatation fails to be integrable across `x_1 = 0`.

use num_complex::Complex64;

use super::FieldError;
use crate::matalg::Mat2;

/// A planar map with closed-form value and gradient evaluators.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticMap {
    Identity,
    /// `x -> M x + b`.
    Affine { m: Mat2, b: [f64; 2] },
    /// `z -> z + m zbar`, gradient `[[1+Re m, Im m], [Im m, 1-Re m]]`.
    AffineConj { m: Complex64 },
    /// `z -> (z - shift)^power` for power 1 or 2.
    Monomial { shift: Complex64, power: u32 },
    /// `z -> z |z|^(a-1)`; dilatation is the constant `max(a, 1/a)`.
    RadialPower { exponent: f64 },
    /// Radial map with `rho'(r) = 1 - (1 - floor) / (1 + ((r - radius)/width)^2)`:
    /// the radial derivative dips to `floor` on an annulus, so the dilatation
    /// peaks near `1/floor` there and relaxes to 1 elsewhere.
    RadialPinch { floor: f64, radius: f64, width: f64 },
    /// Left-composition with a rotation: `x -> R_theta inner(x)`.
    Rotated { theta: f64, inner: Box<AnalyticMap> },
    /// `z -> (z + m zbar)^2`, a holomorphic square of the affine-conjugate map.
    PostSquare { m: Complex64 },
    /// Piecewise map `(x1, x2 x1)` / `(x1, -x2 x1)` across `x1 = 0`.
    Example1U,
    /// Example-1 partner: the `x1 > 0` branch of `Example1U` rotated by theta.
    Example1V { theta: f64 },
}

impl AnalyticMap {
    pub fn monomial(shift: Complex64, power: u32) -> Self {
        AnalyticMap::Monomial { shift, power }
    }

    pub fn rotation(theta: f64) -> Self {
        AnalyticMap::Affine {
            m: Mat2::rotation(theta),
            b: [0.0, 0.0],
        }
    }

    pub fn rotated(theta: f64, inner: AnalyticMap) -> Self {
        AnalyticMap::Rotated {
            theta,
            inner: Box::new(inner),
        }
    }

    /// The pinch profile used by the energy-trace experiments.
    pub fn radial_pinch_default() -> Self {
        AnalyticMap::RadialPinch {
            floor: 1e-3,
            radius: 0.35,
            width: 0.15,
        }
    }

    pub fn eval(&self, p: [f64; 2]) -> Result<[f64; 2], FieldError> {
        let z = Complex64::new(p[0], p[1]);
        let out = match self {
            AnalyticMap::Identity => p,
            AnalyticMap::Affine { m, b } => {
                let v = m.apply(p);
                [v[0] + b[0], v[1] + b[1]]
            }
            AnalyticMap::AffineConj { m } => {
                let w = z + m * z.conj();
                [w.re, w.im]
            }
            AnalyticMap::Monomial { shift, power } => {
                let w = match power {
                    1 => z - shift,
                    2 => (z - shift) * (z - shift),
                    _ => return Err(FieldError::EvaluationDomain { x: p[0], y: p[1] }),
                };
                [w.re, w.im]
            }
            AnalyticMap::RadialPower { exponent } => {
                let r = p[0].hypot(p[1]);
                if r == 0.0 {
                    [0.0, 0.0]
                } else {
                    let s = r.powf(exponent - 1.0);
                    [s * p[0], s * p[1]]
                }
            }
            AnalyticMap::RadialPinch { .. } => {
                let r = p[0].hypot(p[1]);
                if r == 0.0 {
                    [0.0, 0.0]
                } else {
                    let s = self.pinch_rho(r) / r;
                    [s * p[0], s * p[1]]
                }
            }
            AnalyticMap::Rotated { theta, inner } => {
                Mat2::rotation(*theta).apply(inner.eval(p)?)
            }
            AnalyticMap::PostSquare { m } => {
                let g = z + m * z.conj();
                let w = g * g;
                [w.re, w.im]
            }
            AnalyticMap::Example1U => {
                if p[0] > 0.0 {
                    [p[0], p[1] * p[0]]
                } else {
                    [p[0], -p[1] * p[0]]
                }
            }
            AnalyticMap::Example1V { theta } => {
                if p[0] > 0.0 {
                    let (s, c) = theta.sin_cos();
                    [
                        p[0] * c - p[0] * p[1] * s,
                        p[0] * s + p[0] * p[1] * c,
                    ]
                } else {
                    [p[0], -p[1] * p[0]]
                }
            }
        };
        if out[0].is_finite() && out[1].is_finite() {
            Ok(out)
        } else {
            Err(FieldError::EvaluationDomain { x: p[0], y: p[1] })
        }
    }

    pub fn grad(&self, p: [f64; 2]) -> Result<Mat2, FieldError> {
        let z = Complex64::new(p[0], p[1]);
        let g = match self {
            AnalyticMap::Identity => Mat2::IDENTITY,
            AnalyticMap::Affine { m, .. } => *m,
            AnalyticMap::AffineConj { m } => {
                Mat2::from_wirtinger(Complex64::new(1.0, 0.0), *m)
            }
            AnalyticMap::Monomial { shift, power } => {
                let d = match power {
                    1 => Complex64::new(1.0, 0.0),
                    2 => 2.0 * (z - shift),
                    _ => return Err(FieldError::EvaluationDomain { x: p[0], y: p[1] }),
                };
                Mat2::from_wirtinger(d, Complex64::new(0.0, 0.0))
            }
            AnalyticMap::RadialPower { exponent } => {
                let r = p[0].hypot(p[1]);
                if r == 0.0 {
                    if *exponent >= 1.0 {
                        if (*exponent - 1.0).abs() < 1e-14 {
                            Mat2::IDENTITY
                        } else {
                            Mat2::ZERO
                        }
                    } else {
                        // gradient blows up at the origin
                        return Err(FieldError::EvaluationDomain { x: p[0], y: p[1] });
                    }
                } else {
                    let tangential = r.powf(exponent - 1.0);
                    let radial = exponent * tangential;
                    radial_gradient(p, r, radial, tangential)
                }
            }
            AnalyticMap::RadialPinch { floor, .. } => {
                let r = p[0].hypot(p[1]);
                if r < 1e-12 {
                    // rho(r) ~ rho'(0) r near the origin, so the map is conformal there
                    let s = 1.0 - (1.0 - floor) * self.pinch_lorentz(0.0);
                    Mat2::IDENTITY.scale(s)
                } else {
                    let tangential = self.pinch_rho(r) / r;
                    let radial = self.pinch_rho_prime(r);
                    radial_gradient(p, r, radial, tangential)
                }
            }
            AnalyticMap::Rotated { theta, inner } => {
                Mat2::rotation(*theta).mul(&inner.grad(p)?)
            }
            AnalyticMap::PostSquare { m } => {
                let g = z + m * z.conj();
                Mat2::from_wirtinger(2.0 * g, 2.0 * g * m)
            }
            AnalyticMap::Example1U => {
                if p[0] > 0.0 {
                    Mat2::new(1.0, 0.0, p[1], p[0])
                } else {
                    Mat2::new(1.0, 0.0, -p[1], -p[0])
                }
            }
            AnalyticMap::Example1V { theta } => {
                if p[0] > 0.0 {
                    Mat2::rotation(*theta).mul(&Mat2::new(1.0, 0.0, p[1], p[0]))
                } else {
                    Mat2::new(1.0, 0.0, -p[1], -p[0])
                }
            }
        };
        Ok(g)
    }

    fn pinch_params(&self) -> (f64, f64, f64) {
        match self {
            AnalyticMap::RadialPinch {
                floor,
                radius,
                width,
            } => (*floor, *radius, *width),
            _ => unreachable!("pinch helpers are only called on RadialPinch"),
        }
    }

    fn pinch_lorentz(&self, r: f64) -> f64 {
        let (_, r0, s) = self.pinch_params();
        let x = (r - r0) / s;
        1.0 / (1.0 + x * x)
    }

    fn pinch_rho(&self, r: f64) -> f64 {
        let (d0, r0, s) = self.pinch_params();
        r - (1.0 - d0) * s * (((r - r0) / s).atan() + (r0 / s).atan())
    }

    fn pinch_rho_prime(&self, r: f64) -> f64 {
        let (d0, _, _) = self.pinch_params();
        1.0 - (1.0 - d0) * self.pinch_lorentz(r)
    }

    /// Parse a catalog identifier as used by the CLI, e.g. `z`, `z^2`,
    /// `(z-1)^2`, `affine:0.2`, `diag:2,3`, `rot:0.7`, `radial-power:0.6`,
    /// `radial-pinch`, `square-affine:0.2`, `example1-u`, `example1-v:1.5708`,
    /// or `rot:0.7:<inner>` for a rotated catalog map.
    pub fn from_cli_id(id: &str) -> Result<AnalyticMap, String> {
        let nums = |s: &str| -> Result<Vec<f64>, String> {
            s.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}")))
                .collect()
        };
        if let Some(rest) = id.strip_prefix("rot:") {
            return match rest.split_once(':') {
                Some((angle, inner)) => {
                    let theta = nums(angle)?[0];
                    Ok(AnalyticMap::rotated(theta, AnalyticMap::from_cli_id(inner)?))
                }
                None => Ok(AnalyticMap::rotation(nums(rest)?[0])),
            };
        }
        match id {
            "identity" => return Ok(AnalyticMap::Identity),
            "z" => return Ok(AnalyticMap::monomial(Complex64::new(0.0, 0.0), 1)),
            "z^2" => return Ok(AnalyticMap::monomial(Complex64::new(0.0, 0.0), 2)),
            "(z-1)^2" => return Ok(AnalyticMap::monomial(Complex64::new(1.0, 0.0), 2)),
            "radial-pinch" => return Ok(AnalyticMap::radial_pinch_default()),
            "example1-u" => return Ok(AnalyticMap::Example1U),
            _ => {}
        }
        if let Some(rest) = id.strip_prefix("affine:") {
            let v = nums(rest)?;
            let m = Complex64::new(v[0], *v.get(1).unwrap_or(&0.0));
            return Ok(AnalyticMap::AffineConj { m });
        }
        if let Some(rest) = id.strip_prefix("square-affine:") {
            let v = nums(rest)?;
            let m = Complex64::new(v[0], *v.get(1).unwrap_or(&0.0));
            return Ok(AnalyticMap::PostSquare { m });
        }
        if let Some(rest) = id.strip_prefix("diag:") {
            let v = nums(rest)?;
            if v.len() != 2 {
                return Err("diag needs two entries".into());
            }
            return Ok(AnalyticMap::Affine {
                m: Mat2::diagonal(v[0], v[1]),
                b: [0.0, 0.0],
            });
        }
        if let Some(rest) = id.strip_prefix("radial-power:") {
            return Ok(AnalyticMap::RadialPower { exponent: nums(rest)?[0] });
        }
        if let Some(rest) = id.strip_prefix("radial-pinch:") {
            let v = nums(rest)?;
            if v.len() != 3 {
                return Err("radial-pinch:FLOOR,RADIUS,WIDTH".into());
            }
            return Ok(AnalyticMap::RadialPinch {
                floor: v[0],
                radius: v[1],
                width: v[2],
            });
        }
        if let Some(rest) = id.strip_prefix("example1-v:") {
            return Ok(AnalyticMap::Example1V { theta: nums(rest)?[0] });
        }
        Err(format!("unknown catalog map {id:?}"))
    }
}

fn radial_gradient(p: [f64; 2], r: f64, radial: f64, tangential: f64) -> Mat2 {
    // Df = tangential Id + (radial - tangential) (x x^T)/r^2
    let d = (radial - tangential) / (r * r);
    Mat2::new(
        tangential + d * p[0] * p[0],
        d * p[0] * p[1],
        d * p[0] * p[1],
        tangential + d * p[1] * p[1],
    )
}

/// The piecewise pair of the sharpness counterexample.
pub fn example1_pair(theta: f64) -> Result<(AnalyticMap, AnalyticMap), FieldError> {
    if !theta.is_finite() || theta <= 0.0 || theta >= 2.0 * std::f64::consts::PI {
        return Err(FieldError::InvalidSpec {
            reason: format!("example1 rotation angle {theta} outside (0, 2pi)"),
        });
    }
    Ok((AnalyticMap::Example1U, AnalyticMap::Example1V { theta }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matalg::beltrami_of;

    #[test]
    fn example1_gradients_match_piecewise_forms() {
        let theta = std::f64::consts::FRAC_PI_2;
        let (u, v) = example1_pair(theta).unwrap();
        // x1 > 0: grad v = R_theta grad u
        let gu = u.grad([0.5, 0.0]).unwrap();
        let gv = v.grad([0.5, 0.0]).unwrap();
        assert!(gu.max_abs_diff(&Mat2::new(1.0, 0.0, 0.0, 0.5)) < 1e-15);
        assert!(gv.max_abs_diff(&Mat2::new(0.0, -0.5, 1.0, 0.0)) < 1e-15);
        // x1 < 0: both gradients equal the reflected branch
        let g = Mat2::new(1.0, 0.0, -0.3, 0.5);
        assert!(u.grad([-0.5, 0.3]).unwrap().max_abs_diff(&g) < 1e-15);
        assert!(v.grad([-0.5, 0.3]).unwrap().max_abs_diff(&g) < 1e-15);
    }

    #[test]
    fn example1_symmetric_factors_agree_off_seam() {
        let (u, v) = example1_pair(1.2).unwrap();
        for &p in &[[0.4, -0.7], [0.9, 0.2], [-0.3, 0.5], [-0.8, -0.6]] {
            let mu_u = beltrami_of(&u.grad(p).unwrap()).unwrap();
            let mu_v = beltrami_of(&v.grad(p).unwrap()).unwrap();
            assert!(mu_u.sub(&mu_v).modulus() < 1e-15);
        }
    }

    #[test]
    fn example1_pair_rejects_bad_theta() {
        assert!(example1_pair(0.0).is_err());
        assert!(example1_pair(7.0).is_err());
    }

    #[test]
    fn affine_conj_has_constant_mu() {
        let m = Complex64::new(0.2, -0.1);
        let map = AnalyticMap::AffineConj { m };
        let g = map.grad([0.3, 0.4]).unwrap();
        let mu = beltrami_of(&g).unwrap().to_complex();
        assert!((mu - m).norm() < 1e-15);
    }

    #[test]
    fn post_square_keeps_the_affine_coefficient() {
        let m = Complex64::new(0.2, 0.05);
        let map = AnalyticMap::PostSquare { m };
        for &p in &[[0.3, 0.1], [-0.2, 0.4]] {
            let mu = beltrami_of(&map.grad(p).unwrap()).unwrap().to_complex();
            assert!((mu - m).norm() < 1e-14);
        }
    }

    #[test]
    fn pinch_gradient_matches_finite_differences() {
        let map = AnalyticMap::radial_pinch_default();
        let h = 1e-6;
        for &p in &[[0.3, 0.1], [0.25, 0.25], [0.05, -0.02], [0.45, 0.3]] {
            let g = map.grad(p).unwrap();
            let fd = |k: usize, axis: usize| {
                let mut pp = p;
                let mut pm = p;
                pp[axis] += h;
                pm[axis] -= h;
                (map.eval(pp).unwrap()[k] - map.eval(pm).unwrap()[k]) / (2.0 * h)
            };
            let gfd = Mat2::new(fd(0, 0), fd(0, 1), fd(1, 0), fd(1, 1));
            assert!(g.max_abs_diff(&gfd) < 1e-6, "at {p:?}");
        }
    }

    #[test]
    fn pinch_dilatation_spikes_on_the_annulus() {
        let map = AnalyticMap::radial_pinch_default();
        let k_on = crate::matalg::dilatation_quotient(&map.grad([0.35, 0.0]).unwrap()).unwrap();
        let k_off = crate::matalg::dilatation_quotient(&map.grad([0.05, 0.0]).unwrap()).unwrap();
        assert!(k_on > 250.0, "on-annulus dilatation {k_on}");
        assert!(k_off < 2.0, "off-annulus dilatation {k_off}");
    }

    #[test]
    fn cli_ids_round_trip() {
        for id in [
            "identity",
            "z",
            "z^2",
            "(z-1)^2",
            "affine:0.2",
            "square-affine:0.2,0.05",
            "diag:2,3",
            "rot:0.7",
            "rot:0.7:radial-pinch",
            "radial-power:0.6",
            "radial-pinch",
            "example1-u",
            "example1-v:1.5708",
        ] {
            assert!(AnalyticMap::from_cli_id(id).is_ok(), "{id}");
        }
        assert!(AnalyticMap::from_cli_id("nope").is_err());
    }
}
