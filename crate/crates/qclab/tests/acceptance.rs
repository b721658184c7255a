//! End-to-end acceptance checks, one per shipped guarantee. Each test prints
//! a single PASS/FAIL line (visible with `cargo test --test acceptance --
//! --nocapture`) and asserts every clause at its stated tolerance.

use std::time::Instant;

use num_complex::Complex64;
use qclab::beltrami::{dbar_residual, solve_principal, MuField, SolverConfig};
use qclab::fields::catalog::{example1_pair, AnalyticMap};
use qclab::fields::{area_check, integrability_scan_map, sample, GridSpec};
use qclab::matalg::{beltrami_of, suite::run_identity_suite};
use qclab::stoilow::{
    decompose_pair, energy_trace_slope, rigidity_fit, DecomposeConfig, RigidityVerdict,
};

fn verdict(n: usize, pass: bool, detail: &str) -> bool {
    println!(
        "ACCEPTANCE {n}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

#[test]
fn criterion_1_algebra_identities() {
    let t0 = Instant::now();
    let report = run_identity_suite(100_000, 7);
    let elapsed = t0.elapsed().as_secs_f64();
    let pass = report.max_defect <= 1e-9 && elapsed <= 5.0;
    let detail = format!(
        "1e5 samples, max identity defect {:.3e} (gate 1e-9), {:.2}s (budget 5s)",
        report.max_defect, elapsed
    );
    assert!(verdict(1, pass, &detail), "{detail}");
}

#[test]
fn criterion_2_beltrami_solver() {
    let t0 = Instant::now();

    // zero coefficient: identity, bit for bit
    let spec0 = GridSpec::square(-1.0, 1.0, 129);
    let mu0 = MuField::from_fn(spec0, spec0, |_| Complex64::new(0.0, 0.0)).unwrap();
    let sol0 = solve_principal(&mu0, &SolverConfig::default()).unwrap();
    let mut identity_exact = sol0.max_residual == 0.0;
    for j in 0..spec0.ny {
        for i in 0..spec0.nx {
            let p = spec0.node(i, j);
            let v = sol0.f.value(i, j);
            identity_exact &= v[0] == p[0] && v[1] == p[1];
        }
    }

    // constant-coefficient affine map: residual identically zero (dyadic
    // parameters keep the gradient entries exact)
    let m = Complex64::new(0.25, 0.125);
    let spec_a = GridSpec::square(-1.0, 1.0, 65);
    let affine = sample(&AnalyticMap::AffineConj { m }, &spec_a).unwrap();
    let mu_a = MuField::from_fn(spec_a, spec_a, |_| m).unwrap();
    let affine_zero = dbar_residual(&affine, &mu_a).unwrap().max_modulus() == 0.0;

    // kappa = 0.5 bump on 256^2: residual <= 1e-6 within 30 iterations,
    // coefficient recovered from the solution gradients to 1e-3
    let spec = GridSpec::square(-1.0, 1.0, 256);
    let mu = MuField::from_fn(spec, GridSpec::square(-0.6, 0.6, 2), |p| {
        let r2 = (p[0] * p[0] + p[1] * p[1]) / 0.25;
        if r2 < 1.0 {
            Complex64::new(0.5 * (1.0 - 1.0 / (1.0 - r2)).exp(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
    .unwrap();
    let sol = solve_principal(&mu, &SolverConfig::default()).unwrap();
    let solver_ok =
        sol.neumann_converged && sol.iterations_used <= 30 && sol.max_residual <= 1e-6;
    let mut recovery = 0.0f64;
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let p = spec.node(i, j);
            if p[0] * p[0] + p[1] * p[1] < 0.35 * 0.35 {
                let rec = beltrami_of(&sol.f.gradient(i, j)).unwrap().to_complex();
                recovery = recovery.max((rec - mu.grid.value(i, j)).norm());
            }
        }
    }
    let recovery_ok = recovery <= 1e-3;

    let elapsed = t0.elapsed().as_secs_f64();
    let pass = identity_exact && affine_zero && solver_ok && recovery_ok && elapsed <= 30.0;
    let detail = format!(
        "mu=0 exact: {identity_exact}; affine residual 0: {affine_zero}; kappa=0.5 on 256^2: \
         {} iters, residual {:.2e} (gate 1e-6); recovery {:.2e} (gate 1e-3); {:.1}s (budget 30s)",
        sol.iterations_used, sol.max_residual, recovery, elapsed
    );
    assert!(verdict(2, pass, &detail), "{detail}");
}

#[test]
fn criterion_3_main_theorem_pipeline() {
    let t0 = Instant::now();
    let run = |n: usize| {
        let spec = GridSpec::square(-0.75, 0.75, n);
        let u = sample(&AnalyticMap::monomial(Complex64::new(0.0, 0.0), 1), &spec).unwrap();
        let v = sample(&AnalyticMap::monomial(Complex64::new(1.0, 0.0), 2), &spec).unwrap();
        decompose_pair(&u, &v, &DecomposeConfig::default()).unwrap()
    };
    let (res256, _) = run(256);
    let (res512, _) = run(512);
    let ratio = res256.relation_residual / res512.relation_residual;

    // pole samples must sit within 3 target cells of w(1) = (1, 0)
    let t = res256.psi.spec;
    let cell = 3.0 * t.hx().max(t.hy());
    let mut poles_confined = true;
    let mut pole_count = 0usize;
    for j in 0..t.ny {
        for i in 0..t.nx {
            if res256.pole_flags[t.idx(i, j)] {
                pole_count += 1;
                let p = t.node(i, j);
                poles_confined &= (p[0] - 1.0).hypot(p[1]) <= cell;
            }
        }
    }

    let elapsed = t0.elapsed().as_secs_f64();
    let pass = res256.relation_residual < 5e-3
        && ratio >= 1.7
        && poles_confined
        && elapsed <= 120.0;
    let detail = format!(
        "relation residual {:.3e} at 256^2 (gate 5e-3), refinement ratio {:.2} (gate 1.7), \
         {pole_count} pole samples all within 3 cells of w(1): {poles_confined}; {:.1}s (budget 120s)",
        res256.relation_residual, ratio, elapsed
    );
    assert!(verdict(3, pass, &detail), "{detail}");
}

#[test]
fn criterion_4_rigidity_recovers_constructed_rotations() {
    let cases: Vec<(AnalyticMap, GridSpec, f64)> = vec![
        (
            AnalyticMap::AffineConj { m: Complex64::new(0.15, 0.0) },
            GridSpec::square(-1.0, 1.0, 96),
            0.3,
        ),
        (
            AnalyticMap::AffineConj { m: Complex64::new(0.2, 0.1) },
            GridSpec::square(-1.0, 1.0, 96),
            std::f64::consts::PI / 5.0,
        ),
        (
            AnalyticMap::RadialPower { exponent: 0.6 },
            GridSpec::square(0.25, 1.25, 96),
            1.9,
        ),
        (
            AnalyticMap::radial_pinch_default(),
            GridSpec::square(-0.5, 0.5, 96),
            2.8,
        ),
        (
            AnalyticMap::monomial(Complex64::new(1.5, 0.0), 2),
            GridSpec::square(-0.75, 0.75, 96),
            0.7,
        ),
    ];
    let mut worst_res = 0.0f64;
    let mut worst_angle = 0.0f64;
    let mut all_rigid = true;
    for (base, spec, theta) in cases {
        let u = sample(&base, &spec).unwrap();
        let v = sample(&AnalyticMap::rotated(theta, base.clone()), &spec).unwrap();
        let rep = rigidity_fit(&u, &v).unwrap();
        all_rigid &= rep.verdict == RigidityVerdict::Rigid;
        worst_res = worst_res.max(rep.mean_residual);
        worst_angle = worst_angle.max((rep.angle - theta).abs());
    }
    let pass = all_rigid && worst_res < 1e-6 && worst_angle < 1e-6;
    let detail = format!(
        "5 rotated pairs: all rigid {all_rigid}, worst mean residual {worst_res:.2e} (gate 1e-6), \
         worst angle error {worst_angle:.2e} rad (gate 1e-6)"
    );
    assert!(verdict(4, pass, &detail), "{detail}");
}

#[test]
fn criterion_5_counterexample() {
    let t0 = Instant::now();
    let theta = std::f64::consts::FRAC_PI_2;
    let (u, v) = example1_pair(theta).unwrap();
    let spec = GridSpec::cell_centered(-1.0, 1.0, -1.0, 1.0, 256, 256);
    let uf = sample(&u, &spec).unwrap();
    let vf = sample(&v, &spec).unwrap();

    // coefficients agree off the seam (the grid never touches x1 = 0)
    let mut mu_defect = 0.0f64;
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let a = beltrami_of(&uf.gradient(i, j)).unwrap();
            let b = beltrami_of(&vf.gradient(i, j)).unwrap();
            mu_defect = mu_defect.max(a.sub(&b).modulus());
        }
    }
    let mu_ok = mu_defect <= 1e-12;

    // no global rotation
    let rig = rigidity_fit(&uf, &vf).unwrap();
    let rigidity_ok = rig.verdict == RigidityVerdict::NonRigid && rig.mean_residual >= 0.1;

    // dilatation integral grows by 2 ln 2 (within 10%) per delta halving
    let deltas: Vec<f64> = (4..=10).map(|k| 2f64.powi(-k)).collect();
    let scan = integrability_scan_map(&u, 1.0, -1.0, 1.0, &deltas, 512).unwrap();
    let band = (
        0.9 * 2.0 * std::f64::consts::LN_2,
        1.1 * 2.0 * std::f64::consts::LN_2,
    );
    let increments: Vec<f64> = scan.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let increments_ok = increments.iter().all(|&d| d >= band.0 && d <= band.1);

    let elapsed = t0.elapsed().as_secs_f64();
    let pass = mu_ok && rigidity_ok && increments_ok && elapsed <= 30.0;
    let detail = format!(
        "mu match {:.2e} (gate 1e-12): {mu_ok}; non-rigid with mean residual {:.3} (gate 0.1): \
         {rigidity_ok}; increments per halving {:?} inside [{:.4}, {:.4}]: {increments_ok}; \
         {:.1}s (budget 30s)",
        mu_defect,
        rig.mean_residual,
        increments
            .iter()
            .map(|d| (d * 1e4).round() / 1e4)
            .collect::<Vec<_>>(),
        band.0,
        band.1,
        elapsed
    );
    // The measured increment settles at (8/3) ln 2 ~ 1.8484: the integrand's
    // x2-profile integrates to 8/3, not 2, so the 2 ln 2 band cannot be met
    // by the dilatation quotient as defined. Asserted as stated regardless.
    assert!(verdict(5, pass, &detail), "{detail}");
}

#[test]
fn criterion_6_energy_trace() {
    let base = AnalyticMap::radial_pinch_default();
    let spec = GridSpec::square(-0.5, 0.5, 128);
    let u = sample(&base, &spec).unwrap();
    let v = sample(&AnalyticMap::rotated(0.7, base.clone()), &spec).unwrap();
    let (_, trace) = decompose_pair(&u, &v, &DecomposeConfig::default()).unwrap();
    let slope = energy_trace_slope(&trace).unwrap();
    let confs: Vec<f64> = trace.entries.iter().map(|e| e.conformal_energy).collect();
    let conf_ratio = confs.iter().cloned().fold(f64::MIN, f64::max)
        / confs.iter().cloned().fold(f64::MAX, f64::min);
    let pass = trace.entries.len() == 6
        && !slope.at_floor
        && slope.slope >= 0.8
        && conf_ratio <= 1.5;
    let detail = format!(
        "{} levels converged, log-log anticonformal slope {:.3} (gate 0.8, floor {}), \
         conformal energy max/min {:.3} (gate 1.5)",
        trace.entries.len(),
        slope.slope,
        slope.at_floor,
        conf_ratio
    );
    assert!(verdict(6, pass, &detail), "{detail}");
}

#[test]
fn criterion_7_area_formula() {
    let cases: Vec<(&str, AnalyticMap, GridSpec)> = vec![
        (
            "z+0.2zbar",
            AnalyticMap::AffineConj { m: Complex64::new(0.2, 0.0) },
            GridSpec::square(0.0, 1.0, 257),
        ),
        (
            "diag(2,3)",
            AnalyticMap::Affine {
                m: qclab::matalg::Mat2::diagonal(2.0, 3.0),
                b: [0.0, 0.0],
            },
            GridSpec::square(0.0, 1.0, 257),
        ),
        (
            "z^2 off origin",
            AnalyticMap::monomial(Complex64::new(0.0, 0.0), 2),
            GridSpec::new(0.25, 1.25, -0.4, 0.4, 257, 257),
        ),
    ];
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (name, map, spec) in cases {
        let f = sample(&map, &spec).unwrap();
        let region = GridSpec::new(spec.x_min, spec.x_max, spec.y_min, spec.y_max, 256, 256);
        let (integral, image) = area_check(&f, &region).unwrap();
        let rel = (integral - image).abs() / image;
        worst = worst.max(rel);
        lines.push(format!("{name}: int {integral:.4} vs area {image:.4} ({rel:.2e})"));
    }
    let pass = worst <= 0.02;
    let detail = format!("{}; worst mismatch {:.2e} (gate 2e-2)", lines.join("; "), worst);
    assert!(verdict(7, pass, &detail), "{detail}");
}
