//! End-to-end acceptance checks. Each test writes one `[PASS]`/`[FAIL]` line.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use mnkit_core::basis::{moments_of_density, MomentBasis};
use mnkit_core::entropy_solver::{Closure, SolverSettings};
use mnkit_core::harness::{convergence_study, observed_order, run, run_with_cells, Config, ConvergenceReport, ProblemKind};
use mnkit_core::quadrature::{angular_quadrature, reference_cell_rule};
use mnkit_core::realizability::{brute_force_hull, build_polytope, cyclic_polytope_facets, facet_count_formula, limit_cell, Facet};

fn report(id: u32, ok: bool, detail: &str) {
    let line = format!("[{}] criterion {id}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    // Bypasses the test harness capture so the line always reaches the log.
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(ok, "criterion {id} failed: {detail}");
}

fn manufactured(k: usize) -> Config {
    Config {
        problem: ProblemKind::Manufactured,
        order: 3,
        k,
        tau: 1e-11,
        k_peak: 55.0,
        ..Config::default()
    }
}

fn orders(r: &ConvergenceReport, comp: usize) -> Vec<(usize, Option<f64>, Option<f64>)> {
    r.rows
        .iter()
        .map(|row| {
            let e = row.errors.iter().find(|e| e.component == comp).unwrap();
            (row.cells, e.nu1, e.nuinf)
        })
        .collect()
}

fn within(x: Option<f64>, lo: f64, hi: f64) -> bool {
    x.is_some_and(|v| v >= lo && v <= hi)
}

#[test]
fn manufactured_third_order() {
    // Reference (J, E1, Einf) for k = 2.
    let reference = [
        (20, 1.897e-5, 9.283e-6),
        (40, 2.416e-6, 1.241e-6),
        (80, 3.049e-7, 1.609e-7),
        (160, 3.828e-8, 2.048e-8),
        (320, 4.796e-9, 2.589e-9),
        (640, 6.072e-10, 3.365e-10),
    ];
    let cells: Vec<usize> = reference.iter().map(|r| r.0).collect();
    let r = convergence_study(&manufactured(2), &cells).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for ((j, nu1, nuinf), row) in orders(&r, 0).into_iter().zip(&r.rows) {
        let e = &row.errors[0];
        if (40..=320).contains(&j) {
            ok &= within(nu1, 2.85, 3.15) && within(nuinf, 2.85, 3.15);
        }
        let (_, r1, rinf) = reference.iter().find(|x| x.0 == j).unwrap();
        let f1 = (e.e1 / r1).max(r1 / e.e1);
        let finf = (e.einf / rinf).max(rinf / e.einf);
        ok &= f1 <= 3.0 && finf <= 3.0;
        detail += &format!(
            " J={j} E1={:.3e} nu1={} Einf={:.3e} nuinf={};",
            e.e1,
            nu1.map_or("-".into(), |v| format!("{v:.3}")),
            e.einf,
            nuinf.map_or("-".into(), |v| format!("{v:.3}")),
        );
    }
    report(1, ok, &format!("manufactured K=55 M3 k=2, orders in [2.85, 3.15] for J 40..320, errors within 3x:{detail}"));
}

#[test]
fn manufactured_low_degree_orders() {
    let cells = [20, 40, 80, 160, 320, 640];
    let mut ok = true;
    let mut detail = String::new();
    for (k, target) in [(0usize, 1.0), (1, 2.0)] {
        let r = convergence_study(&manufactured(k), &cells).unwrap();
        let (_, nu1, nuinf) = *orders(&r, 0).last().unwrap();
        ok &= within(nu1, target - 0.15, target + 0.15) && within(nuinf, target - 0.15, target + 0.15);
        detail += &format!(" k={k}: nu1={:.3} nuinf={:.3} at J=640;", nu1.unwrap_or(f64::NAN), nuinf.unwrap_or(f64::NAN));
    }
    report(2, ok, &format!("lower degrees reach orders 1 and 2 (+-0.15):{detail}"));
}

fn limiter_study(gamma: f64) -> ConvergenceReport {
    let cfg = Config {
        problem: ProblemKind::LimiterTest,
        order: 4,
        k: 2,
        gamma,
        ..Config::default()
    };
    convergence_study(&cfg, &[8, 16, 32, 64, 128, 256, 512]).unwrap()
}

#[test]
fn limiter_reconstruction_orders() {
    let mut ok = true;
    let mut detail = String::new();

    let r = limiter_study(1e-10);
    let mut good = true;
    for comp in [0, 1] {
        for (j, nu1, nuinf) in orders(&r, comp) {
            if j >= 32 {
                good &= within(nu1, 2.75, 3.25) && within(nuinf, 2.75, 3.25);
            }
        }
    }
    good &= r.rows.iter().all(|row| row.theta_max.is_some_and(|t| t > 0.0));
    ok &= good;
    detail += &format!(" gamma=1e-10 third order with active limiter: {good};");

    let r = limiter_study(1e-11);
    let mut good = true;
    let mut nus = Vec::new();
    for comp in [0, 1] {
        for (j, nu1, nuinf) in orders(&r, comp) {
            if [64, 128, 256].contains(&j) {
                good &= within(nuinf, 1.8, 2.4);
                if comp == 0 {
                    nus.push(format!("{:.2}", nuinf.unwrap_or(f64::NAN)));
                }
            }
            if j >= 32 {
                good &= within(nu1, 2.75, 3.25);
            }
        }
    }
    ok &= good;
    detail += &format!(" gamma=1e-11 Linf orders in [1.8, 2.4] at J=64..256 (u0: {}): {good};", nus.join(" "));

    // Limiting to within the tolerance itself: first-order maximum error.
    let r = limiter_study(1e-14);
    let e = |j: usize| r.rows.iter().find(|row| row.cells == j).unwrap().errors[0].einf;
    let nu = observed_order(e(128), e(512), 2.0 / 128.0, 2.0 / 512.0);
    let good = within(nu, 0.75, 1.25);
    ok &= good;
    detail += &format!(" gamma=1e-14 Linf order J=128..512 {:.2} in [0.75, 1.25]: {good}", nu.unwrap_or(f64::NAN));

    report(3, ok, &format!("limiter reconstruction N=4:{detail}"));
}

#[test]
fn limiter_example_theta() {
    let basis = MomentBasis::monomial(1).unwrap();
    let quad = angular_quadrature(40).unwrap();
    let poly = build_polytope(&basis, &quad).unwrap();
    let coeffs = DMatrix::from_row_slice(3, 2, &[1.0, 0.8, 0.5, 0.2, -0.2, 0.6]);
    let rule = reference_cell_rule(4).unwrap();
    let (_, theta) = limit_cell(&coeffs, &poly, &rule, 0.0).unwrap();
    let ok = (theta - 9.0 / 11.0).abs() <= 1e-12;
    report(4, ok, &format!("M1 quadratic cell limited with theta = {theta:.15} (9/11 = {:.15})", 9.0 / 11.0));
}

#[test]
fn flux_jacobian_eigenvalues_bounded() {
    let quad = angular_quadrature(40).unwrap();
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let models = [
        MomentBasis::monomial(2).unwrap(),
        MomentBasis::monomial(3).unwrap(),
        MomentBasis::monomial(4).unwrap(),
        MomentBasis::mixed(1).unwrap(),
        MomentBasis::mixed(2).unwrap(),
    ];
    let mut count = 0;
    for basis in &models {
        let closure = Closure::new(*basis, quad.clone(), SolverSettings::default()).unwrap();
        for _ in 0..1000 {
            let peak: f64 = rng.gen_range(-15.0..15.0);
            let noise: Vec<f64> = (0..quad.len()).map(|_| rng.gen_range(0.05..1.0)).collect();
            let mass: f64 = rng.gen_range(1e-3..10.0);
            let nodes = quad.nodes().to_vec();
            let u = moments_of_density(basis, &quad, |mu| {
                let j = nodes.iter().position(|&m| m == mu).unwrap();
                mass * (peak * mu).exp() * noise[j]
            });
            let rep = closure.solve(&u, None).unwrap();
            let jac = closure.flux_jacobian(&rep).unwrap();
            let lam = jac.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
            worst = worst.max(lam);
            count += 1;
        }
    }
    let ok = worst <= 1.0 + 1e-8;
    report(5, ok, &format!("max |eigenvalue| over {count} interior moments (M2-M4, MM1-MM2) = {worst:.12}"));
}

#[test]
fn plane_source_means_stay_interior() {
    let mut ok = true;
    let mut detail = String::new();
    for order in [2, 3] {
        let cfg = Config {
            problem: ProblemKind::PlaneSource,
            order,
            k: 2,
            cells: 300,
            ..Config::default()
        };
        let r = run(&cfg).unwrap();
        ok &= r.mean_violations == 0 && r.euler_checks > 0 && (r.t_final - 1.0).abs() < 1e-15;
        detail += &format!(
            " N={order}: {} steps, {} Euler substeps checked, {} violations;",
            r.steps, r.euler_checks, r.mean_violations
        );
    }
    report(6, ok, &format!("plane source J=300 to t=1, substep cell means interior:{detail}"));
}

#[test]
fn plane_source_conserves_mass() {
    let cfg = Config {
        problem: ProblemKind::PlaneSource,
        order: 2,
        k: 2,
        cells: 300,
        t_final: Some(0.5),
        ..Config::default()
    };
    let r = run(&cfg).unwrap();
    let m0 = r.mass[0].mass;
    let drift = r.mass.iter().map(|s| ((s.mass - m0) / m0).abs()).fold(0.0, f64::max);
    report(7, drift <= 1e-9, &format!("plane source mass drift up to t=0.5: {drift:.3e} (limit 1e-9)"));
}

fn classify(facets: &[Facet], x: &[f64]) -> f64 {
    facets.iter().map(|f| f.residual(x)).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn cyclic_facets_match_brute_force_hull() {
    let mut rng = StdRng::seed_from_u64(11);
    let mut ok = true;
    let mut mismatches = 0;
    let mut skipped = 0;
    let mut cases = 0;
    for d in [2usize, 3] {
        for n in 6..=12 {
            let mut nodes: Vec<f64>;
            loop {
                nodes = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                nodes.sort_by(f64::total_cmp);
                if nodes.windows(2).all(|w| w[1] - w[0] > 1e-2) {
                    break;
                }
            }
            let gale = cyclic_polytope_facets(&nodes, d).unwrap();
            let pts: Vec<DVector<f64>> = nodes
                .iter()
                .map(|&x| DVector::from_iterator(d, (1..=d).map(|i| x.powi(i as i32))))
                .collect();
            let hull = brute_force_hull(&pts).unwrap();
            let expected = facet_count_formula(d, n).unwrap() as usize;
            ok &= gale.len() == expected && hull.len() == expected;
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let (a, b) = (classify(&gale, &x), classify(&hull, &x));
                if a.abs() < 1e-9 || b.abs() < 1e-9 {
                    skipped += 1;
                    continue;
                }
                if (a < 0.0) != (b < 0.0) {
                    mismatches += 1;
                }
            }
            cases += 1;
        }
    }
    ok &= mismatches == 0;
    report(
        8,
        ok,
        &format!("{cases} node sets x 10^4 points: {mismatches} classification mismatches, {skipped} boundary points skipped, facet counts match"),
    );
}

#[test]
fn dual_derivatives_match_finite_differences() {
    let quad = angular_quadrature(40).unwrap();
    let mut rng = StdRng::seed_from_u64(3);
    let models = [
        MomentBasis::monomial(1).unwrap(),
        MomentBasis::monomial(3).unwrap(),
        MomentBasis::mixed(2).unwrap(),
        MomentBasis::legendre(4).unwrap(),
    ];
    let closures: Vec<Closure> = models
        .iter()
        .map(|b| Closure::new(*b, quad.clone(), SolverSettings::default()).unwrap())
        .collect();
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    for case in 0..100 {
        let c = &closures[case % closures.len()];
        let n = c.n_mom();
        let alpha = DVector::from_iterator(n, (0..n).map(|_| rng.gen_range(-1.5..1.5)));
        let other = DVector::from_iterator(n, (0..n).map(|_| rng.gen_range(-1.5..1.5)));
        let u = c.ansatz_moments(&other).unwrap();
        let g = c.dual_gradient(&alpha, &u).unwrap();
        let h = c.dual_hessian(&alpha);
        let step = 1e-5;
        let mut g_fd = DVector::zeros(n);
        let mut h_fd = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut p = alpha.clone();
            let mut m = alpha.clone();
            p[i] += step;
            m[i] -= step;
            g_fd[i] = (c.dual_objective(&p, &u).unwrap() - c.dual_objective(&m, &u).unwrap()) / (2.0 * step);
            let col = (c.dual_gradient(&p, &u).unwrap() - c.dual_gradient(&m, &u).unwrap()) / (2.0 * step);
            h_fd.set_column(i, &col);
        }
        worst_g = worst_g.max((&g_fd - &g).norm() / g.norm());
        worst_h = worst_h.max((&h_fd - &h).norm() / h.norm());
    }
    let m1 = &closures[0];
    let rep = m1.solve(&DVector::from_vec(vec![1.0, 0.0]), None).unwrap();
    let iso_err = (rep.multipliers[0] - 0.5f64.ln()).abs().max(rep.multipliers[1].abs());
    let ok = worst_g <= 1e-6 && worst_h <= 1e-6 && iso_err <= 1e-9;
    report(
        9,
        ok,
        &format!("100 cases: gradient rel err {worst_g:.2e}, Hessian rel err {worst_h:.2e}; isotropic solve err {iso_err:.2e}"),
    );
}

#[test]
fn strong_peaking_triggers_regularization() {
    let cfg = Config {
        k_peak: 110.0,
        ..manufactured(2)
    };
    let coarse = run_with_cells(&cfg, 80).unwrap();
    let fine = run_with_cells(&cfg, 160).unwrap();
    let events = coarse.regularization_log.iter().filter(|e| e.r == 1e-8).count();
    let (_, einf_c) = coarse.errors.unwrap();
    let (_, einf_f) = fine.errors.unwrap();
    let nu = observed_order(einf_c, einf_f, 2.0 * std::f64::consts::PI / 80.0, 2.0 * std::f64::consts::PI / 160.0);
    let ok = events > 0 && nu.is_some_and(|v| v < 2.5);
    report(
        10,
        ok,
        &format!(
            "K=110: {events} r=1e-8 events at J=80 (need > 0), Linf order J=80->160 {:.3} (need < 2.5)",
            nu.unwrap_or(f64::NAN)
        ),
    );
}
