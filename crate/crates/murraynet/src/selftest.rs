//! Built-in invariant checks, run by the `selftest` command.

use murraynet_core::continuum_grid::{
    box_mask, murray_balance, oracle_1d, project_source, solve_pressure, ContinuumProblem,
    RectGrid, DEFAULT_MAX_ITER,
};
use murraynet_core::continuum_vector::{
    eigen_residual, face_fluxes_vec, magnitude_residual, murray_balance_vec, reconstruct_m,
    solve_pressure_vec, VectorProblem,
};
use murraynet_core::discrete_optim::{
    analytic_tree_solution, descend, energy, energy_gradient, MetabolicParams, OptimizerConfig,
};
use murraynet_core::kirchhoff::{dissipation, kirchhoff_defect, KirchhoffSolver};
use murraynet_core::murray::{node_murray_report, optimal_radius, tube_energy, TubeParams};
use murraynet_core::profile::Profile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::fixtures::{binary_tree, random_network, y_junction};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    /// `"<="` or `">="`.
    pub relation: &'static str,
    pub passed: bool,
}

fn at_most(name: &'static str, value: f64, threshold: f64) -> Check {
    Check {
        name,
        value,
        threshold,
        relation: "<=",
        passed: value <= threshold,
    }
}

fn at_least(name: &'static str, value: f64, threshold: f64) -> Check {
    Check {
        name,
        value,
        threshold,
        relation: ">=",
        passed: value >= threshold,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Largest relative gap between the analytic gradient and central
/// differences with step `1e-6 · C`, over `graphs` random networks.
pub fn gradient_fd_error(seed: u64, graphs: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..graphs {
        let net = random_network(&mut rng, 15);
        for gamma in [0.5, 1.0, 2.0] {
            let params = MetabolicParams::new(gamma, 1.0).expect("valid");
            let g = energy_gradient(&net, &params).expect("positive conductivities");
            let c = net.conductivities().to_vec();
            let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for k in 0..c.len() {
                let h = 1e-6 * c[k];
                let e = |d: f64| {
                    let mut cc = c.clone();
                    cc[k] += d;
                    energy(&net.with_conductivity(cc).expect("valid"), &params).expect("solvable")
                };
                let fd = (e(h) - e(-h)) / (2.0 * h);
                worst = worst.max((g[k] - fd).abs() / g[k].abs().max(1e-3 * scale));
            }
        }
    }
    worst
}

fn kirchhoff_identities(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    let solver = KirchhoffSolver::default();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let net = random_network(&mut rng, 15);
        let flow = solver.solve(&net).expect("solvable");
        let defect = kirchhoff_defect(&net, &flow)
            .iter()
            .fold(0.0f64, |m, d| m.max(d.abs()));
        let sp: f64 = net
            .sources()
            .iter()
            .zip(&flow.pressure)
            .map(|(s, p)| s * p)
            .sum();
        worst = worst.max(defect).max(rel(dissipation(&net, &flow), sp));
    }
    worst
}

/// `(max relative gap to the tree oracle, max node Murray residual)` over
/// the fixture trees and `γ ∈ {0.5, 1, 1.5, 2}`.
fn tree_runs() -> (f64, f64) {
    let mut gap: f64 = 0.0;
    let mut murray: f64 = 0.0;
    for net in [y_junction(), binary_tree()] {
        for gamma in [0.5, 1.0, 1.5, 2.0] {
            let params = MetabolicParams::new(gamma, 1.0).expect("valid");
            let Ok((opt, _)) = descend(&net, &OptimizerConfig::new(params)) else {
                return (f64::INFINITY, f64::INFINITY);
            };
            let oracle = analytic_tree_solution(&net, &params).expect("tree");
            for (a, b) in opt.conductivities().iter().zip(&oracle) {
                gap = gap.max(rel(*a, *b));
            }
            let flow = KirchhoffSolver::default().solve(&opt).expect("solvable");
            murray = murray.max(
                node_murray_report(&opt, &flow, &params, 0.0)
                    .summary
                    .max_residual,
            );
        }
    }
    (gap, murray)
}

/// Golden-section minimizer on `[a, b]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol * (a.abs() + b.abs()) {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Largest relative gap between the golden-section optimal radius at fixed
/// flow and `optimal_radius`, the inverse of `optimal_flow`.
pub fn tube_optimum_error(seed: u64, tuples: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7b3);
    let mut worst: f64 = 0.0;
    for _ in 0..tuples {
        let (q, mu, nu, l) = (
            rng.gen_range(0.1..10.0),
            rng.gen_range(0.1..5.0),
            rng.gen_range(0.1..5.0),
            rng.gen_range(0.5..3.0),
        );
        let e = |r: f64| tube_energy(&TubeParams::new(r, l, mu, nu, q).expect("positive"));
        let r_star = golden_section(e, 1e-3, 1e2, 1e-14);
        worst = worst.max(rel(r_star, optimal_radius(q, mu, nu)));
    }
    worst
}

fn cos_problem(n: usize, gamma: f64) -> ContinuumProblem {
    let grid = RectGrid::line(1.0, n).expect("valid");
    let src = Profile::Cos1d {
        amplitude: 1.0,
        extent: 1.0,
    };
    project_source(
        &ContinuumProblem::from_profiles(grid, gamma, 1.0, Profile::Constant(1.0), src)
            .expect("valid"),
    )
}

fn pde_order() -> f64 {
    let err = |n: usize| {
        let pr = cos_problem(n, 2.0);
        let f = solve_pressure(&pr, 1e-11, DEFAULT_MAX_ITER).expect("converges");
        linf(&f.p, &oracle_1d(&pr).expect("analytic").p)
    };
    (err(64) / err(128)).log2()
}

fn continuum_equivalence(seed: u64) -> f64 {
    let grid = RectGrid::rect(1.0, 1.0, 16, 16).expect("valid");
    let src = Profile::Dipole2d {
        amplitude: 10.0,
        sigma: 0.1,
        plus: [0.3, 0.5],
        minus: [0.7, 0.5],
    };
    let pr = project_source(
        &ContinuumProblem::from_profiles(grid, 1.5, 1.0, Profile::Constant(1.0), src)
            .expect("valid"),
    );
    let f = solve_pressure(&pr, 1e-11, DEFAULT_MAX_ITER).expect("converges");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let mask: Vec<bool> = (0..256).map(|_| rng.gen_bool(0.5)).collect();
        if !mask.iter().any(|&b| b) {
            continue;
        }
        let b = murray_balance(&f, &pr, &mask, None).expect("nonempty");
        worst = worst.max(b.murray_raw_gap);
    }
    let whole = murray_balance(&f, &pr, &[true; 256], None).expect("nonempty");
    worst.max(whole.imbalance.abs())
}

/// Eigen and magnitude residuals, plus the orientation-flip gap (0 when
/// bit-identical).
fn vector_checks() -> (f64, f64) {
    let grid = RectGrid::rect(1.0, 1.0, 16, 16).expect("valid");
    let src = Profile::RadialHat {
        amplitude: 50.0,
        sigma: 0.15,
        center: [0.5, 0.5],
    };
    let pr = ContinuumProblem::from_profiles(grid.clone(), 1.5, 1.0, Profile::Constant(1.0), src)
        .expect("valid");
    let pr = VectorProblem::new(project_source(&pr)).expect("2-D");
    let s = solve_pressure_vec(&pr, 1e-10, 200_000).expect("converges");
    let a = reconstruct_m(&s, &pr, None, None).expect("sizes");
    let minus: Vec<bool> = (0..256).map(|c| c % 2 == 0).collect();
    let b = reconstruct_m(&s, &pr, None, Some(&minus)).expect("sizes");
    let eig = eigen_residual(&a, &pr)
        .iter()
        .fold(0.0f64, |m, &v| m.max(v))
        .max(magnitude_residual(&a, &pr));
    let sub = box_mask(&grid, [0.25, 0.25], [0.75, 0.75]);
    let same = face_fluxes_vec(&a, &pr) == face_fluxes_vec(&b, &pr)
        && murray_balance_vec(&a, &pr, &sub).ok() == murray_balance_vec(&b, &pr, &sub).ok();
    (eig, if same { 0.0 } else { 1.0 })
}

/// Runs every check; order of the result is fixed.
pub fn run(seed: u64) -> Vec<Check> {
    let jobs: Vec<Box<dyn Fn() -> Vec<Check> + Send + Sync>> = vec![
        Box::new(move || {
            vec![at_most(
                "gradient_finite_differences",
                gradient_fd_error(seed, 20),
                1e-5,
            )]
        }),
        Box::new(move || {
            vec![at_most(
                "kirchhoff_and_energy_identity",
                kirchhoff_identities(seed),
                1e-10,
            )]
        }),
        Box::new(|| {
            let (gap, murray) = tree_runs();
            vec![
                at_most("tree_closed_form", gap, 1e-6),
                at_most("murray_at_criticality", murray, 1e-6),
            ]
        }),
        Box::new(move || {
            vec![at_most(
                "single_tube_optimum",
                tube_optimum_error(seed, 20),
                1e-8,
            )]
        }),
        Box::new(|| vec![at_least("pde_oracle_order_1d", pde_order(), 1.8)]),
        Box::new(move || {
            vec![at_most(
                "continuum_murray_flux_equivalence",
                continuum_equivalence(seed),
                1e-12,
            )]
        }),
        Box::new(|| {
            let (eig, flip) = vector_checks();
            vec![
                at_most("vector_eigen_and_magnitude", eig, 1e-12),
                at_most("orientation_flip_gap", flip, 0.0),
            ]
        }),
    ];
    jobs.par_iter()
        .map(|job| job())
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}
