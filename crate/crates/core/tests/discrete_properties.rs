mod common;

use common::{binary_tree, max_abs_diff, random_network, rng, y_junction};
use murraynet_core::discrete_optim::{
    analytic_tree_solution, descend, energy, energy_gradient, kkt_residual, tree_fluxes,
    MetabolicParams, OptimizerConfig, Termination,
};
use murraynet_core::kirchhoff::{dissipation, kirchhoff_defect, KirchhoffSolver};
use murraynet_core::murray::{node_flux_report, node_murray_report};
use murraynet_core::network::Network;
use proptest::prelude::*;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn fd_gradient(net: &Network, params: &MetabolicParams) -> Vec<f64> {
    let c = net.conductivities().to_vec();
    (0..c.len())
        .map(|k| {
            let h = 1e-6 * c[k];
            let mut up = c.clone();
            let mut dn = c.clone();
            up[k] += h;
            dn[k] -= h;
            let eu = energy(&net.with_conductivity(up).unwrap(), params).unwrap();
            let ed = energy(&net.with_conductivity(dn).unwrap(), params).unwrap();
            (eu - ed) / (2.0 * h)
        })
        .collect()
}

#[test]
fn gradient_matches_central_differences_on_random_graphs() {
    let mut r = rng(2024);
    for _ in 0..50 {
        let net = random_network(&mut r, 15);
        for gamma in [0.5, 1.0, 2.0] {
            let params = MetabolicParams::new(gamma, 1.3).unwrap();
            let g = energy_gradient(&net, &params).unwrap();
            let fd = fd_gradient(&net, &params);
            let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in g.iter().zip(&fd) {
                assert!(
                    (a - b).abs() <= 1e-5 * a.abs().max(1e-3 * scale),
                    "{a} vs {b}"
                );
            }
        }
    }
}

#[test]
fn flux_sensitivity_is_orthogonal_to_pressure_drops() {
    // Σ (Q/C)(∂Q/∂C_kl) L = 0 for every perturbed edge
    let mut r = rng(7);
    let solver = KirchhoffSolver::default();
    for _ in 0..10 {
        let net = random_network(&mut r, 8);
        let base = solver.solve(&net).unwrap();
        let c = net.conductivities().to_vec();
        for k in 0..c.len() {
            let h = 1e-6 * c[k];
            let mut up = c.clone();
            let mut dn = c.clone();
            up[k] += h;
            dn[k] -= h;
            let qu = solver
                .solve(&net.with_conductivity(up).unwrap())
                .unwrap()
                .flux;
            let qd = solver
                .solve(&net.with_conductivity(dn).unwrap())
                .unwrap()
                .flux;
            let (mut total, mut norm) = (0.0, 0.0);
            for e in 0..c.len() {
                let dq = (qu[e] - qd[e]) / (2.0 * h);
                let drop = base.flux[e] / c[e] * net.lengths()[e];
                total += drop * dq;
                // ∂Q/∂C is naturally of size Q/C
                norm += drop.abs() * (base.flux[k] / c[k]).abs().max(base.flux[e].abs() / c[e]);
            }
            assert!(
                total.abs() <= 1e-5 * norm.max(1e-300),
                "edge {k}: {total} / {norm}"
            );
        }
    }
}

#[test]
fn kirchhoff_invariants_on_random_graphs() {
    let mut r = rng(99);
    let solver = KirchhoffSolver::default();
    for _ in 0..30 {
        let net = random_network(&mut r, 15);
        let flow = solver.solve(&net).unwrap();
        assert!(kirchhoff_defect(&net, &flow)
            .iter()
            .all(|d| d.abs() <= 1e-10));
        // energy identity
        let lhs = dissipation(&net, &flow);
        let rhs: f64 = net
            .sources()
            .iter()
            .zip(&flow.pressure)
            .map(|(s, p)| s * p)
            .sum();
        assert!(rel_err(lhs, rhs) <= 1e-10, "{lhs} vs {rhs}");
        // scaling C by λ scales drops by 1/λ, keeps fluxes
        let lambda = 3.7;
        let scaled = net
            .with_conductivity(net.conductivities().iter().map(|c| c * lambda).collect())
            .unwrap();
        let f2 = solver.solve(&scaled).unwrap();
        assert!(max_abs_diff(&flow.flux, &f2.flux) <= 1e-9);
        let d1 = flow.pressure_drops(&net);
        let d2 = f2.pressure_drops(&scaled);
        for (a, b) in d1.iter().zip(&d2) {
            assert!((a / lambda - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
        // exact flux form of the node balance holds for any solved flow
        assert!(node_flux_report(&net, &flow, 0.0).summary.max_residual <= 1e-9);
    }
}

#[test]
fn gauge_shift_leaves_fluxes_unchanged() {
    let net = binary_tree();
    let flow = KirchhoffSolver::default().solve(&net).unwrap();
    let shifted = murraynet_core::kirchhoff::FlowState::from_pressures(
        &net,
        flow.pressure.iter().map(|p| p + 12.5).collect(),
    );
    assert!(max_abs_diff(&flow.flux, &shifted.flux) <= 1e-12);
}

#[test]
fn tree_fluxes_ignore_conductivities() {
    let mut r = rng(5);
    let net = binary_tree();
    let q = tree_fluxes(&net).unwrap();
    for _ in 0..5 {
        use rand::Rng;
        let c: Vec<f64> = (0..net.edge_count())
            .map(|_| r.gen_range(0.1..10.0))
            .collect();
        let net2 = net.with_conductivity(c).unwrap();
        let flow = KirchhoffSolver::default().solve(&net2).unwrap();
        assert!(max_abs_diff(&q, &flow.flux) <= 1e-9);
    }
}

#[test]
fn descent_reaches_tree_oracle_and_murray_law() {
    for net in [y_junction(), binary_tree()] {
        for gamma in [0.5, 1.0, 1.5, 2.0] {
            for nu in [0.5, 1.0, 4.0] {
                let params = MetabolicParams::new(gamma, nu).unwrap();
                let (opt, trace) = descend(&net, &OptimizerConfig::new(params)).unwrap();
                assert_eq!(trace.status, Termination::Converged, "γ={gamma} ν={nu}");
                for w in trace.records.windows(2) {
                    assert!(w[1].energy <= w[0].energy);
                }
                let oracle = analytic_tree_solution(&net, &params).unwrap();
                for (a, b) in opt.conductivities().iter().zip(&oracle) {
                    assert!(rel_err(*a, *b) <= 1e-6, "γ={gamma} ν={nu}: {a} vs {b}");
                }
                let flow = KirchhoffSolver::default().solve(&opt).unwrap();
                let rep = node_murray_report(&opt, &flow, &params, 0.0);
                assert!(rep.summary.max_residual <= 1e-6);
            }
        }
    }
}

#[test]
fn murray_residual_is_bounded_by_criticality_defect() {
    let mut r = rng(31);
    let mut checked = 0;
    for _ in 0..20 {
        let net = random_network(&mut r, 10);
        for gamma in [1.0, 1.5, 2.0] {
            let params = MetabolicParams::new(gamma, 1.0).unwrap();
            // exactly dead edges keep the floor out of the node sums
            let cfg = OptimizerConfig {
                c_min: 0.0,
                max_iter: 20_000,
                ..OptimizerConfig::new(params)
            };
            let (opt, trace) = descend(&net, &cfg).unwrap();
            if trace.status != Termination::Converged {
                eprintln!(
                    "γ={gamma}: {:?} after {}",
                    trace.status,
                    trace.records.len()
                );
                continue;
            }
            let live: Vec<f64> = kkt_residual(&opt, &params, cfg.c_min)
                .unwrap()
                .into_iter()
                .zip(opt.conductivities())
                .filter(|(_, &c)| c > cfg.c_min)
                .map(|(k, _)| k)
                .collect();
            let eps = live.iter().fold(0.0f64, |m, &v| m.max(v)).max(1e-12);
            let flow = KirchhoffSolver::default().solve(&opt).unwrap();
            let rep = node_murray_report(&opt, &flow, &params, 0.0);
            assert!(
                rep.summary.max_residual <= 10.0 * eps,
                "{} vs {eps}",
                rep.summary.max_residual
            );
            checked += 1;
        }
    }
    assert!(checked >= 40, "only {checked} converged runs");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn energy_is_positive_and_gradient_finite(seed in any::<u64>(), gamma in 0.5f64..3.0, nu in 0.1f64..5.0) {
        let net = random_network(&mut rng(seed), 12);
        let params = MetabolicParams::new(gamma, nu).unwrap();
        prop_assert!(energy(&net, &params).unwrap() > 0.0);
        prop_assert!(energy_gradient(&net, &params).unwrap().iter().all(|g| g.is_finite()));
    }
}
