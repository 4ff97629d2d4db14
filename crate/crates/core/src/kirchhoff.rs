//! Kirchhoff flow on a weighted graph.
//!
//! Pressures solve the weighted graph-Laplacian system
//! `−Σ_j C_ij (P_j − P_i) / L_ij = S_i`; fluxes follow from
//! `Q_ij = C_ij (P_j − P_i) / L_ij`, the flow from `j` into `i`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::linalg::{SpdSolver, SymmetricSparse};
use crate::math;
use crate::network::{positive_components, Network, DEFAULT_MASS_TOL};
use crate::Result;

pub const DEFAULT_LIN_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Pressures and canonical-orientation fluxes for one conductivity vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub pressure: Vec<f64>,
    /// `Q_ij` for each canonical edge `(i, j)`, `i < j`.
    pub flux: Vec<f64>,
    /// Max-norm of the Kirchhoff defect at the returned pressures.
    pub residual_norm: f64,
}

impl FlowState {
    /// Recomputes fluxes and the defect from a pressure vector.
    pub fn from_pressures(net: &Network, pressure: Vec<f64>) -> Self {
        let flux = edge_fluxes(net, &pressure);
        let mut flow = FlowState {
            pressure,
            flux,
            residual_norm: 0.0,
        };
        flow.residual_norm = math::max_abs(&kirchhoff_defect(net, &flow));
        flow
    }

    /// Oriented flux `Q_ab` (flow from `b` into `a`); `Q_ba = −Q_ab`.
    pub fn flux_between(&self, net: &Network, a: usize, b: usize) -> Option<f64> {
        let k = net.edge_index(a, b)?;
        Some(if a < b { self.flux[k] } else { -self.flux[k] })
    }

    /// Pressure drop `P_j − P_i` along each canonical edge.
    pub fn pressure_drops(&self, net: &Network) -> Vec<f64> {
        net.edges()
            .iter()
            .map(|&(i, j)| self.pressure[j] - self.pressure[i])
            .collect()
    }
}

fn edge_fluxes(net: &Network, p: &[f64]) -> Vec<f64> {
    net.edges()
        .iter()
        .zip(net.conductivities().iter().zip(net.lengths()))
        .map(|(&(i, j), (&c, &l))| c * (p[j] - p[i]) / l)
        .collect()
}

/// Linear-solver settings; [`KirchhoffSolver::solve`] runs the solve.
#[derive(Debug, Clone, Copy)]
pub struct KirchhoffSolver {
    pub lin_tol: f64,
    pub max_iter: usize,
    /// Components with more unknowns than this go to conjugate gradients.
    pub direct_limit: usize,
    pub mass_tol: f64,
}

impl Default for KirchhoffSolver {
    fn default() -> Self {
        KirchhoffSolver {
            lin_tol: DEFAULT_LIN_TOL,
            max_iter: DEFAULT_MAX_ITER,
            direct_limit: SpdSolver::DEFAULT_DIRECT_LIMIT,
            mass_tol: DEFAULT_MASS_TOL,
        }
    }
}

/// Solves the Kirchhoff system and returns zero-mean pressures.
///
/// When the positive-conductivity subgraph splits into components that are
/// each source-balanced, every component is solved on its own and gauged to
/// zero mean; an unbalanced component yields [`Error::DisconnectedGraph`].
pub fn solve_pressures(net: &Network, lin_tol: f64, max_iter: usize) -> Result<FlowState> {
    KirchhoffSolver {
        lin_tol,
        max_iter,
        ..KirchhoffSolver::default()
    }
    .solve(net)
}

impl KirchhoffSolver {
    pub fn solve(&self, net: &Network) -> Result<FlowState> {
        if !(self.lin_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "lin_tol",
                value: self.lin_tol,
            });
        }
        let src = net.sources();
        let scale = math::sum(src.iter().map(|s| s.abs()));
        let defect = math::sum(src.iter().copied()).abs();
        if defect > self.mass_tol * scale {
            return Err(Error::MassImbalance { defect });
        }
        let comps = positive_components(net, 0.0);
        if comps.len() > 1 {
            let unbalanced = comps.iter().any(|nodes| {
                math::sum(nodes.iter().map(|&v| src[v])).abs() > self.mass_tol * scale
            });
            if unbalanced {
                return Err(Error::DisconnectedGraph {
                    components: comps.len(),
                });
            }
        }
        let tol = self.lin_tol * math::max_abs(src).max(1.0);
        let mut pressure = vec![0.0; net.node_count()];
        let mut local = vec![usize::MAX; net.node_count()];
        for nodes in &comps {
            if nodes.len() < 2 {
                continue;
            }
            // pin nodes[0]; unknowns are the remaining nodes
            for (k, &v) in nodes.iter().enumerate() {
                local[v] = k;
            }
            let m = nodes.len() - 1;
            let mut a = SymmetricSparse::new(m);
            let mut b = vec![0.0; m];
            for (k, &v) in nodes.iter().enumerate().skip(1) {
                b[k - 1] = src[v];
            }
            for (e, &(i, j)) in net.edges().iter().enumerate() {
                let c = net.conductivities()[e];
                if c <= 0.0 || local[i] == usize::MAX {
                    continue;
                }
                let w = c / net.lengths()[e];
                let (li, lj) = (local[i], local[j]);
                if li > 0 {
                    a.add(li - 1, li - 1, w);
                }
                if lj > 0 {
                    a.add(lj - 1, lj - 1, w);
                }
                if li > 0 && lj > 0 {
                    a.add(li - 1, lj - 1, -w);
                }
            }
            let solver = SpdSolver {
                direct_limit: self.direct_limit,
                tol: tol * 1e-2,
                max_iter: self.max_iter,
            };
            let x = solver.solve(&a, &b)?;
            let mean = math::sum(x.iter().copied()) / nodes.len() as f64;
            pressure[nodes[0]] = -mean;
            for (k, &v) in nodes.iter().enumerate().skip(1) {
                pressure[v] = x[k - 1] - mean;
            }
            for &v in nodes {
                local[v] = usize::MAX;
            }
        }
        let flow = FlowState::from_pressures(net, pressure);
        if flow.residual_norm > tol {
            return Err(Error::NonConvergence {
                iterations: self.max_iter,
                residual: flow.residual_norm,
            });
        }
        Ok(flow)
    }
}

/// Per-node `Σ_{j∈N(i)} Q_ij + S_i`; zero at a Kirchhoff solution.
pub fn kirchhoff_defect(net: &Network, flow: &FlowState) -> Vec<f64> {
    (0..net.node_count())
        .map(|i| {
            let inflow =
                net.neighbors(i).iter().map(
                    |&(j, k)| {
                        if i < j {
                            flow.flux[k]
                        } else {
                            -flow.flux[k]
                        }
                    },
                );
            math::sum(inflow.chain(core::iter::once(net.sources()[i])))
        })
        .collect()
}

/// Dissipation `Σ_edges C (ΔP/L)² L`, equal to `Σ_i S_i P_i` at a solution.
pub fn dissipation(net: &Network, flow: &FlowState) -> f64 {
    let drops = flow.pressure_drops(net);
    math::sum(
        drops
            .iter()
            .zip(net.conductivities().iter().zip(net.lengths()))
            .map(|(d, (c, l))| c * (d / l) * (d / l) * l),
    )
}
