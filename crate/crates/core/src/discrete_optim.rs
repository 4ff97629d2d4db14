//! Constrained energy of a discrete network and descent to its critical points.
//!
//! The energy is `E[C] = Σ_edges (Q_ij[C]² / C_ij + (ν/γ) C_ij^γ) L_ij` with the
//! fluxes `Q[C]` given by the Kirchhoff law. Because the pumping term's
//! derivative with respect to `C_kl` reduces to `−Q_kl² / C_kl² · L_kl`, the full
//! gradient costs one linear solve and no adjoint system.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::kirchhoff::{FlowState, KirchhoffSolver, DEFAULT_LIN_TOL};
use crate::math;
use crate::network::{Network, DEFAULT_MASS_TOL};
use crate::Result;

pub const DEFAULT_C_MIN: f64 = 1e-10;
pub const DEFAULT_GRAD_TOL: f64 = 1e-8;

/// Metabolic exponent `γ` and coefficient `ν` of the cost `(ν/γ) C^γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetabolicParams {
    pub gamma: f64,
    pub nu: f64,
}

/// Named parameter regimes; a value may belong to more than one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Regime {
    pub blood_vessel: bool,
    pub leaf_venation: bool,
}

impl MetabolicParams {
    pub fn new(gamma: f64, nu: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: gamma,
            });
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidParameter {
                name: "nu",
                value: nu,
            });
        }
        Ok(MetabolicParams { gamma, nu })
    }

    pub fn regime(&self) -> Regime {
        Regime {
            blood_vessel: self.gamma == 0.5,
            leaf_venation: (0.5..=1.0).contains(&self.gamma),
        }
    }

    /// Murray exponent `(γ + 1) / 2`.
    pub fn murray_exponent(&self) -> f64 {
        (self.gamma + 1.0) / 2.0
    }

    /// Interior critical conductivity for a given flux: `(Q² / ν)^{1/(γ+1)}`.
    pub fn critical_conductivity(&self, flux: f64) -> f64 {
        math::powf(flux * flux / self.nu, 1.0 / (self.gamma + 1.0))
    }
}

/// Armijo backtracking settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Armijo {
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
}

impl Default for Armijo {
    fn default() -> Self {
        Armijo {
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub params: MetabolicParams,
    pub c_min: f64,
    /// Relative to `ν · max(C)^γ · max(L)`.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub armijo: Armijo,
    pub lin_tol: f64,
}

impl OptimizerConfig {
    pub fn new(params: MetabolicParams) -> Self {
        OptimizerConfig {
            params,
            c_min: DEFAULT_C_MIN,
            grad_tol: DEFAULT_GRAD_TOL,
            max_iter: 100_000,
            armijo: Armijo::default(),
            lin_tol: DEFAULT_LIN_TOL,
        }
    }

    fn check(&self) -> Result<()> {
        MetabolicParams::new(self.params.gamma, self.params.nu)?;
        let a = &self.armijo;
        let checks = [
            ("c_min", self.c_min, self.c_min >= 0.0),
            ("grad_tol", self.grad_tol, self.grad_tol > 0.0),
            ("lin_tol", self.lin_tol, self.lin_tol > 0.0),
            ("initial_step", a.initial_step, a.initial_step > 0.0),
            ("shrink", a.shrink, a.shrink > 0.0 && a.shrink < 1.0),
            (
                "sufficient_decrease",
                a.sufficient_decrease,
                a.sufficient_decrease > 0.0 && a.sufficient_decrease < 1.0,
            ),
        ];
        for (name, value, ok) in checks {
            if !ok {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    fn solver(&self) -> KirchhoffSolver {
        KirchhoffSolver {
            lin_tol: self.lin_tol,
            ..KirchhoffSolver::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub energy: f64,
    /// Max-norm of the projected gradient.
    pub grad_norm: f64,
    /// Step accepted after this record; 0 on the final record.
    pub step: f64,
    pub floored_edges: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIter,
    LineSearchStall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerTrace {
    pub records: Vec<IterationRecord>,
    pub status: Termination,
}

/// Energy of the current conductivities (one Kirchhoff solve).
pub fn energy(net: &Network, params: &MetabolicParams) -> Result<f64> {
    let flow = KirchhoffSolver::default().solve(net)?;
    Ok(energy_at(net, params, &flow))
}

/// Energy for an already solved flow.
pub fn energy_at(net: &Network, params: &MetabolicParams, flow: &FlowState) -> f64 {
    let drops = flow.pressure_drops(net);
    let coef = params.nu / params.gamma;
    math::sum(
        net.conductivities()
            .iter()
            .zip(net.lengths())
            .zip(&drops)
            .map(|((&c, &l), &d)| {
                // Q²/C written as C (ΔP/L)², which is 0 on a dead edge
                let g = d / l;
                (c * g * g + coef * math::powf(c, params.gamma)) * l
            }),
    )
}

/// `∂E/∂C_ij = −(Q_ij² / C_ij² − ν C_ij^{γ−1}) L_ij` at the current flow.
pub fn energy_gradient(net: &Network, params: &MetabolicParams) -> Result<Vec<f64>> {
    if params.gamma < 1.0 {
        if let Some(k) = net.conductivities().iter().position(|&c| c == 0.0) {
            return Err(Error::ZeroConductivity {
                edge: net.edges()[k],
            });
        }
    }
    let flow = KirchhoffSolver::default().solve(net)?;
    Ok(gradient_at(net, params, &flow))
}

/// Gradient for an already solved flow; `+∞` where `C = 0` and `γ < 1`.
pub fn gradient_at(net: &Network, params: &MetabolicParams, flow: &FlowState) -> Vec<f64> {
    let drops = flow.pressure_drops(net);
    net.conductivities()
        .iter()
        .zip(net.lengths())
        .zip(&drops)
        .map(|((&c, &l), &d)| {
            if c == 0.0 && params.gamma < 1.0 {
                return f64::INFINITY;
            }
            // Q/C = ΔP/L
            let g = d / l;
            -(g * g - params.nu * math::powf(c, params.gamma - 1.0)) * l
        })
        .collect()
}

/// Per-edge violation of the critical-point condition `Q² = ν C^{γ+1}`.
///
/// Interior edges (`C > c_min`) report the relative mismatch; edges at the
/// floor report `max(0, −∂E/∂C)`, the violation of the one-sided condition.
pub fn kkt_residual(net: &Network, params: &MetabolicParams, c_min: f64) -> Result<Vec<f64>> {
    let flow = KirchhoffSolver::default().solve(net)?;
    Ok(kkt_at(net, params, &flow, c_min))
}

pub fn kkt_at(net: &Network, params: &MetabolicParams, flow: &FlowState, c_min: f64) -> Vec<f64> {
    let grad = gradient_at(net, params, flow);
    net.conductivities()
        .iter()
        .zip(&flow.flux)
        .zip(&grad)
        .map(|((&c, &q), &g)| {
            if c > c_min {
                let pump = q * q;
                let metab = params.nu * math::powf(c, params.gamma + 1.0);
                (pump - metab).abs() / pump.max(metab).max(f64::MIN_POSITIVE)
            } else {
                (-g).max(0.0)
            }
        })
        .collect()
}

/// Closed-form critical conductivities on a tree.
///
/// On a tree the fluxes are fixed by the sources alone: the flux through an
/// edge is the net source of the subtree it cuts off. Each edge then takes
/// `C = (Q² / ν)^{1/(γ+1)}`.
pub fn analytic_tree_solution(net: &Network, params: &MetabolicParams) -> Result<Vec<f64>> {
    Ok(tree_fluxes(net)?
        .iter()
        .map(|&q| params.critical_conductivity(q))
        .collect())
}

/// Canonical fluxes `Q_ij` on a tree by subtree source accumulation.
pub fn tree_fluxes(net: &Network) -> Result<Vec<f64>> {
    if !net.is_tree() {
        return Err(Error::NotATree);
    }
    let src = net.sources();
    let scale = math::sum(src.iter().map(|s| s.abs()));
    let defect = math::sum(src.iter().copied()).abs();
    if defect > DEFAULT_MASS_TOL * scale {
        return Err(Error::MassImbalance { defect });
    }
    let n = net.node_count();
    let mut parent = vec![(usize::MAX, usize::MAX); n];
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        order.push(v);
        for &(w, k) in net.neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                parent[w] = (v, k);
                stack.push(w);
            }
        }
    }
    let mut subtree = src.to_vec();
    let mut flux = vec![0.0; net.edge_count()];
    for &v in order.iter().rev() {
        let (p, k) = parent[v];
        if p == usize::MAX {
            continue;
        }
        // subtree(v) leaves v's side through edge k toward p; Q_{p v} is the flow from v into p
        let q_pv = subtree[v];
        flux[k] = if p < v { q_pv } else { -q_pv };
        subtree[p] += subtree[v];
    }
    Ok(flux)
}

/// Projected gradient descent `C ← max(C − α g, c_min)` with Armijo backtracking.
///
/// Trial steps use the Barzilai–Borwein length `sᵀs / sᵀy` once two iterates
/// exist, falling back to `armijo.initial_step`. The method stops when the
/// projected gradient is below `grad_tol · ν max(C)^γ max(L)`.
///
/// For `γ < 1` on graphs with cycles the energy is nonconvex; the result is a
/// critical point that depends on the starting conductivities.
pub fn descend(net: &Network, cfg: &OptimizerConfig) -> Result<(Network, OptimizerTrace)> {
    cfg.check()?;
    let params = cfg.params;
    let solver = cfg.solver();
    let max_len = net.lengths().iter().fold(0.0f64, |m, &l| m.max(l));
    let clamp = |c: f64| c.max(cfg.c_min);

    let mut current =
        net.with_conductivity(net.conductivities().iter().map(|&c| clamp(c)).collect())?;
    let flow = solver.solve(&current)?;
    let mut e = energy_at(&current, &params, &flow);
    let mut g = gradient_at(&current, &params, &flow);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut records = Vec::new();

    let mut iter = 0;
    loop {
        let c = current.conductivities();
        let floored = c.iter().filter(|&&x| x <= cfg.c_min).count();
        let stationarity = projected_norm(c, &g, cfg.c_min);
        let c_max = c.iter().fold(0.0f64, |m, &x| m.max(x));
        let scale = (params.nu * math::powf(c_max, params.gamma) * max_len).max(f64::MIN_POSITIVE);
        let mut record = IterationRecord {
            iter,
            energy: e,
            grad_norm: stationarity,
            step: 0.0,
            floored_edges: floored,
        };
        if stationarity <= cfg.grad_tol * scale {
            records.push(record);
            return Ok((
                current,
                OptimizerTrace {
                    records,
                    status: Termination::Converged,
                },
            ));
        }
        if iter >= cfg.max_iter {
            records.push(record);
            return Ok((
                current,
                OptimizerTrace {
                    records,
                    status: Termination::MaxIter,
                },
            ));
        }

        let mut alpha = match &prev {
            Some((s, y)) => {
                let sy = math::dot(s, y);
                if sy > 0.0 {
                    (math::dot(s, s) / sy).clamp(1e-20, 1e20)
                } else {
                    cfg.armijo.initial_step
                }
            }
            None => cfg.armijo.initial_step,
        };

        let mut accepted = None;
        for _ in 0..200 {
            let trial: Vec<f64> = c
                .iter()
                .zip(&g)
                .map(|(&ci, &gi)| {
                    if gi.is_infinite() {
                        cfg.c_min
                    } else {
                        clamp(ci - alpha * gi)
                    }
                })
                .collect();
            let decrease = math::sum(
                trial
                    .iter()
                    .zip(c)
                    .zip(&g)
                    .filter(|(_, gi)| gi.is_finite())
                    .map(|((t, ci), gi)| gi * (t - ci)),
            );
            let candidate = current.with_conductivity(trial)?;
            match solver.solve(&candidate) {
                Ok(f) => {
                    let e_new = energy_at(&candidate, &params, &f);
                    let armijo = e_new <= e + cfg.armijo.sufficient_decrease * decrease;
                    // near the optimum the predicted decrease drops under the
                    // energy's rounding; accept a non-increase that shrinks the gradient
                    let g_new = gradient_at(&candidate, &params, &f);
                    let flat = e_new <= e
                        && projected_norm(candidate.conductivities(), &g_new, cfg.c_min)
                            < stationarity;
                    if armijo || flat {
                        accepted = Some((candidate, e_new, g_new));
                        break;
                    }
                }
                // a trial that floors a bridge can leave the system too
                // ill-conditioned to meet lin_tol; treat it as infeasible
                Err(Error::DisconnectedGraph { .. } | Error::NonConvergence { .. }) => {}
                Err(err) => return Err(err),
            }
            alpha *= cfg.armijo.shrink;
        }
        let Some((candidate, e_new, g_new)) = accepted else {
            records.push(record);
            return Ok((
                current,
                OptimizerTrace {
                    records,
                    status: Termination::LineSearchStall,
                },
            ));
        };
        record.step = alpha;
        records.push(record);
        let s: Vec<f64> = candidate
            .conductivities()
            .iter()
            .zip(c)
            .map(|(a, b)| a - b)
            .collect();
        let y: Vec<f64> = g_new
            .iter()
            .zip(&g)
            .map(|(a, b)| {
                if a.is_finite() && b.is_finite() {
                    a - b
                } else {
                    0.0
                }
            })
            .collect();
        prev = Some((s, y));
        current = candidate;
        e = e_new;
        g = g_new;
        iter += 1;
    }
}

fn projected_norm(c: &[f64], g: &[f64], c_min: f64) -> f64 {
    c.iter()
        .zip(g)
        .map(|(&ci, &gi)| {
            if ci <= c_min {
                (-gi).max(0.0)
            } else {
                gi.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Central-difference Hessian of the energy; a diagnostic for tiny graphs.
///
/// Step `h · C_k` per edge; all conductivities must be positive.
pub fn hessian_fd(net: &Network, params: &MetabolicParams, h: f64) -> Result<Vec<Vec<f64>>> {
    let m = net.edge_count();
    let mut hess = vec![vec![0.0; m]; m];
    for k in 0..m {
        let c = net.conductivities().to_vec();
        let step = h * c[k];
        let mut plus = c.clone();
        plus[k] += step;
        let mut minus = c;
        minus[k] -= step;
        let gp = energy_gradient(&net.with_conductivity(plus)?, params)?;
        let gm = energy_gradient(&net.with_conductivity(minus)?, params)?;
        for (j, row) in hess.iter_mut().enumerate() {
            row[k] = (gp[j] - gm[j]) / (2.0 * step);
        }
    }
    for i in 0..m {
        for j in 0..i {
            let avg = 0.5 * (hess[i][j] + hess[j][i]);
            hess[i][j] = avg;
            hess[j][i] = avg;
        }
    }
    Ok(hess)
}
