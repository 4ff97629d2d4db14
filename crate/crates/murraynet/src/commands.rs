//! Command implementations. Each returns its artifacts; writing them and
//! the manifest is left to [`crate::run`].

use std::path::{Path, PathBuf};

use murraynet_core::continuum_grid::{
    crit_residual, face_fluxes, functional_value, murray_balance, oracle_1d, pressure_residual,
    solve_pressure_from, BalanceRecord, GridField,
};
use murraynet_core::continuum_vector::{
    alignment_residual, eigen_residual, face_fluxes_vec, magnitude_residual, murray_balance_vec,
    reconstruct_m, solve_pressure_vec_from, VectorProblem, VectorState,
};
use murraynet_core::discrete_optim::{descend, energy, kkt_residual};
use murraynet_core::kirchhoff::{dissipation, kirchhoff_defect, FlowState, KirchhoffSolver};
use murraynet_core::murray::{node_flux_report, node_murray_report};
use murraynet_core::network::Network;
use serde_json::{json, Value};

use crate::config::{ContinuumConfig, DiscreteConfig, Model};
use crate::error::{CliError, Result};
use crate::formats::{self, cell_csv, edge_flux_csv, face_csv, node_values_csv, num, Csv};

#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, String)>,
    pub report: Value,
    pub inputs: Vec<PathBuf>,
    /// Human-readable summary lines.
    pub lines: Vec<String>,
    pub failed: bool,
}

impl Artifacts {
    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }
}

fn network_input(input: Option<&Path>, cfg: &DiscreteConfig) -> Result<PathBuf> {
    input
        .map(Path::to_path_buf)
        .or_else(|| cfg.network.clone())
        .ok_or_else(|| {
            CliError::Config("no network given (positional input or discrete.network)".into())
        })
}

fn kirchhoff(cfg: &DiscreteConfig) -> KirchhoffSolver {
    KirchhoffSolver {
        lin_tol: cfg.lin_tol,
        ..KirchhoffSolver::default()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn flow_report(net: &Network, flow: &FlowState) -> Value {
    let sp: f64 = net
        .sources()
        .iter()
        .zip(&flow.pressure)
        .map(|(s, p)| s * p)
        .sum();
    json!({
        "nodes": net.node_count(),
        "edges": net.edge_count(),
        "kirchhoff_defect": max_abs(&kirchhoff_defect(net, flow)),
        "dissipation": dissipation(net, flow),
        "source_pressure_product": sp,
    })
}

pub fn solve(input: Option<&Path>, cfg: &DiscreteConfig) -> Result<Artifacts> {
    cfg.validate()?;
    let path = network_input(input, cfg)?;
    let net = formats::load_network(&path)?;
    let v = net.validate(murraynet_core::network::DEFAULT_MASS_TOL);
    let flow = kirchhoff(cfg).solve(&net)?;
    let mut a = Artifacts {
        inputs: vec![path],
        ..Default::default()
    };
    a.file("pressures.csv", node_values_csv("pressure", &flow.pressure));
    a.file("fluxes.csv", edge_flux_csv(&net, &flow.flux));
    let mut report = flow_report(&net, &flow);
    report["mass_balance_defect"] = json!(v.mass_balance_defect);
    report["positive_subgraph_connected"] = json!(v.positive_subgraph_connected);
    a.lines.push(format!(
        "kirchhoff defect {}",
        num(report["kirchhoff_defect"].as_f64().unwrap_or(0.0))
    ));
    a.report = report;
    Ok(a)
}

pub fn optimize(input: Option<&Path>, cfg: &DiscreteConfig) -> Result<Artifacts> {
    let ocfg = cfg.optimizer()?;
    let path = network_input(input, cfg)?;
    let net = formats::load_network(&path)?;
    let e0 = energy(&net, &ocfg.params)?;
    let (opt, trace) = descend(&net, &ocfg)?;
    let flow = kirchhoff(cfg).solve(&opt)?;
    let mut csv = Csv::new(&["iter", "energy", "grad_norm", "step", "floored_edges"]);
    for r in &trace.records {
        csv.row(&[
            r.iter.to_string(),
            num(r.energy),
            num(r.grad_norm),
            num(r.step),
            r.floored_edges.to_string(),
        ]);
    }
    let monotone = trace.records.windows(2).all(|w| w[1].energy <= w[0].energy);
    let kkt = kkt_residual(&opt, &ocfg.params, ocfg.c_min)?;
    let mut a = Artifacts {
        inputs: vec![path],
        ..Default::default()
    };
    a.file("network.json", formats::network_json(&opt));
    a.file("trace.csv", csv.finish());
    a.file("pressures.csv", node_values_csv("pressure", &flow.pressure));
    a.file("fluxes.csv", edge_flux_csv(&opt, &flow.flux));
    let status = format!("{:?}", trace.status);
    a.lines.push(format!(
        "{status} after {} iterations",
        trace.records.len().saturating_sub(1)
    ));
    a.report = json!({
        "status": status,
        "iterations": trace.records.len().saturating_sub(1),
        "energy_initial": e0,
        "energy_final": trace.records.last().map(|r| r.energy),
        "energy_monotone": monotone,
        "max_kkt_residual": max_abs(&kkt),
        "floored_edges": trace.records.last().map(|r| r.floored_edges),
        "conductivities": opt.conductivities(),
        "flow": flow_report(&opt, &flow),
    });
    Ok(a)
}

pub fn check_murray(input: Option<&Path>, cfg: &DiscreteConfig) -> Result<Artifacts> {
    let params = cfg.params()?;
    let path = network_input(input, cfg)?;
    let net = formats::load_network(&path)?;
    let flow = kirchhoff(cfg).solve(&net)?;
    let rep = node_murray_report(&net, &flow, &params, cfg.flux_eps);
    let plumbing = node_flux_report(&net, &flow, cfg.flux_eps);
    let join = |v: &[usize]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut csv = Csv::new(&["node", "residual", "n_plus", "n_minus", "source"]);
    for n in &rep.nodes {
        csv.row(&[
            n.node.to_string(),
            num(n.residual),
            join(&n.n_plus),
            join(&n.n_minus),
            num(n.source),
        ]);
    }
    let mut a = Artifacts {
        inputs: vec![path],
        ..Default::default()
    };
    a.file("murray.csv", csv.finish());
    a.lines.push(format!(
        "max node residual {} (exponent {})",
        num(rep.summary.max_residual),
        num(rep.summary.exponent)
    ));
    a.report = json!({
        "exponent": rep.summary.exponent,
        "max_residual": rep.summary.max_residual,
        "mean_residual": rep.summary.mean_residual,
        "flux_form_max_residual": plumbing.summary.max_residual,
        "kirchhoff_defect": max_abs(&kirchhoff_defect(&net, &flow)),
    });
    Ok(a)
}

fn continuum_inputs(cfg: &ContinuumConfig) -> Vec<PathBuf> {
    use crate::config::FieldSpec;
    let mut v = Vec::new();
    for spec in [&cfg.r, &cfg.source] {
        if let FieldSpec::Csv { csv } = spec {
            v.push(csv.clone());
        }
    }
    v.extend(cfg.orientation_mask.clone());
    v
}

pub fn balance_json(b: &BalanceRecord) -> Value {
    json!({
        "influx": b.influx,
        "outflux": b.outflux,
        "source_integral": b.source_integral,
        "residual": b.residual,
        "imbalance": b.imbalance,
        "raw_influx": b.raw_influx,
        "raw_outflux": b.raw_outflux,
        "raw_residual": b.raw_residual,
        "murray_raw_gap": b.murray_raw_gap,
        "exact_source_integral": b.exact_source_integral,
        "exact_residual": b.exact_residual,
        "boundary_faces": b.boundary_faces,
        "null_faces": b.null_faces,
    })
}

fn solve_grid(
    cfg: &ContinuumConfig,
) -> Result<(
    murraynet_core::continuum_grid::ContinuumProblem,
    GridField,
    Value,
)> {
    if cfg.model != Model::Grid {
        return Err(CliError::Config(
            "continuum.model must be \"grid\" for this command".into(),
        ));
    }
    let problem = cfg.problem()?;
    let zero = GridField::zeros(problem.grid().clone());
    let (field, outcome) = solve_pressure_from(&problem, &zero, cfg.tol, cfg.max_iter)?;
    let field = face_fluxes(&field, &problem);
    let mut report = json!({
        "cells": problem.grid().cells(),
        "iterations": outcome.iterations,
        "residual": outcome.residual,
        "weak_residual": max_abs(&pressure_residual(&field, &problem)),
        "functional": functional_value(&field, &problem),
        "source_shift": problem.source_shift(),
        "crit_residual": crit_residual(&field, &problem),
    });
    if problem.grid().dim() == 1 {
        if let Ok(o) = oracle_1d(&problem) {
            let err = field
                .p
                .iter()
                .zip(&o.p)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            report["oracle_linf"] = json!(err);
        }
    }
    Ok((problem, field, report))
}

pub fn solve_continuum(cfg: &ContinuumConfig) -> Result<Artifacts> {
    let (problem, field, report) = solve_grid(cfg)?;
    let grid = problem.grid();
    let mut a = Artifacts {
        inputs: continuum_inputs(cfg),
        ..Default::default()
    };
    a.file("p.csv", cell_csv(grid, &field.p));
    for k in 0..grid.dim() {
        let axis = ["x", "y"][k];
        a.file(&format!("c_{axis}.csv"), face_csv(grid, k, &field.c[k]));
        a.file(&format!("q_{axis}.csv"), face_csv(grid, k, &field.q[k]));
    }
    a.lines.push(format!(
        "{} iterations, residual {}",
        report["iterations"],
        num(report["residual"].as_f64().unwrap_or(0.0))
    ));
    a.report = report;
    Ok(a)
}

pub fn check_continuum_murray(cfg: &ContinuumConfig) -> Result<Artifacts> {
    let mask = cfg.subdomain_mask(&cfg.grid()?)?;
    let (problem, field, solve) = solve_grid(cfg)?;
    let b = murray_balance(&field, &problem, &mask, cfg.sign_eps)?;
    let mut a = Artifacts {
        inputs: continuum_inputs(cfg),
        ..Default::default()
    };
    a.lines.push(format!(
        "balance residual {} (Murray/raw gap {})",
        num(b.residual),
        num(b.murray_raw_gap)
    ));
    let rec = balance_json(&b);
    a.file("balance.json", formats::pretty(&rec));
    a.report = json!({ "solve": solve, "balance": rec, "subdomain_cells": mask.iter().filter(|&&x| x).count() });
    Ok(a)
}

fn solve_vector(cfg: &ContinuumConfig) -> Result<(VectorProblem, VectorState, Value)> {
    if cfg.model != Model::Vector {
        return Err(CliError::Config(
            "continuum.model must be \"vector\" for this command".into(),
        ));
    }
    let problem = VectorProblem::new(cfg.problem()?)?;
    let zero = vec![0.0; problem.grid().cell_count()];
    let (state, outcome) = solve_pressure_vec_from(&problem, &zero, cfg.tol, cfg.max_iter)?;
    let minus = cfg.orientation(problem.grid())?;
    let state = reconstruct_m(&state, &problem, cfg.sign_eps, minus.as_deref())?;
    let report = json!({
        "cells": problem.grid().cells(),
        "iterations": outcome.iterations,
        "residual": outcome.residual,
        "source_shift": problem.continuum().source_shift(),
        "eigen_residual": max_abs(&eigen_residual(&state, &problem)),
        "magnitude_residual": magnitude_residual(&state, &problem),
        "alignment_residual": alignment_residual(&state),
        "sign_eps": state.sign_eps,
    });
    Ok((problem, state, report))
}

pub fn solve_phenom(cfg: &ContinuumConfig) -> Result<Artifacts> {
    let (problem, state, report) = solve_vector(cfg)?;
    let grid = problem.grid();
    let q = face_fluxes_vec(&state, &problem);
    let mut a = Artifacts {
        inputs: continuum_inputs(cfg),
        ..Default::default()
    };
    a.file("p.csv", cell_csv(grid, &state.p));
    a.file(
        "m_x.csv",
        cell_csv(grid, &state.m.iter().map(|m| m[0]).collect::<Vec<_>>()),
    );
    a.file(
        "m_y.csv",
        cell_csv(grid, &state.m.iter().map(|m| m[1]).collect::<Vec<_>>()),
    );
    a.file("m_norm.csv", cell_csv(grid, &state.m_norm()));
    a.file("q_x.csv", face_csv(grid, 0, &q[0]));
    a.file("q_y.csv", face_csv(grid, 1, &q[1]));
    a.lines.push(format!(
        "{} iterations, eigen residual {}",
        report["iterations"],
        num(report["eigen_residual"].as_f64().unwrap_or(0.0))
    ));
    a.report = report;
    Ok(a)
}

pub fn check_phenom_murray(cfg: &ContinuumConfig) -> Result<Artifacts> {
    let mask = cfg.subdomain_mask(&cfg.grid()?)?;
    let (problem, state, solve) = solve_vector(cfg)?;
    let b = murray_balance_vec(&state, &problem, &mask)?;
    let mut a = Artifacts {
        inputs: continuum_inputs(cfg),
        ..Default::default()
    };
    a.lines.push(format!(
        "balance residual {} (Murray/raw gap {})",
        num(b.residual),
        num(b.murray_raw_gap)
    ));
    let rec = balance_json(&b);
    a.file("balance.json", formats::pretty(&rec));
    a.report = json!({ "solve": solve, "balance": rec, "subdomain_cells": mask.iter().filter(|&&x| x).count() });
    Ok(a)
}
