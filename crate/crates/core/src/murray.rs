//! Murray-law identities: the single-tube optimum, the classical radius and
//! conductivity laws at one branching, and the node-wise balance
//! `√ν Σ_{N⁺(i)} C^{(γ+1)/2} + S_i = √ν Σ_{N⁻(i)} C^{(γ+1)/2}` on networks.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::discrete_optim::MetabolicParams;
use crate::error::Error;
use crate::kirchhoff::FlowState;
use crate::math;
use crate::network::Network;
use crate::Result;

/// A single laminar tube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeParams {
    pub radius: f64,
    pub length: f64,
    pub viscosity: f64,
    pub nu: f64,
    pub flow: f64,
}

impl TubeParams {
    pub fn new(radius: f64, length: f64, viscosity: f64, nu: f64, flow: f64) -> Result<Self> {
        for (name, value) in [
            ("radius", radius),
            ("length", length),
            ("viscosity", viscosity),
            ("nu", nu),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        if !flow.is_finite() {
            return Err(Error::InvalidParameter {
                name: "flow",
                value: flow,
            });
        }
        Ok(TubeParams {
            radius,
            length,
            viscosity,
            nu,
            flow,
        })
    }
}

/// Pumping power (Hagen–Poiseuille) plus metabolic cost of the tube volume:
/// `8μL/(πR⁴) Q² + νπLR²`.
pub fn tube_energy(t: &TubeParams) -> f64 {
    let r2 = t.radius * t.radius;
    8.0 * t.viscosity * t.length / (PI * r2 * r2) * t.flow * t.flow + t.nu * PI * t.length * r2
}

/// Flow rate at which radius `R` is energy-optimal: `Q = √(π²ν/(16μ)) R³`.
pub fn optimal_flow(radius: f64, viscosity: f64, nu: f64) -> f64 {
    math::sqrt(PI * PI * nu / (16.0 * viscosity)) * radius * radius * radius
}

/// Inverse of [`optimal_flow`]: the optimal radius for a given `|Q|`.
pub fn optimal_radius(flow: f64, viscosity: f64, nu: f64) -> f64 {
    math::powf(
        flow.abs() / math::sqrt(PI * PI * nu / (16.0 * viscosity)),
        1.0 / 3.0,
    )
}

/// Relative mismatch `|P^e − Σ c_i^e| / P^e` of a power law at one branching.
pub fn power_law_residual(parent: f64, children: &[f64], exponent: f64) -> Result<f64> {
    for &v in core::iter::once(&parent).chain(children) {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter {
                name: "branch",
                value: v,
            });
        }
    }
    let lhs = math::powf(parent, exponent);
    let rhs = math::sum(children.iter().map(|&c| math::powf(c, exponent)));
    Ok((lhs - rhs).abs() / lhs)
}

/// Classical radius law `R₀³ = Σ Rᵢ³`.
pub fn radius_law_residual(parent: f64, children: &[f64]) -> Result<f64> {
    power_law_residual(parent, children, 3.0)
}

/// Classical conductivity law `C₀^{3/4} = Σ Cᵢ^{3/4}`.
pub fn conductivity_34_residual(parent: f64, children: &[f64]) -> Result<f64> {
    power_law_residual(parent, children, 0.75)
}

/// Balance at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeBalance {
    pub node: usize,
    /// `√ν Σ_{N⁺} C^{(γ+1)/2}` over neighbors with `Q_ij ≥ 0` (flow into the node).
    pub inflow_power_sum: f64,
    /// `√ν Σ_{N⁻} C^{(γ+1)/2}` over neighbors with `Q_ij < 0`.
    pub outflow_power_sum: f64,
    pub source: f64,
    pub residual: f64,
    pub n_plus: Vec<usize>,
    pub n_minus: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MurraySummary {
    pub max_residual: f64,
    pub mean_residual: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MurrayReport {
    pub nodes: Vec<NodeBalance>,
    pub summary: MurraySummary,
}

/// Node-wise generalized Murray law for a solved flow.
///
/// Neighbors split by the sign of `Q_ij`; `|Q_ij| ≤ flux_eps` counts as `N⁺`.
/// The residual is normalized by `√ν Σ_{N(i)} C^{(γ+1)/2} + |S_i|`.
pub fn node_murray_report(
    net: &Network,
    flow: &FlowState,
    params: &MetabolicParams,
    flux_eps: f64,
) -> MurrayReport {
    let exponent = params.murray_exponent();
    let root_nu = math::sqrt(params.nu);
    let c = net.conductivities();
    balance(net, flow, flux_eps, exponent, |k| {
        root_nu * math::powf(c[k], exponent)
    })
}

/// The same balance with `|Q_ij|` as the edge weight.
///
/// This is the Kirchhoff law rewritten, so it holds at any solved flow; it
/// checks the report plumbing independently of criticality.
pub fn node_flux_report(net: &Network, flow: &FlowState, flux_eps: f64) -> MurrayReport {
    balance(net, flow, flux_eps, f64::NAN, |k| flow.flux[k].abs())
}

fn balance(
    net: &Network,
    flow: &FlowState,
    flux_eps: f64,
    exponent: f64,
    weight: impl Fn(usize) -> f64,
) -> MurrayReport {
    let mut nodes = Vec::with_capacity(net.node_count());
    for i in 0..net.node_count() {
        let mut n_plus = Vec::new();
        let mut n_minus = Vec::new();
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for &(j, k) in net.neighbors(i) {
            let q_ij = if i < j { flow.flux[k] } else { -flow.flux[k] };
            if q_ij >= -flux_eps.abs() {
                n_plus.push(j);
                plus.push(weight(k));
            } else {
                n_minus.push(j);
                minus.push(weight(k));
            }
        }
        let inflow = math::sum(plus.iter().copied());
        let outflow = math::sum(minus.iter().copied());
        let s = net.sources()[i];
        let norm = inflow + outflow + s.abs();
        let defect = (inflow + s - outflow).abs();
        let residual = if norm > 0.0 { defect / norm } else { defect };
        nodes.push(NodeBalance {
            node: i,
            inflow_power_sum: inflow,
            outflow_power_sum: outflow,
            source: s,
            residual,
            n_plus,
            n_minus,
        });
    }
    let max_residual = nodes.iter().fold(0.0f64, |m, n| m.max(n.residual));
    let mean_residual = if nodes.is_empty() {
        0.0
    } else {
        math::sum(nodes.iter().map(|n| n.residual)) / nodes.len() as f64
    };
    MurrayReport {
        nodes,
        summary: MurraySummary {
            max_residual,
            mean_residual,
            exponent,
        },
    }
}
