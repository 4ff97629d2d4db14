//! Phenomenological continuum model with permeability `rI + m⊗m`.
//!
//! Under the stability assumption that the active set is all of `Ω`, the
//! pressure solves the isotropic problem
//! `−∇·((r + ν^{1/(1−γ)} |∇p|^{2/(γ−1)}) ∇p) = S` with no-flux boundaries, and
//! `m` is recovered cell-wise as a multiple of `∇p`.
//!
//! Everything is collocated at cell centers. Gradients are central
//! differences with mirrored ghost cells, so a boundary cell sees half the
//! difference to its inner neighbour. Face fluxes are averages of the two
//! adjacent cell fluxes and vanish on the domain boundary; with this choice
//! the discrete divergence of the face flux is exactly the gradient of the
//! discrete functional.

use alloc::vec;
use alloc::vec::Vec;

use crate::continuum_grid::{
    accumulate_balance, attach_exact, check_mask, ContinuumProblem, FaceTerm, GridField, RectGrid,
    Sign, BALANCE_FLOOR_REL, DEFAULT_SIGN_EPS_REL,
};
use crate::error::Error;
use crate::math;
use crate::minimize::{minimize_zero_mean, MinimizeOutcome, Objective};
use crate::profile::gauss_legendre;
use crate::Result;

pub use crate::continuum_grid::BalanceRecord;

/// Two-dimensional problem for the vector model. `γ ∈ (1, 2]` is the
/// documented range; larger `γ` is accepted since `m` is computed from its
/// magnitude and direction separately.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorProblem {
    inner: ContinuumProblem,
}

impl VectorProblem {
    pub fn new(inner: ContinuumProblem) -> Result<Self> {
        if inner.grid().dim() != 2 {
            return Err(Error::DimensionMismatch {
                what: "vector model dimension",
                expected: 2,
                found: inner.grid().dim(),
            });
        }
        Ok(VectorProblem { inner })
    }

    pub fn continuum(&self) -> &ContinuumProblem {
        &self.inner
    }

    pub fn grid(&self) -> &RectGrid {
        self.inner.grid()
    }

    pub fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    pub fn nu(&self) -> f64 {
        self.inner.nu()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorState {
    pub grid: RectGrid,
    pub p: Vec<f64>,
    pub grad_p: Vec<[f64; 2]>,
    /// Empty until [`reconstruct_m`].
    pub m: Vec<[f64; 2]>,
    pub orientation: Vec<Sign>,
    pub sign_eps: f64,
}

impl VectorState {
    pub fn from_pressure(grid: RectGrid, p: Vec<f64>) -> Result<Self> {
        if p.len() != grid.cell_count() {
            return Err(Error::DimensionMismatch {
                what: "pressure",
                expected: grid.cell_count(),
                found: p.len(),
            });
        }
        let grad_p = cell_gradients(&grid, &p);
        Ok(VectorState {
            grid,
            p,
            grad_p,
            m: Vec::new(),
            orientation: Vec::new(),
            sign_eps: 0.0,
        })
    }

    pub fn has_m(&self) -> bool {
        !self.m.is_empty()
    }

    /// `|m|` per cell.
    pub fn m_norm(&self) -> Vec<f64> {
        self.m.iter().map(|m| math::hypot(m[0], m[1])).collect()
    }

    /// Cell fluxes `q = −(r + |m|²) ∇p`.
    pub fn cell_fluxes(&self, problem: &VectorProblem) -> Vec<[f64; 2]> {
        let r = problem.inner.r();
        self.grad_p
            .iter()
            .zip(&self.m)
            .zip(r)
            .map(|((g, m), &r)| {
                let a = r + (m[0] * m[0] + m[1] * m[1]);
                [-a * g[0], -a * g[1]]
            })
            .collect()
    }
}

fn neighbours(grid: &RectGrid, c: usize, k: usize) -> (usize, usize) {
    let [i, j] = grid.cell_coords(c);
    let n = grid.n(k);
    let (pos, step) = if k == 0 { (i, 1) } else { (j, grid.n(0)) };
    let lo = if pos == 0 { c } else { c - step };
    let hi = if pos + 1 == n { c } else { c + step };
    (lo, hi)
}

/// Central differences with mirrored ghosts.
pub fn cell_gradients(grid: &RectGrid, p: &[f64]) -> Vec<[f64; 2]> {
    let h = [grid.spacing(0), grid.spacing(1)];
    (0..grid.cell_count())
        .map(|c| {
            let mut g = [0.0; 2];
            for (k, gk) in g.iter_mut().enumerate() {
                let (lo, hi) = neighbours(grid, c, k);
                *gk = (p[hi] - p[lo]) / (2.0 * h[k]);
            }
            g
        })
        .collect()
}

struct VectorObjective<'a> {
    problem: &'a ContinuumProblem,
}

impl VectorObjective<'_> {
    fn coefficient(&self, g: [f64; 2]) -> f64 {
        let gamma = self.problem.gamma();
        let kappa = math::powf(self.problem.nu(), 1.0 / (1.0 - gamma));
        kappa * math::powf(g[0] * g[0] + g[1] * g[1], 1.0 / (gamma - 1.0))
    }
}

impl Objective for VectorObjective<'_> {
    fn dim(&self) -> usize {
        self.problem.grid().cell_count()
    }

    fn value(&self, p: &[f64]) -> f64 {
        let pr = self.problem;
        let gamma = pr.gamma();
        let beta = gamma / (gamma - 1.0);
        let kappa = (gamma - 1.0) / (2.0 * gamma) * math::powf(pr.nu(), 1.0 / (1.0 - gamma));
        let grads = cell_gradients(pr.grid(), p);
        let cells = grads.iter().zip(pr.r()).map(|(g, &r)| {
            let sq = g[0] * g[0] + g[1] * g[1];
            0.5 * r * sq + kappa * math::powf(sq, beta)
        });
        pr.grid().cell_volume() * (math::sum(cells) - math::dot(pr.source(), p))
    }

    fn gradient(&self, p: &[f64], out: &mut [f64]) {
        let pr = self.problem;
        let grid = pr.grid();
        let h = [grid.spacing(0), grid.spacing(1)];
        for (o, s) in out.iter_mut().zip(pr.source()) {
            *o = -s;
        }
        let grads = cell_gradients(grid, p);
        for (c, (g, &r)) in grads.iter().zip(pr.r()).enumerate() {
            let a = r + self.coefficient(*g);
            for k in 0..2 {
                let w = a * g[k] / (2.0 * h[k]);
                let (lo, hi) = neighbours(grid, c, k);
                out[hi] += w;
                out[lo] -= w;
            }
        }
    }
}

/// Zero-mean minimizer of the isotropic functional, from `p ≡ 0`.
pub fn solve_pressure_vec(
    problem: &VectorProblem,
    tol: f64,
    max_iter: usize,
) -> Result<VectorState> {
    let zero = vec![0.0; problem.grid().cell_count()];
    solve_pressure_vec_from(problem, &zero, tol, max_iter).map(|(s, _)| s)
}

pub fn solve_pressure_vec_from(
    problem: &VectorProblem,
    initial: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(VectorState, MinimizeOutcome)> {
    let grid = problem.grid();
    if initial.len() != grid.cell_count() {
        return Err(Error::DimensionMismatch {
            what: "initial pressure",
            expected: grid.cell_count(),
            found: initial.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: tol,
        });
    }
    problem.inner.check_projected()?;
    let obj = VectorObjective {
        problem: &problem.inner,
    };
    let mut p = initial.to_vec();
    let outcome = minimize_zero_mean(&obj, &mut p, tol, max_iter)?;
    Ok((VectorState::from_pressure(grid.clone(), p)?, outcome))
}

/// Functional value of the isotropic problem at `p`.
pub fn functional_value_vec(p: &[f64], problem: &VectorProblem) -> f64 {
    VectorObjective {
        problem: &problem.inner,
    }
    .value(p)
}

/// Cell-wise `div q − S` for the solver's own flux.
pub fn pressure_residual_vec(p: &[f64], problem: &VectorProblem) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    VectorObjective {
        problem: &problem.inner,
    }
    .gradient(p, &mut out);
    out
}

/// `1e-12 · max |∇p|`.
pub fn default_sign_eps(state: &VectorState) -> f64 {
    DEFAULT_SIGN_EPS_REL
        * state
            .grad_p
            .iter()
            .map(|g| math::hypot(g[0], g[1]))
            .fold(0.0, f64::max)
}

/// Fills `m = σ ν^{1/(2(1−γ))} |∇p|^{1/(γ−1)} ∇p/|∇p|` with `σ = +1`, or `−1`
/// on cells where `minus` is true; `m = 0` and the label is null where
/// `|∇p| ≤ sign_eps`.
pub fn reconstruct_m(
    state: &VectorState,
    problem: &VectorProblem,
    sign_eps: Option<f64>,
    minus: Option<&[bool]>,
) -> Result<VectorState> {
    let n = state.p.len();
    if let Some(mask) = minus {
        if mask.len() != n {
            return Err(Error::DimensionMismatch {
                what: "orientation mask",
                expected: n,
                found: mask.len(),
            });
        }
    }
    let eps = sign_eps.unwrap_or_else(|| default_sign_eps(state));
    let gamma = problem.gamma();
    let scale = math::powf(problem.nu(), 1.0 / (2.0 * (1.0 - gamma)));
    let mut out = state.clone();
    out.sign_eps = eps;
    out.m = Vec::with_capacity(n);
    out.orientation = Vec::with_capacity(n);
    for (c, g) in state.grad_p.iter().enumerate() {
        let norm = math::hypot(g[0], g[1]);
        if norm <= eps {
            out.m.push([0.0, 0.0]);
            out.orientation.push(Sign::Null);
            continue;
        }
        let flip = minus.map(|m| m[c]).unwrap_or(false);
        let sigma = if flip { -1.0 } else { 1.0 };
        let mag = scale * math::powf(norm, 1.0 / (gamma - 1.0));
        out.m
            .push([sigma * mag * (g[0] / norm), sigma * mag * (g[1] / norm)]);
        out.orientation
            .push(if flip { Sign::Minus } else { Sign::Plus });
    }
    Ok(out)
}

/// `|(g·m) g − ν|m|^{2(γ−1)} m| / (ν|m|^{2γ−1} + floor)` for one cell.
pub fn eigen_residual_cell(g: [f64; 2], m: [f64; 2], nu: f64, gamma: f64) -> f64 {
    let gm = g[0] * m[0] + g[1] * m[1];
    let mn = math::hypot(m[0], m[1]);
    let lam = nu * math::powf(mn, 2.0 * (gamma - 1.0));
    let v = [gm * g[0] - lam * m[0], gm * g[1] - lam * m[1]];
    math::hypot(v[0], v[1]) / (lam * mn + f64::MIN_POSITIVE)
}

/// Per-cell eigenvector residual; needs `m`.
pub fn eigen_residual(state: &VectorState, problem: &VectorProblem) -> Vec<f64> {
    state
        .grad_p
        .iter()
        .zip(&state.m)
        .map(|(&g, &m)| eigen_residual_cell(g, m, problem.nu(), problem.gamma()))
        .collect()
}

/// Largest relative defect of `ν|m|^{2(γ−1)} = |∇p|²` on nonnull cells.
pub fn magnitude_residual(state: &VectorState, problem: &VectorProblem) -> f64 {
    let mut worst: f64 = 0.0;
    for ((g, m), s) in state.grad_p.iter().zip(&state.m).zip(&state.orientation) {
        if *s == Sign::Null {
            continue;
        }
        let lhs = problem.nu() * math::powf(math::hypot(m[0], m[1]), 2.0 * (problem.gamma() - 1.0));
        let rhs = g[0] * g[0] + g[1] * g[1];
        worst = worst.max((lhs - rhs).abs() / rhs);
    }
    worst
}

/// Largest `|m × ∇p| / (|m||∇p|)` on nonnull cells.
pub fn alignment_residual(state: &VectorState) -> f64 {
    let mut worst: f64 = 0.0;
    for ((g, m), s) in state.grad_p.iter().zip(&state.m).zip(&state.orientation) {
        if *s == Sign::Null {
            continue;
        }
        let cross = m[0] * g[1] - m[1] * g[0];
        worst = worst.max(cross.abs() / (math::hypot(m[0], m[1]) * math::hypot(g[0], g[1])));
    }
    worst
}

/// Face flux through face `f` of axis `k`: average of the adjacent cell
/// values of `field[·][k]`, zero on the domain boundary.
fn face_average(grid: &RectGrid, field: &[[f64; 2]], k: usize, f: usize) -> f64 {
    match grid.face_cells(k, f) {
        (Some(a), Some(b)) => 0.5 * (field[a][k] + field[b][k]),
        _ => 0.0,
    }
}

/// Face-centered fluxes per axis from the cell fluxes `−(r + |m|²)∇p`.
pub fn face_fluxes_vec(state: &VectorState, problem: &VectorProblem) -> Vec<Vec<f64>> {
    let q = state.cell_fluxes(problem);
    let grid = &state.grid;
    (0..2)
        .map(|k| {
            (0..grid.face_count(k))
                .map(|f| face_average(grid, &q, k, f))
                .collect()
        })
        .collect()
}

/// Murray-law balance over the cells where `subdomain` is true.
///
/// The Murray-form cell vector is `−√ν (r + |m|²) |m|^{γ−1} σ û` with
/// `û = m/|m|`, which reproduces the cell flux; null cells contribute zero.
/// Face values are averaged like the raw flux.
pub fn murray_balance_vec(
    state: &VectorState,
    problem: &VectorProblem,
    subdomain: &[bool],
) -> Result<BalanceRecord> {
    if !state.has_m() {
        return Err(Error::MissingAnalyticProfile {
            what: "m (call reconstruct_m first)",
        });
    }
    let grid = problem.grid();
    check_mask(grid, subdomain)?;
    let gamma = problem.gamma();
    let sqrt_nu = math::sqrt(problem.nu());
    let raw = state.cell_fluxes(problem);
    let murray: Vec<[f64; 2]> = state
        .m
        .iter()
        .zip(&state.orientation)
        .zip(problem.inner.r())
        .map(|((m, s), &r)| {
            let mn = math::hypot(m[0], m[1]);
            if *s == Sign::Null || mn == 0.0 {
                return [0.0, 0.0];
            }
            let w = -sqrt_nu
                * (r + (m[0] * m[0] + m[1] * m[1]))
                * math::powf(mn, gamma - 1.0)
                * s.value();
            [w * (m[0] / mn), w * (m[1] / mn)]
        })
        .collect();
    let (raw, murray) = (&raw, &murray);
    let terms = (0..grid.cell_count())
        .filter(|&c| subdomain[c])
        .flat_map(|c| {
            grid.cell_faces(c).filter_map(move |(k, f, n)| {
                let other = match grid.face_cells(k, f) {
                    (Some(a), Some(b)) => {
                        if a == c {
                            b
                        } else {
                            a
                        }
                    }
                    _ => return None,
                };
                if subdomain[other] {
                    return None;
                }
                let area = grid.face_area(k);
                let null =
                    state.orientation[c] == Sign::Null || state.orientation[other] == Sign::Null;
                Some(FaceTerm {
                    raw: n * face_average(grid, raw, k, f) * area,
                    murray: n * face_average(grid, murray, k, f) * area,
                    null,
                })
            })
        });
    let vol = grid.cell_volume();
    let src = problem.inner.source();
    let source_integral = math::sum(
        (0..grid.cell_count())
            .filter(|&c| subdomain[c])
            .map(|c| src[c]),
    ) * vol;
    let floor = BALANCE_FLOOR_REL * problem.inner.source_abs_total() + f64::MIN_POSITIVE;
    let mut rec = accumulate_balance(terms, source_integral, floor);
    attach_exact(&mut rec, &problem.inner, subdomain, floor);
    Ok(rec)
}

/// Radially symmetric reference pressure at cell centers.
///
/// Needs a radial source profile and a constant `r`. The outward radial flux
/// is `q(ρ) = ρ^{−1} ∫₀^ρ S(s) s ds`; `u = ∂_ρ p` solves
/// `r u + ν^{1/(1−γ)} |u|^{2/(γ−1)} u = −q`, and `p` is integrated outward
/// from the center, then gauged to zero discrete mean.
pub fn radial_oracle(problem: &VectorProblem) -> Result<GridField> {
    let pr = &problem.inner;
    let src = *pr
        .source_profile()
        .ok_or(Error::MissingAnalyticProfile { what: "source" })?;
    let center = src.center().ok_or(Error::MissingAnalyticProfile {
        what: "radial source",
    })?;
    let r = pr
        .r_profile()
        .and_then(|p| {
            p.radial(0.0)
                .filter(|_| matches!(p, crate::profile::Profile::Constant(_)))
        })
        .ok_or(Error::MissingAnalyticProfile { what: "constant r" })?;
    let grid = problem.grid();
    let gamma = pr.gamma();
    let kappa = math::powf(pr.nu(), 1.0 / (1.0 - gamma));
    let e = 2.0 / (gamma - 1.0);
    let radial = |s: f64| src.radial(s).unwrap_or(0.0) * s;

    let rho: Vec<f64> = (0..grid.cell_count())
        .map(|c| {
            let x = grid.cell_center(c);
            math::hypot(x[0] - center[0], x[1] - center[1])
        })
        .collect();
    let mut order: Vec<usize> = (0..rho.len()).collect();
    order.sort_by(|&a, &b| rho[a].total_cmp(&rho[b]));

    let mut p = vec![0.0; rho.len()];
    let (mut at, mut mass, mut pres) = (0.0, 0.0, 0.0);
    for &c in &order {
        let to = rho[c];
        if to > at {
            let mut du = 0.0;
            for &(t, w) in &crate::profile::GL8 {
                let s = at + 0.5 * (to - at) * (1.0 + t);
                let q = (mass + gauss_legendre(radial, at, s, 1)) / s;
                du += 0.5 * (to - at) * w * crate::continuum_grid::solve_scalar(r, kappa, e, -q)?;
            }
            mass += gauss_legendre(radial, at, to, 1);
            pres += du;
            at = to;
        }
        p[c] = pres;
    }
    let mean = math::sum(p.iter().copied()) / p.len() as f64;
    for v in &mut p {
        *v -= mean;
    }
    GridField::new(grid.clone(), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum_grid::{box_mask, project_source};
    use crate::profile::Profile;

    fn radial_problem(n: usize, gamma: f64) -> VectorProblem {
        let grid = RectGrid::rect(1.0, 1.0, n, n).unwrap();
        let src = Profile::RadialHat {
            amplitude: 50.0,
            sigma: 0.15,
            center: [0.5, 0.5],
        };
        let pr =
            ContinuumProblem::from_profiles(grid, gamma, 1.0, Profile::Constant(1.0), src).unwrap();
        VectorProblem::new(project_source(&pr)).unwrap()
    }

    fn single_cell_problem(gamma: f64, nu: f64) -> VectorProblem {
        let grid = RectGrid::rect(1.0, 1.0, 2, 2).unwrap();
        VectorProblem::new(
            ContinuumProblem::new(grid, gamma, nu, vec![1.0; 4], vec![0.0; 4]).unwrap(),
        )
        .unwrap()
    }

    fn state_with_grad(g: [f64; 2]) -> VectorState {
        let grid = RectGrid::rect(1.0, 1.0, 2, 2).unwrap();
        let mut s = VectorState::from_pressure(grid, vec![0.0; 4]).unwrap();
        s.grad_p = vec![g; 4];
        s
    }

    #[test]
    fn m_examples() {
        let s = reconstruct_m(
            &state_with_grad([3.0, 4.0]),
            &single_cell_problem(2.0, 1.0),
            None,
            None,
        )
        .unwrap();
        assert!((s.m[0][0] - 3.0).abs() < 1e-14 && (s.m[0][1] - 4.0).abs() < 1e-14);
        let pr = single_cell_problem(1.5, 4.0);
        let s = reconstruct_m(&state_with_grad([1.0, 0.0]), &pr, None, None).unwrap();
        assert!((s.m[0][0] - 0.25).abs() < 1e-15 && s.m[0][1] == 0.0);
        assert!(magnitude_residual(&s, &pr) < 1e-14);
        let s = reconstruct_m(&state_with_grad([0.0, 0.0]), &pr, None, None).unwrap();
        assert_eq!(s.m[0], [0.0, 0.0]);
        assert_eq!(s.orientation[0], Sign::Null);
    }

    #[test]
    fn eigen_residual_examples() {
        let g = [3.0, 4.0];
        assert!(eigen_residual_cell(g, g, 1.0, 2.0) < 1e-15);
        assert!((eigen_residual_cell(g, [-4.0, 3.0], 1.0, 2.0) - 1.0).abs() < 1e-15);
        // doubled m: |(g·2g)g − 4|g|²·2g| / (8|g|³) = |50 − 200|·5 / 1000
        let r = eigen_residual_cell(g, [6.0, 8.0], 1.0, 2.0);
        assert!((r - 0.75).abs() < 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pr = radial_problem(6, 1.5);
        let obj = VectorObjective { problem: &pr.inner };
        let p: Vec<f64> = (0..36).map(|i| math::sin(i as f64 * 0.7) * 0.3).collect();
        let mut g = vec![0.0; 36];
        obj.gradient(&p, &mut g);
        let vol = pr.grid().cell_volume();
        for i in [0, 5, 14, 35] {
            let h = 1e-6;
            let mut a = p.clone();
            let mut b = p.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (obj.value(&a) - obj.value(&b)) / (2.0 * h) / vol;
            assert!(
                (fd - g[i]).abs() < 1e-5 * (1.0 + g[i].abs()),
                "{i}: {fd} vs {}",
                g[i]
            );
        }
    }

    #[test]
    fn radial_solution_and_balance() {
        let pr = radial_problem(32, 2.0);
        let s = solve_pressure_vec(&pr, 1e-10, 100_000).unwrap();
        let o = radial_oracle(&pr).unwrap();
        let pmax = math::max_abs(&s.p);
        let err =
            s.p.iter()
                .zip(&o.p)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
        assert!(err < 0.05 * pmax, "{err} vs {pmax}");
        let s = reconstruct_m(&s, &pr, None, None).unwrap();
        assert!(eigen_residual(&s, &pr).iter().all(|&r| r < 1e-12));
        assert!(alignment_residual(&s) < 1e-12);
        let mask = box_mask(pr.grid(), [0.2, 0.2], [0.8, 0.8]);
        let b = murray_balance_vec(&s, &pr, &mask).unwrap();
        assert!(b.residual < 1e-8, "{b:?}");
        assert!(b.murray_raw_gap < 1e-12);
    }

    #[test]
    fn orientation_flip_is_invisible() {
        let pr = radial_problem(12, 1.5);
        let s = solve_pressure_vec(&pr, 1e-10, 100_000).unwrap();
        let a = reconstruct_m(&s, &pr, None, None).unwrap();
        let mask: Vec<bool> = (0..144).map(|c| c % 3 == 0).collect();
        let b = reconstruct_m(&s, &pr, None, Some(&mask)).unwrap();
        assert_eq!(face_fluxes_vec(&a, &pr), face_fluxes_vec(&b, &pr));
        let sub = box_mask(pr.grid(), [0.3, 0.3], [0.7, 0.7]);
        assert_eq!(
            murray_balance_vec(&a, &pr, &sub).unwrap(),
            murray_balance_vec(&b, &pr, &sub).unwrap()
        );
    }
}
