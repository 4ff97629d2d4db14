//! Continuum transport model on rectangular grids.
//!
//! Pressures live at cell centers, derivatives and the diagonal conductivity
//! tensor on faces. The pressure minimizes the convex functional
//!
//! ```text
//! F[p] = Σ_faces vol · ( r_f/2 · D² + (γ−1)/(2γ) · ν^{−1/(γ−1)} |D|^{2γ/(γ−1)} ) − Σ_cells vol · S p
//! ```
//!
//! where `D` is the two-point difference across an interior face. Boundary
//! faces carry `D = 0`, which is the discrete no-flux condition. The
//! stationarity condition of `F` is the finite-volume form of
//! `−∇·((r + c)∇p) = S` with `c^k = ν^{−1/(γ−1)} |∂_k p|^{2/(γ−1)}`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::math;
use crate::minimize::{minimize_zero_mean, MinimizeOutcome, Objective};
use crate::profile::{gauss_legendre, Profile};
use crate::Result;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200_000;
/// Relative dead band used by [`sign_sets`] when none is given.
pub const DEFAULT_SIGN_EPS_REL: f64 = 1e-12;
/// Balance residual floor, relative to `∫_Ω |S|`.
pub const BALANCE_FLOOR_REL: f64 = 1e-8;

/// Uniform rectangular grid in one or two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct RectGrid {
    extents: Vec<f64>,
    cells: Vec<usize>,
}

impl RectGrid {
    pub fn new(extents: &[f64], cells: &[usize]) -> Result<Self> {
        if extents.is_empty() || extents.len() > 2 || extents.len() != cells.len() {
            return Err(Error::DimensionMismatch {
                what: "grid axes",
                expected: extents.len().clamp(1, 2),
                found: cells.len(),
            });
        }
        for &e in extents {
            if !(e.is_finite() && e > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "extent",
                    value: e,
                });
            }
        }
        for &n in cells {
            if n < 2 {
                return Err(Error::InvalidParameter {
                    name: "cells",
                    value: n as f64,
                });
            }
        }
        Ok(RectGrid {
            extents: extents.to_vec(),
            cells: cells.to_vec(),
        })
    }

    pub fn line(extent: f64, n: usize) -> Result<Self> {
        Self::new(&[extent], &[n])
    }

    pub fn rect(extent_x: f64, extent_y: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::new(&[extent_x, extent_y], &[nx, ny])
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Cells along axis `k`; 1 for axes beyond the dimension.
    pub fn n(&self, k: usize) -> usize {
        self.cells.get(k).copied().unwrap_or(1)
    }

    pub fn spacing(&self, k: usize) -> f64 {
        self.extents[k] / self.cells[k] as f64
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).product()
    }

    pub fn domain_volume(&self) -> f64 {
        self.extents.iter().product()
    }

    pub fn face_area(&self, k: usize) -> f64 {
        self.cell_volume() / self.spacing(k)
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i + self.n(0) * j
    }

    pub fn cell_coords(&self, c: usize) -> [usize; 2] {
        [c % self.n(0), c / self.n(0)]
    }

    pub fn cell_center(&self, c: usize) -> [f64; 2] {
        let [i, j] = self.cell_coords(c);
        let y = if self.dim() > 1 {
            (j as f64 + 0.5) * self.spacing(1)
        } else {
            0.0
        };
        [(i as f64 + 0.5) * self.spacing(0), y]
    }

    pub fn face_count(&self, k: usize) -> usize {
        match k {
            0 => (self.n(0) + 1) * self.n(1),
            _ => self.n(0) * (self.n(1) + 1),
        }
    }

    /// Cells below and above face `f` of axis `k`; `None` outside the domain.
    pub fn face_cells(&self, k: usize, f: usize) -> (Option<usize>, Option<usize>) {
        let n0 = self.n(0);
        let (i, j, n_axis, pos) = match k {
            0 => (f % (n0 + 1), f / (n0 + 1), n0, f % (n0 + 1)),
            _ => (f % n0, f / n0, self.n(1), f / n0),
        };
        let cell = |ii: usize, jj: usize| self.cell_index(ii, jj);
        let lower = (pos > 0).then(|| {
            if k == 0 {
                cell(i - 1, j)
            } else {
                cell(i, j - 1)
            }
        });
        let upper = (pos < n_axis).then(|| cell(i, j));
        (lower, upper)
    }

    pub fn face_center(&self, k: usize, f: usize) -> [f64; 2] {
        let n0 = self.n(0);
        let y_of = |j: f64| {
            if self.dim() > 1 {
                j * self.spacing(1)
            } else {
                0.0
            }
        };
        match k {
            0 => {
                let (i, j) = (f % (n0 + 1), f / (n0 + 1));
                [i as f64 * self.spacing(0), y_of(j as f64 + 0.5)]
            }
            _ => {
                let (i, j) = (f % n0, f / n0);
                [(i as f64 + 0.5) * self.spacing(0), y_of(j as f64)]
            }
        }
    }

    /// Faces of cell `c` as `(axis, face, outward sign)`.
    pub fn cell_faces(&self, c: usize) -> impl Iterator<Item = (usize, usize, f64)> {
        let [i, j] = self.cell_coords(c);
        let n0 = self.n(0);
        let mut out = [(0, 0, 0.0); 4];
        out[0] = (0, i + (n0 + 1) * j, -1.0);
        out[1] = (0, i + 1 + (n0 + 1) * j, 1.0);
        out[2] = (1, i + n0 * j, -1.0);
        out[3] = (1, i + n0 * (j + 1), 1.0);
        let count = 2 * self.dim();
        out.into_iter().take(count)
    }

    pub fn sample(&self, profile: &Profile) -> Vec<f64> {
        (0..self.cell_count())
            .map(|c| profile.eval(&self.cell_center(c)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumProblem {
    grid: RectGrid,
    gamma: f64,
    nu: f64,
    r: Vec<f64>,
    source: Vec<f64>,
    source_shift: f64,
    r_profile: Option<Profile>,
    source_profile: Option<Profile>,
}

impl ContinuumProblem {
    pub fn new(grid: RectGrid, gamma: f64, nu: f64, r: Vec<f64>, source: Vec<f64>) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: gamma,
            });
        }
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::InvalidParameter {
                name: "nu",
                value: nu,
            });
        }
        let cells = grid.cell_count();
        for (what, v) in [("r", &r), ("source", &source)] {
            if v.len() != cells {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: cells,
                    found: v.len(),
                });
            }
        }
        if let Some(&bad) = r.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "r",
                value: bad,
            });
        }
        if let Some(&bad) = source.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "source",
                value: bad,
            });
        }
        Ok(ContinuumProblem {
            grid,
            gamma,
            nu,
            r,
            source,
            source_shift: 0.0,
            r_profile: None,
            source_profile: None,
        })
    }

    /// Samples both fields at cell centers and keeps the profiles for
    /// [`oracle_1d`].
    pub fn from_profiles(
        grid: RectGrid,
        gamma: f64,
        nu: f64,
        r: Profile,
        source: Profile,
    ) -> Result<Self> {
        let (rs, ss) = (grid.sample(&r), grid.sample(&source));
        let mut p = Self::new(grid, gamma, nu, rs, ss)?;
        p.r_profile = Some(r);
        p.source_profile = Some(source);
        Ok(p)
    }

    pub fn grid(&self) -> &RectGrid {
        &self.grid
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    /// Total constant removed by [`project_source`] so far.
    pub fn source_shift(&self) -> f64 {
        self.source_shift
    }

    pub fn r_profile(&self) -> Option<&Profile> {
        self.r_profile.as_ref()
    }

    pub fn source_profile(&self) -> Option<&Profile> {
        self.source_profile.as_ref()
    }

    /// `Σ S · cellvol`.
    pub fn source_total(&self) -> f64 {
        math::sum(self.source.iter().copied()) * self.grid.cell_volume()
    }

    pub(crate) fn source_abs_total(&self) -> f64 {
        math::sum(self.source.iter().map(|s| s.abs())) * self.grid.cell_volume()
    }

    /// `r` averaged onto the faces of axis `k`; boundary faces take the one
    /// adjacent cell.
    pub fn r_faces(&self, k: usize) -> Vec<f64> {
        (0..self.grid.face_count(k))
            .map(|f| match self.grid.face_cells(k, f) {
                (Some(a), Some(b)) => 0.5 * (self.r[a] + self.r[b]),
                (Some(a), None) | (None, Some(a)) => self.r[a],
                (None, None) => unreachable!(),
            })
            .collect()
    }

    pub(crate) fn check_projected(&self) -> Result<()> {
        let total = self.source_total();
        let scale = self.source_abs_total();
        if total.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) && total.abs() > 0.0 {
            return Err(Error::MassImbalance { defect: total });
        }
        Ok(())
    }
}

/// Removes the volume-weighted mean of `S`.
pub fn project_source(problem: &ContinuumProblem) -> ContinuumProblem {
    let mut out = problem.clone();
    let n = out.source.len() as f64;
    // a second pass removes the rounding left by the first
    for _ in 0..2 {
        let mean = math::sum(out.source.iter().copied()) / n;
        for s in &mut out.source {
            *s -= mean;
        }
        out.source_shift += mean;
    }
    out
}

/// Cell-centered pressure with optional face companions.
///
/// `c[k]` and `q[k]` are empty until filled by [`reconstruct_conductivity`]
/// and [`face_fluxes`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: RectGrid,
    pub p: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
}

impl GridField {
    pub fn new(grid: RectGrid, p: Vec<f64>) -> Result<Self> {
        if p.len() != grid.cell_count() {
            return Err(Error::DimensionMismatch {
                what: "pressure",
                expected: grid.cell_count(),
                found: p.len(),
            });
        }
        let d = grid.dim();
        Ok(GridField {
            grid,
            p,
            c: vec![Vec::new(); d],
            q: vec![Vec::new(); d],
        })
    }

    pub fn zeros(grid: RectGrid) -> Self {
        let n = grid.cell_count();
        Self::new(grid, vec![0.0; n]).expect("sizes agree")
    }

    pub fn has_conductivity(&self) -> bool {
        self.c.iter().all(|c| !c.is_empty())
    }

    pub fn has_flux(&self) -> bool {
        self.q.iter().all(|q| !q.is_empty())
    }

    /// `Σ p · cellvol`.
    pub fn mean_defect(&self) -> f64 {
        math::sum(self.p.iter().copied()) * self.grid.cell_volume()
    }

    /// Face differences `∂_k p` per axis; zero on boundary faces.
    pub fn face_gradients(&self) -> Vec<Vec<f64>> {
        face_gradients(&self.grid, &self.p)
    }
}

fn face_gradients(grid: &RectGrid, p: &[f64]) -> Vec<Vec<f64>> {
    (0..grid.dim())
        .map(|k| {
            let h = grid.spacing(k);
            (0..grid.face_count(k))
                .map(|f| match grid.face_cells(k, f) {
                    (Some(a), Some(b)) => (p[b] - p[a]) / h,
                    _ => 0.0,
                })
                .collect()
        })
        .collect()
}

struct GridObjective<'a> {
    problem: &'a ContinuumProblem,
    r_faces: Vec<Vec<f64>>,
}

impl<'a> GridObjective<'a> {
    fn new(problem: &'a ContinuumProblem) -> Self {
        let r_faces = (0..problem.grid.dim())
            .map(|k| problem.r_faces(k))
            .collect();
        GridObjective { problem, r_faces }
    }
}

impl Objective for GridObjective<'_> {
    fn dim(&self) -> usize {
        self.problem.grid.cell_count()
    }

    fn value(&self, p: &[f64]) -> f64 {
        functional_at(self.problem, &self.r_faces, p)
    }

    fn gradient(&self, p: &[f64], out: &mut [f64]) {
        let pr = self.problem;
        let grid = &pr.grid;
        let kappa = math::powf(pr.nu, -1.0 / (pr.gamma - 1.0));
        let e = 2.0 / (pr.gamma - 1.0);
        for (o, s) in out.iter_mut().zip(&pr.source) {
            *o = -s;
        }
        for k in 0..grid.dim() {
            let h = grid.spacing(k);
            for f in 0..grid.face_count(k) {
                if let (Some(a), Some(b)) = grid.face_cells(k, f) {
                    let d = (p[b] - p[a]) / h;
                    let w = (self.r_faces[k][f] + kappa * math::powf(d.abs(), e)) * d / h;
                    out[a] -= w;
                    out[b] += w;
                }
            }
        }
    }
}

fn functional_at(pr: &ContinuumProblem, r_faces: &[Vec<f64>], p: &[f64]) -> f64 {
    let grid = &pr.grid;
    let vol = grid.cell_volume();
    let beta = 2.0 * pr.gamma / (pr.gamma - 1.0);
    let kappa = (pr.gamma - 1.0) / (2.0 * pr.gamma) * math::powf(pr.nu, -1.0 / (pr.gamma - 1.0));
    let grads = face_gradients(grid, p);
    let faces = grads.iter().zip(r_faces).flat_map(|(g, r)| {
        g.iter()
            .zip(r)
            .map(|(&d, &r)| 0.5 * r * d * d + kappa * math::powf(d.abs(), beta))
    });
    vol * (math::sum(faces) - math::dot(&pr.source, p))
}

/// Discrete value of the convex pressure functional.
pub fn functional_value(field: &GridField, problem: &ContinuumProblem) -> f64 {
    let r_faces: Vec<Vec<f64>> = (0..problem.grid.dim())
        .map(|k| problem.r_faces(k))
        .collect();
    functional_at(problem, &r_faces, &field.p)
}

/// Cell-wise residual of the discrete equation, `div q − S`, where
/// `q = −(r + c)∇p` with `c` taken from the current `p`.
pub fn pressure_residual(field: &GridField, problem: &ContinuumProblem) -> Vec<f64> {
    let obj = GridObjective::new(problem);
    let mut out = vec![0.0; field.p.len()];
    obj.gradient(&field.p, &mut out);
    out
}

/// Zero-mean minimizer of [`functional_value`], started from `p ≡ 0`.
pub fn solve_pressure(problem: &ContinuumProblem, tol: f64, max_iter: usize) -> Result<GridField> {
    solve_pressure_from(
        problem,
        &GridField::zeros(problem.grid.clone()),
        tol,
        max_iter,
    )
    .map(|(f, _)| f)
}

/// As [`solve_pressure`] but from a given initial field; also reports the
/// iteration count and final residual.
pub fn solve_pressure_from(
    problem: &ContinuumProblem,
    initial: &GridField,
    tol: f64,
    max_iter: usize,
) -> Result<(GridField, MinimizeOutcome)> {
    if initial.grid != problem.grid {
        return Err(Error::DimensionMismatch {
            what: "initial field cells",
            expected: problem.grid.cell_count(),
            found: initial.p.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            value: tol,
        });
    }
    problem.check_projected()?;
    let obj = GridObjective::new(problem);
    let mut p = initial.p.clone();
    let outcome = minimize_zero_mean(&obj, &mut p, tol, max_iter)?;
    Ok((GridField::new(problem.grid.clone(), p)?, outcome))
}

/// Fills `c^k = ν^{−1/(γ−1)} |∂_k p|^{2/(γ−1)}` on every face.
pub fn reconstruct_conductivity(field: &GridField, problem: &ContinuumProblem) -> GridField {
    let kappa = math::powf(problem.nu, -1.0 / (problem.gamma - 1.0));
    let e = 2.0 / (problem.gamma - 1.0);
    let mut out = field.clone();
    out.c = field
        .face_gradients()
        .into_iter()
        .map(|g| {
            g.into_iter()
                .map(|d| kappa * math::powf(d.abs(), e))
                .collect()
        })
        .collect();
    out
}

/// Largest face-wise relative defect of `(∂_k p)² = ν (c^k)^{γ−1}`.
pub fn crit_residual(field: &GridField, problem: &ContinuumProblem) -> f64 {
    let grads = field.face_gradients();
    let mut worst: f64 = 0.0;
    for (g, c) in grads.iter().zip(&field.c) {
        for (&d, &c) in g.iter().zip(c) {
            let lhs = d * d;
            let rhs = problem.nu * math::powf(c, problem.gamma - 1.0);
            let scale = lhs.max(rhs);
            if scale > 0.0 {
                worst = worst.max((lhs - rhs).abs() / scale);
            }
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
    Null,
}

impl Sign {
    pub fn classify(v: f64, eps: f64) -> Sign {
        if v > eps {
            Sign::Plus
        } else if v < -eps {
            Sign::Minus
        } else {
            Sign::Null
        }
    }

    /// `χ⁺ − χ⁻`.
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
            Sign::Null => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignMasks {
    pub sign_eps: f64,
    pub labels: Vec<Vec<Sign>>,
}

impl SignMasks {
    pub fn count(&self, k: usize, s: Sign) -> usize {
        self.labels[k].iter().filter(|&&l| l == s).count()
    }
}

/// `1e-12 · max |∂p|`.
pub fn default_sign_eps(field: &GridField) -> f64 {
    let grads = field.face_gradients();
    DEFAULT_SIGN_EPS_REL * grads.iter().map(|g| math::max_abs(g)).fold(0.0, f64::max)
}

/// Face labels by the sign of `∂_k p`; `None` uses [`default_sign_eps`].
pub fn sign_sets(field: &GridField, sign_eps: Option<f64>) -> SignMasks {
    let eps = sign_eps.unwrap_or_else(|| default_sign_eps(field));
    let labels = field
        .face_gradients()
        .into_iter()
        .map(|g| g.into_iter().map(|d| Sign::classify(d, eps)).collect())
        .collect();
    SignMasks {
        sign_eps: eps,
        labels,
    }
}

/// Fills `q^k = −(r_f + c^k) ∂_k p`; boundary faces carry zero. Missing
/// conductivities are reconstructed first.
pub fn face_fluxes(field: &GridField, problem: &ContinuumProblem) -> GridField {
    let mut out = if field.has_conductivity() {
        field.clone()
    } else {
        reconstruct_conductivity(field, problem)
    };
    let grads = field.face_gradients();
    out.q = (0..problem.grid.dim())
        .map(|k| {
            let r = problem.r_faces(k);
            grads[k]
                .iter()
                .zip(&out.c[k])
                .zip(&r)
                .map(|((&d, &c), &r)| -(r + c) * d)
                .collect()
        })
        .collect();
    out
}

/// Cell-wise `Σ_faces n·q · area / vol`; needs fluxes.
pub fn divergence(field: &GridField) -> Vec<f64> {
    let grid = &field.grid;
    let vol = grid.cell_volume();
    (0..grid.cell_count())
        .map(|c| {
            math::sum(
                grid.cell_faces(c)
                    .map(|(k, f, n)| n * field.q[k][f] * grid.face_area(k)),
            ) / vol
        })
        .collect()
}

/// Flux balance over a subdomain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceRecord {
    /// Murray-form inflow magnitude over `∂Λ⁺`.
    pub influx: f64,
    /// Murray-form outflow magnitude over `∂Λ⁻`.
    pub outflux: f64,
    pub source_integral: f64,
    pub residual: f64,
    /// `outflux − influx − source_integral`.
    pub imbalance: f64,
    pub raw_influx: f64,
    pub raw_outflux: f64,
    pub raw_residual: f64,
    /// Largest face-wise gap between Murray form and raw flux, relative to
    /// `raw_influx + raw_outflux`.
    pub murray_raw_gap: f64,
    /// `∫_Λ S` of the analytic source profile (mean removed), when known.
    pub exact_source_integral: Option<f64>,
    /// Residual of the Murray-form sums against `exact_source_integral`;
    /// unlike `residual` it carries the discretization error.
    pub exact_residual: Option<f64>,
    pub boundary_faces: usize,
    /// Interior boundary faces where `∂_k p` is in the dead band.
    pub null_faces: usize,
}

pub(crate) struct FaceTerm {
    pub raw: f64,
    pub murray: f64,
    pub null: bool,
}

pub(crate) fn accumulate_balance(
    terms: impl Iterator<Item = FaceTerm>,
    source_integral: f64,
    floor: f64,
) -> BalanceRecord {
    let (mut ri, mut ro, mut mi, mut mo) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut gaps = Vec::new();
    let (mut boundary_faces, mut null_faces) = (0, 0);
    for t in terms {
        boundary_faces += 1;
        if t.null {
            null_faces += 1;
        }
        gaps.push((t.murray - t.raw).abs());
        if t.raw < 0.0 {
            ri.push(-t.raw);
            mi.push(t.murray.abs());
        } else if t.raw > 0.0 {
            ro.push(t.raw);
            mo.push(t.murray.abs());
        }
    }
    let total = |v: &[f64]| math::sum(v.iter().copied());
    let (raw_influx, raw_outflux) = (total(&ri), total(&ro));
    let (influx, outflux) = (total(&mi), total(&mo));
    let residual_of = |i: f64, o: f64| {
        (o - i - source_integral).abs() / (i.abs() + o.abs() + source_integral.abs() + floor)
    };
    let scale = raw_influx + raw_outflux;
    BalanceRecord {
        influx,
        outflux,
        source_integral,
        residual: residual_of(influx, outflux),
        imbalance: outflux - influx - source_integral,
        raw_influx,
        raw_outflux,
        raw_residual: residual_of(raw_influx, raw_outflux),
        murray_raw_gap: if scale > 0.0 {
            gaps.iter().fold(0.0, |a: f64, &b| a.max(b)) / scale
        } else {
            0.0
        },
        exact_source_integral: None,
        exact_residual: None,
        boundary_faces,
        null_faces,
    }
}

pub(crate) fn check_mask(grid: &RectGrid, subdomain: &[bool]) -> Result<()> {
    if subdomain.len() != grid.cell_count() {
        return Err(Error::DimensionMismatch {
            what: "subdomain mask",
            expected: grid.cell_count(),
            found: subdomain.len(),
        });
    }
    if !subdomain.iter().any(|&b| b) {
        return Err(Error::EmptySubdomain);
    }
    Ok(())
}

/// Murray-law flux balance over the cells where `subdomain` is true.
///
/// Every face between a subdomain cell and a cell outside it contributes
/// `−√ν (χ⁺−χ⁻) (c^k)^{(γ−1)/2} (r + c^k) n_k · area`, which is `n·q · area`
/// rewritten through the sign decomposition. Faces are classified as inflow
/// or outflow by the sign of the raw flux. Domain-boundary faces carry no
/// flux and are skipped.
pub fn murray_balance(
    field: &GridField,
    problem: &ContinuumProblem,
    subdomain: &[bool],
    sign_eps: Option<f64>,
) -> Result<BalanceRecord> {
    let grid = &problem.grid;
    check_mask(grid, subdomain)?;
    let field = face_fluxes(field, problem);
    let masks = sign_sets(&field, sign_eps);
    let sqrt_nu = math::sqrt(problem.nu);
    let half = 0.5 * (problem.gamma - 1.0);
    let r_faces: Vec<Vec<f64>> = (0..grid.dim()).map(|k| problem.r_faces(k)).collect();
    let (fc, fq, labels, rf) = (&field.c, &field.q, &masks.labels, &r_faces);
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
                let ck = fc[k][f];
                let s = labels[k][f];
                let murray =
                    -sqrt_nu * s.value() * math::powf(ck, half) * (rf[k][f] + ck) * n * area;
                Some(FaceTerm {
                    raw: n * fq[k][f] * area,
                    murray,
                    null: s == Sign::Null,
                })
            })
        });
    let vol = grid.cell_volume();
    let source_integral = math::sum(
        (0..grid.cell_count())
            .filter(|&c| subdomain[c])
            .map(|c| problem.source[c]),
    ) * vol;
    let floor = BALANCE_FLOOR_REL * problem.source_abs_total() + f64::MIN_POSITIVE;
    let mut rec = accumulate_balance(terms, source_integral, floor);
    attach_exact(&mut rec, problem, subdomain, floor);
    Ok(rec)
}

pub(crate) fn attach_exact(
    rec: &mut BalanceRecord,
    problem: &ContinuumProblem,
    subdomain: &[bool],
    floor: f64,
) {
    if let Some(exact) = exact_source_integral(problem, subdomain) {
        let (i, o) = (rec.influx, rec.outflux);
        rec.exact_source_integral = Some(exact);
        rec.exact_residual =
            Some((o - i - exact).abs() / (i.abs() + o.abs() + exact.abs() + floor));
    }
}

fn cell_integral(grid: &RectGrid, c: usize, f: &impl Fn(&[f64]) -> f64) -> f64 {
    let x = grid.cell_center(c);
    let h: [f64; 2] = [
        grid.spacing(0),
        if grid.dim() > 1 { grid.spacing(1) } else { 0.0 },
    ];
    if grid.dim() == 1 {
        gauss_legendre(|s| f(&[s]), x[0] - 0.5 * h[0], x[0] + 0.5 * h[0], 1)
    } else {
        gauss_legendre(
            |y| gauss_legendre(|s| f(&[s, y]), x[0] - 0.5 * h[0], x[0] + 0.5 * h[0], 1),
            x[1] - 0.5 * h[1],
            x[1] + 0.5 * h[1],
            1,
        )
    }
}

/// `∫_Λ (S − mean_Ω S)` for the analytic source profile, by Gauss–Legendre
/// quadrature on every cell.
pub fn exact_source_integral(problem: &ContinuumProblem, subdomain: &[bool]) -> Option<f64> {
    let src = problem.source_profile?;
    let grid = &problem.grid;
    let f = |x: &[f64]| src.eval(x);
    let per_cell: Vec<f64> = (0..grid.cell_count())
        .map(|c| cell_integral(grid, c, &f))
        .collect();
    let mean = math::sum(per_cell.iter().copied()) / grid.domain_volume();
    let inside = subdomain.iter().filter(|&&b| b).count() as f64;
    let total = math::sum(
        per_cell
            .iter()
            .zip(subdomain)
            .filter(|(_, &b)| b)
            .map(|(v, _)| *v),
    );
    Some(total - mean * inside * grid.cell_volume())
}

/// Cells whose centers lie in the box `[lo, hi]` (per axis).
pub fn box_mask(grid: &RectGrid, lo: [f64; 2], hi: [f64; 2]) -> Vec<bool> {
    (0..grid.cell_count())
        .map(|c| {
            let x = grid.cell_center(c);
            (0..grid.dim()).all(|k| x[k] >= lo[k] && x[k] <= hi[k])
        })
        .collect()
}

/// Root of `r u + κ |u|^e u = rhs`, strictly increasing in `u`.
pub(crate) fn solve_scalar(r: f64, kappa: f64, e: f64, rhs: f64) -> Result<f64> {
    let f = |u: f64| r * u + kappa * math::powf(u.abs(), e) * u - rhs;
    let bound = rhs.abs() / r;
    let (mut lo, mut hi) = (-bound, bound);
    if !(f(lo) <= 0.0 && f(hi) >= 0.0) {
        return Err(Error::BisectionFailure { rhs });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-14 * bound.max(1e-300) || mid == lo || mid == hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Semi-analytic 1-D solution from exact flux integration.
///
/// The flux obeys `q' = S` with `q(0) = 0`, so `q(x) = ∫₀ˣ S`; then
/// `u = ∂p` solves `r u + ν^{−1/(γ−1)} |u|^{2/(γ−1)} u = −q` pointwise and
/// `p` is the integral of `u`, gauged to zero discrete mean. The source
/// profile has its exact mean removed first. Returns `p` at cell centers and
/// `c`, `q` at faces.
pub fn oracle_1d(problem: &ContinuumProblem) -> Result<GridField> {
    let grid = &problem.grid;
    if grid.dim() != 1 {
        return Err(Error::DimensionMismatch {
            what: "oracle dimension",
            expected: 1,
            found: grid.dim(),
        });
    }
    let src = problem
        .source_profile
        .ok_or(Error::MissingAnalyticProfile { what: "source" })?;
    let rp = problem
        .r_profile
        .ok_or(Error::MissingAnalyticProfile { what: "r" })?;
    let len = grid.extents()[0];
    let n = grid.n(0);
    let mean = gauss_legendre(|x| src.eval(&[x]), 0.0, len, 4 * n) / len;
    let s = |x: f64| src.eval(&[x]) - mean;
    let kappa = math::powf(problem.nu, -1.0 / (problem.gamma - 1.0));
    let e = 2.0 / (problem.gamma - 1.0);
    let u_at = |x: f64, q: f64| solve_scalar(rp.eval(&[x]), kappa, e, -q);

    // breakpoints at every face and cell center
    let half = 0.5 * grid.spacing(0);
    let mut q_b = vec![0.0; 2 * n + 1];
    let mut p_b = vec![0.0; 2 * n + 1];
    for b in 0..2 * n {
        let (a, z) = (b as f64 * half, (b + 1) as f64 * half);
        q_b[b + 1] = q_b[b] + gauss_legendre(s, a, z, 1);
        let mut du = 0.0;
        for &(t, w) in &crate::profile::GL8 {
            let x = a + 0.5 * half * (1.0 + t);
            let q = q_b[b] + gauss_legendre(s, a, x, 1);
            du += 0.5 * half * w * u_at(x, q)?;
        }
        p_b[b + 1] = p_b[b] + du;
    }
    let mut p: Vec<f64> = (0..n).map(|c| p_b[2 * c + 1]).collect();
    let m = math::sum(p.iter().copied()) / n as f64;
    for v in &mut p {
        *v -= m;
    }
    let mut field = GridField::new(grid.clone(), p)?;
    let mut c = Vec::with_capacity(n + 1);
    let mut q = Vec::with_capacity(n + 1);
    for f in 0..=n {
        let x = f as f64 * grid.spacing(0);
        let qf = if f == 0 || f == n { 0.0 } else { q_b[2 * f] };
        let u = u_at(x, qf)?;
        c.push(kappa * math::powf(u.abs(), e));
        q.push(qf);
    }
    field.c = vec![c];
    field.q = vec![q];
    Ok(field)
}
