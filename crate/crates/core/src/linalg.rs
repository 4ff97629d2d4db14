//! Sparse symmetric positive-definite solvers used by the Kirchhoff module.
//!
//! Two routes sit behind [`SpdSolver`]: an envelope (skyline) Cholesky
//! factorization under reverse Cuthill–McKee ordering for moderate sizes, and
//! Jacobi-preconditioned conjugate gradients for large systems.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::math;
use crate::Result;

/// Symmetric matrix stored as full adjacency rows `(col, value)`, diagonal included.
#[derive(Debug, Clone)]
pub struct SymmetricSparse {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SymmetricSparse {
    pub fn new(n: usize) -> Self {
        SymmetricSparse {
            rows: vec![Vec::new(); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Adds `v` at `(i, j)`; off-diagonal entries are mirrored.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.add_one(i, j, v);
        if i != j {
            self.add_one(j, i, v);
        }
    }

    fn add_one(&mut self, i: usize, j: usize, v: f64) {
        match self.rows[i].iter_mut().find(|(c, _)| *c == j) {
            Some(slot) => slot.1 += v,
            None => self.rows[i].push((j, v)),
        }
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                self.rows[i]
                    .iter()
                    .find(|(c, _)| *c == i)
                    .map_or(0.0, |e| e.1)
            })
            .collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            y[i] = math::sum(row.iter().map(|&(c, v)| v * x[c]));
        }
    }
}

/// Reverse Cuthill–McKee permutation: `order[new] = old`.
pub fn reverse_cuthill_mckee(a: &SymmetricSparse) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    while order.len() < n {
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree[i])
            .unwrap();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = a
                .row(v)
                .iter()
                .map(|&(c, _)| c)
                .filter(|&c| !visited[c])
                .collect();
            nb.sort_by_key(|&c| (degree[c], c));
            for c in nb {
                visited[c] = true;
                queue.push_back(c);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope Cholesky factor `A = L Lᵀ` in a permuted ordering.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &SymmetricSparse) -> Result<Self> {
        let n = a.dim();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for &(c, _) in a.row(old) {
                first[new] = first[new].min(inv[c]);
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i] + 1));
        }
        let mut values = vec![0.0; offset[n]];
        for (new, &old) in perm.iter().enumerate() {
            for &(c, v) in a.row(old) {
                let j = inv[c];
                if j <= new {
                    values[offset[new] + j - first[new]] += v;
                }
            }
        }
        for i in 0..n {
            for j in first[i]..=i {
                let lo = first[i].max(first[j]);
                let mut s = values[offset[i] + j - first[i]];
                for k in lo..j {
                    s -= values[offset[i] + k - first[i]] * values[offset[j] + k - first[j]];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::InvalidParameter {
                            name: "pivot",
                            value: s,
                        });
                    }
                    values[offset[i] + i - first[i]] = math::sqrt(s);
                } else {
                    values[offset[i] + j - first[i]] = s / values[offset[j] + j - first[j]];
                }
            }
        }
        Ok(SkylineCholesky {
            perm,
            first,
            offset,
            values,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let l = |i: usize, j: usize| self.values[self.offset[i] + j - self.first[i]];
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in self.first[i]..i {
                s -= l(i, k) * y[k];
            }
            y[i] = s / l(i, i);
        }
        for i in (0..n).rev() {
            y[i] /= l(i, i);
            let yi = y[i];
            for k in self.first[i]..i {
                y[k] -= l(i, k) * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Jacobi-preconditioned conjugate gradients; stops when `‖b − Ax‖∞ ≤ tol`.
pub fn conjugate_gradient(
    a: &SymmetricSparse,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = a.dim();
    let diag = a.diagonal();
    let mut ax = vec![0.0; n];
    a.mul_vec(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = math::dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let res = math::max_abs(&r);
        if res <= tol {
            return Ok(CgOutcome {
                iterations: it,
                residual_norm: res,
            });
        }
        a.mul_vec(&p, &mut ap);
        let alpha = rz / math::dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        // refresh the residual now and then to stop drift
        if it % 50 == 49 {
            a.mul_vec(x, &mut ax);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = math::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = math::max_abs(&r);
    if res <= tol {
        Ok(CgOutcome {
            iterations: max_iter,
            residual_norm: res,
        })
    } else {
        Err(Error::NonConvergence {
            iterations: max_iter,
            residual: res,
        })
    }
}

/// Chooses the factorization route up to `direct_limit` unknowns, CG above.
#[derive(Debug, Clone, Copy)]
pub struct SpdSolver {
    pub direct_limit: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl SpdSolver {
    pub const DEFAULT_DIRECT_LIMIT: usize = 10_000;

    pub fn solve(&self, a: &SymmetricSparse, b: &[f64]) -> Result<Vec<f64>> {
        let n = a.dim();
        if n == 0 {
            return Ok(Vec::new());
        }
        if n <= self.direct_limit {
            let chol = SkylineCholesky::factor(a)?;
            let mut x = chol.solve(b);
            // a couple of refinement sweeps
            let mut ax = vec![0.0; n];
            for _ in 0..2 {
                a.mul_vec(&x, &mut ax);
                let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
                if math::max_abs(&r) <= self.tol * 1e-3 {
                    break;
                }
                let dx = chol.solve(&r);
                for (xi, d) in x.iter_mut().zip(dx) {
                    *xi += d;
                }
            }
            Ok(x)
        } else {
            let mut x = vec![0.0; n];
            conjugate_gradient(a, b, &mut x, self.tol, self.max_iter)?;
            Ok(x)
        }
    }
}
