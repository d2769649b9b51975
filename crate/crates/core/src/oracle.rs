//! Independent brute-force ground-state solver for one to three
//! particles on discretized boxes and tori: 7-point Laplacian stencils,
//! matrix-free shifted-inverse-power iteration with conjugate-gradient
//! inner solves, a radial-sector tridiagonal route for two particles in
//! a ball, and the discrete substitution-identity check.

use crate::par;
use crate::rng::{substream, Stream};
use crate::twobody::PotentialSpec;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("dimension {0} exceeds the sparse-iterative budget 1e7")]
    TooLarge(usize),
    #[error("solver did not converge within budget: {0}")]
    NonConvergence(String),
    #[error("invalid instance: {0}")]
    BadInstance(String),
}

/// Boundary condition for the discretized Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bc {
    /// Mirror ghost points (zero normal flux).
    Neumann,
    Periodic,
    /// Zero ghost points (hard wall).
    Dirichlet,
}

/// Matrix-free symmetric operator on a flat state vector.
pub trait LinearOp: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
    /// Conservative guess at the first excited gap, used to pick the
    /// inverse-power shift.
    fn gap_hint(&self) -> f64;
}

/// Two-particle relative-motion operator `-2 lap + V(r)` on a cubic grid
/// over the relative coordinate.
pub struct RelativePair {
    pub m: usize,
    pub side: f64,
    pub bc: Bc,
    h: f64,
    vdiag: Vec<f64>,
}

impl RelativePair {
    pub fn new(pot: &PotentialSpec, side: f64, m: usize, bc: Bc) -> Result<Self, OracleError> {
        if m * m * m > 10_000_000 {
            return Err(OracleError::TooLarge(m * m * m));
        }
        let h = side / m as f64;
        let coord = |d: usize| -> f64 {
            // min-image representative of the relative coordinate
            let x = d as f64 * h;
            if x > 0.5 * side {
                x - side
            } else {
                x
            }
        };
        let mut vdiag = vec![0.0; m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let r = (coord(i).powi(2) + coord(j).powi(2) + coord(k).powi(2)).sqrt();
                    vdiag[(i * m + j) * m + k] = pot.eval(r);
                }
            }
        }
        Ok(RelativePair { m, side, bc, h, vdiag })
    }
}

impl LinearOp for RelativePair {
    fn dim(&self) -> usize {
        self.m * self.m * self.m
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let m = self.m;
        let inv_h2 = 2.0 / (self.h * self.h); // relative-motion kinetic prefactor
        let bc = self.bc;
        par::for_each_mut(y, |idx, out| {
            let k = idx % m;
            let j = (idx / m) % m;
            let i = idx / (m * m);
            let c = x[idx];
            let mut acc = self.vdiag[idx] * c;
            for (digit, stride) in [(i, m * m), (j, m), (k, 1)] {
                for dir in [-1isize, 1] {
                    let d = digit as isize + dir;
                    if (0..m as isize).contains(&d) {
                        let nb = idx.wrapping_add_signed(dir * stride as isize);
                        acc += inv_h2 * (c - x[nb]);
                    } else {
                        match bc {
                            Bc::Neumann => {} // mirror ghost: zero flux
                            Bc::Dirichlet => acc += inv_h2 * c,
                            Bc::Periodic => {
                                let wrapped = d.rem_euclid(m as isize) as usize;
                                let nb = idx - digit * stride + wrapped * stride;
                                acc += inv_h2 * (c - x[nb]);
                            }
                        }
                    }
                }
            }
            *out = acc;
        });
    }

    fn diagonal(&self) -> Vec<f64> {
        let m = self.m;
        let inv_h2 = 2.0 / (self.h * self.h);
        (0..self.dim())
            .map(|idx| {
                let k = idx % m;
                let j = (idx / m) % m;
                let i = idx / (m * m);
                let mut bonds = 0.0;
                for digit in [i, j, k] {
                    for dir in [-1isize, 1] {
                        let d = digit as isize + dir;
                        if (0..m as isize).contains(&d)
                            || self.bc == Bc::Periodic
                            || self.bc == Bc::Dirichlet
                        {
                            bonds += inv_h2;
                        }
                    }
                }
                bonds + self.vdiag[idx]
            })
            .collect()
    }

    fn gap_hint(&self) -> f64 {
        let base = match self.bc {
            Bc::Periodic => (2.0 * std::f64::consts::PI / self.side).powi(2),
            _ => (std::f64::consts::PI / self.side).powi(2),
        };
        2.0 * base
    }
}

/// Full few-body operator `-sum_i lap_i + sum_{i<j} V(x_i - x_j)` for
/// `n` bosons on a cubic grid (cell-centered coordinates).
pub struct FewBody {
    pub n: usize,
    pub m: usize,
    pub side: f64,
    pub bc: Bc,
    h: f64,
    vdiag: Vec<f64>,
}

impl FewBody {
    pub fn new(
        pot: &PotentialSpec,
        n: usize,
        side: f64,
        m: usize,
        bc: Bc,
    ) -> Result<Self, OracleError> {
        if !(1..=3).contains(&n) {
            return Err(OracleError::BadInstance(format!("n = {n} not in 1..=3")));
        }
        let dim64 = (m as u64).pow(3 * n as u32);
        if dim64 > 10_000_000 {
            return Err(OracleError::TooLarge(dim64 as usize));
        }
        let dim = dim64 as usize;
        let h = side / m as f64;
        let coord = move |d: usize| (d as f64 + 0.5) * h;
        let mut vdiag = vec![0.0; dim];
        par::for_each_mut(&mut vdiag, |idx, v| {
            let mut digits = [[0usize; 3]; 3];
            let mut rem = idx;
            for p in (0..n).rev() {
                for ax in (0..3).rev() {
                    digits[p][ax] = rem % m;
                    rem /= m;
                }
            }
            let mut pot_sum = 0.0;
            for a in 0..n {
                for b in (a + 1)..n {
                    let mut s = 0.0;
                    for ax in 0..3 {
                        let mut d = (coord(digits[a][ax]) - coord(digits[b][ax])).abs();
                        if bc == Bc::Periodic && d > 0.5 * side {
                            d = side - d;
                        }
                        s += d * d;
                    }
                    pot_sum += pot.eval(s.sqrt());
                }
            }
            *v = pot_sum;
        });
        Ok(FewBody { n, m, side, bc, h, vdiag })
    }

    /// Index with particles `a` and `b` swapped (bosonic exchange).
    pub fn exchange_index(&self, idx: usize, a: usize, b: usize) -> usize {
        let m = self.m;
        let naxes = 3 * self.n;
        let mut digits = vec![0usize; naxes];
        let mut rem = idx;
        for d in (0..naxes).rev() {
            digits[d] = rem % m;
            rem /= m;
        }
        for ax in 0..3 {
            digits.swap(3 * a + ax, 3 * b + ax);
        }
        digits.iter().fold(0, |acc, &d| acc * m + d)
    }
}

impl LinearOp for FewBody {
    fn dim(&self) -> usize {
        self.vdiag.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let m = self.m;
        let naxes = 3 * self.n;
        let inv_h2 = 1.0 / (self.h * self.h);
        let bc = self.bc;
        let mut strides = vec![1usize; naxes];
        for d in (0..naxes - 1).rev() {
            strides[d] = strides[d + 1] * m;
        }
        par::for_each_mut(y, |idx, out| {
            let c = x[idx];
            let mut acc = self.vdiag[idx] * c;
            for d in 0..naxes {
                let stride = strides[d];
                let digit = (idx / stride) % m;
                for dir in [-1isize, 1] {
                    let dd = digit as isize + dir;
                    if (0..m as isize).contains(&dd) {
                        let nb = idx.wrapping_add_signed(dir * stride as isize);
                        acc += inv_h2 * (c - x[nb]);
                    } else {
                        match bc {
                            Bc::Neumann => {}
                            Bc::Dirichlet => acc += inv_h2 * c,
                            Bc::Periodic => {
                                let wrapped = dd.rem_euclid(m as isize) as usize;
                                let nb = idx - digit * stride + wrapped * stride;
                                acc += inv_h2 * (c - x[nb]);
                            }
                        }
                    }
                }
            }
            *out = acc;
        });
    }

    fn diagonal(&self) -> Vec<f64> {
        let m = self.m;
        let naxes = 3 * self.n;
        let inv_h2 = 1.0 / (self.h * self.h);
        let mut strides = vec![1usize; naxes];
        for d in (0..naxes - 1).rev() {
            strides[d] = strides[d + 1] * m;
        }
        (0..self.dim())
            .map(|idx| {
                let mut bonds = 0.0;
                for d in 0..naxes {
                    let digit = (idx / strides[d]) % m;
                    for dir in [-1isize, 1] {
                        let dd = digit as isize + dir;
                        if (0..m as isize).contains(&dd)
                            || self.bc == Bc::Periodic
                            || self.bc == Bc::Dirichlet
                        {
                            bonds += inv_h2;
                        }
                    }
                }
                bonds + self.vdiag[idx]
            })
            .collect()
    }

    fn gap_hint(&self) -> f64 {
        match self.bc {
            Bc::Periodic => (2.0 * std::f64::consts::PI / self.side).powi(2),
            _ => (std::f64::consts::PI / self.side).powi(2),
        }
    }
}

/// Iteration budget and tolerances for the eigensolver.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverBudget {
    pub max_power_iters: usize,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    pub rel_tol: f64,
}

impl Default for SolverBudget {
    fn default() -> Self {
        SolverBudget {
            max_power_iters: 200,
            cg_tol: 1e-12,
            cg_max_iters: 50_000,
            rel_tol: 1e-10,
        }
    }
}

/// Ground-state result (optionally with the first excited state).
#[derive(Debug, Clone, Serialize)]
pub struct GroundState {
    pub e0: f64,
    pub e1: Option<f64>,
    #[serde(skip)]
    pub vector: Vec<f64>,
    #[serde(skip)]
    pub vector1: Option<Vec<f64>>,
    /// `||H v - e0 v|| / ||v||`.
    pub residual: f64,
    pub e1_residual: f64,
    pub iterations: usize,
}

fn norm(x: &[f64]) -> f64 {
    par::dot(x, x).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    par::for_each_mut(y, |i, v| *v += a * x[i]);
}

fn scale(x: &mut [f64], s: f64) {
    par::for_each_mut(x, |_, v| *v *= s);
}

/// Jacobi-preconditioned CG for `(A + sigma) x = b`, restricted to the
/// orthogonal complement of `deflate`.
#[allow(clippy::too_many_arguments)]
fn cg_solve(
    op: &dyn LinearOp,
    sigma: f64,
    b: &[f64],
    diag: &[f64],
    deflate: Option<&[f64]>,
    tol: f64,
    max_iters: usize,
    x: &mut Vec<f64>,
) -> usize {
    let dim = op.dim();
    let project = |v: &mut [f64]| {
        if let Some(d) = deflate {
            let c = par::dot(v, d);
            axpy(v, -c, d);
        }
    };
    x.clear();
    x.resize(dim, 0.0);
    let mut r = b.to_vec();
    project(&mut r);
    let b_norm = norm(&r).max(1e-300);
    let mut z: Vec<f64> = (0..dim).map(|i| r[i] / (diag[i] + sigma)).collect();
    project(&mut z);
    let mut p = z.clone();
    let mut rz = par::dot(&r, &z);
    let mut ap = vec![0.0; dim];
    for it in 0..max_iters {
        op.apply(&p, &mut ap);
        axpy(&mut ap, sigma, &p);
        project(&mut ap);
        let denom = par::dot(&p, &ap);
        if denom <= 0.0 {
            return it;
        }
        let alpha = rz / denom;
        axpy(x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        if norm(&r) <= tol * b_norm {
            return it + 1;
        }
        par::for_each_mut(&mut z, |i, v| *v = r[i] / (diag[i] + sigma));
        project(&mut z);
        let rz_new = par::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        par::for_each_mut(&mut p, |i, v| *v = z[i] + beta * *v);
    }
    max_iters
}

fn rayleigh(op: &dyn LinearOp, v: &[f64], hv: &mut Vec<f64>) -> f64 {
    hv.resize(v.len(), 0.0);
    op.apply(v, hv);
    par::dot(v, hv) / par::dot(v, v)
}

fn inverse_power(
    op: &dyn LinearOp,
    budget: &SolverBudget,
    sigma: f64,
    diag: &[f64],
    deflate: Option<&[f64]>,
    seed_stream: u64,
) -> Result<(f64, Vec<f64>, f64, usize), OracleError> {
    let dim = op.dim();
    let mut rng = substream(seed_stream, Stream::Oracle, 7);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    if let Some(d) = deflate {
        let c = par::dot(&v, d);
        axpy(&mut v, -c, d);
    }
    let n0 = norm(&v);
    scale(&mut v, 1.0 / n0);
    let mut hv = vec![0.0; dim];
    let mut theta = rayleigh(op, &v, &mut hv);
    let mut stable = 0;
    let mut x = Vec::new();
    let mut total_iters = 0;
    for it in 0..budget.max_power_iters {
        total_iters = it + 1;
        let cg_iters = cg_solve(
            op,
            sigma,
            &v,
            diag,
            deflate,
            budget.cg_tol,
            budget.cg_max_iters,
            &mut x,
        );
        if cg_iters >= budget.cg_max_iters {
            return Err(OracleError::NonConvergence(format!(
                "CG hit its budget at power step {it}"
            )));
        }
        if let Some(d) = deflate {
            let c = par::dot(&x, d);
            axpy(&mut x, -c, d);
        }
        let nx = norm(&x);
        if nx == 0.0 {
            return Err(OracleError::NonConvergence("solve collapsed to zero".into()));
        }
        scale(&mut x, 1.0 / nx);
        std::mem::swap(&mut v, &mut x);
        let new_theta = rayleigh(op, &v, &mut hv);
        let denom = new_theta.abs().max(sigma);
        if (new_theta - theta).abs() <= budget.rel_tol * denom {
            stable += 1;
            if stable >= 3 {
                theta = new_theta;
                break;
            }
        } else {
            stable = 0;
        }
        theta = new_theta;
    }
    // residual within the deflated subspace
    op.apply(&v, &mut hv);
    axpy(&mut hv, -theta, &v);
    if let Some(d) = deflate {
        let c = par::dot(&hv, d);
        axpy(&mut hv, -c, d);
    }
    let res = norm(&hv);
    Ok((theta, v, res, total_iters))
}

/// Smallest (and optionally first excited) eigenvalue by shifted inverse
/// power iteration with conjugate-gradient solves.
pub fn ground_state(
    op: &dyn LinearOp,
    budget: &SolverBudget,
    want_e1: bool,
    seed: u64,
) -> Result<GroundState, OracleError> {
    if op.dim() > 10_000_000 {
        return Err(OracleError::TooLarge(op.dim()));
    }
    let diag = op.diagonal();
    let sigma = 0.1 * op.gap_hint();
    let (e0, v0, residual, iterations) = inverse_power(op, budget, sigma, &diag, None, seed)?;
    let (e1, vector1, e1_residual) = if want_e1 {
        let (t1, v1, r1, _) = inverse_power(op, budget, sigma, &diag, Some(&v0), seed ^ 0xabcd)?;
        (Some(t1), Some(v1), r1)
    } else {
        (None, None, 0.0)
    };
    Ok(GroundState { e0, e1, vector: v0, vector1, residual, e1_residual, iterations })
}

// ---------------------------------------------------------------------------
// Radial sector: two particles in a ball, reduced to the tridiagonal
// Neumann problem on [0, kappa].
// ---------------------------------------------------------------------------

/// Number of eigenvalues of the symmetric tridiagonal matrix strictly
/// below `lambda` (Sturm/LDL pivot count).
fn sturm_count(diag: &[f64], off: &[f64], lambda: f64) -> usize {
    let n = diag.len();
    let mut count = 0;
    let mut q = diag[0] - lambda;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let guard = 1e-300;
        let qs = if q.abs() < guard { guard.copysign(q) } else { q };
        q = (diag[i] - lambda) - off[i - 1] * off[i - 1] / qs;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn smallest_tridiag_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for i in 0..n {
        let l = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let r = if i < n - 1 { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - l - r);
        hi = hi.max(diag[i] + l + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Lowest eigenvalue of the radial operator `-u'' + (V/2) u` on
/// `[0, kappa]` with `u(0) = 0` and the ball-Neumann matching
/// `u'(kappa) = u(kappa)/kappa`, discretized as a symmetric quadratic
/// form (trapezoid mass) on `m` nodes. The two-particle relative-motion
/// eigenvalue equals twice this value.
pub fn radial_neumann_fd(pot: &PotentialSpec, kappa: f64, m: usize) -> f64 {
    let h = kappa / m as f64;
    let mut a_diag = vec![0.0; m];
    let mut a_off = vec![0.0; m - 1];
    let mut mass = vec![0.0; m];
    for i in 0..m {
        let r = (i + 1) as f64 * h;
        let w = if i == m - 1 { 0.5 } else { 1.0 };
        mass[i] = w * h;
        a_diag[i] = w * h * 0.5 * pot.eval(r);
    }
    // gradient bonds (u_{i+1} - u_i)^2 / h, with u_0 = 0 pinned
    a_diag[0] += 1.0 / h;
    for i in 0..m - 1 {
        a_diag[i] += 1.0 / h;
        a_diag[i + 1] += 1.0 / h;
        a_off[i] -= 1.0 / h;
    }
    // boundary matching term -u(kappa)^2 / kappa
    a_diag[m - 1] -= 1.0 / kappa;
    // fold in the diagonal mass
    let diag: Vec<f64> = (0..m).map(|i| a_diag[i] / mass[i]).collect();
    let off: Vec<f64> = (0..m - 1)
        .map(|i| a_off[i] / (mass[i] * mass[i + 1]).sqrt())
        .collect();
    smallest_tridiag_eigenvalue(&diag, &off)
}

// ---------------------------------------------------------------------------
// Substitution identity on a periodic grid.
// ---------------------------------------------------------------------------

/// Residual report for the kinetic-energy substitution identity.
#[derive(Debug, Clone, Serialize)]
pub struct SubstitutionReport {
    pub residuals: Vec<f64>,
    pub max_relative: f64,
}

/// Check, for random smooth probe functions, that
/// `sum |grad psi|^2 + (V/2) psi^2` equals
/// `sum W^2 |grad (psi/W)|^2 + [W (-lap W) + (V/2) W^2] (psi/W)^2`
/// on a periodic grid (forward differences, node sampling).
pub fn substitution_identity_check(
    m: usize,
    side: f64,
    w_field: impl Fn([f64; 3]) -> f64,
    v_field: impl Fn([f64; 3]) -> f64,
    trials: usize,
    seed: u64,
) -> SubstitutionReport {
    let h = side / m as f64;
    let dim = m * m * m;
    let node = |i: usize, j: usize, k: usize| [i as f64 * h, j as f64 * h, k as f64 * h];
    let mut w = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let idx = (i * m + j) * m + k;
                w[idx] = w_field(node(i, j, k));
                v[idx] = v_field(node(i, j, k));
            }
        }
    }
    let nb = |i: usize, j: usize, k: usize, axis: usize| match axis {
        0 => (((i + 1) % m) * m + j) * m + k,
        1 => (i * m + (j + 1) % m) * m + k,
        _ => (i * m + j) * m + (k + 1) % m,
    };
    let nb_back = |i: usize, j: usize, k: usize, axis: usize| match axis {
        0 => (((i + m - 1) % m) * m + j) * m + k,
        1 => (i * m + (j + m - 1) % m) * m + k,
        _ => (i * m + j) * m + (k + m - 1) % m,
    };
    let mut rng = substream(seed, Stream::Oracle, 99);
    let mut residuals = Vec::with_capacity(trials);
    let two_pi = 2.0 * std::f64::consts::PI;
    for _ in 0..trials {
        // smooth probe: constant plus a few low Fourier modes
        let mut modes = Vec::new();
        for _ in 0..4 {
            let kx: i32 = rng.gen_range(-2..3);
            let ky: i32 = rng.gen_range(-2..3);
            let kz: i32 = rng.gen_range(-2..3);
            let amp: f64 = rng.gen_range(0.05..0.3);
            let phase: f64 = rng.gen_range(0.0..two_pi);
            modes.push((kx, ky, kz, amp, phase));
        }
        let mut psi = vec![0.0; dim];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let idx = (i * m + j) * m + k;
                    let p = node(i, j, k);
                    let mut val = 1.0;
                    for &(kx, ky, kz, amp, phase) in &modes {
                        val += amp
                            * (two_pi
                                * (kx as f64 * p[0] + ky as f64 * p[1] + kz as f64 * p[2])
                                / side
                                + phase)
                                .cos();
                    }
                    psi[idx] = val;
                }
            }
        }
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let idx = (i * m + j) * m + k;
                    let mut grad_psi2 = 0.0;
                    let mut grad_phi2 = 0.0;
                    let mut lap_w = -6.0 * w[idx];
                    for axis in 0..3 {
                        let f = nb(i, j, k, axis);
                        let b = nb_back(i, j, k, axis);
                        let d = (psi[f] - psi[idx]) / h;
                        grad_psi2 += d * d;
                        let dphi = (psi[f] / w[f] - psi[idx] / w[idx]) / h;
                        grad_phi2 += dphi * dphi;
                        lap_w += w[f] + w[b];
                    }
                    lap_w /= h * h;
                    let phi = psi[idx] / w[idx];
                    lhs += grad_psi2 + 0.5 * v[idx] * psi[idx] * psi[idx];
                    rhs += w[idx] * w[idx] * grad_phi2
                        + (w[idx] * (-lap_w) + 0.5 * v[idx] * w[idx] * w[idx]) * phi * phi;
                }
            }
        }
        residuals.push((lhs - rhs).abs() / lhs.abs());
    }
    let max_relative = residuals.iter().cloned().fold(0.0, f64::max);
    SubstitutionReport { residuals, max_relative }
}

/// Temple bound from a trial vector against the solver's spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct TempleVsExact {
    pub bound: Option<f64>,
    pub e0: f64,
    pub slack: Option<f64>,
    pub trial_mean: f64,
}

/// Evaluate Temple's inequality with `E1` deflated by ten times its
/// residual error, and compare against the solver's ground level.
pub fn temple_vs_exact(op: &dyn LinearOp, trial: &[f64], gs: &GroundState) -> TempleVsExact {
    let mut hv = vec![0.0; trial.len()];
    op.apply(trial, &mut hv);
    let nn = par::dot(trial, trial);
    let mean = par::dot(trial, &hv) / nn;
    let second = par::dot(&hv, &hv) / nn;
    let e1_lower = gs.e1.expect("temple_vs_exact needs e1") - 10.0 * gs.e1_residual;
    let bound = crate::cellbound::temple_lower_bound(&crate::cellbound::TempleInput {
        mean,
        second_moment: second,
        e1_lower,
    })
    .ok();
    TempleVsExact {
        bound,
        e0: gs.e0,
        slack: bound.map(|b| gs.e0 - b),
        trial_mean: mean,
    }
}
