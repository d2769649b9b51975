//! Two-body radial problems: the zero-energy scattering solution (giving
//! the scattering length `a`) and the lowest Neumann eigenpair
//! `(e0, 1 - tau)` of `-lap + V/2` on a ball of radius `kappa`.
//!
//! Everything works on the reduced profile `u(r) = r * phi(r)`, which
//! removes the coordinate singularity at the origin: `u'' = (V/2 - e) u`
//! with the series start `u(h) = h (1 + (V(0)/2 - e) h^2 / 6)`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};
use thiserror::Error;

/// Shape of the repulsive short-range two-body potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "shape")]
pub enum PotentialSpec {
    /// `V(r) = v0` for `r <= r0`, zero beyond.
    SquareBarrier { v0: f64, r0: f64 },
    /// `V(r) = v0 exp(-r^2 / (2 w^2))`, truncated at the radius where it
    /// falls below `trunc_tol * v0` (default 1e-12).
    Gaussian { v0: f64, width: f64 },
    /// `V(r) = v0 exp(1 - 1/(1 - (r/r0)^2))` for `r < r0`, zero beyond.
    SmoothBump { v0: f64, r0: f64 },
}

/// Relative truncation level used to assign a support radius to
/// non-compactly-supported shapes.
pub const TRUNCATION_TOL: f64 = 1e-12;

impl PotentialSpec {
    pub fn amplitude(&self) -> f64 {
        match *self {
            PotentialSpec::SquareBarrier { v0, .. }
            | PotentialSpec::Gaussian { v0, .. }
            | PotentialSpec::SmoothBump { v0, .. } => v0,
        }
    }

    /// Support radius `R0`: the smallest radius past which `V` is below
    /// `TRUNCATION_TOL * v0` (exact support for barrier and bump).
    pub fn support_radius(&self) -> f64 {
        match *self {
            PotentialSpec::SquareBarrier { r0, .. } => r0,
            PotentialSpec::SmoothBump { r0, .. } => r0,
            PotentialSpec::Gaussian { width, .. } => {
                width * (2.0 * (1.0 / TRUNCATION_TOL).ln()).sqrt()
            }
        }
    }

    /// Evaluate `V(r)`. Non-negative everywhere, zero past the support
    /// radius.
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            PotentialSpec::SquareBarrier { v0, r0 } => {
                if r <= r0 {
                    v0
                } else {
                    0.0
                }
            }
            PotentialSpec::Gaussian { v0, width } => {
                if r > self.support_radius() {
                    0.0
                } else {
                    v0 * (-r * r / (2.0 * width * width)).exp()
                }
            }
            PotentialSpec::SmoothBump { v0, r0 } => {
                let x = r / r0;
                if x >= 1.0 {
                    0.0
                } else {
                    v0 * (1.0 - 1.0 / (1.0 - x * x)).exp()
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let (v0, scale) = match *self {
            PotentialSpec::SquareBarrier { v0, r0 } | PotentialSpec::SmoothBump { v0, r0 } => {
                (v0, r0)
            }
            PotentialSpec::Gaussian { v0, width } => (v0, width),
        };
        if v0 < 0.0 || !v0.is_finite() {
            return Err(SolveError::Model("potential amplitude must be >= 0".into()));
        }
        if scale <= 0.0 || !scale.is_finite() {
            return Err(SolveError::Model("potential length scale must be > 0".into()));
        }
        Ok(())
    }
}

/// Resolution parameters for the radial grids.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    /// Total number of integration steps over the domain.
    pub points: usize,
    /// For zero-energy solves: the grid extends this many support radii
    /// past `R0` (must be >= 4).
    pub margin_factor: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points: 10_000,
            margin_factor: 4.0,
        }
    }
}

/// Which radial problem a solution came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProfileKind {
    /// Zero-energy scattering profile; `u` is affine past `R0`.
    ZeroEnergy { a: f64 },
    /// Lowest Neumann mode on the ball of radius `kappa`, normalized so
    /// `phi(kappa) = 1`.
    NeumannMode { kappa: f64, e0: f64 },
}

/// Discretized radial profile on a uniform grid `r_i = i h`, `i = 0..=n`.
#[derive(Debug, Clone, Serialize)]
pub struct RadialSolution {
    pub kind: ProfileKind,
    pub step: f64,
    /// `u(r_i) = r_i phi(r_i)`; `u[0] = 0`.
    pub u: Vec<f64>,
    /// `phi(r_i)`, with the `r -> 0` limit filled in at index 0.
    pub phi: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("integration did not stay finite (step too coarse): {0}")]
    Resolution(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("eigenvalue bracket failure: {0}")]
    Bracket(String),
    #[error("profile bound violated (discretization failure): {0}")]
    BoundViolation(String),
}

impl RadialSolution {
    pub fn r_max(&self) -> f64 {
        self.step * (self.u.len() - 1) as f64
    }

    /// Linear interpolation of `phi` at radius `r` (clamped to the grid).
    pub fn phi_at(&self, r: f64) -> f64 {
        let n = self.phi.len() - 1;
        let x = (r / self.step).clamp(0.0, n as f64);
        let i = (x as usize).min(n - 1);
        let t = x - i as f64;
        self.phi[i] * (1.0 - t) + self.phi[i + 1] * t
    }

    /// `tau(r) = 1 - phi(r)` inside the ball, zero outside.
    pub fn tau_at(&self, r: f64) -> f64 {
        match self.kind {
            ProfileKind::NeumannMode { kappa, .. } => {
                if r >= kappa {
                    0.0
                } else {
                    1.0 - self.phi_at(r)
                }
            }
            ProfileKind::ZeroEnergy { .. } => 1.0 - self.phi_at(r),
        }
    }

    /// Two-column CSV (r, value) with a comment header naming the profile
    /// kind and potential parameters.
    pub fn to_csv(&self, pot: &PotentialSpec) -> String {
        let mut out = String::new();
        match self.kind {
            ProfileKind::ZeroEnergy { a } => {
                out.push_str(&format!("# kind=zero-energy a={a} pot={pot:?}\n"));
                out.push_str("r,u\n");
                for (i, u) in self.u.iter().enumerate() {
                    out.push_str(&format!("{},{}\n", i as f64 * self.step, u));
                }
            }
            ProfileKind::NeumannMode { kappa, e0 } => {
                out.push_str(&format!(
                    "# kind=neumann-mode kappa={kappa} e0={e0} pot={pot:?}\n"
                ));
                out.push_str("r,tau\n");
                for i in 0..self.phi.len() {
                    out.push_str(&format!("{},{}\n", i as f64 * self.step, 1.0 - self.phi[i]));
                }
            }
        }
        out
    }
}

/// RK4 integration of `u'' = (V/2 - e) u` from the series start at `r = h`
/// out to `r = n h`. Returns `(u values, final u, final u')`.
///
/// The support radius sits on a grid node, and stages of steps inside the
/// support are clamped to it (those outside to just past it), so the
/// integrator keeps its order across a potential jump at `R0`.
fn integrate(pot: &PotentialSpec, e: f64, h: f64, n: usize) -> Result<(Vec<f64>, f64, f64), SolveError> {
    let r0 = pot.support_radius();
    let r0_out = f64::from_bits(r0.to_bits() + 1);
    let m_split = (r0 / h).round() as usize;
    let g_in = |r: f64| 0.5 * pot.eval(r.min(r0)) - e;
    let g_out = |r: f64| 0.5 * pot.eval(r.max(r0_out)) - e;
    let g0 = 0.5 * pot.eval(0.0) - e;
    let mut u = h * (1.0 + g0 * h * h / 6.0);
    let mut du = 1.0 + g0 * h * h / 2.0;
    let mut us = Vec::with_capacity(n + 1);
    us.push(0.0);
    us.push(u);
    for i in 1..n {
        let r = i as f64 * h;
        let g = |x: f64| if i < m_split { g_in(x) } else { g_out(x) };
        // RK4 on the first-order system (u, u')
        let k1u = du;
        let k1d = g(r) * u;
        let rmid = r + 0.5 * h;
        let k2u = du + 0.5 * h * k1d;
        let k2d = g(rmid) * (u + 0.5 * h * k1u);
        let k3u = du + 0.5 * h * k2d;
        let k3d = g(rmid) * (u + 0.5 * h * k2u);
        let k4u = du + h * k3d;
        let k4d = g(r + h) * (u + h * k3u);
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        du += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        if !u.is_finite() || !du.is_finite() {
            return Err(SolveError::Resolution(format!(
                "profile blew up at r = {:.3}",
                r + h
            )));
        }
        us.push(u);
    }
    Ok((us, u, du))
}

/// Pick a step size so the potential's support radius lands exactly on a
/// grid node (keeps the integrator's order across the support edge).
fn aligned_step(r_max: f64, r0: f64, points: usize) -> (f64, usize) {
    let raw = r_max / points as f64;
    let m = (r0 / raw).round().max(1.0);
    let h = r0 / m;
    let n = (r_max / h).ceil() as usize;
    (h, n)
}

/// Solve the zero-energy scattering problem and extract the scattering
/// length by an affine least-squares fit over the outer half of the free
/// region.
pub fn solve_zero_energy(pot: &PotentialSpec, grid: &GridSpec) -> Result<RadialSolution, SolveError> {
    pot.validate()?;
    if grid.margin_factor < 4.0 {
        return Err(SolveError::Model(
            "grid must extend at least 4 support radii past R0".into(),
        ));
    }
    let r0 = pot.support_radius();
    let r_max = r0 * (1.0 + grid.margin_factor);
    let (h, n) = aligned_step(r_max, r0, grid.points.max(16));
    let (us, _, _) = integrate(pot, 0.0, h, n)?;

    // fit u = p + q r on the outer half of the free region
    let fit_lo = r0 + 0.5 * (r_max - r0);
    let i_lo = (fit_lo / h).ceil() as usize;
    let (mut sx, mut sy, mut sxx, mut sxy, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &u) in us.iter().enumerate().skip(i_lo) {
        let r = i as f64 * h;
        sx += r;
        sy += u;
        sxx += r * r;
        sxy += r * u;
        cnt += 1.0;
    }
    let det = cnt * sxx - sx * sx;
    let q = (cnt * sxy - sx * sy) / det;
    let p = (sy * sxx - sx * sxy) / det;
    if q <= 0.0 {
        return Err(SolveError::Model("fitted slope not positive".into()));
    }
    let a = -p / q;
    if a < -1e-6 * r0 {
        return Err(SolveError::Model(format!(
            "fitted scattering length {a:.3e} negative beyond tolerance (non-repulsive input?)"
        )));
    }
    let phi = phi_from_u(&us, h, 1.0);
    Ok(RadialSolution {
        kind: ProfileKind::ZeroEnergy { a },
        step: h,
        u: us,
        phi,
    })
}

fn phi_from_u(us: &[f64], h: f64, scale: f64) -> Vec<f64> {
    let mut phi = Vec::with_capacity(us.len());
    for (i, &u) in us.iter().enumerate() {
        if i == 0 {
            // phi(0) = u'(0) * scale; the series start has u'(0) = 1
            phi.push(scale);
        } else {
            phi.push(scale * u / (i as f64 * h));
        }
    }
    phi
}

/// Solve the lowest Neumann eigenpair on the ball of radius `kappa`.
///
/// Bisection on the Neumann mismatch `u'(kappa) - u(kappa)/kappa`, seeded
/// by the two-sided bound `e0 in [3a/k^3, 3a/k^3 (1 + C/k)]`; the bracket
/// widens geometrically if the seed misses. The returned profile is
/// normalized so `phi(kappa) = 1`.
pub fn solve_neumann_mode(
    pot: &PotentialSpec,
    kappa: f64,
    grid: &GridSpec,
) -> Result<RadialSolution, SolveError> {
    pot.validate()?;
    let r0 = pot.support_radius();
    if kappa < 4.0 * r0 {
        return Err(SolveError::Model(format!(
            "kappa = {kappa} must be at least 4 R0 = {}",
            4.0 * r0
        )));
    }
    // the ball radius must land exactly on the last node; a potential
    // jump mid-step costs one O(h^2) step, which the eigenvalue target
    // tolerates
    let n = grid.points.max(64);
    let h = kappa / n as f64;

    if pot.amplitude() == 0.0 {
        // free case: constant Neumann ground state, e0 = 0, tau = 0
        let us: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let phi = vec![1.0; n + 1];
        return Ok(RadialSolution {
            kind: ProfileKind::NeumannMode { kappa, e0: 0.0 },
            step: h,
            u: us,
            phi,
        });
    }

    let a = match solve_zero_energy(pot, grid)?.kind {
        ProfileKind::ZeroEnergy { a } => a,
        _ => unreachable!(),
    };
    let mismatch = |e: f64| -> Result<f64, SolveError> {
        let (_, u, du) = integrate(pot, e, h, n)?;
        Ok(du - u / kappa)
    };

    let mut lo = 0.0;
    let mut hi = 2.0 * (3.0 * a / kappa.powi(3)) * (1.0 + 8.0 * r0 / kappa);
    let mut widen = 0;
    while mismatch(hi)? > 0.0 {
        hi *= 2.0;
        widen += 1;
        if widen > 60 {
            return Err(SolveError::Bracket(format!(
                "no sign change up to e = {hi:.3e}; kappa too small relative to R0 or grid too coarse"
            )));
        }
    }
    if mismatch(lo)? < 0.0 {
        return Err(SolveError::Bracket("mismatch negative at e = 0".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mismatch(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-8 * hi.max(1e-300) {
            break;
        }
    }
    let e0 = 0.5 * (lo + hi);
    let (us, u_end, _) = integrate(pot, e0, h, n)?;
    // node-count-zero constraint: ground state has no sign change
    if us.iter().skip(1).any(|&u| u <= 0.0) {
        return Err(SolveError::Bracket(
            "converged mode has a node; bracket captured an excited state".into(),
        ));
    }
    let scale = kappa / u_end;
    let us: Vec<f64> = us.into_iter().map(|u| u * scale).collect();
    let phi = phi_from_u(&us, h, 1.0);
    Ok(RadialSolution {
        kind: ProfileKind::NeumannMode { kappa, e0 },
        step: h,
        u: us,
        phi,
    })
}

/// Realized profile-bound constants for a Neumann mode.
///
/// `phi_min` is the realized lower bound on the profile (the constant the
/// bound `phi >= c0` is about); `tau_max = 1 - phi_min` is the matching
/// deficit used for trial-factor lower bounds; `c1` is the realized
/// `max_r r (1 - phi(r))`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProfileBounds {
    pub phi_min: f64,
    pub phi_max: f64,
    pub tau_max: f64,
    pub c1: f64,
}

/// Scan a Neumann-mode profile for its realized bound constants.
///
/// The inequalities `0 < phi <= 1` are theorems for these modes, so a
/// violation (beyond discretization tolerance) is reported as an error.
pub fn check_profile_bounds(sol: &RadialSolution) -> Result<ProfileBounds, SolveError> {
    if !matches!(sol.kind, ProfileKind::NeumannMode { .. }) {
        return Err(SolveError::Model("profile bounds apply to Neumann modes".into()));
    }
    let mut phi_min = f64::INFINITY;
    let mut phi_max = f64::NEG_INFINITY;
    let mut c1 = 0.0f64;
    for (i, &p) in sol.phi.iter().enumerate() {
        let r = i as f64 * sol.step;
        phi_min = phi_min.min(p);
        phi_max = phi_max.max(p);
        c1 = c1.max(r * (1.0 - p));
    }
    if phi_max > 1.0 + 1e-9 {
        return Err(SolveError::BoundViolation(format!("max phi = {phi_max} > 1")));
    }
    if phi_min <= 0.0 {
        return Err(SolveError::BoundViolation(format!("min phi = {phi_min} <= 0")));
    }
    Ok(ProfileBounds {
        phi_min,
        phi_max,
        tau_max: 1.0 - phi_min,
        c1,
    })
}

/// Cache of Neumann solves on a geometric kappa ladder (ratio 1.02).
///
/// `tau(t, .)` for a continuum of half-distances `t` is served by the
/// solution at the largest ladder radius `<= t`; flooring keeps the
/// profile support inside the ball of radius `t`, so the single-term
/// lower bound on the trial factor survives quantization exactly.
pub struct NeumannTable {
    pot: PotentialSpec,
    grid: GridSpec,
    kappa_min: f64,
    ratio: f64,
    cache: RwLock<BTreeMap<i64, Arc<RadialSolution>>>,
}

impl NeumannTable {
    pub fn new(pot: PotentialSpec, grid: GridSpec, kappa_min: f64) -> Self {
        NeumannTable {
            pot,
            grid,
            kappa_min,
            ratio: 1.02,
            cache: RwLock::new(BTreeMap::new()),
        }
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.pot
    }

    fn ladder_index(&self, kappa: f64) -> i64 {
        ((kappa / self.kappa_min).ln() / self.ratio.ln()).floor() as i64
    }

    /// The quantized radius actually used for a requested `kappa`.
    pub fn quantized_kappa(&self, kappa: f64) -> f64 {
        let idx = self.ladder_index(kappa).max(0);
        self.kappa_min * self.ratio.powi(idx as i32)
    }

    /// Solution at the ladder radius for `kappa` (solving on first use).
    pub fn solution(&self, kappa: f64) -> Result<Arc<RadialSolution>, SolveError> {
        let idx = self.ladder_index(kappa).max(0);
        if let Some(sol) = self.cache.read().unwrap().get(&idx) {
            return Ok(sol.clone());
        }
        let k = self.kappa_min * self.ratio.powi(idx as i32);
        let sol = Arc::new(solve_neumann_mode(&self.pot, k, &self.grid)?);
        let mut w = self.cache.write().unwrap();
        Ok(w.entry(idx).or_insert(sol).clone())
    }

    /// Exact (unladdered) solve, cached under its own key. Used for the
    /// fixed outer radius `l0`.
    pub fn solution_exact(&self, kappa: f64) -> Result<Arc<RadialSolution>, SolveError> {
        // negative keys index exact radii; one slot per distinct kappa
        let key = -(1 + (kappa.to_bits() as i64 & 0x3fff_ffff));
        if let Some(sol) = self.cache.read().unwrap().get(&key) {
            return Ok(sol.clone());
        }
        let sol = Arc::new(solve_neumann_mode(&self.pot, kappa, &self.grid)?);
        let mut w = self.cache.write().unwrap();
        Ok(w.entry(key).or_insert(sol).clone())
    }

    pub fn e0(&self, kappa: f64) -> Result<f64, SolveError> {
        match self.solution(kappa)?.kind {
            ProfileKind::NeumannMode { e0, .. } => Ok(e0),
            _ => unreachable!(),
        }
    }

    /// Largest profile deficit `1 - phi_min` over all cached solutions.
    pub fn tau_max_cached(&self) -> f64 {
        let cache = self.cache.read().unwrap();
        cache
            .values()
            .filter_map(|s| check_profile_bounds(s).ok())
            .map(|b| b.tau_max)
            .fold(0.0, f64::max)
    }

    /// Largest realized `c1 = max_r r tau(r)` over all cached solutions.
    pub fn c1_max_cached(&self) -> f64 {
        let cache = self.cache.read().unwrap();
        cache
            .values()
            .filter_map(|s| check_profile_bounds(s).ok())
            .map(|b| b.c1)
            .fold(0.0, f64::max)
    }
}
