//! Particle configurations on a 3-torus: nearest-neighbor structure
//! (t, F, G), the trial factor `W_j`, soft potentials `q_ij` and their
//! cell-truncated variant, and the averaged-origin grid decomposition.

use crate::par;
use crate::rng::{substream, Stream};
use crate::scales::ScaleSet;
use crate::twobody::NeumannTable;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("position {0} outside [0, L)")]
    OutOfRange(usize),
    #[error("threshold hierarchy violated: {0}")]
    Thresholds(String),
    #[error("box invalid: {0}")]
    BadBox(String),
    #[error("grid invalid: {0}")]
    BadGrid(String),
    #[error("csv parse error: {0}")]
    Csv(String),
    #[error(transparent)]
    Solve(#[from] crate::twobody::SolveError),
}

/// `N` positions on the torus `[0, L)^3` with the minimal-image metric.
#[derive(Debug, Clone, Serialize)]
pub struct ParticleConfig {
    pub side: f64,
    pub positions: Vec<[f64; 3]>,
}

impl ParticleConfig {
    pub fn new(side: f64, positions: Vec<[f64; 3]>) -> Result<Self, ConfigError> {
        for (i, p) in positions.iter().enumerate() {
            if p.iter().any(|&c| !(0.0..side).contains(&c)) {
                return Err(ConfigError::OutOfRange(i));
            }
        }
        Ok(ParticleConfig { side, positions })
    }

    pub fn random(side: f64, n: usize, rng: &mut impl Rng) -> Self {
        let positions = (0..n)
            .map(|_| [(); 3].map(|_| rng.gen_range(0.0..side)))
            .collect();
        ParticleConfig { side, positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn density(&self) -> f64 {
        self.len() as f64 / self.side.powi(3)
    }

    /// Minimal-image distance between two points on the torus.
    pub fn distance(&self, a: [f64; 3], b: [f64; 3]) -> f64 {
        let mut s = 0.0;
        for ax in 0..3 {
            let mut d = (a[ax] - b[ax]).abs();
            if d > 0.5 * self.side {
                d = self.side - d;
            }
            s += d * d;
        }
        s.sqrt()
    }

    /// CSV snapshot: `# L=<side>` comment, `x,y,z` header, one row per
    /// particle.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# L={}\nx,y,z\n", self.side);
        for p in &self.positions {
            out.push_str(&format!("{},{},{}\n", p[0], p[1], p[2]));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, ConfigError> {
        let mut side = None;
        let mut positions = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("L=") {
                    side = Some(v.trim().parse::<f64>().map_err(|e| ConfigError::Csv(e.to_string()))?);
                }
                continue;
            }
            if line.starts_with('x') {
                continue; // header row
            }
            let mut it = line.split(',');
            let mut p = [0.0; 3];
            for c in &mut p {
                *c = it
                    .next()
                    .ok_or_else(|| ConfigError::Csv("short row".into()))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| ConfigError::Csv(e.to_string()))?;
            }
            positions.push(p);
        }
        let side = side.ok_or_else(|| ConfigError::Csv("missing # L= header".into()))?;
        ParticleConfig::new(side, positions)
    }
}

/// The two cutoff lengths of the neighbor structure. The hard validation
/// ratio between them is 4.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Thresholds {
    pub l0: f64,
    pub l_minus1: f64,
}

impl Thresholds {
    pub fn new(l0: f64, l_minus1: f64) -> Result<Self, ConfigError> {
        if !(l0 > 0.0 && l_minus1 > 0.0 && l0 >= 4.0 * l_minus1) {
            return Err(ConfigError::Thresholds(format!(
                "need l0 >= 4 l_minus1 > 0, got l0 = {l0}, l_minus1 = {l_minus1}"
            )));
        }
        Ok(Thresholds { l0, l_minus1 })
    }

    pub fn from_scales(s: &ScaleSet) -> Result<Self, ConfigError> {
        Thresholds::new(s.l0, s.l_minus1)
    }
}

/// Per ordered pair (i, j): half-distance `t_ij` from `x_i` to its
/// nearest particle other than `x_j`, plus the two cutoff indicators.
/// None of the three depends on the position `x_j`, and per particle the
/// half-distance takes only two values (excluding the nearest neighbor
/// or not), so the structure stores one triple per particle.
#[derive(Debug, Clone)]
pub struct NeighborStructure {
    n: usize,
    pub thresholds: Thresholds,
    /// (nearest distance, index attaining it, second-nearest distance)
    near: Vec<(f64, usize, f64)>,
}

impl NeighborStructure {
    /// `t_ij = (1/2) min_{k != i,j} |x_i - x_k|` (infinite for N <= 2).
    pub fn t(&self, i: usize, j: usize) -> f64 {
        if self.n <= 2 {
            return f64::INFINITY;
        }
        let (d1, k1, d2) = self.near[i];
        0.5 * if j == k1 { d2 } else { d1 }
    }

    /// Cutoff at `l0`: particle `i` is isolated from everything but `j`.
    pub fn f(&self, i: usize, j: usize) -> bool {
        self.t(i, j) > self.thresholds.l0
    }

    /// Cutoff at `l_minus1`.
    pub fn g(&self, i: usize, j: usize) -> bool {
        self.t(i, j) > self.thresholds.l_minus1
    }
}

/// (nearest distance, index attaining it, second-nearest distance)
fn two_nearest_direct(cfg: &ParticleConfig) -> Vec<(f64, usize, f64)> {
    let n = cfg.len();
    par::map_indexed(n, |i| {
        let mut d1 = f64::INFINITY;
        let mut k1 = usize::MAX;
        let mut d2 = f64::INFINITY;
        for k in 0..n {
            if k == i {
                continue;
            }
            let d = cfg.distance(cfg.positions[i], cfg.positions[k]);
            if d < d1 {
                d2 = d1;
                d1 = d;
                k1 = k;
            } else if d < d2 {
                d2 = d;
            }
        }
        (d1, k1, d2)
    })
}

/// Cell-list variant of [`two_nearest_direct`]; exact (expands the search
/// shell until no unvisited cell can hold a closer point).
fn two_nearest_cells(cfg: &ParticleConfig) -> Vec<(f64, usize, f64)> {
    let n = cfg.len();
    let m = ((n as f64 / 4.0).cbrt().floor() as usize).max(1);
    if m < 4 {
        return two_nearest_direct(cfg);
    }
    let cell = cfg.side / m as f64;
    let mut lists = vec![Vec::new(); m * m * m];
    let cell_of = |p: [f64; 3]| -> [usize; 3] {
        p.map(|c| ((c / cell) as usize).min(m - 1))
    };
    for (idx, p) in cfg.positions.iter().enumerate() {
        let c = cell_of(*p);
        lists[(c[0] * m + c[1]) * m + c[2]].push(idx);
    }
    par::map_indexed(n, |i| {
        let pi = cfg.positions[i];
        let ci = cell_of(pi);
        let mut d1 = f64::INFINITY;
        let mut k1 = usize::MAX;
        let mut d2 = f64::INFINITY;
        let half = m / 2;
        for s in 0..=half {
            // cells whose Chebyshev shell index is s
            let lo = -(s as i64);
            let hi = s as i64;
            for dx in lo..=hi {
                for dy in lo..=hi {
                    for dz in lo..=hi {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != s as i64 {
                            continue;
                        }
                        // skip mirrored duplicates when the shell wraps the torus
                        if m % 2 == 0 && s == half && (dx == lo || dy == lo || dz == lo) {
                            continue;
                        }
                        let cx = (ci[0] as i64 + dx).rem_euclid(m as i64) as usize;
                        let cy = (ci[1] as i64 + dy).rem_euclid(m as i64) as usize;
                        let cz = (ci[2] as i64 + dz).rem_euclid(m as i64) as usize;
                        for &k in &lists[(cx * m + cy) * m + cz] {
                            if k == i {
                                continue;
                            }
                            let d = cfg.distance(pi, cfg.positions[k]);
                            if d < d1 {
                                d2 = d1;
                                d1 = d;
                                k1 = k;
                            } else if d < d2 {
                                d2 = d;
                            }
                        }
                    }
                }
            }
            // every unvisited cell is at least (s) * cell away
            if d2.is_finite() && (s as f64) * cell >= d2 {
                break;
            }
        }
        (d1, k1, d2)
    })
}

/// Cell-list accelerated neighbor build (exact; parallel over particles).
pub fn build_neighbors(cfg: &ParticleConfig, thresholds: Thresholds) -> NeighborStructure {
    let near = if cfg.len() > 64 {
        two_nearest_cells(cfg)
    } else {
        two_nearest_direct(cfg)
    };
    NeighborStructure { n: cfg.len(), thresholds, near }
}

/// Literal `O(N^3)` reference build, straight from the definition of
/// `t_ij`. Kept sequential; used as the agreement oracle and as the
/// serial baseline in benchmarks.
pub fn build_neighbors_brute(cfg: &ParticleConfig, thresholds: Thresholds) -> NeighborStructure {
    let n = cfg.len();
    // the per-pair minima collapse to (nearest, arg, second-nearest):
    // t_ij equals half the second-nearest distance exactly when j is the
    // nearest index, half the nearest distance otherwise
    let mut near = vec![(f64::INFINITY, usize::MAX, f64::INFINITY); n];
    if n > 2 {
        for (i, slot) in near.iter_mut().enumerate() {
            let mut d1 = f64::INFINITY;
            let mut d2 = f64::NEG_INFINITY;
            let mut k1 = usize::MAX;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let mut best = f64::INFINITY;
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    best = best.min(cfg.distance(cfg.positions[i], cfg.positions[k]));
                }
                // best equals the second-nearest distance exactly when j
                // is the nearest index, the nearest distance otherwise
                if best > d2 {
                    d2 = best;
                    k1 = j;
                }
                if best < d1 {
                    d1 = best;
                }
            }
            *slot = (d1, k1, d2);
        }
    }
    NeighborStructure { n, thresholds, near }
}

/// Trial factor `W_j` with the moving coordinate at `y` (replacing `x_j`):
/// `1 - sum_i [F_ij tau(l0, x_i - y) + (1 - F_ij) G_ij tau(t_ij, x_i - y)]`.
pub fn eval_w(
    cfg: &ParticleConfig,
    nbrs: &NeighborStructure,
    table: &NeumannTable,
    j: usize,
    y: [f64; 3],
) -> Result<f64, ConfigError> {
    let l0 = nbrs.thresholds.l0;
    let mut w = 1.0;
    for i in 0..cfg.len() {
        if i == j {
            continue;
        }
        let d = cfg.distance(cfg.positions[i], y);
        if d >= l0 {
            continue; // both tau terms vanish past l0
        }
        if nbrs.f(i, j) {
            w -= table.solution_exact(l0)?.tau_at(d);
        } else if nbrs.g(i, j) {
            w -= table.solution(nbrs.t(i, j))?.tau_at(d);
        }
    }
    Ok(w)
}

/// Soft potential `q_ij` at `x_j = y`: `e0(l0)` inside the `l0` ball when
/// `F_ij`, `e0(t_ij)` inside the `t_ij` ball when only `G_ij`, else zero.
/// Asymmetric in (i, j) by construction.
pub fn eval_soft_potential(
    cfg: &ParticleConfig,
    nbrs: &NeighborStructure,
    table: &NeumannTable,
    i: usize,
    j: usize,
    y: [f64; 3],
) -> Result<f64, ConfigError> {
    let l0 = nbrs.thresholds.l0;
    let d = cfg.distance(cfg.positions[i], y);
    if nbrs.f(i, j) {
        if d <= l0 {
            return Ok(match table.solution_exact(l0)?.kind {
                crate::twobody::ProfileKind::NeumannMode { e0, .. } => e0,
                _ => unreachable!(),
            });
        }
    } else if nbrs.g(i, j) {
        let kq = table.quantized_kappa(nbrs.t(i, j));
        if d <= kq {
            return Ok(table.e0(nbrs.t(i, j))?);
        }
    }
    Ok(0.0)
}

/// Cell-truncated soft potential: `q_ij` if `x_i` sits deep inside its
/// grid cell (margin `2 l0`), zero otherwise.
pub fn eval_truncated_soft_potential(
    grid: &GridDecomposition,
    cfg: &ParticleConfig,
    nbrs: &NeighborStructure,
    table: &NeumannTable,
    i: usize,
    j: usize,
    y: [f64; 3],
) -> Result<f64, ConfigError> {
    if !grid.chi_tilde(cfg.positions[i]) {
        return Ok(0.0);
    }
    eval_soft_potential(cfg, nbrs, table, i, j, y)
}

/// Candidate particles with their tau profiles resolved up front, for
/// repeated evaluation of `W_j` inside a sampling loop (no cache locking
/// on the hot path).
pub struct WSampler {
    entries: Vec<([f64; 3], std::sync::Arc<crate::twobody::RadialSolution>)>,
    side: f64,
    l0: f64,
}

impl WSampler {
    /// Resolve every particle that can influence `W_j` (optionally only
    /// those within `l0` of a box).
    pub fn new(
        cfg: &ParticleConfig,
        nbrs: &NeighborStructure,
        table: &NeumannTable,
        j: usize,
        within: Option<&Box3>,
    ) -> Result<Self, ConfigError> {
        let l0 = nbrs.thresholds.l0;
        let mut entries = Vec::new();
        for i in 0..cfg.len() {
            if i == j {
                continue;
            }
            if let Some(bx) = within {
                if bx.torus_distance(cfg.positions[i], cfg.side) >= l0 {
                    continue;
                }
            }
            if nbrs.f(i, j) {
                entries.push((cfg.positions[i], table.solution_exact(l0)?));
            } else if nbrs.g(i, j) {
                entries.push((cfg.positions[i], table.solution(nbrs.t(i, j))?));
            }
        }
        Ok(WSampler { entries, side: cfg.side, l0 })
    }

    pub fn eval(&self, y: [f64; 3]) -> f64 {
        let mut w = 1.0;
        for (pos, sol) in &self.entries {
            let mut s = 0.0;
            for ax in 0..3 {
                let mut d = (pos[ax] - y[ax]).abs();
                if d > 0.5 * self.side {
                    d = self.side - d;
                }
                s += d * d;
            }
            let d = s.sqrt();
            if d < self.l0 {
                w -= sol.tau_at(d);
            }
        }
        w
    }
}

/// Axis-aligned box inside the torus (embedded Euclidean geometry).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Box3 {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Box3 {
    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Result<Self, ConfigError> {
        if (0..3).any(|ax| !(hi[ax] > lo[ax])) {
            return Err(ConfigError::BadBox("zero or negative extent".into()));
        }
        Ok(Box3 { lo, hi })
    }

    pub fn cube(lo: [f64; 3], side: f64) -> Result<Self, ConfigError> {
        Box3::new(lo, [lo[0] + side, lo[1] + side, lo[2] + side])
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|ax| self.hi[ax] - self.lo[ax]).product()
    }

    pub fn contains(&self, x: [f64; 3]) -> bool {
        (0..3).all(|ax| x[ax] >= self.lo[ax] && x[ax] < self.hi[ax])
    }

    pub fn center(&self) -> [f64; 3] {
        [0, 1, 2].map(|ax| 0.5 * (self.lo[ax] + self.hi[ax]))
    }

    /// Distance from the box surface to the nearest of `x`'s torus images.
    pub fn torus_distance(&self, x: [f64; 3], side: f64) -> f64 {
        let mut s = 0.0;
        for ax in 0..3 {
            let mut best = f64::INFINITY;
            for k in [-1.0, 0.0, 1.0] {
                let c = x[ax] + k * side;
                let d = if c < self.lo[ax] {
                    self.lo[ax] - c
                } else if c > self.hi[ax] {
                    c - self.hi[ax]
                } else {
                    0.0
                };
                best = best.min(d);
            }
            s += best * best;
        }
        s.sqrt()
    }
}

/// Monte Carlo budget: stratified sampling with a reproducible seed.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McBudget {
    pub samples: usize,
    pub seed: u64,
    pub strata_per_axis: usize,
}

impl McBudget {
    pub fn new(samples: usize, seed: u64) -> Self {
        McBudget { samples, seed, strata_per_axis: 4 }
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Stratified Monte Carlo integral of `f` over a box.
pub fn mc_integrate(
    bx: &Box3,
    mc: &McBudget,
    stream: Stream,
    f: impl Fn([f64; 3]) -> f64 + Sync,
) -> McEstimate {
    let spa = mc.strata_per_axis.max(1);
    let strata = spa * spa * spa;
    let per = (mc.samples / strata).max(2);
    let ext = [0, 1, 2].map(|ax| (bx.hi[ax] - bx.lo[ax]) / spa as f64);
    let vol = bx.volume();
    let partials = par::map_indexed(strata, |s| {
        let sx = s / (spa * spa);
        let sy = (s / spa) % spa;
        let sz = s % spa;
        let mut rng = substream(mc.seed, stream, s as u64);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..per {
            let x = [
                bx.lo[0] + (sx as f64 + rng.gen::<f64>()) * ext[0],
                bx.lo[1] + (sy as f64 + rng.gen::<f64>()) * ext[1],
                bx.lo[2] + (sz as f64 + rng.gen::<f64>()) * ext[2],
            ];
            let v = f(x);
            sum += v;
            sum2 += v * v;
        }
        (sum, sum2)
    });
    let mut estimate = 0.0;
    let mut var = 0.0;
    let w = vol / strata as f64;
    for (sum, sum2) in partials {
        let mean = sum / per as f64;
        let v = ((sum2 - sum * sum / per as f64) / (per as f64 - 1.0)).max(0.0);
        estimate += w * mean;
        var += w * w * v / per as f64;
    }
    McEstimate {
        estimate,
        stderr: var.sqrt(),
        samples: per * strata,
    }
}

/// `int_box |W_j|^2 dx_j` by stratified Monte Carlo, with the theorem-side
/// upper bound `estimate <= |box|` checked in place.
pub fn integrate_w_squared(
    cfg: &ParticleConfig,
    nbrs: &NeighborStructure,
    table: &NeumannTable,
    j: usize,
    bx: &Box3,
    mc: &McBudget,
) -> Result<McEstimate, ConfigError> {
    let sampler = WSampler::new(cfg, nbrs, table, j, Some(bx))?;
    let est = mc_integrate(bx, mc, Stream::ConfigSpace, |y| {
        let w = sampler.eval(y);
        w * w
    });
    let vol = bx.volume();
    if est.estimate > vol * (1.0 + 3.0 * est.stderr / vol) {
        return Err(ConfigError::BadBox(format!(
            "estimate {} exceeds box volume {} beyond Monte Carlo error",
            est.estimate, vol
        )));
    }
    Ok(est)
}

/// Both expectations of a two-valued observable (h_a on box A, h_b on
/// box B) under the `|W_j|^2` weight and under the uniform weight.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SplitExpectation {
    pub mean_w: f64,
    pub mean_uniform: f64,
    pub gap: f64,
    /// gap / (rho l0^2 max(|h_a|, |h_b|)); the bound's realized constant.
    pub realized_c: f64,
}

/// Compare `<h>_{W_j}` with the uniform average over a congruent box pair.
#[allow(clippy::too_many_arguments)]
pub fn expectation_split(
    cfg: &ParticleConfig,
    nbrs: &NeighborStructure,
    table: &NeumannTable,
    j: usize,
    box_a: &Box3,
    box_b: &Box3,
    h_a: f64,
    h_b: f64,
    mc: &McBudget,
) -> Result<SplitExpectation, ConfigError> {
    if (box_a.volume() - box_b.volume()).abs() > 1e-9 * box_a.volume() {
        return Err(ConfigError::BadBox("boxes must be congruent".into()));
    }
    let overlaps = (0..3).all(|ax| box_a.lo[ax] < box_b.hi[ax] && box_b.lo[ax] < box_a.hi[ax]);
    if overlaps {
        return Err(ConfigError::BadBox("boxes must be disjoint".into()));
    }
    let ia = integrate_w_squared(cfg, nbrs, table, j, box_a, mc)?;
    let mc_b = McBudget { seed: mc.seed ^ 0x9e37_79b9, ..*mc };
    let ib = integrate_w_squared(cfg, nbrs, table, j, box_b, &mc_b)?;
    let mean_uniform = 0.5 * (h_a + h_b);
    let mean_w = if h_a == h_b {
        h_a
    } else {
        (h_a * ia.estimate + h_b * ib.estimate) / (ia.estimate + ib.estimate)
    };
    let gap = (mean_w - mean_uniform).abs();
    let scale = cfg.density() * nbrs.thresholds.l0.powi(2) * h_a.abs().max(h_b.abs());
    Ok(SplitExpectation {
        mean_w,
        mean_uniform,
        gap,
        realized_c: if scale > 0.0 { gap / scale } else { 0.0 },
    })
}

/// Cubic grid of side-`cell` boxes covering the torus, with a shifted
/// origin `u` and an inner indicator at margin `2 l0`.
#[derive(Debug, Clone, Serialize)]
pub struct GridDecomposition {
    pub side: f64,
    pub cell: f64,
    pub margin: f64,
    pub origin: [f64; 3],
    pub cells_per_axis: usize,
}

impl GridDecomposition {
    pub fn new(side: f64, cell: f64, l0: f64, origin: [f64; 3]) -> Result<Self, ConfigError> {
        let m = side / cell;
        if (m - m.round()).abs() > 1e-9 || m.round() < 1.0 {
            return Err(ConfigError::BadGrid(format!(
                "cell side {cell} does not tile the torus of side {side}"
            )));
        }
        if cell <= 4.0 * l0 {
            return Err(ConfigError::BadGrid(format!(
                "cell side {cell} must exceed 4 l0 = {}",
                4.0 * l0
            )));
        }
        Ok(GridDecomposition {
            side,
            cell,
            margin: 2.0 * l0,
            origin,
            cells_per_axis: m.round() as usize,
        })
    }

    /// Uniform random origin in `[-cell/2, cell/2)^3`.
    pub fn random_origin(cell: f64, rng: &mut impl Rng) -> [f64; 3] {
        [(); 3].map(|_| rng.gen_range(-0.5 * cell..0.5 * cell))
    }

    /// Per-axis offset of `x` inside its cell, in `[0, cell)`.
    fn offsets(&self, x: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|ax| {
            let y = (x[ax] - self.origin[ax] + 0.5 * self.cell).rem_euclid(self.side);
            y - (y / self.cell).floor() * self.cell
        })
    }

    /// Index triple of the cell containing `x`.
    pub fn cell_index(&self, x: [f64; 3]) -> [usize; 3] {
        [0, 1, 2].map(|ax| {
            let y = (x[ax] - self.origin[ax] + 0.5 * self.cell).rem_euclid(self.side);
            ((y / self.cell) as usize).min(self.cells_per_axis - 1)
        })
    }

    /// Inner indicator: 1 iff `x` is at least `2 l0` from the boundary of
    /// its cell (per axis, half-open on the far side).
    pub fn chi_tilde(&self, x: [f64; 3]) -> bool {
        self.offsets(x)
            .iter()
            .all(|&o| o >= self.margin && o < self.cell - self.margin)
    }

    /// Exact grid-average of the inner indicator over origins:
    /// `((cell - 4 l0)/cell)^3`.
    pub fn chi_average_exact(&self) -> f64 {
        ((self.cell - 2.0 * self.margin) / self.cell).powi(3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::twobody::{GridSpec, PotentialSpec};
    use approx::assert_relative_eq;

    fn test_potential() -> PotentialSpec {
        PotentialSpec::SquareBarrier { v0: 50.0, r0: 0.25 }
    }

    fn test_table() -> NeumannTable {
        NeumannTable::new(
            test_potential(),
            GridSpec { points: 2_000, margin_factor: 4.0 },
            1.0, // kappa_min = l_minus1
        )
    }

    fn thresholds() -> Thresholds {
        Thresholds::new(4.0, 1.0).unwrap()
    }

    #[test]
    fn collinear_triple_half_distance() {
        let cfg = ParticleConfig::new(
            100.0,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [5.0, 0.0, 0.0]],
        )
        .unwrap();
        let nbrs = build_neighbors(&cfg, thresholds());
        // nearest to particle 0 other than particle 1 is the one at x = 5
        assert_relative_eq!(nbrs.t(0, 1), 2.5);
        assert_relative_eq!(nbrs.t(0, 2), 0.5);
        assert_relative_eq!(nbrs.t(1, 0), 2.0);
    }

    #[test]
    fn pair_has_infinite_half_distance() {
        let cfg = ParticleConfig::new(10.0, vec![[1.0; 3], [2.0; 3]]).unwrap();
        let nbrs = build_neighbors(&cfg, thresholds());
        assert!(nbrs.t(0, 1).is_infinite());
        assert!(nbrs.f(0, 1) && nbrs.g(1, 0));
    }

    #[test]
    fn accelerated_build_matches_brute_force_exactly() {
        let mut rng = substream(7, Stream::ConfigSpace, 99);
        for n in [64, 400] {
            let cfg = ParticleConfig::random(12.0, n, &mut rng);
            let fast = build_neighbors(&cfg, thresholds());
            let brute = build_neighbors_brute(&cfg, thresholds());
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        assert_eq!(fast.t(i, j), brute.t(i, j), "mismatch at ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn cell_search_matches_direct_scan_on_larger_grids() {
        // exercises the wrap dedup on even cell grids (m = 6 and m = 8)
        let mut rng = substream(12, Stream::ConfigSpace, 4);
        for n in [1000, 2200] {
            let cfg = ParticleConfig::random(17.0, n, &mut rng);
            let fast = two_nearest_cells(&cfg);
            let direct = two_nearest_direct(&cfg);
            for i in 0..n {
                assert_eq!(fast[i].0, direct[i].0, "d1 mismatch at {i} (n = {n})");
                assert_eq!(fast[i].2, direct[i].2, "d2 mismatch at {i} (n = {n})");
            }
        }
    }

    #[test]
    fn neighbor_structure_ignores_xj_position() {
        let mut rng = substream(8, Stream::ConfigSpace, 0);
        let mut cfg = ParticleConfig::random(10.0, 20, &mut rng);
        let nbrs = build_neighbors(&cfg, thresholds());
        let j = 5;
        cfg.positions[j] = [9.9, 0.1, 4.2];
        let moved = build_neighbors(&cfg, thresholds());
        for i in 0..20 {
            if i != j {
                assert_eq!(nbrs.t(i, j), moved.t(i, j));
            }
        }
    }

    #[test]
    fn w_is_one_far_from_everything() {
        let cfg = ParticleConfig::new(40.0, vec![[5.0; 3], [30.0; 3], [20.0, 5.0, 35.0]]).unwrap();
        let nbrs = build_neighbors(&cfg, thresholds());
        let table = test_table();
        // y farther than l0 = 4 from every other particle
        let w = eval_w(&cfg, &nbrs, &table, 0, [15.0, 15.0, 15.0]).unwrap();
        assert_eq!(w, 1.0);
    }

    #[test]
    fn w_single_neighbor_matches_tau() {
        // two close particles plus a distant third so t is finite but > l0
        let cfg = ParticleConfig::new(
            60.0,
            vec![[10.0, 10.0, 10.0], [12.0, 10.0, 10.0], [40.0, 40.0, 40.0]],
        )
        .unwrap();
        let nbrs = build_neighbors(&cfg, thresholds());
        assert!(nbrs.f(0, 1), "pair should be isolated at scale l0");
        let table = test_table();
        let y = [11.5, 10.0, 10.0]; // distance 1.5 < l0 from particle 0
        let w = eval_w(&cfg, &nbrs, &table, 1, y).unwrap();
        let tau = table.solution_exact(4.0).unwrap().tau_at(1.5);
        assert_relative_eq!(w, 1.0 - tau, max_relative = 1e-12);
        assert!(tau > 0.0);
    }

    #[test]
    fn w_stays_above_profile_floor_on_sweep() {
        let cfg = ParticleConfig::new(
            60.0,
            vec![[10.0, 10.0, 10.0], [12.0, 10.0, 10.0], [40.0, 40.0, 40.0]],
        )
        .unwrap();
        let nbrs = build_neighbors(&cfg, thresholds());
        let table = test_table();
        let floor = {
            let sol = table.solution_exact(4.0).unwrap();
            crate::twobody::check_profile_bounds(&sol).unwrap().phi_min
        };
        for k in 1..200 {
            let y = [10.0 + 0.02 * k as f64, 10.0, 10.0];
            let w = eval_w(&cfg, &nbrs, &table, 1, y).unwrap();
            assert!(w >= floor - 1e-12 && w <= 1.0 + 1e-12, "w = {w} at step {k}");
        }
    }

    #[test]
    fn w_squared_integral_empty_box_is_exact_volume() {
        let cfg = ParticleConfig::new(40.0, vec![[5.0; 3], [35.0; 3]]).unwrap();
        let nbrs = build_neighbors(&cfg, thresholds());
        let table = test_table();
        let bx = Box3::cube([15.0; 3], 6.0).unwrap();
        let est = integrate_w_squared(&cfg, &nbrs, &table, 0, &bx, &McBudget::new(4000, 1)).unwrap();
        assert_relative_eq!(est.estimate, bx.volume(), max_relative = 1e-12);
        assert_eq!(est.stderr, 0.0);
    }

    /// Radial quadrature of `int_ball (1 - (1 - tau)^2)` via Simpson on
    /// the stored profile -- the independent oracle for the W^2 deficit.
    fn deficit_quadrature(sol: &crate::twobody::RadialSolution) -> f64 {
        let h = sol.step;
        let n = sol.phi.len() - 1;
        let f = |i: usize| {
            let r = i as f64 * h;
            let tau = 1.0 - sol.phi[i];
            (2.0 * tau - tau * tau) * r * r
        };
        let mut s = 0.0;
        let mut i = 0;
        while i + 2 <= n {
            s += h / 3.0 * (f(i) + 4.0 * f(i + 1) + f(i + 2));
            i += 2;
        }
        4.0 * std::f64::consts::PI * s
    }

    #[test]
    fn one_neighbor_deficit_matches_radial_quadrature() {
        let cfg = ParticleConfig::new(
            60.0,
            vec![[20.0, 20.0, 20.0], [22.0, 20.0, 20.0], [50.0, 50.0, 50.0]],
        )
        .unwrap();
        let nbrs = build_neighbors(&cfg, thresholds());
        assert!(nbrs.f(0, 1));
        let table = test_table();
        // box centered on particle 0 comfortably containing its l0-ball
        let bx = Box3::cube([11.0, 11.0, 11.0], 18.0).unwrap();
        let est =
            integrate_w_squared(&cfg, &nbrs, &table, 1, &bx, &McBudget::new(400_000, 3)).unwrap();
        // the F-branch of W uses the exact solve at l0, so the oracle must too
        let expect = bx.volume() - deficit_quadrature(&table.solution_exact(4.0).unwrap());
        assert!(
            (est.estimate - expect).abs() <= 3.0 * est.stderr,
            "MC {} +- {} vs quadrature {expect}",
            est.estimate,
            est.stderr
        );
    }

    #[test]
    fn uniform_config_deficit_bounded_per_particle() {
        let mut rng = substream(21, Stream::ConfigSpace, 5);
        let side = 48.0;
        let n = 24;
        let cfg = ParticleConfig::random(side, n, &mut rng);
        let nbrs = build_neighbors(&cfg, thresholds());
        let table = test_table();
        let bx = Box3::cube([8.0; 3], 32.0).unwrap();
        let j = 0;
        let est =
            integrate_w_squared(&cfg, &nbrs, &table, j, &bx, &McBudget::new(200_000, 9)).unwrap();
        let deficit = bx.volume() - est.estimate;
        let near = (0..n)
            .filter(|&i| i != j && bx.torus_distance(cfg.positions[i], side) < 4.0)
            .count() as f64;
        let c1 = table.c1_max_cached();
        let per_particle_cap = 4.0 * std::f64::consts::PI * c1 * 16.0; // 4 pi c1 l0^2
        assert!(
            deficit <= near * per_particle_cap + 3.0 * est.stderr,
            "deficit {deficit} vs cap {}",
            near * per_particle_cap
        );
    }

    #[test]
    fn soft_potential_cases() {
        let cfg = ParticleConfig::new(
            60.0,
            vec![[10.0, 10.0, 10.0], [12.0, 10.0, 10.0], [40.0, 40.0, 40.0]],
        )
        .unwrap();
        let nbrs = build_neighbors(&cfg, thresholds());
        let table = test_table();
        // F case: inside l0 ball
        let q = eval_soft_potential(&cfg, &nbrs, &table, 0, 1, [11.0, 10.0, 10.0]).unwrap();
        let e0_l0 = match table.solution_exact(4.0).unwrap().kind {
            crate::twobody::ProfileKind::NeumannMode { e0, .. } => e0,
            _ => unreachable!(),
        };
        assert_eq!(q, e0_l0);
        // outside the ball: zero
        let q = eval_soft_potential(&cfg, &nbrs, &table, 0, 1, [19.0, 10.0, 10.0]).unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn soft_potential_g_case_uses_half_distance_ball() {
        // a third particle 3 away from particle 0 shrinks t_01 below l0,
        // leaving F = 0 but G = 1 for the (0, 1) pair
        let cfg = ParticleConfig::new(
            60.0,
            vec![[10.0, 10.0, 10.0], [14.5, 10.0, 10.0], [10.0, 13.0, 10.0]],
        )
        .unwrap();
        let nbrs = build_neighbors(&cfg, thresholds());
        assert!(!nbrs.f(0, 1) && nbrs.g(0, 1));
        let table = test_table();
        let t = nbrs.t(0, 1);
        assert_relative_eq!(t, 1.5);
        let y = [10.0 + t / 2.0, 10.0, 10.0];
        let q = eval_soft_potential(&cfg, &nbrs, &table, 0, 1, y).unwrap();
        assert_eq!(q, table.e0(t).unwrap());
        assert!(q > 0.0);
        // F = G = 0 gives zero regardless of distance
        let cramped = ParticleConfig::new(
            60.0,
            vec![[10.0, 10.0, 10.0], [11.0, 10.0, 10.0], [10.2, 10.0, 10.0]],
        )
        .unwrap();
        let nb2 = build_neighbors(&cramped, thresholds());
        assert!(!nb2.g(0, 1));
        let q = eval_soft_potential(&cramped, &nb2, &table, 0, 1, [10.1, 10.0, 10.0]).unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn truncated_soft_potential_vanishes_near_cell_face() {
        let table = test_table();
        let l0 = 4.0;
        let grid = GridDecomposition::new(80.0, 20.0, l0, [0.0; 3]).unwrap();
        let cfg = ParticleConfig::new(
            80.0,
            vec![[20.0, 20.0, 20.0], [21.0, 20.0, 20.0], [60.0, 60.0, 60.0]],
        )
        .unwrap();
        let nbrs = build_neighbors(&cfg, thresholds());
        // x_0 at a cell center: full value
        let y = [20.5, 20.0, 20.0];
        let q = eval_soft_potential(&cfg, &nbrs, &table, 0, 1, y).unwrap();
        let qt = eval_truncated_soft_potential(&grid, &cfg, &nbrs, &table, 0, 1, y).unwrap();
        assert_eq!(q, qt);
        assert!(qt > 0.0);
        // move x_0 to within 2 l0 of a face: truncated to zero
        let mut cfg2 = cfg.clone();
        cfg2.positions[0] = [29.0, 20.0, 20.0]; // face at 30, margin 8
        let nb2 = build_neighbors(&cfg2, thresholds());
        let qt = eval_truncated_soft_potential(&grid, &cfg2, &nb2, &table, 0, 1, y).unwrap();
        assert_eq!(qt, 0.0);
    }

    #[test]
    fn chi_average_over_origins_matches_volume_fraction() {
        let l0 = 1.0;
        let cell = 10.0;
        let x = [33.3, 7.9, 12.1];
        let mut rng = substream(4, Stream::ConfigSpace, 2);
        let mut hits = 0u32;
        let trials = 10_000;
        for _ in 0..trials {
            let u = GridDecomposition::random_origin(cell, &mut rng);
            let grid = GridDecomposition::new(40.0, cell, l0, u).unwrap();
            if grid.chi_tilde(x) {
                hits += 1;
            }
        }
        let p = ((cell - 4.0 * l0) / cell).powi(3);
        let mean = hits as f64 / trials as f64;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!(
            (mean - p).abs() <= 3.0 * sigma,
            "mean {mean} vs exact {p} (sigma {sigma})"
        );
    }

    #[test]
    fn grid_partitions_the_torus() {
        let grid = GridDecomposition::new(30.0, 10.0, 1.0, [2.3, -4.9, 0.4]).unwrap();
        let mut rng = substream(11, Stream::ConfigSpace, 3);
        for _ in 0..200 {
            let x = [(); 3].map(|_| rng.gen_range(0.0..30.0));
            let idx = grid.cell_index(x);
            assert!(idx.iter().all(|&i| i < 3));
            // membership count over all cells is exactly one
            let mut count = 0;
            for cx in 0..3 {
                for cy in 0..3 {
                    for cz in 0..3 {
                        if grid.cell_index(x) == [cx, cy, cz] {
                            count += 1;
                        }
                    }
                }
            }
            assert_eq!(count, 1);
        }
    }

    #[test]
    fn expectation_split_degenerate_and_empty() {
        let cfg = ParticleConfig::new(40.0, vec![[1.0; 3], [39.0; 3]]).unwrap();
        let nbrs = build_neighbors(&cfg, thresholds());
        let table = test_table();
        let ba = Box3::cube([10.0; 3], 5.0).unwrap();
        let bb = Box3::cube([20.0; 3], 5.0).unwrap();
        let mc = McBudget::new(2_000, 5);
        // degenerate observable: gap identically zero
        let s = expectation_split(&cfg, &nbrs, &table, 0, &ba, &bb, 1.0, 1.0, &mc).unwrap();
        assert_eq!(s.gap, 0.0);
        assert_eq!(s.mean_w, 1.0);
        // empty environment: W = 1, both expectations equal (h_a + h_b)/2
        let s = expectation_split(&cfg, &nbrs, &table, 0, &ba, &bb, 1.0, 0.0, &mc).unwrap();
        assert_relative_eq!(s.mean_w, 0.5, max_relative = 1e-12);
        assert_relative_eq!(s.mean_uniform, 0.5);
    }

    #[test]
    fn expectation_split_gap_bounded_by_desk_constant() {
        let mut rng = substream(31, Stream::ConfigSpace, 7);
        let side = 40.0;
        let cfg = ParticleConfig::random(side, 40, &mut rng);
        let nbrs = build_neighbors(&cfg, thresholds());
        let table = test_table();
        let ba = Box3::new([5.0, 5.0, 5.0], [15.0, 15.0, 25.0]).unwrap();
        let bb = Box3::new([15.0, 5.0, 5.0], [25.0, 15.0, 25.0]).unwrap();
        let s = expectation_split(
            &cfg,
            &nbrs,
            &table,
            0,
            &ba,
            &bb,
            1.0,
            0.0,
            &McBudget::new(100_000, 6),
        )
        .unwrap();
        let c1 = {
            let sol = table.solution_exact(4.0).unwrap();
            crate::twobody::check_profile_bounds(&sol).unwrap().c1
        };
        let desk_cap = 10.0 * c1 * c1 * 4.0 * std::f64::consts::PI;
        assert!(
            s.realized_c <= desk_cap,
            "realized C = {} vs desk cap {desk_cap}",
            s.realized_c
        );
    }

    #[test]
    fn csv_round_trip() {
        let cfg = ParticleConfig::new(12.5, vec![[0.5, 1.5, 2.5], [3.0, 4.0, 5.0]]).unwrap();
        let back = ParticleConfig::from_csv(&cfg.to_csv()).unwrap();
        assert_eq!(back.side, 12.5);
        assert_eq!(back.positions, cfg.positions);
    }
}
