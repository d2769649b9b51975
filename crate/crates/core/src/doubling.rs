//! Box-doubling combinatorics: convex occupancy profiles with a knee,
//! the per-step knee schedule, exact binomial expectations over
//! randomized particles, merge-bound sweeps, Chernoff-vs-exact tails,
//! and the randomization moment identities (checked in exact rational
//! arithmetic).

use crate::par;
use crate::rng::{substream, Stream};
use crate::scales::ScaleSet;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DoublingError {
    #[error("schedule invalid: {0}")]
    Schedule(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
}

/// Convex profile `t (t - 1)` below the knee `K`, linear continuation
/// `(2K - 1) t - K^2` above it. Continuous at the knee; the knee itself
/// stays real-valued.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PiecewiseQuadratic {
    pub knee: f64,
}

impl PiecewiseQuadratic {
    pub fn new(knee: f64) -> Self {
        PiecewiseQuadratic { knee }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.knee {
            t * (t - 1.0)
        } else {
            (2.0 * self.knee - 1.0) * t - self.knee * self.knee
        }
    }
}

/// Box dimension metadata for one doubling step (the three shape cases).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoxDims {
    pub half: [f64; 3],
    pub merged: [f64; 3],
}

/// Knee schedule `K_s` over the doubling steps `s = 1..=3h`, with
/// `K_1 = 2 rho l1^3` and
/// `K_s = (2 - (1 - 2^{-(s-1)/2}) |log rho|^{-eta}) 2^{s-1} rho l1^3`.
#[derive(Debug, Clone, Serialize)]
pub struct DoublingSchedule {
    pub rho: f64,
    pub eta: f64,
    pub l1: f64,
    pub h: u32,
}

/// How comfortably one step's knee gap clears its target, with the
/// three-way flag for the asymptotic separation requirement.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapRow {
    pub s: u32,
    pub gap: f64,
    pub target: f64,
    pub ratio: f64,
    /// Reference separation `|log rho|^{1/4}`; the ratio is reported
    /// against it, never asserted (the example schedule only reaches it
    /// asymptotically).
    pub log_quarter: f64,
    pub flag: GapFlag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapFlag {
    Satisfied,
    Marginal,
    Violated,
}

impl DoublingSchedule {
    pub fn new(rho: f64, eta: f64, l1: f64, h: u32) -> Result<Self, DoublingError> {
        if !(rho > 0.0 && rho < 1.0) || !(eta > 0.0 && eta < 1.0 / 15.0) || l1 <= 0.0 || h == 0 {
            return Err(DoublingError::Schedule(format!(
                "need 0 < rho < 1, 0 < eta < 1/15, l1 > 0, h >= 1; got rho={rho}, eta={eta}, l1={l1}, h={h}"
            )));
        }
        Ok(DoublingSchedule { rho, eta, l1, h })
    }

    /// Use the scale set's own `h` (fails at densities where the snapped
    /// `l2/l1` has not yet reached 2).
    pub fn from_scales(s: &ScaleSet) -> Result<Self, DoublingError> {
        if s.h < 1 {
            return Err(DoublingError::Schedule(format!(
                "scale set has h = {} (l2 <= l1 at rho = {}); pass an explicit h instead",
                s.h, s.rho
            )));
        }
        DoublingSchedule::new(s.rho, s.eta, s.l1, s.h as u32)
    }

    pub fn s_max(&self) -> u32 {
        3 * self.h
    }

    /// `K_s` for `s = 1..=3h + 1`.
    pub fn knee(&self, s: u32) -> f64 {
        let lg = -self.rho.ln();
        let base = self.rho * self.l1.powi(3);
        (2.0 - (1.0 - 0.5f64.powf((s as f64 - 1.0) / 2.0)) * lg.powf(-self.eta))
            * 2f64.powi(s as i32 - 1)
            * base
    }

    pub fn profile(&self, s: u32) -> PiecewiseQuadratic {
        PiecewiseQuadratic::new(self.knee(s))
    }

    /// Current box edge `2^{floor((s-1)/3)} l1`.
    pub fn ell(&self, s: u32) -> f64 {
        2f64.powi(((s - 1) / 3) as i32) * self.l1
    }

    /// Volume of each half box at step `s`: `2^{s-1} l1^3`.
    pub fn vol_half(&self, s: u32) -> f64 {
        2f64.powi(s as i32 - 1) * self.l1.powi(3)
    }

    /// Box shapes cycle through the three cases as the merge direction
    /// rotates.
    pub fn box_dims(&self, s: u32) -> BoxDims {
        let l = self.ell(s);
        match (s - 1) % 3 {
            0 => BoxDims { half: [l, l, l], merged: [l, l, 2.0 * l] },
            1 => BoxDims { half: [l, l, 2.0 * l], merged: [l, 2.0 * l, 2.0 * l] },
            _ => BoxDims { half: [l, 2.0 * l, 2.0 * l], merged: [2.0 * l, 2.0 * l, 2.0 * l] },
        }
    }

    /// Schedule invariants: `K_1 = 2 rho l1^3`, `K_s > 2^{s-1} rho l1^3`,
    /// `2 K_s > K_{s+1}`, `K_{3h+1} > rho l2^3`.
    pub fn validate(&self) -> Result<(), DoublingError> {
        let base = self.rho * self.l1.powi(3);
        if (self.knee(1) - 2.0 * base).abs() > 1e-9 * base {
            return Err(DoublingError::Schedule("K_1 != 2 rho l1^3".into()));
        }
        for s in 1..=self.s_max() {
            if self.knee(s) <= 2f64.powi(s as i32 - 1) * base {
                return Err(DoublingError::Schedule(format!("K_{s} <= 2^{}  rho l1^3", s - 1)));
            }
            if 2.0 * self.knee(s) <= self.knee(s + 1) {
                return Err(DoublingError::Schedule(format!("2 K_{s} <= K_{}", s + 1)));
            }
        }
        let rho_l2_cubed = 2f64.powi(3 * self.h as i32) * base;
        if self.knee(self.s_max() + 1) <= rho_l2_cubed {
            return Err(DoublingError::Schedule("K_{3h+1} <= rho l2^3".into()));
        }
        Ok(())
    }

    /// Gap rows `2 K_s - K_{s+1}` against the target
    /// `|log rho|^{1/2} sqrt(K_{s+1})`, flagged by the ratio thresholds
    /// 10 (satisfied) and 2 (marginal).
    pub fn gap_report(&self) -> Vec<GapRow> {
        let lg = -self.rho.ln();
        (1..=self.s_max())
            .map(|s| {
                let gap = 2.0 * self.knee(s) - self.knee(s + 1);
                let target = lg.sqrt() * self.knee(s + 1).sqrt();
                let ratio = gap / target;
                let flag = if ratio >= 10.0 {
                    GapFlag::Satisfied
                } else if ratio >= 2.0 {
                    GapFlag::Marginal
                } else {
                    GapFlag::Violated
                };
                GapRow { s, gap, target, ratio, log_quarter: lg.powf(0.25), flag }
            })
            .collect()
    }
}

/// The `(n_A, n_B, k)` argument triple: deterministic counts in each half
/// box plus `k` randomized particles.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RandomizedCount {
    pub n_a: u64,
    pub n_b: u64,
    pub k: u64,
}

/// Binomial(k, 1/2) pmf as f64, by the multiplicative recurrence
/// (log-domain above k = 900 so nothing underflows on the way in).
fn binomial_pmf_half(k: u64) -> Vec<f64> {
    let k = k as usize;
    let mut pmf = vec![0.0; k + 1];
    if k <= 900 {
        pmf[0] = 0.5f64.powi(k as i32);
        for m in 0..k {
            pmf[m + 1] = pmf[m] * (k - m) as f64 / (m + 1) as f64;
        }
    } else {
        let mut ln = -(k as f64) * std::f64::consts::LN_2;
        pmf[0] = ln.exp();
        for m in 0..k {
            ln += ((k - m) as f64 / (m + 1) as f64).ln();
            pmf[m + 1] = ln.exp();
        }
    }
    pmf
}

/// Exact expectation
/// `F(n_A, n_B, k) = < f(n_A + m) + f(n_B + k - m) > / vol_half`
/// with `m ~ Binomial(k, 1/2)`.
pub fn split_energy_exact(
    f: &PiecewiseQuadratic,
    vol_half: f64,
    st: &RandomizedCount,
) -> Result<f64, DoublingError> {
    if st.k > 100_000 {
        return Err(DoublingError::Budget(format!(
            "k = {} beyond exact binomial budget",
            st.k
        )));
    }
    if st.k == 0 {
        return Ok((f.eval(st.n_a as f64) + f.eval(st.n_b as f64)) / vol_half);
    }
    let pmf = binomial_pmf_half(st.k);
    let mut s = 0.0;
    for (m, &p) in pmf.iter().enumerate() {
        s += p * (f.eval((st.n_a + m as u64) as f64) + f.eval((st.n_b + st.k - m as u64) as f64));
    }
    Ok(s / vol_half)
}

/// Monte Carlo cross-check of [`split_energy_exact`].
pub fn split_energy_mc(
    f: &PiecewiseQuadratic,
    vol_half: f64,
    st: &RandomizedCount,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    use rand_distr::Distribution;
    let mut rng = substream(seed, Stream::Doubling, st.k ^ (st.n_a << 20) ^ (st.n_b << 40));
    let bin = rand_distr::Binomial::new(st.k, 0.5).expect("valid binomial");
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..samples {
        let m = bin.sample(&mut rng);
        let v =
            (f.eval((st.n_a + m) as f64) + f.eval((st.n_b + st.k - m) as f64)) / vol_half;
        sum += v;
        sum2 += v * v;
    }
    let mean = sum / samples as f64;
    let var = ((sum2 - sum * sum / samples as f64) / (samples as f64 - 1.0)).max(0.0);
    (mean, (var / samples as f64).sqrt())
}

/// One merge-bound counterexample: a split strictly below the merged
/// profile floor.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MergeViolation {
    pub n: u64,
    pub m_a: u64,
    pub split: f64,
    pub floor: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MergeReport {
    pub s: u32,
    pub n_lo: u64,
    pub n_hi: u64,
    pub min_margin: f64,
    /// Worst margin of the real-axis proof step
    /// `2 f_s(n/2) >= f_{s+1}(n) / 2` over the sweep.
    pub even_split_min_margin: f64,
    pub violations: Vec<MergeViolation>,
}

/// Exhaustively verify, for every `n` with
/// `K_{s+1} + 2 sqrt(K_{s+1}) <= n <= n_hi`, that every split
/// `m_A + m_B = n` satisfies
/// `[f_s(m_A) + f_s(m_B)] / vol_half >= f_{s+1}(n) / (2 vol_half)`.
///
/// Also checks the two proof steps: the even-split bound
/// `2 f_s(n/2) >= f_{s+1}(n) / 2` on the real axis and the slope
/// comparison `2 K_s - 1 >= K_{s+1} - 1/2`.
pub fn verify_merge_bound(sched: &DoublingSchedule, s: u32, n_hi: u64) -> MergeReport {
    let fs = sched.profile(s);
    let fs1 = sched.profile(s + 1);
    let k1 = sched.knee(s + 1);
    let n_lo = (k1 + 2.0 * k1.sqrt()).ceil() as u64;
    assert!(
        2.0 * sched.knee(s) - 1.0 >= k1 - 0.5,
        "slope comparison fails at s = {s}"
    );
    let count = (n_hi + 1).saturating_sub(n_lo) as usize;
    let rows = par::map_indexed(count, |idx| {
        let n = n_lo + idx as u64;
        let nf = n as f64;
        let floor = 0.5 * fs1.eval(nf);
        // proof step on the real axis: the even split already clears
        // half the merged profile
        let even_split_margin = 2.0 * fs.eval(nf / 2.0) - floor;
        let mut worst = f64::INFINITY;
        let mut worst_ma = 0;
        for m_a in 0..=n / 2 {
            let split = fs.eval(m_a as f64) + fs.eval((n - m_a) as f64);
            if split < worst {
                worst = split;
                worst_ma = m_a;
            }
        }
        (n, worst_ma, worst, floor, even_split_margin)
    });
    let mut min_margin = f64::INFINITY;
    let mut even_split_min_margin = f64::INFINITY;
    let mut violations = Vec::new();
    for (n, m_a, split, floor, even_margin) in rows {
        min_margin = min_margin.min(split - floor);
        even_split_min_margin = even_split_min_margin.min(even_margin);
        if split < floor {
            violations.push(MergeViolation { n, m_a, split, floor });
        }
    }
    MergeReport { s, n_lo, n_hi, min_margin, even_split_min_margin, violations }
}

/// One randomized-floor counterexample:
/// `F_s(0,0,n) * 2 vol_half < (1 - rho) f_{s+1}(n)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FloorViolation {
    pub n: u64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FloorReport {
    pub s: u32,
    pub n_max: u64,
    pub min_margin: f64,
    pub violations: Vec<FloorViolation>,
}

/// Check `F_s(0, 0, n) |A u B| >= (1 - rho) f_{s+1}(n)` by exact binomial
/// sums for every admissible `n < K_{s+1} + 2 sqrt(K_{s+1})`.
///
/// Violations are returned, not asserted: the inequality's derivation
/// assumes the knee-gap separation, which the schedule reports as
/// satisfied/marginal/violated separately.
pub fn verify_randomized_floor(sched: &DoublingSchedule, s: u32) -> Result<FloorReport, DoublingError> {
    let fs = sched.profile(s);
    let fs1 = sched.profile(s + 1);
    let lim = sched.knee(s + 1) + 2.0 * sched.knee(s + 1).sqrt();
    // largest integer strictly below lim
    let n_max = if lim.fract() == 0.0 { lim as u64 - 1 } else { lim.floor() as u64 };
    let vol_half = sched.vol_half(s);
    let rows: Vec<Result<(u64, f64, f64), DoublingError>> =
        par::map_indexed((n_max.saturating_sub(1)) as usize, |idx| {
            let n = 2 + idx as u64;
            let f_exact =
                split_energy_exact(&fs, vol_half, &RandomizedCount { n_a: 0, n_b: 0, k: n })?;
            let lhs = f_exact * 2.0 * vol_half;
            let rhs = (1.0 - sched.rho) * fs1.eval(n as f64);
            Ok((n, lhs, rhs))
        });
    let mut min_margin = f64::INFINITY;
    let mut violations = Vec::new();
    for row in rows {
        let (n, lhs, rhs) = row?;
        min_margin = min_margin.min(lhs - rhs);
        if lhs < rhs {
            violations.push(FloorViolation { n, lhs, rhs });
        }
    }
    Ok(FloorReport { s, n_max, min_margin, violations })
}

/// First (n, zeta) where the exact Binomial(n, 1/2) upper tail exceeds
/// `exp(-2 zeta^2 / n)`, or `None` if the bound dominates everywhere.
///
/// Scanning integer thresholds suffices: between integers the exact tail
/// is constant while the bound only decreases, so each tail value is
/// tested against its smallest admissible bound.
pub fn chernoff_domination(n_max: u64) -> Option<(u64, f64, f64, f64)> {
    for n in 1..=n_max {
        let pmf = binomial_pmf_half(n);
        // suffix sums accumulated small-to-large
        let mut tail = vec![0.0; n as usize + 2];
        for m in (0..=n as usize).rev() {
            tail[m] = tail[m + 1] + pmf[m];
        }
        let half = n as f64 / 2.0;
        for m in (half.ceil() as usize)..=(n as usize) {
            let zeta = m as f64 - half;
            let bound = (-2.0 * zeta * zeta / n as f64).exp();
            if tail[m] > bound * (1.0 + 1e-9) {
                return Some((n, zeta, tail[m], bound));
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Exact rational arithmetic for the randomization moment identities.
// ---------------------------------------------------------------------------

fn big(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// `f(t)` on an integer argument with a rational knee, in exact arithmetic.
fn profile_exact(knee: &BigRational, t: u64) -> BigRational {
    let t = big(t);
    if t <= *knee {
        &t * (&t - BigRational::one())
    } else {
        (big(2) * knee - BigRational::one()) * &t - knee * knee
    }
}

/// Exact rational `F(n_A, n_B, k) * vol_half` (volume factored out so the
/// identities below stay in pure rationals).
fn split_energy_rational(knee: &BigRational, st: &RandomizedCount) -> BigRational {
    let k = st.k;
    let mut coeff = BigInt::one(); // C(k, m)
    let denom = BigInt::from(2u32).pow(k as u32);
    let mut acc = BigRational::zero();
    for m in 0..=k {
        let w = BigRational::new(coeff.clone(), denom.clone());
        acc += w * (profile_exact(knee, st.n_a + m) + profile_exact(knee, st.n_b + k - m));
        if m < k {
            coeff = coeff * BigInt::from(k - m) / BigInt::from(m + 1);
        }
    }
    acc
}

/// Exactness verdict for the four randomization moment identities at one
/// state, evaluated in rational arithmetic (`== ` means exact equality,
/// no tolerance).
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub mean_m_is_one: bool,
    pub var_m_is_four_d_squared: bool,
    pub var_g_matches_difference_form: bool,
    pub mean_g_telescopes: bool,
    /// f64 snapshots for reporting
    pub mean_g: f64,
    pub var_g: f64,
    pub var_m: f64,
}

/// Verify, in exact rational arithmetic, the uniform-distribution moment
/// identities of one randomization step:
///
/// * `<M_k>_1 = 1`
/// * `var_1(M_k) = 4 (n_A - n_B)^2`
/// * `var_1(g_k) = 1/4 [F(n_A+1, n_B, k-1) - F(n_A, n_B+1, k-1)]^2`
/// * `F(n_A, n_B, k-1) + <g_k>_1 = F(n_A, n_B, k)`
pub fn randomization_identities_exact(knee_f64: f64, st: &RandomizedCount) -> IdentityReport {
    assert!(st.k >= 1, "identities concern a step with k >= 1");
    let knee = BigRational::from_float(knee_f64).expect("finite knee");
    let prev = RandomizedCount { n_a: st.n_a, n_b: st.n_b, k: st.k - 1 };
    let plus_a = RandomizedCount { n_a: st.n_a + 1, n_b: st.n_b, k: st.k - 1 };
    let plus_b = RandomizedCount { n_a: st.n_a, n_b: st.n_b + 1, k: st.k - 1 };
    let f_prev = split_energy_rational(&knee, &prev);
    let f_a = split_energy_rational(&knee, &plus_a);
    let f_b = split_energy_rational(&knee, &plus_b);
    let f_next = split_energy_rational(&knee, st);
    let half = BigRational::new(BigInt::one(), BigInt::from(2));

    let g_a = &f_a - &f_prev;
    let g_b = &f_b - &f_prev;
    let mean_g = &half * (&g_a + &g_b);
    let var_g = &half * (&g_a * &g_a + &g_b * &g_b) - &mean_g * &mean_g;
    let diff = &f_a - &f_b;
    let quarter = BigRational::new(BigInt::one(), BigInt::from(4));
    let var_g_form = &quarter * &diff * &diff;

    let d = BigRational::from_integer(BigInt::from(st.n_a as i64 - st.n_b as i64));
    let m_a = (&d + BigRational::one()) * (&d + BigRational::one()) - &d * &d;
    let m_b = (&d - BigRational::one()) * (&d - BigRational::one()) - &d * &d;
    let mean_m = &half * (&m_a + &m_b);
    let var_m = &half * (&m_a * &m_a + &m_b * &m_b) - &mean_m * &mean_m;
    let four_d2 = big(4) * &d * &d;

    IdentityReport {
        mean_m_is_one: mean_m == BigRational::one(),
        var_m_is_four_d_squared: var_m == four_d2,
        var_g_matches_difference_form: var_g == var_g_form,
        mean_g_telescopes: &f_prev + &mean_g == f_next,
        mean_g: mean_g.to_f64().unwrap_or(f64::NAN),
        var_g: var_g.to_f64().unwrap_or(f64::NAN),
        var_m: var_m.abs().to_f64().unwrap_or(f64::NAN),
    }
}

/// f64 randomization moments for reporting (two-point uniform
/// distribution over which half box the step particle lands in).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepMoments {
    pub g_a: f64,
    pub g_b: f64,
    pub mean_g: f64,
    pub var_g: f64,
    pub mean_m: f64,
    pub var_m: f64,
}

pub fn randomization_moments(
    f: &PiecewiseQuadratic,
    vol_half: f64,
    st: &RandomizedCount,
) -> Result<StepMoments, DoublingError> {
    assert!(st.k >= 1);
    let prev = RandomizedCount { n_a: st.n_a, n_b: st.n_b, k: st.k - 1 };
    let plus_a = RandomizedCount { n_a: st.n_a + 1, n_b: st.n_b, k: st.k - 1 };
    let plus_b = RandomizedCount { n_a: st.n_a, n_b: st.n_b + 1, k: st.k - 1 };
    let f_prev = split_energy_exact(f, vol_half, &prev)?;
    let g_a = split_energy_exact(f, vol_half, &plus_a)? - f_prev;
    let g_b = split_energy_exact(f, vol_half, &plus_b)? - f_prev;
    let d = st.n_a as f64 - st.n_b as f64;
    Ok(StepMoments {
        g_a,
        g_b,
        mean_g: 0.5 * (g_a + g_b),
        var_g: 0.25 * (g_a - g_b) * (g_a - g_b),
        mean_m: 1.0,
        var_m: 4.0 * d * d,
    })
}

/// The four Temple-correction magnitudes of one randomization step,
/// with their schedule majorants and realized ratios.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepTerms {
    pub k: u64,
    /// |<g_k>_W - <g_k>_1| estimate via the measured W-expectation gap
    pub g_shift: f64,
    /// (k-1) <M_k> drift scaled by |log rho| / ell^4
    pub m_drift: f64,
    /// var_1(g_k) / (scaled kinetic gap)
    pub var_g_over_gap: f64,
    /// k^2 var_1(M_k) |log rho|^3 / ell^6, the d^2-attributed term
    pub var_m_term: f64,
    /// common majorant n rho^{1/3} / ell^3
    pub majorant_n: f64,
    /// d^2-majorant (n_A - n_B)^2 |log rho| / ell^4
    pub majorant_d: f64,
}

/// Measured trial-factor statistics feeding the step certificate: the
/// realized two-box expectation gap per unit observable (from
/// `configspace::expectation_split`) and the profile deficit constant.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WjStats {
    /// realized |<h>_W - <h>_1| / max|h|
    pub expectation_gap: f64,
    /// 1 - phi_min of the tau profiles in play
    pub tau_max: f64,
}

/// Per-step certificate: all four correction terms for `k = 1..=n` along
/// the balanced-removal path from an initial `(n_A, n_B)` split, plus
/// their aggregate against the fully randomized floor `F(0,0,n)`.
#[derive(Debug, Clone, Serialize)]
pub struct StepReport {
    pub s: u32,
    pub n: u64,
    pub terms: Vec<StepTerms>,
    pub aggregate_error: f64,
    pub floor: f64,
    /// aggregate / floor; small when the telescoping argument has room
    pub aggregate_ratio: f64,
}

/// Evaluate the randomization-step certificate at step `s` for `n`
/// particles initially split `(n_a0, n_b0)`.
pub fn randomization_step_report(
    sched: &DoublingSchedule,
    s: u32,
    n_a0: u64,
    n_b0: u64,
    wj: &WjStats,
) -> Result<StepReport, DoublingError> {
    let n = n_a0 + n_b0;
    let lim = sched.knee(s + 1) + 2.0 * sched.knee(s + 1).sqrt();
    if (n as f64) >= lim {
        return Err(DoublingError::Schedule(format!(
            "n = {n} outside the randomized regime (limit {lim:.1})"
        )));
    }
    let f = sched.profile(s);
    let vol_half = sched.vol_half(s);
    let lg = -sched.rho.ln();
    let dims = sched.box_dims(s);
    let ell_long = dims.merged.iter().cloned().fold(0.0, f64::max);
    // kinetic gap of the scaled operator: (1 - tau_max^2) pi^2 / ell^2,
    // carried through the 1/|log rho| prefactor of the unperturbed part
    let gap = (1.0 - wj.tau_max * wj.tau_max) * std::f64::consts::PI.powi(2)
        / (ell_long * ell_long * lg);
    let (mut n_a, mut n_b) = (n_a0, n_b0);
    let mut terms = Vec::with_capacity(n as usize);
    let mut aggregate = 0.0;
    for k in 1..=n {
        // the state seen at step k counts the not-yet-randomized others
        if n_a >= n_b && n_a > 0 {
            n_a -= 1;
        } else if n_b > 0 {
            n_b -= 1;
        }
        let st = RandomizedCount { n_a, n_b, k };
        let m = randomization_moments(&f, vol_half, &st)?;
        let d2 = (n_a as f64 - n_b as f64).powi(2);
        let g_max = m.g_a.abs().max(m.g_b.abs());
        let ell = sched.ell(s);
        let t = StepTerms {
            k,
            g_shift: wj.expectation_gap * g_max,
            m_drift: (k as f64 - 1.0) * (1.0 + wj.expectation_gap * (4.0 * d2 + 1.0)) * lg
                / ell.powi(4),
            var_g_over_gap: m.var_g / gap,
            var_m_term: (k as f64).powi(2) * m.var_m * lg.powi(3) / ell.powi(6),
            majorant_n: n as f64 * sched.rho.powf(1.0 / 3.0) / ell.powi(3),
            majorant_d: d2 * lg / ell.powi(4),
        };
        aggregate += t.g_shift + t.m_drift + t.var_g_over_gap + t.var_m_term;
        terms.push(t);
    }
    let floor = split_energy_exact(&f, vol_half, &RandomizedCount { n_a: 0, n_b: 0, k: n })?;
    Ok(StepReport {
        s,
        n,
        terms,
        aggregate_error: aggregate,
        floor,
        aggregate_ratio: aggregate / floor,
    })
}

/// Jensen floor `cells * f(n / cells)` for distributing `n` particles
/// over `cells` boxes with convex per-box profile `f`.
pub fn jensen_floor(f: &PiecewiseQuadratic, cells: u64, n: u64) -> f64 {
    assert!(cells >= 1);
    cells as f64 * f.eval(n as f64 / cells as f64)
}
