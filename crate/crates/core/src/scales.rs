//! Length-scale schedule and error-budget ledger.
//!
//! All scales are power laws in the density with log corrections
//! (natural log throughout); prefactors are configurable because the
//! asymptotic relations hide constants that matter at desk densities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Multiplicative prefactors for the four derived lengths.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Prefactors {
    pub l_minus1: f64,
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
}

impl Default for Prefactors {
    fn default() -> Self {
        Prefactors { l_minus1: 1.0, l0: 1.0, l1: 1.0, l2: 1.0 }
    }
}

#[derive(Debug, Error)]
pub enum ScaleError {
    #[error("density must satisfy 0 < rho < 1/e, got {0}")]
    Density(f64),
    #[error("eta must lie in the open interval (0, 1/15), got {0}")]
    Eta(f64),
    #[error("rho not small enough: failing ratio {name} = {value:.4}")]
    Hierarchy { name: &'static str, value: f64 },
}

/// The full scale set at a density: lengths, error budget parameter, and
/// snapped box-doubling exponent.
#[derive(Debug, Clone, Serialize)]
pub struct ScaleSet {
    pub rho: f64,
    pub eta: f64,
    pub r0: f64,
    pub l_minus1: f64,
    pub l0: f64,
    pub l1: f64,
    /// `l2` after snapping `l2/l1` to the nearest power of two.
    pub l2: f64,
    /// `l2` before snapping.
    pub l2_raw: f64,
    /// `l2 = 2^h l1`; can be non-positive at desk densities.
    pub h: i32,
    /// `L = hprime * l2`.
    pub hprime: u32,
    pub epsilon: f64,
    /// Snap factor applied to the raw `l2`, in `[2^-1/2, 2^1/2]`.
    pub l2_adjustment: f64,
    pub prefactors: Prefactors,
}

/// Named hierarchy ratios, reported rather than silently absorbed.
#[derive(Debug, Clone, Serialize)]
pub struct HierarchyReport {
    pub r0_to_lm1: f64,
    pub lm1_to_l0: f64,
    pub l0_to_l1: f64,
    pub l1_to_l2: f64,
    pub l2_to_box: f64,
    /// True when every ratio is at least the hard validation factor 4.
    pub ok: bool,
}

impl ScaleSet {
    /// Build the scale set at density `rho` with exponent-correction `eta`.
    pub fn new(rho: f64, eta: f64, prefactors: Prefactors, r0: f64) -> Result<Self, ScaleError> {
        if !(rho > 0.0 && rho < (-1.0f64).exp()) {
            return Err(ScaleError::Density(rho));
        }
        if !(eta > 0.0 && eta < 1.0 / 15.0) {
            return Err(ScaleError::Eta(eta));
        }
        let lg = -rho.ln();
        let l_minus1 = prefactors.l_minus1 * rho.powf(-2.0 / 9.0) * lg.powf(2.0 / 3.0);
        let l0 = prefactors.l0 * rho.powf(-1.0 / 3.0) * lg.powf(-1.0 / 3.0);
        let l1 = prefactors.l1 * rho.powf(-1.0 / 3.0) * lg.powf(1.0 / 3.0 + eta);
        let l2_raw = prefactors.l2 * rho.powf(-4.0 / 9.0) * lg.powf(-2.0 / 3.0);
        let h = (l2_raw / l1).log2().round() as i32;
        let l2 = l1 * (h as f64).exp2();
        Ok(ScaleSet {
            rho,
            eta,
            r0,
            l_minus1,
            l0,
            l1,
            l2,
            l2_raw,
            h,
            hprime: 2,
            epsilon: rho.powf(1.0 / 3.0) * lg.powi(3),
            l2_adjustment: l2 / l2_raw,
            prefactors,
        })
    }

    pub fn log_rho_abs(&self) -> f64 {
        -self.rho.ln()
    }

    /// Torus side `L = hprime * l2`.
    pub fn box_side(&self) -> f64 {
        self.hprime as f64 * self.l2
    }

    pub fn hierarchy(&self) -> HierarchyReport {
        let r = HierarchyReport {
            r0_to_lm1: self.l_minus1 / self.r0,
            lm1_to_l0: self.l0 / self.l_minus1,
            l0_to_l1: self.l1 / self.l0,
            l1_to_l2: self.l2 / self.l1,
            l2_to_box: self.hprime as f64,
            ok: false,
        };
        let ok = r.r0_to_lm1 >= 4.0 && r.lm1_to_l0 >= 4.0 && r.l0_to_l1 >= 4.0 && r.l1_to_l2 >= 2.0;
        HierarchyReport { ok, ..r }
    }

    /// Error if any of the ratios a cell estimate consumes falls below
    /// its hard validation factor (`l2` plays no role in a single cell).
    pub fn validate_cell_hierarchy(&self) -> Result<(), ScaleError> {
        let h = self.hierarchy();
        if h.r0_to_lm1 < 4.0 {
            return Err(ScaleError::Hierarchy { name: "l_minus1 / R0", value: h.r0_to_lm1 });
        }
        if h.lm1_to_l0 < 4.0 {
            return Err(ScaleError::Hierarchy { name: "l0 / l_minus1", value: h.lm1_to_l0 });
        }
        if h.l0_to_l1 < 4.0 {
            return Err(ScaleError::Hierarchy { name: "l1 / l0", value: h.l0_to_l1 });
        }
        Ok(())
    }

    /// Error if any hierarchy ratio falls below its hard validation factor.
    pub fn validate_hierarchy(&self) -> Result<(), ScaleError> {
        let h = self.hierarchy();
        if h.r0_to_lm1 < 4.0 {
            return Err(ScaleError::Hierarchy { name: "l_minus1 / R0", value: h.r0_to_lm1 });
        }
        if h.lm1_to_l0 < 4.0 {
            return Err(ScaleError::Hierarchy { name: "l0 / l_minus1", value: h.lm1_to_l0 });
        }
        if h.l0_to_l1 < 4.0 {
            return Err(ScaleError::Hierarchy { name: "l1 / l0", value: h.l0_to_l1 });
        }
        if h.l1_to_l2 < 2.0 {
            return Err(ScaleError::Hierarchy { name: "l2 / l1", value: h.l1_to_l2 });
        }
        Ok(())
    }
}

/// The named error terms of the small-cell estimate, evaluated at a given
/// per-cell particle count.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorBudget {
    pub n_per_cell: f64,
    /// n l_{-1}^3 / l1^3
    pub n_lm1cu_over_l1cu: f64,
    /// n l1^2 / l0^3
    pub n_l1sq_over_l0cu: f64,
    /// n l0^2 / l1^3
    pub n_l0sq_over_l1cu: f64,
    /// n^2 |log rho| / l1
    pub nsq_logrho_over_l1: f64,
    pub epsilon: f64,
}

impl ErrorBudget {
    pub fn terms(&self) -> [(&'static str, f64); 4] {
        [
            ("n_lm1cu_over_l1cu", self.n_lm1cu_over_l1cu),
            ("n_l1sq_over_l0cu", self.n_l1sq_over_l0cu),
            ("n_l0sq_over_l1cu", self.n_l0sq_over_l1cu),
            ("nsq_logrho_over_l1", self.nsq_logrho_over_l1),
        ]
    }

    pub fn max_ratio_to_epsilon(&self) -> f64 {
        self.terms()
            .iter()
            .map(|(_, t)| t / self.epsilon)
            .fold(0.0, f64::max)
    }
}

/// Evaluate every small-cell error magnitude at `n` particles per cell
/// (`None` means the typical occupancy `rho l1^3`).
pub fn error_budget(scales: &ScaleSet, n_per_cell: Option<f64>) -> ErrorBudget {
    let n = n_per_cell.unwrap_or(scales.rho * scales.l1.powi(3));
    let lg = scales.log_rho_abs();
    ErrorBudget {
        n_per_cell: n,
        n_lm1cu_over_l1cu: n * scales.l_minus1.powi(3) / scales.l1.powi(3),
        n_l1sq_over_l0cu: n * scales.l1.powi(2) / scales.l0.powi(3),
        n_l0sq_over_l1cu: n * scales.l0.powi(2) / scales.l1.powi(3),
        nsq_logrho_over_l1: n * n * lg / scales.l1,
        epsilon: scales.epsilon,
    }
}

/// Headline lower bound `4 pi a rho (1 - C0 eps)` and its comparisons.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HeadlineBound {
    pub bound_per_particle: f64,
    pub leading_order: f64,
    /// bound / (4 pi a rho); non-positive values mean the bound is vacuous.
    pub ratio_to_leading: f64,
    /// Second-order reference 4 pi a rho (1 + 128/(15 sqrt(pi)) sqrt(rho a^3)).
    pub lee_yang_reference: f64,
    /// bound / lee_yang_reference.
    pub ratio_to_lee_yang: f64,
    pub vacuous: bool,
}

pub fn headline_bound(scales: &ScaleSet, a: f64, c0: f64) -> HeadlineBound {
    let leading = 4.0 * std::f64::consts::PI * a * scales.rho;
    let factor = 1.0 - c0 * scales.epsilon;
    let ly = 128.0 / (15.0 * std::f64::consts::PI.sqrt());
    let reference = leading * (1.0 + ly * (scales.rho * a.powi(3)).sqrt());
    HeadlineBound {
        bound_per_particle: leading * factor,
        leading_order: leading,
        ratio_to_leading: factor,
        lee_yang_reference: reference,
        ratio_to_lee_yang: leading * factor / reference,
        vacuous: factor <= 0.0,
    }
}

/// Density where the error factor `rho^{1/3} |log rho|^3` crosses the
/// older `rho^{1/17}` rate (unit constants), found by bisection on the
/// log-density.
pub fn previous_best_crossover() -> f64 {
    let f = |lg: f64| (-lg / 17.0).exp() - (-lg / 3.0).exp() * lg.powi(3);
    let (mut lo, mut hi) = (10.0f64, 200.0f64);
    debug_assert!(f(lo) < 0.0 && f(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (-0.5 * (lo + hi)).exp()
}

/// One row of the density scan used by the error-budget acceptance check.
#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub rho: f64,
    pub epsilon: f64,
    pub ratios_to_epsilon: [f64; 4],
    pub terms: [f64; 4],
    pub hierarchy_ok: bool,
    /// gap/<q~> growth proxy: l0^3 / (3 a n l1^2) with n = rho l1^3.
    pub temple_margin: f64,
}

/// Scan `rho = 10^-k` for `k` in `k_range`, returning one row per density.
pub fn scan(
    k_range: std::ops::RangeInclusive<u32>,
    eta: f64,
    prefactors: Prefactors,
    r0: f64,
    a: f64,
) -> Vec<ScanRow> {
    k_range
        .map(|k| {
            let rho = 10.0f64.powi(-(k as i32));
            let s = ScaleSet::new(rho, eta, prefactors, r0).expect("scan density in range");
            let b = error_budget(&s, None);
            let n = b.n_per_cell;
            ScanRow {
                rho,
                epsilon: s.epsilon,
                ratios_to_epsilon: [
                    b.n_lm1cu_over_l1cu / s.epsilon,
                    b.n_l1sq_over_l0cu / s.epsilon,
                    b.n_l0sq_over_l1cu / s.epsilon,
                    b.nsq_logrho_over_l1 / s.epsilon,
                ],
                terms: [
                    b.n_lm1cu_over_l1cu,
                    b.n_l1sq_over_l0cu,
                    b.n_l0sq_over_l1cu,
                    b.nsq_logrho_over_l1,
                ],
                hierarchy_ok: s.hierarchy().ok,
                temple_margin: s.l0.powi(3) / (3.0 * a * n * s.l1.powi(2)),
            }
        })
        .collect()
}
