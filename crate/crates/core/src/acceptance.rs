//! The acceptance checks, one function per criterion, shared by the
//! integration test target and the CLI's `report-all` subcommand. Each
//! returns a [`CriterionResult`] with a pass flag and a short factual
//! summary; the test target asserts the flags.

use crate::cellbound::{temple_lower_bound, TempleInput};
use crate::configspace::{build_neighbors, Box3, ParticleConfig, Thresholds};
use crate::doubling::{
    chernoff_domination, randomization_identities_exact, verify_merge_bound,
    verify_randomized_floor, DoublingSchedule, RandomizedCount,
};
use crate::linalg::SymMatrix;
use crate::oracle::{
    ground_state, radial_neumann_fd, substitution_identity_check, temple_vs_exact, Bc,
    RelativePair, SolverBudget,
};
use crate::rng::{substream, Stream};
use crate::scales::{error_budget, Prefactors, ScaleSet};
use crate::twobody::{
    solve_neumann_mode, solve_zero_energy, GridSpec, NeumannTable, PotentialSpec, ProfileKind,
};
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
    /// Wall time; printed but kept out of the serialized artifacts so
    /// same-seed runs stay byte-identical.
    #[serde(skip)]
    pub elapsed_s: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:02} {:<28} {}  {} [{:.1}s]",
            self.id,
            self.name,
            if self.passed { "[PASS]" } else { "[FAIL]" },
            self.details,
            self.elapsed_s
        )
    }
}

/// Run one criterion and append its wall time to the details (the
/// stated runtime budgets are environmental, so they are reported, not
/// asserted).
pub fn timed(f: impl FnOnce() -> CriterionResult) -> CriterionResult {
    let start = std::time::Instant::now();
    let mut r = f();
    r.elapsed_s = start.elapsed().as_secs_f64();
    r
}

fn scattering_length(pot: &PotentialSpec, grid: &GridSpec) -> f64 {
    match solve_zero_energy(pot, grid).expect("zero-energy solve").kind {
        ProfileKind::ZeroEnergy { a } => a,
        _ => unreachable!(),
    }
}

fn neumann_e0(pot: &PotentialSpec, kappa: f64, grid: &GridSpec) -> f64 {
    match solve_neumann_mode(pot, kappa, grid).expect("neumann solve").kind {
        ProfileKind::NeumannMode { e0, .. } => e0,
        _ => unreachable!(),
    }
}

/// 1. Square-barrier scattering length against the closed form
///    `1 - tanh(5)/5`, to 1e-6 relative.
pub fn criterion_01_scattering_analytic() -> CriterionResult {
    let pot = PotentialSpec::SquareBarrier { v0: 50.0, r0: 1.0 };
    let a = scattering_length(&pot, &GridSpec::default());
    let k = (50.0f64 / 2.0).sqrt();
    let expect = 1.0 - (k).tanh() / k;
    let rel = (a - expect).abs() / expect;
    CriterionResult {
        elapsed_s: 0.0,
        id: 1,
        name: "scattering length analytic",
        passed: rel <= 1e-6,
        details: format!("a = {a:.9} vs {expect:.9}, rel err {rel:.2e}"),
    }
}

/// 2. Two-sided Neumann eigenvalue bounds over 20 (potential, kappa)
///    pairs: `e0 >= 3a/k^3` post-tolerance and realized upper constant
///    within `8 R0 / kappa`.
pub fn criterion_02_neumann_bounds() -> CriterionResult {
    let grid = GridSpec { points: 4_000, margin_factor: 4.0 };
    let pots = [
        PotentialSpec::SquareBarrier { v0: 50.0, r0: 1.0 },
        PotentialSpec::SquareBarrier { v0: 20.0, r0: 1.0 },
        PotentialSpec::SquareBarrier { v0: 80.0, r0: 0.5 },
        PotentialSpec::Gaussian { v0: 10.0, width: 0.5 },
        PotentialSpec::SmoothBump { v0: 6.0, r0: 1.0 },
    ];
    let mut checked = 0;
    let mut worst_lower = f64::INFINITY;
    let mut worst_upper = f64::NEG_INFINITY;
    let mut ok = true;
    for pot in &pots {
        let a = scattering_length(pot, &grid);
        let r0 = pot.support_radius();
        for mult in [4.5, 6.0, 8.0, 10.0] {
            let kappa = mult * r0;
            let e0 = neumann_e0(pot, kappa, &grid);
            let lower = 3.0 * a / kappa.powi(3);
            let margin = e0 / lower - 1.0;
            worst_lower = worst_lower.min(margin);
            if e0 < lower * (1.0 - 1e-6) {
                ok = false;
            }
            let upper_slack = margin - 8.0 * r0 / kappa;
            worst_upper = worst_upper.max(upper_slack);
            if upper_slack > 0.0 {
                ok = false;
            }
            checked += 1;
        }
    }
    CriterionResult {
        elapsed_s: 0.0,
        id: 2,
        name: "neumann eigenvalue bounds",
        passed: ok && checked == 20,
        details: format!(
            "{checked} pairs; min (e0 k^3/3a - 1) = {worst_lower:.3e}, max slack over 8R0/k = {worst_upper:.3e}"
        ),
    }
}

/// 3. Temple soundness on 1000 random symmetric 8x8 instances and 50
///    discretized instances: bound <= exact ground level in every
///    applicable case.
pub fn criterion_03_temple_soundness(seed: u64) -> CriterionResult {
    let mut rng = substream(seed, Stream::CellBound, 1001);
    let mut applicable = 0usize;
    let mut violations = 0usize;
    for _ in 0..1000 {
        let n = 8;
        let mut rows = vec![vec![0.0; n]; n];
        for r in 0..n {
            for c in r..n {
                let v = rng.gen_range(-1.0..1.0);
                rows[r][c] = v;
                rows[c][r] = v;
            }
        }
        let m = SymMatrix::from_rows(&rows);
        let ev = m.eigenvalues();
        // power-iterate toward the ground state, then perturb
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = 1.0 + ev[n - 1].abs().max(ev[0].abs());
        for _ in 0..30 {
            let hv = m.mul_vec(&v);
            let mut w: Vec<f64> = (0..n).map(|k| c * v[k] - hv[k]).collect();
            let nn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            w.iter_mut().for_each(|x| *x /= nn);
            v = w;
        }
        for x in v.iter_mut() {
            *x += 0.15 * rng.gen_range(-1.0..1.0);
        }
        let nn = v.iter().map(|x| x * x).sum::<f64>();
        let hv = m.mul_vec(&v);
        let mean = v.iter().zip(&hv).map(|(a, b)| a * b).sum::<f64>() / nn;
        let second = hv.iter().map(|x| x * x).sum::<f64>() / nn;
        if let Ok(b) = temple_lower_bound(&TempleInput { mean, second_moment: second, e1_lower: ev[1] })
        {
            applicable += 1;
            if b > ev[0] + 1e-10 {
                violations += 1;
            }
        }
    }
    // discretized instances
    let budget = SolverBudget::default();
    let mut disc_applicable = 0usize;
    for inst in 0..50u64 {
        let v0 = 2.0 + (inst % 5) as f64 * 2.0;
        let side = 4.0 + (inst % 7) as f64 * 0.5;
        let bc = if inst % 2 == 0 { Bc::Periodic } else { Bc::Neumann };
        let pot = PotentialSpec::Gaussian { v0, width: 0.4 };
        let op = RelativePair::new(&pot, side, 8, bc).expect("small grid");
        let gs = ground_state(&op, &budget, true, seed ^ inst).expect("solver");
        // smooth perturbation: mix in the first excited vector (white
        // noise would carry grid-scale kinetic energy past E1)
        let mut rng2 = substream(seed, Stream::Oracle, 2000 + inst);
        let mix: f64 = rng2.gen_range(0.05..0.3);
        let v1 = gs.vector1.as_ref().expect("e1 requested");
        let trial: Vec<f64> = gs
            .vector
            .iter()
            .zip(v1)
            .map(|(&x, &y)| x + mix * y)
            .collect();
        let t = temple_vs_exact(&op, &trial, &gs);
        if let Some(b) = t.bound {
            disc_applicable += 1;
            if b > gs.e0 + 1e-9 {
                violations += 1;
            }
        }
    }
    CriterionResult {
        elapsed_s: 0.0,
        id: 3,
        name: "temple soundness",
        passed: violations == 0 && applicable > 800 && disc_applicable > 40,
        details: format!(
            "{applicable}/1000 matrix + {disc_applicable}/50 discretized applicable, {violations} violations"
        ),
    }
}

fn desk_schedule(rho: f64) -> DoublingSchedule {
    let s = ScaleSet::new(rho, 0.05, Prefactors::default(), 1.0).expect("scan density");
    DoublingSchedule::new(s.rho, s.eta, s.l1, 3).expect("schedule")
}

/// 4. Exhaustive merge-bound sweep: the example knee schedule at
///    rho in {1e-4, 1e-6, 1e-8}, every step, every split of every
///    n <= 4 K_{s+1}: zero violations.
pub fn criterion_04_merge_bound_exhaustive() -> CriterionResult {
    let mut total = 0u64;
    let mut violations = 0usize;
    let mut min_margin = f64::INFINITY;
    for rho in [1e-4, 1e-6, 1e-8] {
        let sched = desk_schedule(rho);
        sched.validate().expect("schedule invariants");
        for s in 1..=sched.s_max() {
            let n_hi = (4.0 * sched.knee(s + 1)).floor() as u64;
            let rep = verify_merge_bound(&sched, s, n_hi);
            total += (rep.n_hi + 1).saturating_sub(rep.n_lo);
            violations += rep.violations.len();
            min_margin = min_margin.min(rep.min_margin);
        }
    }
    CriterionResult {
        elapsed_s: 0.0,
        id: 4,
        name: "merge bound exhaustive",
        passed: violations == 0,
        details: format!("{total} occupancies swept, {violations} violations, min margin {min_margin:.3}"),
    }
}

/// 5. Randomized-floor inequality via exact binomial sums over every
///    admissible occupancy at the same densities the merge sweep pins,
///    plus exact-tail domination by the Chernoff bound up to n = 2000.
///
///    The first clause fails at these densities: the knee-gap separation
///    the derivation assumes is reported as violated by the schedule
///    (it needs |log rho| beyond any representable float), and the
///    inequality genuinely reverses on a band of occupancies just below
///    the next knee. The violations are listed, not hidden.
pub fn criterion_05_randomized_floor_exact() -> CriterionResult {
    let mut floor_violations = Vec::new();
    let mut checked = 0u64;
    for rho in [1e-4, 1e-6, 1e-8] {
        let sched = desk_schedule(rho);
        for s in 1..=sched.s_max() {
            let rep = verify_randomized_floor(&sched, s).expect("exact binomial");
            checked += rep.n_max.saturating_sub(1);
            for v in rep.violations {
                floor_violations.push((rho, s, v.n, v.rhs - v.lhs));
            }
        }
    }
    let chernoff = chernoff_domination(2000);
    let passed = floor_violations.is_empty() && chernoff.is_none();
    let head: Vec<String> = floor_violations
        .iter()
        .take(4)
        .map(|(rho, s, n, gap)| format!("(rho={rho:.0e}, s={s}, n={n}, short by {gap:.3})"))
        .collect();
    CriterionResult {
        elapsed_s: 0.0,
        id: 5,
        name: "randomized floor exact",
        passed,
        details: format!(
            "{checked} occupancies checked, {} floor violations {}; chernoff domination to n=2000: {}",
            floor_violations.len(),
            if head.is_empty() { String::new() } else { format!("e.g. {}", head.join(" ")) },
            if chernoff.is_none() { "holds" } else { "violated" },
        ),
    }
}

/// 6. The four randomization moment identities, exact (no tolerance) in
///    rational arithmetic, for 500 random states.
pub fn criterion_06_moment_identities(seed: u64) -> CriterionResult {
    let mut rng = substream(seed, Stream::Doubling, 600);
    let mut failures = 0usize;
    for _ in 0..500 {
        let st = RandomizedCount {
            n_a: rng.gen_range(0..40),
            n_b: rng.gen_range(0..40),
            k: rng.gen_range(1..60),
        };
        let knee: f64 = rng.gen_range(1.0..90.0);
        let rep = randomization_identities_exact(knee, &st);
        if !(rep.mean_m_is_one
            && rep.var_m_is_four_d_squared
            && rep.var_g_matches_difference_form
            && rep.mean_g_telescopes)
        {
            failures += 1;
        }
    }
    CriterionResult {
        elapsed_s: 0.0,
        id: 6,
        name: "moment identities exact",
        passed: failures == 0,
        details: format!("500 states, {failures} identity failures"),
    }
}

/// 7. Grid-average identity: the empirical origin-average of the inner
///    indicator matches `((l1 - 4 l0)/l1)^3` within 3 sigma at ten probe
///    points.
pub fn criterion_07_grid_average(seed: u64) -> CriterionResult {
    let l1 = 10.0f64;
    let l0 = 1.0f64;
    let side = 40.0;
    let p_exact = ((l1 - 4.0 * l0) / l1).powi(3);
    let trials = 10_000u32;
    let mut rng = substream(seed, Stream::ConfigSpace, 700);
    let mut worst_sigma = 0.0f64;
    let mut ok = true;
    for probe in 0..10 {
        let x = [(); 3].map(|_| rng.gen_range(0.0..side));
        let mut rng_u = substream(seed, Stream::ConfigSpace, 710 + probe);
        let mut hits = 0u32;
        for _ in 0..trials {
            let u = crate::configspace::GridDecomposition::random_origin(l1, &mut rng_u);
            let grid = crate::configspace::GridDecomposition::new(side, l1, l0, u)
                .expect("grid tiles torus");
            if grid.chi_tilde(x) {
                hits += 1;
            }
        }
        let mean = hits as f64 / trials as f64;
        let sigma = (p_exact * (1.0 - p_exact) / trials as f64).sqrt();
        let dev = (mean - p_exact).abs() / sigma;
        worst_sigma = worst_sigma.max(dev);
        if dev > 3.0 {
            ok = false;
        }
    }
    CriterionResult {
        elapsed_s: 0.0,
        id: 7,
        name: "grid average identity",
        passed: ok,
        details: format!("10 probes, worst deviation {worst_sigma:.2} sigma (exact p = {p_exact:.4})"),
    }
}

/// 8. Trial-factor bounds on 100 random configurations: the sampled
///    minimum of `W_j` never falls below the profile floor, and the
///    `W^2` volume deficit stays within the realized per-particle cap,
///    with the realized constant stable across configurations.
pub fn criterion_08_w_bounds(seed: u64) -> CriterionResult {
    let side = 32.0;
    let n = 48;
    let thresholds = Thresholds::new(4.0, 1.0).expect("ratio 4");
    let table = NeumannTable::new(
        PotentialSpec::SquareBarrier { v0: 50.0, r0: 0.25 },
        GridSpec { points: 2_000, margin_factor: 4.0 },
        1.0,
    );
    let bx = Box3::cube([8.0; 3], 16.0).expect("box");
    let vol = bx.volume();
    let mut min_w_overall = f64::INFINITY;
    let mut realized: Vec<f64> = Vec::new();
    let samples = 50_000usize;
    for cfg_idx in 0..100u64 {
        let mut rng = substream(seed, Stream::ConfigSpace, 800 + cfg_idx);
        let cfg = ParticleConfig::random(side, n, &mut rng);
        let nbrs = build_neighbors(&cfg, thresholds);
        let j = 0usize;
        let sampler = crate::configspace::WSampler::new(&cfg, &nbrs, &table, j, Some(&bx))
            .expect("solves");
        let partials = crate::par::map_indexed(64, |stratum| {
            let mut rng_s = substream(seed ^ cfg_idx, Stream::ConfigSpace, 900 + stratum as u64);
            let mut sum_w2 = 0.0;
            let mut min_w = f64::INFINITY;
            let per = samples / 64;
            for _ in 0..per {
                let y = [
                    bx.lo[0] + rng_s.gen::<f64>() * 16.0,
                    bx.lo[1] + rng_s.gen::<f64>() * 16.0,
                    bx.lo[2] + rng_s.gen::<f64>() * 16.0,
                ];
                let w = sampler.eval(y);
                sum_w2 += w * w;
                min_w = min_w.min(w);
            }
            (sum_w2, min_w)
        });
        let mut sum_w2 = 0.0;
        let mut min_w = f64::INFINITY;
        for (s, m) in partials {
            sum_w2 += s;
            min_w = min_w.min(m);
        }
        min_w_overall = min_w_overall.min(min_w);
        let per = (samples / 64) * 64;
        let integral = vol * sum_w2 / per as f64;
        let deficit = (vol - integral).max(0.0);
        let inside = (0..cfg.len()).filter(|&i| bx.contains(cfg.positions[i])).count() as f64;
        realized.push(deficit / (inside * 16.0 + 256.0)); // n l0^2 + box side^2
    }
    let c0 = table.tau_max_cached();
    let floor = 1.0 - c0;
    let floor_ok = min_w_overall >= floor - 1e-12;
    // the realized constant is the ensemble cap; stability is judged by
    // recomputing it on the two halves of the ensemble
    let half = realized.len() / 2;
    let c_first = realized[..half].iter().cloned().fold(0.0, f64::max);
    let c_second = realized[half..].iter().cloned().fold(0.0, f64::max);
    let c_all = c_first.max(c_second);
    let stable = (c_first - c_second).abs() <= 0.5 * c_all && c_all.is_finite();
    let c1 = table.c1_max_cached();
    let cap_ok = c_all <= 4.0 * std::f64::consts::PI * c1;
    CriterionResult {
        elapsed_s: 0.0,
        id: 8,
        name: "trial factor bounds",
        passed: floor_ok && stable && cap_ok,
        details: format!(
            "min W = {min_w_overall:.6} vs floor {floor:.6}; realized C halves [{c_first:.4}, {c_second:.4}] (theorem cap {:.4})",
            4.0 * std::f64::consts::PI * c1
        ),
    }
}

/// 9. Oracle consistency: the radial-sector eigenvalue from the
///    finite-difference oracle matches the shooting eigenvalue within 2%
///    on a 64-point grid, and the substitution-identity residual halves
///    (or better) under each 2x refinement.
pub fn criterion_09_oracle_consistency(seed: u64) -> CriterionResult {
    let pot = PotentialSpec::SmoothBump { v0: 6.0, r0: 1.0 };
    let kappa = 4.0;
    let e_shoot = neumann_e0(&pot, kappa, &GridSpec::default());
    let e_fd = radial_neumann_fd(&pot, kappa, 64);
    let rel = (e_fd - e_shoot).abs() / e_shoot;
    let radial_ok = rel <= 0.02;

    let w = |p: [f64; 3]| {
        let r2 = (p[0] - 4.0).powi(2) + (p[1] - 4.0).powi(2) + (p[2] - 4.0).powi(2);
        1.0 - 0.4 * (-r2 / 1.5).exp()
    };
    let v = |p: [f64; 3]| {
        let r2 = (p[0] - 4.0).powi(2) + (p[1] - 4.0).powi(2) + (p[2] - 4.0).powi(2);
        6.0 * (-r2 / 0.8).exp()
    };
    let r16 = substitution_identity_check(16, 8.0, w, v, 20, seed).max_relative;
    let r32 = substitution_identity_check(32, 8.0, w, v, 20, seed).max_relative;
    let r64 = substitution_identity_check(64, 8.0, w, v, 20, seed).max_relative;
    let ratio1 = r16 / r32;
    let ratio2 = r32 / r64;
    let identity_ok = ratio1 >= 2.0 && ratio2 >= 2.0;
    CriterionResult {
        elapsed_s: 0.0,
        id: 9,
        name: "oracle consistency",
        passed: radial_ok && identity_ok,
        details: format!(
            "radial FD vs shooting rel err {rel:.4e}; identity residual ratios {ratio1:.2}, {ratio2:.2}"
        ),
    }
}

/// 10. Two-body leading order: periodic-box pair ground energy within
///     25% of `8 pi a / L^3` at `L / a = 20`.
pub fn criterion_10_two_body_leading_order(seed: u64) -> CriterionResult {
    let pot = PotentialSpec::Gaussian { v0: 10.0, width: 0.5 };
    let a = scattering_length(&pot, &GridSpec::default());
    let side = 20.0 * a;
    let op = RelativePair::new(&pot, side, 48, Bc::Periodic).expect("grid");
    let gs = ground_state(&op, &SolverBudget::default(), false, seed).expect("solver");
    let reference = 8.0 * std::f64::consts::PI * a / side.powi(3);
    let ratio = gs.e0 / reference;
    CriterionResult {
        elapsed_s: 0.0,
        id: 10,
        name: "two-body leading order",
        passed: (0.75..=1.25).contains(&ratio),
        details: format!(
            "E0 = {:.6e} vs 8 pi a / L^3 = {reference:.6e}, ratio {ratio:.4} (a = {a:.4}, L = {side:.3})",
            gs.e0
        ),
    }
}

/// 11. Error-budget scan over rho = 10^-k, k = 6..=30: every error term
///     over epsilon is <= 1 and nonincreasing; the crossover where the
///     raw terms drop below one is reported and shifts by at most four
///     decades under +-20% prefactor perturbation.
pub fn criterion_11_error_budget_scan() -> CriterionResult {
    let scan_cross = |pf: Prefactors| -> (bool, Option<u32>) {
        let mut prev = [f64::INFINITY; 4];
        let mut monotone = true;
        let mut crossover = None;
        for k in 6..=30u32 {
            let s = ScaleSet::new(10.0f64.powi(-(k as i32)), 0.05, pf, 1.0).expect("density");
            let b = error_budget(&s, None);
            let ratios = [
                b.n_lm1cu_over_l1cu / s.epsilon,
                b.n_l1sq_over_l0cu / s.epsilon,
                b.n_l0sq_over_l1cu / s.epsilon,
                b.nsq_logrho_over_l1 / s.epsilon,
            ];
            for (i, r) in ratios.iter().enumerate() {
                if *r > prev[i] + 1e-12 {
                    monotone = false;
                }
            }
            prev = ratios;
            let terms_below_one = b.terms().iter().all(|(_, t)| *t <= 1.0);
            if terms_below_one && crossover.is_none() {
                crossover = Some(k);
            }
        }
        (monotone, crossover)
    };
    let base = scan_cross(Prefactors::default());
    let baseline_ratios_ok = {
        let mut ok = true;
        for k in 6..=30u32 {
            let s = ScaleSet::new(10.0f64.powi(-(k as i32)), 0.05, Prefactors::default(), 1.0)
                .expect("density");
            let b = error_budget(&s, None);
            if b.max_ratio_to_epsilon() > 1.0 {
                ok = false;
            }
        }
        ok
    };
    let base_cross = base.1;
    let mut perturbed_ok = true;
    let mut worst_shift = 0i64;
    for combo in 0..16u32 {
        let f = |bit: u32| if combo >> bit & 1 == 1 { 1.2 } else { 0.8 };
        let pf = Prefactors { l_minus1: f(0), l0: f(1), l1: f(2), l2: f(3) };
        let (monotone, cross) = scan_cross(pf);
        if !monotone {
            perturbed_ok = false;
        }
        match (base_cross, cross) {
            (Some(b), Some(c)) => worst_shift = worst_shift.max((c as i64 - b as i64).abs()),
            _ => perturbed_ok = false,
        }
    }
    let passed = base.0 && baseline_ratios_ok && base_cross.is_some() && perturbed_ok && worst_shift <= 4;
    CriterionResult {
        elapsed_s: 0.0,
        id: 11,
        name: "error budget scan",
        passed,
        details: format!(
            "baseline crossover at rho = 1e-{}, worst perturbed shift {worst_shift} decades, ratios monotone: {}",
            base_cross.map(|k| k.to_string()).unwrap_or_else(|| "none".into()),
            base.0 && perturbed_ok
        ),
    }
}

/// 12. Determinism self-check: a representative bundle of seeded
///     computations serialized twice from the same seed must be
///     byte-identical. (The CLI-level check compares the files the
///     binary writes; this is the in-process counterpart.)
pub fn criterion_12_determinism(seed: u64) -> CriterionResult {
    let bundle = |seed: u64| -> String {
        let mut out = String::new();
        let s = ScaleSet::new(1e-8, 0.05, Prefactors::default(), 1.0).expect("density");
        out.push_str(&serde_json::to_string(&s).expect("json"));
        let sched = desk_schedule(1e-4);
        let rep = verify_merge_bound(&sched, 1, (2.0 * sched.knee(2)).floor() as u64);
        out.push_str(&serde_json::to_string(&rep).expect("json"));
        let mut rng = substream(seed, Stream::ConfigSpace, 1);
        let cfg = ParticleConfig::random(20.0, 16, &mut rng);
        let nbrs = build_neighbors(&cfg, Thresholds::new(2.0, 0.5).expect("ratio"));
        let table = NeumannTable::new(
            PotentialSpec::SquareBarrier { v0: 50.0, r0: 0.1 },
            GridSpec { points: 1_000, margin_factor: 4.0 },
            0.5,
        );
        let bx = Box3::cube([4.0; 3], 8.0).expect("box");
        let est = crate::configspace::integrate_w_squared(
            &cfg,
            &nbrs,
            &table,
            0,
            &bx,
            &crate::configspace::McBudget::new(20_000, seed),
        )
        .expect("mc");
        out.push_str(&serde_json::to_string(&est).expect("json"));
        out
    };
    let a = bundle(seed);
    let b = bundle(seed);
    CriterionResult {
        elapsed_s: 0.0,
        id: 12,
        name: "determinism",
        passed: a == b,
        details: format!("{} bytes, byte-identical: {}", a.len(), a == b),
    }
}

/// Run the full suite with one seed.
pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    vec![
        timed(criterion_01_scattering_analytic),
        timed(criterion_02_neumann_bounds),
        timed(|| criterion_03_temple_soundness(seed)),
        timed(criterion_04_merge_bound_exhaustive),
        timed(criterion_05_randomized_floor_exact),
        timed(|| criterion_06_moment_identities(seed)),
        timed(|| criterion_07_grid_average(seed)),
        timed(|| criterion_08_w_bounds(seed)),
        timed(|| criterion_09_oracle_consistency(seed)),
        timed(|| criterion_10_two_body_leading_order(seed)),
        timed(criterion_11_error_budget_scan),
        timed(|| criterion_12_determinism(seed)),
    ]
}
