//! Property tests for the structural invariants: convexity and knee
//! continuity of the occupancy profiles, independence of the neighbor
//! structure from the moving coordinate, trial-factor bounds, soft
//! potential support, partition of the torus by grid cells, Temple
//! monotonicity, and exclusion-set nesting.

use bosegas::cellbound::{temple_lower_bound, ExclusionSets, TempleInput};
use bosegas::configspace::{
    build_neighbors, eval_soft_potential, eval_w, Box3, GridDecomposition, ParticleConfig,
    Thresholds,
};
use bosegas::doubling::{split_energy_exact, PiecewiseQuadratic, RandomizedCount};
use bosegas::rng::{substream, Stream};
use bosegas::twobody::{check_profile_bounds, GridSpec, NeumannTable, PotentialSpec};
use proptest::prelude::*;
use rand::Rng as _;
use std::sync::OnceLock;

fn shared_table() -> &'static NeumannTable {
    static TABLE: OnceLock<NeumannTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        NeumannTable::new(
            PotentialSpec::SquareBarrier { v0: 50.0, r0: 0.25 },
            GridSpec { points: 1_500, margin_factor: 4.0 },
            1.0,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn profile_is_convex_and_continuous(knee in 0.5f64..500.0, t in 0.0f64..2000.0) {
        let f = PiecewiseQuadratic::new(knee);
        // continuity at the knee
        let left = knee * (knee - 1.0);
        let right = (2.0 * knee - 1.0) * knee - knee * knee;
        prop_assert!((left - right).abs() <= 1e-9 * left.abs().max(1.0));
        // midpoint convexity at arbitrary spacing
        let d = 0.5 + t / 10.0;
        let mid = 2.0 * f.eval(t + d);
        let ends = f.eval(t) + f.eval(t + 2.0 * d);
        prop_assert!(mid <= ends + 1e-9 * ends.abs().max(1.0));
    }

    #[test]
    fn profile_nondecreasing_from_one(knee in 0.5f64..200.0, t in 1.0f64..500.0, dt in 0.0f64..50.0) {
        let f = PiecewiseQuadratic::new(knee);
        prop_assert!(f.eval(t + dt) >= f.eval(t) - 1e-9);
    }

    #[test]
    fn split_energy_symmetric(n_a in 0u64..40, n_b in 0u64..40, k in 0u64..40, knee in 1.0f64..100.0) {
        let f = PiecewiseQuadratic::new(knee);
        let a = split_energy_exact(&f, 3.0, &RandomizedCount { n_a, n_b, k }).unwrap();
        let b = split_energy_exact(&f, 3.0, &RandomizedCount { n_a: n_b, n_b: n_a, k }).unwrap();
        // the binomial weights pair with different profile values after
        // the swap, so agreement is to rounding, not bit-exact
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn temple_monotone(mean in -1.0f64..1.0, var in 0.0f64..0.5, gap in 0.01f64..2.0, bump in 0.01f64..1.0) {
        let e1 = mean + gap;
        let base = TempleInput { mean, second_moment: mean * mean + var, e1_lower: e1 };
        let b0 = temple_lower_bound(&base).unwrap();
        // raising the excited-level bound raises the Temple bound
        let wider = TempleInput { e1_lower: e1 + bump, ..base };
        prop_assert!(temple_lower_bound(&wider).unwrap() >= b0 - 1e-12);
        // shrinking the variance raises it
        let tighter = TempleInput { second_moment: mean * mean + var * 0.5, ..base };
        prop_assert!(temple_lower_bound(&tighter).unwrap() >= b0 - 1e-12);
        // and the bound never exceeds the trial mean
        prop_assert!(b0 <= mean + 1e-12);
    }

    #[test]
    fn grid_cells_partition_torus(
        x in prop::array::uniform3(0.0f64..30.0),
        ux in -5.0f64..5.0, uy in -5.0f64..5.0, uz in -5.0f64..5.0,
    ) {
        let grid = GridDecomposition::new(30.0, 10.0, 1.0, [ux, uy, uz]).unwrap();
        let idx = grid.cell_index(x);
        prop_assert!(idx.iter().all(|&i| i < 3));
        // exactly one cell claims the point
        let mut claims = 0;
        for cx in 0..3 {
            for cy in 0..3 {
                for cz in 0..3 {
                    if grid.cell_index(x) == [cx, cy, cz] {
                        claims += 1;
                    }
                }
            }
        }
        prop_assert_eq!(claims, 1);
        // the inner indicator implies membership of the same cell
        if grid.chi_tilde(x) {
            prop_assert!(idx.iter().all(|&i| i < 3));
        }
    }

    #[test]
    fn exclusion_sets_nest(seed in 0u64..500) {
        let mut rng = substream(seed, Stream::CellBound, 77);
        let cfg = ParticleConfig::random(40.0, 12, &mut rng);
        let bx = Box3::cube([8.0; 3], 20.0).unwrap();
        let sets = ExclusionSets::new(&cfg, [0, 1], bx, 0.5, 2.0);
        for _ in 0..50 {
            let x = [(); 3].map(|_| rng.gen_range(0.0..40.0));
            if sets.s_0(x) {
                prop_assert!(sets.s_minus1(x));
            }
            if sets.b_tilde(x) {
                prop_assert!(bx.contains(x));
            }
        }
    }
}

proptest! {
    // fewer cases for the ones that hit the radial solver cache
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn neighbor_structure_independent_of_moving_coordinate(seed in 0u64..200) {
        let thresholds = Thresholds::new(4.0, 1.0).unwrap();
        let mut rng = substream(seed, Stream::ConfigSpace, 55);
        let mut cfg = ParticleConfig::random(25.0, 14, &mut rng);
        let before = build_neighbors(&cfg, thresholds);
        let j = (seed % 14) as usize;
        cfg.positions[j] = [(); 3].map(|_| rng.gen_range(0.0..25.0));
        let after = build_neighbors(&cfg, thresholds);
        for i in 0..14 {
            if i != j {
                // bit-identical: t_ij, F_ij, G_ij do not depend on x_j
                prop_assert_eq!(before.t(i, j), after.t(i, j));
                prop_assert_eq!(before.f(i, j), after.f(i, j));
                prop_assert_eq!(before.g(i, j), after.g(i, j));
            }
        }
    }

    #[test]
    fn trial_factor_in_unit_band(seed in 0u64..200) {
        let thresholds = Thresholds::new(4.0, 1.0).unwrap();
        let table = shared_table();
        let mut rng = substream(seed, Stream::ConfigSpace, 66);
        let cfg = ParticleConfig::random(25.0, 10, &mut rng);
        let nbrs = build_neighbors(&cfg, thresholds);
        // floor from the worst cached profile after warming the ladder
        table.solution_exact(4.0).unwrap();
        for i in 0..10 {
            if i != 0 && !nbrs.f(i, 0) && nbrs.g(i, 0) {
                table.solution(nbrs.t(i, 0)).unwrap();
            }
        }
        let floor = 1.0 - table.tau_max_cached();
        for _ in 0..30 {
            let y = [(); 3].map(|_| rng.gen_range(0.0..25.0));
            let w = eval_w(&cfg, &nbrs, table, 0, y).unwrap();
            prop_assert!(w <= 1.0 + 1e-12);
            prop_assert!(w >= floor - 1e-12, "w = {} below floor {}", w, floor);
        }
    }

    #[test]
    fn soft_potential_supported_in_l0_ball(seed in 0u64..200) {
        let thresholds = Thresholds::new(4.0, 1.0).unwrap();
        let table = shared_table();
        let mut rng = substream(seed, Stream::ConfigSpace, 88);
        let cfg = ParticleConfig::random(25.0, 8, &mut rng);
        let nbrs = build_neighbors(&cfg, thresholds);
        for _ in 0..30 {
            let y = [(); 3].map(|_| rng.gen_range(0.0..25.0));
            let q = eval_soft_potential(&cfg, &nbrs, table, 1, 0, y).unwrap();
            prop_assert!(q >= 0.0);
            if cfg.distance(cfg.positions[1], y) > 4.0 {
                prop_assert_eq!(q, 0.0);
            }
        }
    }

    #[test]
    fn profile_bounds_hold_across_ladder(idx in 0u64..20) {
        let table = shared_table();
        let kappa = 1.0 * 1.02f64.powi(idx as i32 * 4);
        let sol = table.solution(kappa).unwrap();
        let b = check_profile_bounds(&sol).unwrap();
        prop_assert!(b.phi_min > 0.0);
        prop_assert!(b.phi_max <= 1.0 + 1e-9);
        prop_assert!(b.c1.is_finite() && b.c1 >= 0.0);
    }
}
