use proptest::prelude::*;

use riesz_torus::analysis::{closed_form_energy, crossover, recover_mask, Family};
use riesz_torus::census::{
    canonical_key, census_run, equivalent, random_isometry, CensusOptions, InitDescriptor, DEFAULT_Q,
};
use riesz_torus::energy::{gradient, log_domain_energy, log_energy, min_distance, riesz_energy, EnergySpec};
use riesz_torus::factory::{
    all_masks, construct_theorem1, mask_canonical, named, random_config, theorem1_grid, ConstructionSpec,
    NamedConfig, S_ALPHA_MAX,
};
use riesz_torus::flow::{descend, DescentOptions, Termination};
use riesz_torus::analysis::energy_upper_bound;
use riesz_torus::torus::{displacement, distance, min_image, Configuration, TorusPoint};

fn point() -> impl Strategy<Value = TorusPoint> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y)| TorusPoint::wrap(x, y).unwrap())
}

fn config(max_n: usize) -> impl Strategy<Value = Configuration> {
    (3..=max_n, any::<u64>()).prop_map(|(n, seed)| random_config(n, seed).unwrap())
}

fn spec() -> impl Strategy<Value = EnergySpec> {
    prop_oneof![
        Just(EnergySpec::Log),
        Just(EnergySpec::Riesz { p: 2.0 }),
        Just(EnergySpec::Riesz { p: 8.0 }),
        Just(EnergySpec::Riesz { p: 26.0 }),
    ]
}

fn energy_of(c: &Configuration, spec: EnergySpec) -> f64 {
    riesz_torus::energy::energy(c, spec).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn distance_symmetric_and_triangle(a in point(), b in point(), c in point()) {
        prop_assert_eq!(distance(a, b), distance(b, a));
        prop_assert!(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-12);
        prop_assert!(distance(a, b) <= std::f64::consts::FRAC_1_SQRT_2);
    }

    #[test]
    fn distance_isometry_invariant(a in point(), b in point(), s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let d = distance(a, b);
        prop_assert!((distance(a.translated(s, t), b.translated(s, t)) - d).abs() <= 1e-15);
        let swap = |p: TorusPoint| TorusPoint::wrap(p.y, p.x).unwrap();
        prop_assert!((distance(swap(a), swap(b)) - d).abs() <= 1e-15);
        let reflect = |p: TorusPoint| TorusPoint::wrap(1.0 - p.x, p.y).unwrap();
        prop_assert!((distance(reflect(a), reflect(b)) - d).abs() <= 1e-15);
    }

    #[test]
    fn displacement_antisymmetric(a in point(), b in point()) {
        let (dx, dy) = displacement(a, b);
        let (ex, ey) = displacement(b, a);
        for (u, v) in [(dx, ex), (dy, ey)] {
            prop_assert!((-0.5..0.5).contains(&u));
            if u == -0.5 {
                prop_assert_eq!(v, -0.5);
            } else {
                prop_assert_eq!(u, -v);
            }
        }
    }

    #[test]
    fn wrap_is_idempotent(u in -10.0..10.0f64, v in -10.0..10.0f64) {
        let p = TorusPoint::wrap(u, v).unwrap();
        prop_assert!((0.0..1.0).contains(&p.x) && (0.0..1.0).contains(&p.y));
        prop_assert_eq!(TorusPoint::wrap(p.x, p.y).unwrap(), p);
        prop_assert!(min_image(p.x - u).abs() < 1e-14);
    }

    #[test]
    fn energy_isometry_and_relabel_invariant(c in config(10), seed in any::<u64>(), p in 0.5..30.0f64) {
        let moved = random_isometry(&c, seed);
        prop_assert!(rel(riesz_energy(&moved, p).unwrap(), riesz_energy(&c, p).unwrap()) <= 1e-12);
        prop_assert!(rel(log_energy(&moved).unwrap(), log_energy(&c).unwrap()) <= 1e-12);
    }

    #[test]
    fn forces_balance(c in config(10), spec in spec()) {
        let g = gradient(&c, spec, false).unwrap();
        let net = g.net_force();
        let total: f64 = g.vectors.iter().map(|v| v[0].abs() + v[1].abs()).sum();
        prop_assert!(net[0].abs().max(net[1].abs()) <= 1e-9 * total);
    }

    #[test]
    fn scaled_gradient_is_positive_multiple(c in config(10), spec in spec()) {
        let raw = gradient(&c, spec, false).unwrap();
        let scaled = gradient(&c, spec, true).unwrap();
        prop_assert!(scaled.scale > 0.0);
        let sup = raw.sup_norm();
        for (r, s) in raw.vectors.iter().flatten().zip(scaled.vectors.iter().flatten()) {
            prop_assert!((r * scaled.scale - s).abs() <= 1e-12 * sup * scaled.scale);
        }
    }

    #[test]
    fn log_domain_matches_log_of_energy(c in config(12), p in 0.5..40.0f64) {
        let direct = riesz_energy(&c, p).unwrap().ln();
        prop_assert!(rel(log_domain_energy(&c, p).unwrap(), direct) <= 1e-12);
    }

    #[test]
    fn key_invariant_and_equivalence_consistent(c in config(12), seed in any::<u64>()) {
        let moved = random_isometry(&c, seed);
        prop_assert_eq!(canonical_key(&c, DEFAULT_Q).unwrap(), canonical_key(&moved, DEFAULT_Q).unwrap());
        prop_assert!(equivalent(&c, &c, 1e-12).unwrap());
        prop_assert!(equivalent(&c, &moved, 1e-9).unwrap());
        prop_assert!(equivalent(&moved, &c, 1e-9).unwrap());
    }

    #[test]
    fn distinct_random_configs_have_distinct_keys(a in config(8), b in config(8)) {
        prop_assume!(a.len() == b.len() && a != b);
        let same_key = canonical_key(&a, DEFAULT_Q).unwrap() == canonical_key(&b, DEFAULT_Q).unwrap();
        prop_assert_eq!(same_key, equivalent(&a, &b, 2.0 * DEFAULT_Q).unwrap());
    }

    #[test]
    fn closed_form_matches_direct_sum(alpha in 0.0..=S_ALPHA_MAX, p in 0.5..30.0f64) {
        let c = named(&NamedConfig::SAlpha { alpha }).unwrap();
        let family = Family::SAlpha { alpha };
        let closed = closed_form_energy(&family, p).unwrap();
        prop_assert!(rel(closed, riesz_energy(&c, p).unwrap()) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn gradient_matches_central_differences(c in config(10), spec in spec()) {
        let g = gradient(&c, spec, false).unwrap();
        let h = 1e-6 * min_distance(&c);
        let pts = c.points();
        let mut worst = 0.0f64;
        for i in 0..pts.len() {
            for axis in 0..2 {
                let at = |s: f64| {
                    let mut q = pts.to_vec();
                    q[i] = if axis == 0 { q[i].translated(s, 0.0) } else { q[i].translated(0.0, s) };
                    energy_of(&Configuration::new(q).unwrap(), spec)
                };
                let fd = (at(h) - at(-h)) / (2.0 * h);
                worst = worst.max((fd - g.vectors[i][axis]).abs());
            }
        }
        prop_assert!(worst <= 1e-6 * g.sup_norm(), "error {} vs sup {}", worst, g.sup_norm());
    }

    #[test]
    fn descent_monotone_and_deterministic(c in config(7), spec in spec()) {
        let opts = DescentOptions { max_iters: 300, ..Default::default() };
        let a = descend(&c, spec, &opts).unwrap();
        let b = descend(&c, spec, &opts).unwrap();
        prop_assert_eq!(&a.final_config, &b.final_config);
        let h = a.energy_history.as_ref().unwrap();
        for w in h.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn construction_bound_and_size(mask_index in 0usize..12870, p in prop::sample::select(vec![21.0, 26.0, 40.0])) {
        let mask = all_masks(20).unwrap().swap_remove(mask_index);
        let cs = ConstructionSpec::new(20, mask).unwrap();
        let c = construct_theorem1(&cs).unwrap();
        prop_assert_eq!(c.len(), 240);
        let (_, bound) = energy_upper_bound(20, p).unwrap();
        prop_assert!(log_domain_energy(&c, p).unwrap() <= bound);
        let shifted = c.translated(0.1, 0.0);
        prop_assert_eq!(canonical_key(&shifted, DEFAULT_Q).unwrap(), canonical_key(&c, DEFAULT_Q).unwrap());
    }

    #[test]
    fn crossover_ignores_common_factor(lo in 1.0..3.0f64) {
        // The root is unaffected by halving both energies.
        let p = crossover(&Family::T1, &Family::T2, lo, 10.0).unwrap();
        let diff = |q: f64| {
            (closed_form_energy(&Family::T1, q).unwrap() / 2.0).ln() - (closed_form_energy(&Family::T2, q).unwrap() / 2.0).ln()
        };
        prop_assert!(diff(p - 1e-6) * diff(p + 1e-6) <= 0.0);
    }
}

#[test]
fn grid_sizes() {
    assert_eq!(theorem1_grid(10).unwrap().len(), 80);
    assert_eq!(theorem1_grid(20).unwrap().len(), 320);
    for mask in all_masks(10).unwrap().iter().step_by(9) {
        let cs = ConstructionSpec::new(10, mask.iter().copied()).unwrap();
        assert_eq!(construct_theorem1(&cs).unwrap().len(), 60);
    }
}

#[test]
fn descent_keeps_the_column_shift_symmetry() {
    let cs = ConstructionSpec::new(10, [0, 1, 3, 6]).unwrap();
    let init = construct_theorem1(&cs).unwrap();
    let opts = DescentOptions {
        record_trajectory_every: 5,
        ..Default::default()
    };
    let res = descend(&init, EnergySpec::Riesz { p: 26.0 }, &opts).unwrap();
    assert_eq!(res.termination, Termination::Converged);
    for (_, frame) in res.trajectory.unwrap() {
        for p in frame.points() {
            let image = p.translated(0.2, 0.0);
            let hit = frame.points().iter().any(|q| {
                let (dx, dy) = displacement(image, *q);
                dx.abs() <= 1e-9 && dy.abs() <= 1e-9
            });
            assert!(hit);
        }
    }
    assert_eq!(recover_mask(&res.final_config, 10).unwrap(), mask_canonical(&cs.mask, 10).unwrap());
}

#[test]
fn perturbed_fibonacci_set_respects_distance_bound() {
    let p = 64.0;
    let f5 = named(&NamedConfig::F5).unwrap();
    let nudged = Configuration::new(
        f5.points()
            .iter()
            .enumerate()
            .map(|(i, q)| q.translated(1e-3 * (i as f64).sin(), 1e-3 * (i as f64).cos()))
            .collect(),
    )
    .unwrap();
    let res = descend(&nudged, EnergySpec::Riesz { p }, &DescentOptions::default()).unwrap();
    assert_eq!(res.termination, Termination::Converged);
    assert!(min_distance(&res.final_config) >= 1.0 / 5f64.sqrt() - 1.0 / p);
    assert!(equivalent(&res.final_config, &f5, 1e-6).unwrap());
}

#[test]
fn census_report_is_reproducible_across_thread_counts() {
    let inits: Vec<InitDescriptor> = (0..6).map(|seed| InitDescriptor::Random { n: 5, seed }).collect();
    let spec = EnergySpec::Riesz { p: 6.0 };
    let dopts = DescentOptions::default();
    let serial = census_run(&inits, spec, &dopts, &CensusOptions { jobs: 1, ..Default::default() }).unwrap();
    let parallel = census_run(&inits, spec, &dopts, &CensusOptions { jobs: 4, ..Default::default() }).unwrap();
    assert_eq!(serde_json::to_string(&serial).unwrap(), serde_json::to_string(&parallel).unwrap());
}
