use proptest::prelude::*;

use qaia::descent::{is_local_minimum, steepest_descent_traced};
use qaia::io::{parse_instance, serialize_instance};
use qaia::model::{qubo_to_ising, IsingInstance, SpinConfig};
use qaia::oracle::{brute_force, enumerate_local_minima};
use qaia::solvers::{default_params, ShotRng, Solver, SolverState, Variant};
use rand::SeedableRng;

/// Energy straight from the definition, with no caching or sparse storage.
fn naive_energy(h: &[f64], couplings: &[(usize, usize, f64)], offset: f64, z: &[i8]) -> f64 {
    let mut e = offset;
    for (i, &hi) in h.iter().enumerate() {
        e += hi * f64::from(z[i]);
    }
    for &(i, j, v) in couplings {
        e += v * f64::from(z[i]) * f64::from(z[j]);
    }
    e
}

prop_compose! {
    fn instance_parts(max_n: usize)(n in 1..=max_n)(
        h in prop::collection::vec(-2.0..2.0f64, n),
        dense in prop::collection::vec(prop::option::weighted(0.6, -2.0..2.0f64), n * (n - 1) / 2),
        offset in -3.0..3.0f64,
    ) -> Parts {
        let n = h.len();
        let pairs = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        let couplings = pairs.zip(dense).filter_map(|((i, j), v)| v.map(|v| (i, j, v))).collect();
        (h, couplings, offset)
    }
}

type Parts = (Vec<f64>, Vec<(usize, usize, f64)>, f64);

fn build((h, c, o): &Parts) -> IsingInstance {
    IsingInstance::new(h.clone(), c.iter().copied(), *o).unwrap()
}

fn config(n: usize, bits: u64) -> SpinConfig {
    SpinConfig::from_bits(n, bits & ((1u64 << n) - 1))
}

proptest! {
    #[test]
    fn energy_matches_definition(parts in instance_parts(12), bits: u64) {
        let inst = build(&parts);
        let cfg = config(inst.n(), bits);
        let direct = naive_energy(&parts.0, &parts.1, parts.2, cfg.spins());
        prop_assert!((inst.energy(&cfg).unwrap() - direct).abs() < 1e-9);
    }

    #[test]
    fn flip_delta_is_energy_difference(parts in instance_parts(12), bits: u64, k: usize) {
        let inst = build(&parts);
        let cfg = config(inst.n(), bits);
        let i = k % inst.n();
        let diff = inst.energy(&cfg.flipped(i)).unwrap() - inst.energy(&cfg).unwrap();
        prop_assert!((inst.flip_delta(&cfg, i).unwrap() - diff).abs() < 1e-9);
    }

    #[test]
    fn global_flip_only_moves_the_linear_term(parts in instance_parts(12), bits: u64) {
        let inst = build(&parts);
        let cfg = config(inst.n(), bits);
        let linear: f64 = parts.0.iter().zip(cfg.spins()).map(|(h, &z)| h * f64::from(z)).sum();
        let diff = inst.energy(&cfg.negated()).unwrap() - inst.energy(&cfg).unwrap();
        prop_assert!((diff + 2.0 * linear).abs() < 1e-9);
    }

    #[test]
    fn relabeling_preserves_energy(
        (parts, perm) in instance_parts(10).prop_flat_map(|p| {
            let n = p.0.len();
            (Just(p), Just((0..n).collect::<Vec<usize>>()).prop_shuffle())
        }),
        bits: u64,
    ) {
        let inst = build(&parts);
        let cfg = config(inst.n(), bits);
        let moved = inst.permuted(&perm).unwrap();
        let e = inst.energy(&cfg).unwrap();
        prop_assert!((moved.energy(&cfg.permuted(&perm)).unwrap() - e).abs() < 1e-9);
    }

    #[test]
    fn qubo_conversion_is_exact(q in (1..=7usize).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(-3.0..3.0f64, n), n)), constant in -2.0..2.0f64) {
        let n = q.len();
        let inst = qubo_to_ising(&q, constant).unwrap();
        for bits in 0..1u64 << n {
            let cfg = SpinConfig::from_bits(n, bits);
            let x: Vec<f64> = cfg.spins().iter().map(|&z| if z > 0 { 1.0 } else { 0.0 }).collect();
            let mut direct = constant;
            for i in 0..n {
                for j in 0..n {
                    direct += q[i][j] * x[i] * x[j];
                }
            }
            prop_assert!((inst.energy(&cfg).unwrap() - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn brute_force_agrees_with_naive_scan(parts in instance_parts(9)) {
        let inst = build(&parts);
        let n = inst.n();
        let energies: Vec<f64> = (0..1u64 << n)
            .map(|b| naive_energy(&parts.0, &parts.1, parts.2, SpinConfig::from_bits(n, b).spins()))
            .collect();
        let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let sol = brute_force(&inst).unwrap();
        prop_assert!((sol.ground_energy - min).abs() < 1e-9);
        let expected: Vec<u64> = (0..1u64 << n).filter(|&b| energies[b as usize] <= min + 1e-9).collect();
        let found: Vec<u64> = sol.ground_configs.iter().map(SpinConfig::to_bits).collect();
        prop_assert_eq!(found, expected);
    }

    #[test]
    fn descent_ends_in_an_enumerated_minimum(parts in instance_parts(8)) {
        let inst = build(&parts);
        let n = inst.n();
        let minima = enumerate_local_minima(&inst).unwrap();
        for bits in 0..1u64 << n {
            let start = SpinConfig::from_bits(n, bits);
            let out = steepest_descent_traced(&inst, &start).unwrap();
            prop_assert!(is_local_minimum(&inst, &out.config).unwrap());
            prop_assert!(out.energy <= inst.energy(&start).unwrap() + 1e-12);
            prop_assert_eq!(out.flips_applied, out.flip_trace.as_ref().unwrap().len());
            prop_assert!(minima.iter().any(|(c, _)| *c == out.config));
        }
    }

    #[test]
    fn canonical_text_round_trips(parts in instance_parts(10)) {
        let inst = build(&parts);
        let text = serialize_instance(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(serialize_instance(&back), text);
    }

    #[test]
    fn origin_is_a_cim_fixed_point_without_fields(parts in instance_parts(10), v in 0..3usize) {
        let (_, c, o) = parts;
        let inst = IsingInstance::new(vec![0.0; c.iter().map(|p| p.1 + 1).max().unwrap_or(1)], c, o).unwrap();
        let variant = [Variant::Cac, Variant::Cfc, Variant::Sfc][v];
        let solver = Solver::with_defaults(variant, &inst).unwrap();
        let n = inst.n();
        let e0 = if variant == Variant::Sfc { 0.0 } else { 1.0 };
        let mut state = SolverState::new(vec![0.0; n], vec![e0; n], vec![0.0; n]);
        for _ in 0..50 {
            solver.step(&mut state).unwrap();
        }
        prop_assert!(state.x.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn amplitudes_respect_the_clamp(parts in instance_parts(10), v in 0..3usize, seed: u64, clamp in 0.2..2.0f64, noise in 0.0..0.5f64) {
        let inst = build(&parts);
        let variant = [Variant::Cac, Variant::Cfc, Variant::Sfc][v];
        let mut params = default_params(variant, &inst).unwrap();
        params.set(variant, "amplitude_clamp", &clamp.to_string()).unwrap();
        params.set(variant, "noise_per_step", &noise.to_string()).unwrap();
        params.set(variant, "steps", "300").unwrap();
        let solver = Solver::new(variant, &inst, params).unwrap();
        let mut rng = ShotRng::seed_from_u64(seed);
        let mut state = solver.initial_state(&mut rng);
        let mut worst: f64 = 0.0;
        solver.integrate(&mut state, &mut rng, |s| worst = s.x.iter().fold(worst, |m, x| m.max(x.abs()))).unwrap();
        prop_assert!(worst <= clamp);
    }
}
