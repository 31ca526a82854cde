use super::*;
use crate::network::{reference_anchors, NetworkTopology};
use crate::rss_sim::{generate_measurements, MeasurementSet, PathLossParams};
use proptest::prelude::*;
use rand::SeedableRng;

fn instance(seed: u64, targets: usize, range: f64, sigma: f64) -> (NetworkTopology, MeasurementSet) {
    let aoi = Aoi::square(100.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = (0..targets).map(|_| aoi.sample_uniform(&mut rng)).collect();
    let topo = NetworkTopology::build(reference_anchors(), truth, range, aoi).unwrap();
    let meas = generate_measurements(&topo, &PathLossParams::new(40.0, 3.0, sigma), &mut rng).unwrap();
    (topo, meas)
}

fn config(seed: u64) -> DeConfig {
    DeConfig {
        seed,
        ..DeConfig::default()
    }
}

fn hand_population(members: Vec<Position>) -> Population {
    Population {
        fitness: vec![1.0; members.len()],
        members,
        scored_with: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(0),
    }
}

#[test]
fn config_validation() {
    assert!(DeConfig::default().validate().is_ok());
    let bad = [
        DeConfig { pop_size: 3, ..DeConfig::default() },
        DeConfig { scale: 0.0, ..DeConfig::default() },
        DeConfig { scale: 2.5, ..DeConfig::default() },
        DeConfig { crossover: 1.1, ..DeConfig::default() },
        DeConfig { generations: 0, ..DeConfig::default() },
    ];
    for c in bad {
        assert!(c.validate().is_err(), "{c:?}");
    }
}

#[test]
fn opposition_identities_are_exact() {
    let aoi = Aoi::square(100.0);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let anchor_sets: Vec<Vec<Position>> = vec![
        vec![],
        vec![Position::new(40.0, 60.0)],
        vec![Position::new(0.0, 0.0), Position::new(100.0, 0.0)],
        reference_anchors()[..5].to_vec(),
        reference_anchors(),
    ];
    for anchors in &anchor_sets {
        let reflect = if anchors.is_empty() {
            Position::new(aoi.x_min + aoi.x_max, aoi.y_min + aoi.y_max)
        } else {
            let k = 2.0 / anchors.len() as f64;
            let sum = anchors.iter().fold(Position::default(), |a, s| a + *s);
            Position::new(k * sum.x, k * sum.y)
        };
        for _ in 0..10_000 {
            let primary = primary_candidate(&aoi, anchors, 40.0, &mut rng);
            let opposite = opposite_candidate(&primary, &aoi, anchors);
            if anchors.is_empty() {
                assert_eq!(primary.x + opposite.x, reflect.x, "{primary:?}");
                assert_eq!(primary.y + opposite.y, reflect.y, "{primary:?}");
            } else {
                // c - p + p recovers c up to one rounding of the subtraction
                let tol = |c: f64| 2.0 * f64::EPSILON * c.abs().max(1.0);
                assert!((primary.x + opposite.x - reflect.x).abs() <= tol(reflect.x), "{anchors:?} {primary:?}");
                assert!((primary.y + opposite.y - reflect.y).abs() <= tol(reflect.y), "{anchors:?} {primary:?}");
            }
        }
    }
}

#[test]
fn initial_populations_are_inside_the_area_and_sorted_into_sharing() {
    let (topo, meas) = instance(3, 25, 40.0, 4.0);
    let problem = LocalizationProblem::new(&topo, &meas);
    let state = init_populations(&problem, &config(1)).unwrap();
    assert_eq!(state.generation(), 0);
    for (m, pop) in state.populations().iter().enumerate() {
        if state.degenerate()[m] {
            assert_eq!(pop.members(), &[topo.aoi().center()]);
            continue;
        }
        assert_eq!(pop.members().len(), 10);
        assert!(pop.members().iter().all(|x| topo.aoi().contains(x)));
        assert_eq!(state.sharing().get(m), pop.best());
    }
}

#[test]
fn no_generations_returns_initial_best() {
    let (topo, meas) = instance(5, 12, 40.0, 4.0);
    let problem = LocalizationProblem::new(&topo, &meas);
    let state = init_populations(&problem, &config(2)).unwrap();
    let best = finalize(&state, Finalize::BestIndividual);
    assert_eq!(best, state.sharing().estimates());
}

#[test]
fn finalization_rules() {
    let mut state = PopulationState {
        populations: vec![hand_population(vec![Position::new(0.0, 0.0), Position::new(10.0, 10.0)])],
        sharing: SharingMatrix::new(vec![Position::default()]),
        generation: 0,
        degenerate: vec![false],
        aoi: Aoi::square(100.0),
    };
    assert_eq!(finalize(&state, Finalize::Midpoint), vec![Position::new(5.0, 5.0)]);

    state.populations[0] = hand_population(vec![Position::new(17.5, 3.25)]);
    assert_eq!(
        finalize(&state, Finalize::Midpoint),
        finalize(&state, Finalize::BestIndividual)
    );
}

#[test]
fn best_index_prefers_lowest_index_on_ties() {
    let mut pop = hand_population(vec![Position::new(1.0, 1.0); 5]);
    pop.fitness = vec![3.0, 1.0, 2.0, 1.0, 1.0];
    assert_eq!(pop.best_index(), 1);
}

#[test]
fn degenerate_targets_are_pinned_and_flagged() {
    let aoi = Aoi::square(100.0);
    let topo = NetworkTopology::build(
        vec![Position::new(0.0, 0.0)],
        vec![Position::new(10.0, 10.0), Position::new(95.0, 95.0), Position::new(20.0, 5.0)],
        40.0,
        aoi,
    )
    .unwrap();
    let meas = generate_measurements(&topo, &PathLossParams::new(40.0, 3.0, 1.0), &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap();
    let solution = MultiPopulationDe::new(config(4)).run(&LocalizationProblem::new(&topo, &meas)).unwrap();
    assert_eq!(solution.degenerate, vec![false, true, false]);
    assert_eq!(solution.best[1], aoi.center());
    assert_eq!(solution.midpoint[1], aoi.center());
}

#[test]
fn runs_are_bit_identical_per_seed() {
    let (topo, meas) = instance(8, 20, 40.0, 4.0);
    let problem = LocalizationProblem::new(&topo, &meas);
    let a = MultiPopulationDe::new(config(99)).run(&problem).unwrap();
    let b = MultiPopulationDe::new(config(99)).run(&problem).unwrap();
    let bits = |v: &[Position]| v.iter().flat_map(|p| [p.x.to_bits(), p.y.to_bits()]).collect::<Vec<_>>();
    assert_eq!(bits(&a.best), bits(&b.best));
    assert_eq!(bits(&a.midpoint), bits(&b.midpoint));

    let c = MultiPopulationDe::new(config(100)).run(&problem).unwrap();
    assert_ne!(bits(&a.best), bits(&c.best));
}

#[test]
fn jacobi_sharing_is_independent_of_execution_mode() {
    let (topo, meas) = instance(9, 20, 40.0, 4.0);
    let problem = LocalizationProblem::new(&topo, &meas);
    let seq = DeConfig {
        jacobi_sharing: true,
        ..config(5)
    };
    let par = DeConfig {
        execution: Execution::Parallel,
        ..seq.clone()
    };
    let a = MultiPopulationDe::new(seq).run(&problem).unwrap();
    let b = MultiPopulationDe::new(par).run(&problem).unwrap();
    assert_eq!(a, b);
    let gs = MultiPopulationDe::new(config(5)).run(&problem).unwrap();
    assert_ne!(a.best, gs.best);
}

#[test]
fn midpoint_matches_mean() {
    let (topo, meas) = instance(10, 15, 40.0, 4.0);
    let problem = LocalizationProblem::new(&topo, &meas);
    let state = MultiPopulationDe::new(config(6)).evolve(&problem).unwrap();
    let mids = finalize(&state, Finalize::Midpoint);
    for (pop, mid) in state.populations().iter().zip(&mids) {
        let n = pop.members().len() as f64;
        let sx: f64 = pop.members().iter().map(|p| p.x).sum();
        let sy: f64 = pop.members().iter().map(|p| p.y).sum();
        let tol = f64::EPSILON * n * 100.0;
        assert!((mid.x - sx / n).abs() <= tol);
        assert!((mid.y - sy / n).abs() <= tol);
        assert!(topo.aoi().contains(mid));
    }
}

#[test]
fn noiseless_full_connectivity_recovers_positions() {
    let (topo, meas) = instance(12, 10, 150.0, 1e-3);
    let problem = LocalizationProblem::new(&topo, &meas);
    let cfg = DeConfig {
        generations: 200,
        ..config(3)
    };
    let solution = MultiPopulationDe::new(cfg).run(&problem).unwrap();
    let mut errors: Vec<f64> = solution
        .best
        .iter()
        .zip(topo.targets())
        .map(|(e, t)| e.distance(t))
        .collect();
    errors.sort_by(f64::total_cmp);
    assert!(errors[errors.len() / 2] < 0.5, "{errors:?}");
}

fn min_cost(pop: &Population, m: usize, problem: &LocalizationProblem<'_>, estimates: &[Position]) -> f64 {
    pop.members()
        .iter()
        .map(|x| problem.target_cost(m, x, estimates))
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn members_never_leave_the_area(seed in any::<u64>(), targets in 2usize..20, range in 20.0..120.0f64, jacobi in any::<bool>()) {
        let (topo, meas) = instance(seed, targets, range, 4.0);
        let problem = LocalizationProblem::new(&topo, &meas);
        let cfg = DeConfig { generations: 30, jacobi_sharing: jacobi, ..config(seed) };
        let mut state = init_populations(&problem, &cfg).unwrap();
        for _ in 0..cfg.generations {
            run_generation(&mut state, &problem, &cfg);
            for pop in state.populations() {
                for x in pop.members() {
                    prop_assert!(topo.aoi().contains(x), "{:?}", x);
                }
            }
            prop_assert!(state.sharing().estimates().iter().all(|x| topo.aoi().contains(x)));
        }
    }

    #[test]
    fn selection_is_elitist_under_fixed_sharing(seed in any::<u64>(), targets in 2usize..20) {
        let (topo, meas) = instance(seed, targets, 40.0, 4.0);
        let problem = LocalizationProblem::new(&topo, &meas);
        let cfg = config(seed);
        let mut state = init_populations(&problem, &cfg).unwrap();
        run_generation(&mut state, &problem, &cfg);
        let estimates = state.sharing().estimates().to_vec();
        for m in 0..targets {
            if state.degenerate()[m] {
                continue;
            }
            let mut prev = min_cost(&state.populations()[m], m, &problem, &estimates);
            for _ in 0..5 {
                state.evolve_population(m, &problem, &cfg);
                let now = min_cost(&state.populations()[m], m, &problem, &estimates);
                prop_assert!(now <= prev);
                let pop = &state.populations()[m];
                for (x, f) in pop.members().iter().zip(pop.fitness()) {
                    prop_assert_eq!(*f, problem.target_cost(m, x, &estimates));
                }
                prev = now;
            }
            prop_assert_eq!(state.sharing().estimates(), estimates.as_slice());
        }
    }
}
