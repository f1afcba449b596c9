use proptest::prelude::*;

use fonrl::federation::{decode, encode, Envelope, FrameReader, OptimizationResponse};
use fonrl::harness::summarize_returns;
use fonrl::ne::{crossover, mutate, tier_params, GaTier};
use fonrl::neuro::Genome;
use fonrl::ransim::{jain_fairness, EnvConfig, RanAction, RanSnapshot, TrapProfile};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn finite() -> impl Strategy<Value = f64> {
    any::<f64>().prop_filter("finite", |x| x.is_finite())
}

fn response(genome: Vec<f64>, fitness: f64) -> Envelope {
    Envelope::response(
        3,
        42,
        OptimizationResponse {
            genome,
            fitness,
            applied_params: tier_params(GaTier::Medium),
            wall_time_ms: 1.5,
            incumbent_fitness: -fitness,
        },
    )
}

proptest! {
    #[test]
    fn codec_round_trips_any_finite_genes(genes in prop::collection::vec(finite(), 0..64), fitness in finite()) {
        let env = response(genes.clone(), fitness);
        let back = decode(&encode(&env).unwrap()).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        match &back.payload {
            fonrl::federation::Payload::Response(r) => {
                prop_assert_eq!(bits(&r.genome), bits(&genes));
                prop_assert_eq!(r.fitness.to_bits(), fitness.to_bits());
            }
            _ => prop_assert!(false, "kind changed"),
        }
    }

    #[test]
    fn frames_reassemble_across_arbitrary_splits(cuts in prop::collection::vec(0usize..400, 0..8)) {
        let a = encode(&response(vec![1.0, 2.0], 3.0)).unwrap();
        let b = encode(&response(vec![-4.0], 5.0)).unwrap();
        let stream: Vec<u8> = a.iter().chain(&b).copied().collect();
        let mut cuts: Vec<usize> = cuts.into_iter().map(|c| c % (stream.len() + 1)).collect();
        cuts.sort_unstable();
        let mut reader = FrameReader::default();
        let mut frames = Vec::new();
        let mut prev = 0;
        for c in cuts.into_iter().chain([stream.len()]) {
            reader.push(&stream[prev..c]);
            prev = c;
            while let Some(f) = reader.next_frame() {
                frames.push(f);
            }
        }
        prop_assert_eq!(frames, vec![a, b]);
    }

    #[test]
    fn jain_stays_in_bounds(xs in prop::collection::vec(0.0f64..1e7, 1..40)) {
        prop_assume!(xs.iter().any(|&x| x > 0.0));
        let j = jain_fairness(&xs);
        prop_assert!(j >= 1.0 / xs.len() as f64 - 1e-12 && j <= 1.0 + 1e-12);
    }

    #[test]
    fn crossover_lies_between_parents(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..32)) {
        let a = Genome::raw(pairs.iter().map(|p| p.0).collect()).unwrap();
        let b = Genome::raw(pairs.iter().map(|p| p.1).collect()).unwrap();
        let c = crossover(&a, &b).unwrap();
        for ((x, y), z) in pairs.iter().zip(c.values()) {
            prop_assert!(*z >= x.min(*y) - 1e-9 && *z <= x.max(*y) + 1e-9);
        }
    }

    #[test]
    fn zero_rate_mutation_is_identity(genes in prop::collection::vec(-10.0f64..10.0, 1..32), seed: u64) {
        let g = Genome::raw(genes).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert_eq!(mutate(&g, 0.0, 0.05, &mut rng), g);
    }

    #[test]
    fn env_invariants_hold_under_random_play(
        cells in 1usize..=2,
        ues in 1usize..=12,
        seed: u64,
        trap: bool,
        script in prop::collection::vec((0usize..64, 0usize..4), 1..80),
    ) {
        let mut cfg = EnvConfig::new(cells, ues);
        if trap {
            cfg = cfg.with_trap(TrapProfile::default());
        }
        let mut env = RanSnapshot::new(cfg.clone(), seed).unwrap();
        let verbs = cfg.verbs();
        for chunk in script.chunks(env.agents()) {
            if chunk.len() < env.agents() {
                break;
            }
            let actions: Vec<RanAction> = chunk
                .iter()
                .map(|&(u, v)| RanAction { ue_index: u % ues, verb: verbs[v % verbs.len()] })
                .collect();
            let rewards = env.step(&actions).unwrap();
            prop_assert!(env.check_invariants().is_ok());
            prop_assert!(rewards.iter().all(|r| (0.0..=1000.0).contains(r)));
        }
    }

    #[test]
    fn summaries_are_consistent(returns in prop::collection::vec(0.0f64..1000.0, 12..80), target in 1.0f64..1000.0) {
        let (ett, avg, stalled) = summarize_returns(&returns, 12, target);
        if let Some(e) = ett {
            prop_assert!(e >= 12 && e as usize <= returns.len());
        }
        prop_assert!((0.0..=1000.0).contains(&avg));
        if avg >= target {
            prop_assert!(!stalled);
        }
    }
}
