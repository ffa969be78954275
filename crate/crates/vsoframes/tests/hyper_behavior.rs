//! Behavioral contracts of hyperparameter resampling: stationarity against
//! the grid posterior and the likelihood payoff of learning concentrations.

mod common;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vsoframes::dirmult::grid_log_posterior;
use vsoframes::fit::{FitEngine, FitOptions, ResamplePolicy};
use vsoframes::hyper::{resample_alpha, HyperSchedule};
use vsoframes::model::{
    generate_synthetic, CountTables, ModelConfig, ModelVariant, Sampler, SynthOptions,
};

/// With the assignments held fixed, the long-run histogram of resampled
/// alpha values must match the grid posterior over the same count groups.
#[test]
fn resampled_alpha_is_stationary_on_the_grid_posterior() {
    let mut cfg = ModelConfig::new(ModelVariant::DocTuple, 5);
    cfg.alpha = 0.3;
    cfg.beta = 0.15;
    cfg.seed = 40;
    let synth = generate_synthetic(
        &cfg,
        &SynthOptions {
            docs: 40,
            tuples_per_doc: 25,
            vocab_words: 60,
            seed: 40,
            ..Default::default()
        },
    )
    .unwrap();
    // Freeze the ground-truth assignments; only alpha moves.
    let sampler = Sampler::from_state(
        &synth.corpus,
        synth.vocab.real_len(),
        cfg.clone(),
        synth.state.clone(),
        cfg.initial_hypers(),
        ChaCha8Rng::seed_from_u64(1),
    )
    .unwrap();
    let tables = sampler.tables;

    // Grid posterior over the same per-document frame-count groups.
    let groups: Vec<Vec<u32>> = (0..synth.corpus.doc_count())
        .map(|d| tables.docs.row(d).to_vec())
        .collect();
    let grid: Vec<f64> = (0..6001).map(|i| -8.0 + i as f64 * 0.002).collect();
    let masses = grid_log_posterior(&groups, &grid).unwrap();

    // Equal-mass bins from the grid CDF, with edges interpolated inside the
    // cell where the cumulative mass crosses each k/bins level.
    let bins = 20usize;
    let mut cum = 0.0;
    let mut edges = Vec::with_capacity(bins - 1);
    let mut next = 1.0 / bins as f64;
    for (i, &m) in masses.iter().enumerate() {
        let before = cum;
        cum += m;
        while cum >= next && edges.len() < bins - 1 {
            let frac = if m > 0.0 { (next - before) / m } else { 0.0 };
            let lo = if i == 0 { grid[0] } else { grid[i - 1] };
            edges.push(lo + frac * (grid[i] - lo));
            next += 1.0 / bins as f64;
        }
    }
    assert_eq!(edges.len(), bins - 1);

    let schedule = HyperSchedule {
        burnin: 0,
        interval: 1,
        ..Default::default()
    };
    let mut hypers = cfg.initial_hypers();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws = 8000usize;
    let mut hist = vec![0u64; bins];
    for _ in 0..draws {
        let alpha = resample_alpha(&tables, None, &mut hypers, &schedule, &mut rng).unwrap();
        assert!(alpha > 0.0);
        let la = alpha.ln();
        let bin = edges.partition_point(|&e| e < la);
        hist[bin] += 1;
    }
    let tv: f64 = hist
        .iter()
        .map(|&h| (h as f64 / draws as f64 - 1.0 / bins as f64).abs())
        .sum::<f64>()
        / 2.0;
    assert!(tv <= 0.05, "stationarity TV {tv}, histogram {hist:?}");
}

/// Learning the concentrations must not hurt the final joint compared to
/// leaving everything at 1.0, in at least 9 of 10 seeded runs.
#[test]
fn resampling_beats_fixed_unit_concentrations() {
    let mut wins = 0;
    for seed in 0..10 {
        let mut cfg = ModelConfig::new(ModelVariant::DocTuple, 4);
        cfg.alpha = 0.15;
        cfg.beta = 0.1;
        cfg.seed = seed;
        let synth = generate_synthetic(
            &cfg,
            &SynthOptions {
                docs: 30,
                tuples_per_doc: 20,
                vocab_words: 50,
                seed: 100 + seed,
                ..Default::default()
            },
        )
        .unwrap();
        // Both runs start from concentrations fixed at 1.0.
        let mut fit_cfg = cfg.clone();
        fit_cfg.alpha = 1.0;
        fit_cfg.beta = 1.0;

        let schedule = HyperSchedule {
            burnin: 30,
            interval: 10,
            ..Default::default()
        };
        let run = |resample: ResamplePolicy| {
            let mut engine =
                FitEngine::new(&synth.corpus, synth.vocab.real_len(), fit_cfg.clone(), 1).unwrap();
            let opts = FitOptions {
                iters: 150,
                schedule,
                resample,
                log_joint_every: 0,
                ..Default::default()
            };
            engine.run(&opts, None).unwrap();
            engine.log_joint()
        };
        let learned = run(ResamplePolicy::default());
        let fixed = run(ResamplePolicy::fixed());
        if learned >= fixed {
            wins += 1;
        }
    }
    assert!(wins >= 9, "resampling won only {wins}/10 runs");
}

/// Count tables stay exact while hyperparameters move (the schedule touches
/// only the priors, never the counts).
#[test]
fn resampling_leaves_tables_consistent() {
    let mut cfg = ModelConfig::new(ModelVariant::DocTupleClass, 3);
    cfg.classes = 4;
    cfg.seed = 77;
    let synth = generate_synthetic(
        &cfg,
        &SynthOptions {
            docs: 10,
            tuples_per_doc: 12,
            seed: 7,
            ..Default::default()
        },
    )
    .unwrap();
    let mut engine = FitEngine::new(&synth.corpus, synth.vocab.real_len(), cfg, 1).unwrap();
    let opts = FitOptions {
        iters: 40,
        schedule: HyperSchedule {
            burnin: 5,
            interval: 5,
            ..Default::default()
        },
        log_joint_every: 0,
        ..Default::default()
    };
    engine.run(&opts, None).unwrap();
    assert_eq!(
        engine.tables,
        CountTables::rebuild(&synth.corpus, &engine.state, &engine.config)
    );
    assert!(engine.hypers.alpha > 0.0 && engine.hypers.beta > 0.0);
    assert!(engine.hypers.gamma.iter().all(|&g| g > 0.0));
}
