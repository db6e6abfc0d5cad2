use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stochastic_stdp::engine::{flattened_reference, Engine, EngineConfig, SpikeEvent};
use stochastic_stdp::rng::RngConfig;
use stochastic_stdp::stdp::SpikeKind;

fn dense_events(rng: &mut ChaCha8Rng, n_slots: usize, ticks: u64, p: f64) -> Vec<SpikeEvent> {
    let mut out = Vec::new();
    for t in 0..ticks {
        for addr in 0..n_slots {
            if rng.gen_bool(p) {
                out.push(SpikeEvent::new(t, addr, SpikeKind::Pre));
            }
            if rng.gen_bool(p) {
                out.push(SpikeEvent::new(t, addr, SpikeKind::Post));
            }
        }
    }
    out
}

#[test]
fn engine_matches_reference_across_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let variants: Vec<EngineConfig> = vec![
        EngineConfig {
            n_slots: 257,
            ..Default::default()
        },
        EngineConfig {
            n_slots: 300,
            alpha_table: vec![488, 495, 470],
            ..Default::default()
        },
        EngineConfig {
            n_slots: 128,
            post_alpha_table: Some(vec![500, 480]),
            ..Default::default()
        },
        EngineConfig {
            n_slots: 200,
            reset_on_simultaneous: false,
            ..Default::default()
        },
        EngineConfig {
            n_slots: 64,
            rng: RngConfig::Uniform {
                mask_bits: 9,
                seed: 4,
                exclude_zero: false,
            },
            ..Default::default()
        },
        EngineConfig {
            n_slots: 31,
            rng: RngConfig::lfsr5(7),
            v_width: 3,
            v_init: 7,
            ..Default::default()
        },
    ];
    for (i, mut cfg) in variants.into_iter().enumerate() {
        cfg.weight_seed = i as u64;
        cfg.stdp.a_minus = 1.0 + 0.05 * i as f64;
        let events = dense_events(&mut rng, cfg.n_slots, 200, 0.03);
        let reference = flattened_reference(&cfg, &events, 200).unwrap();
        let mut seq = Engine::new(cfg.clone()).unwrap();
        let seq_updates = seq.run(&events, 200).unwrap();
        assert!(!seq_updates.is_empty());
        assert_eq!(
            seq.decay_ram().cells(),
            reference.decay.as_slice(),
            "variant {i}"
        );
        assert_eq!(
            seq.weights().cells(),
            reference.weights.as_slice(),
            "variant {i}"
        );

        let mut par = Engine::new(cfg).unwrap();
        let mut par_updates = Vec::new();
        for t in 0..200 {
            let evs: Vec<SpikeEvent> = events.iter().copied().filter(|e| e.tick == t).collect();
            par_updates.extend(par.tick_parallel(&evs).unwrap());
        }
        assert_eq!(par_updates, seq_updates, "variant {i}");
        assert_eq!(par.decay_ram().cells(), seq.decay_ram().cells());
    }
}

#[test]
fn events_past_the_horizon_are_ignored_by_both() {
    let cfg = EngineConfig {
        n_slots: 16,
        ..Default::default()
    };
    let events = vec![
        SpikeEvent::new(3, 2, SpikeKind::Pre),
        SpikeEvent::new(50, 2, SpikeKind::Post),
    ];
    let reference = flattened_reference(&cfg, &events, 10).unwrap();
    let mut e = Engine::new(cfg).unwrap();
    e.run(&events, 10).unwrap();
    assert_eq!(e.weights().cells(), reference.weights.as_slice());
    assert_eq!(e.decay_ram().cells(), reference.decay.as_slice());
}
