use navnet::parallel::{parallel_map, Threads};
use navnet_core::preprocess::{make_windows, unify_rates, Normalization, WindowedDataset};
use navnet_core::rnn::{init_params, NetworkConfig};
use navnet_core::synth::{generate_flight, NoiseConfig, Profile, SynthConfig};
use navnet_core::train::{fit_with, Sequential, Silent, TrainConfig};

fn data() -> (WindowedDataset, WindowedDataset) {
    let series: Vec<_> = [Profile::Circle, Profile::WaypointPolyline]
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut cfg = SynthConfig::new(*p, 30.0, i as u64);
            cfg.noise = NoiseConfig::low_cost();
            unify_rates(&generate_flight(&cfg).unwrap()).unwrap()
        })
        .collect();
    let norm = Normalization::fit(&series).unwrap();
    (
        make_windows(&series[0], "a", 6, 2, &norm).unwrap(),
        make_windows(&series[1], "b", 6, 4, &norm).unwrap(),
    )
}

#[test]
fn thread_count_does_not_change_training() {
    let (train, val) = data();
    let net = NetworkConfig::small(1, 10);
    let cfg = TrainConfig { epochs: 3, batch_size: 32, ..TrainConfig::default() };
    let run = |jobs: usize| {
        let init = init_params::<f32>(&net, 3).unwrap();
        fit_with(&net, &train, &val, &cfg, init, &Threads::new(jobs), &Silent).unwrap()
    };
    let one = run(1);
    let seq = fit_with(&net, &train, &val, &cfg, init_params::<f32>(&net, 3).unwrap(), &Sequential, &Silent).unwrap();
    for jobs in [2, 3, 8] {
        let many = run(jobs);
        assert_eq!(many.params, one.params, "jobs {jobs}");
        assert_eq!(many.report.train_loss, one.report.train_loss);
    }
    assert_eq!(seq.params, one.params);
}

#[test]
fn parallel_map_keeps_order() {
    let items: Vec<u64> = (0..37).collect();
    for jobs in [1, 2, 5, 64] {
        assert_eq!(parallel_map(jobs, &items, |x| x * x), items.iter().map(|x| x * x).collect::<Vec<_>>());
    }
    assert!(parallel_map(4, &[] as &[u8], |x| *x).is_empty());
}
