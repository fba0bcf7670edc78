//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL`/`SKIP`
//! line to stderr (uncaptured) and then asserts.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use denram::analysis::{
    aggregate_weight_delay, count_footprint, estimate_power, Architecture, DeviceConvention, EnergyTable, EventRates,
};
use denram::data::{synth_coincidence_dataset, synth_lag_dataset, write_eras_text, LabeledRasterSet, LagTaskParams};
use denram::dendrite::{analog_delay, dendritic_current, expand_with_delays, rc_output_spikes, AnalogCircuitParams, DelayBank};
use denram::device::{sample_delays, DelayDistribution, DeviceConfig};
use denram::harness::{
    build_model, build_task, cmd_sweep, cmd_train, fit, noisy_accuracy, ExperimentConfig, ModelConfig, TaskConfig,
};
use denram::learn::{cross_entropy, Surrogate, TrainConfig, Trainable};
use denram::network::{coincidence_experiment, CoincidenceSetup, DenramModel, LifParams, ReadoutMode};
use denram::SpikeRaster;

fn verdict(n: u32, name: &str, ok: bool, detail: impl AsRef<str>) {
    let line = format!(
        "criterion {n:>2} {} {name}: {}\n",
        if ok { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(ok, "{line}");
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn random_raster(rng: &mut ChaCha8Rng, n_channels: usize, n_steps: usize, dt: f64, p: f64) -> SpikeRaster {
    let mut r = SpikeRaster::zeros(n_channels, n_steps, dt).unwrap();
    for c in 0..n_channels {
        for t in 0..n_steps {
            if rng.gen_bool(p) {
                r.add(c, t, rng.gen_range(1..3)).unwrap();
            }
        }
    }
    r
}

#[test]
fn c01_delay_statistics() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = sample_delays(&DelayDistribution::from_mean(22e-3, 0.5).unwrap(), 100_000, &mut rng).unwrap();
    let logs: Vec<f64> = d.iter().map(|x| x.ln()).collect();
    let n = logs.len() as f64;
    let mu = logs.iter().sum::<f64>() / n;
    let log_std = (logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mean_ms = d.iter().sum::<f64>() / n * 1e3;
    let clipped = sample_delays(&DelayDistribution::measured(), 100_000, &mut rng).unwrap();
    let in_range = clipped.iter().all(|&x| (8.08e-3..=58.26e-3).contains(&x));
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "delay statistics",
        (0.49..=0.51).contains(&log_std) && (21.5..=22.5).contains(&mean_ms) && in_range && secs < 1.0,
        format!("log-std {log_std:.4}, mean {mean_ms:.3} ms, clip respected {in_range}, {secs:.2} s"),
    );
}

#[test]
fn c02_analog_delay_matches_ode() {
    let start = Instant::now();
    let p = AnalogCircuitParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let target = 10f64.powf(rng.gen_range(-3.0..0.0));
        let c = 10f64.powf(rng.gen_range(-12.5..-11.0));
        let params = AnalogCircuitParams { capacitance: c, ..p };
        let r_d = target / (c * params.delay_factor());
        let closed = analog_delay(r_d, &params).unwrap();
        let dt_sim = params.pulse_width / 20.0;
        let out = rc_output_spikes(r_d, &params, &[0.0], dt_sim, 1.2 * closed + 2.0 * params.pulse_width).unwrap();
        let ode = out[0] - params.pulse_width;
        worst = worst.max((ode - closed).abs() / closed);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        2,
        "analog vs ODE delay",
        worst < 5e-3 && secs < 10.0,
        format!("max relative error {worst:.2e} over 100 pairs, {secs:.2} s"),
    );
}

#[test]
fn c03_denram_gradient_finite_differences() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let instances = 25;
    for _ in 0..instances {
        let dt = 1e-3;
        let (n_in, n_delays, n_out) = (rng.gen_range(1..4), rng.gen_range(1..5), rng.gen_range(2..5));
        let delays = Array2::from_shape_fn((n_in, n_delays), |_| rng.gen_range(0.0..6e-3));
        let bank = DelayBank::from_delays(delays, dt).unwrap();
        let lif = LifParams::new(0.9, 1.0).unwrap();
        let m = DenramModel::init(bank, n_out, lif, ReadoutMode::MaxPotential, rng.gen_range(0.5..0.95), &mut rng)
            .unwrap();
        assert!(m.weights.len() <= 100);
        let n_steps = rng.gen_range(5..=20);
        let r = random_raster(&mut rng, n_in, n_steps, dt, 0.3);
        let label = rng.gen_range(0..n_out);
        let g = m.sample_gradient(&r, label, Surrogate::default()).unwrap();
        let loss = |m: &DenramModel| cross_entropy(&m.logits(&r).unwrap(), label).0;
        let h = 1e-5;
        for idx in ndarray::indices(m.weights.dim()) {
            let (mut plus, mut minus) = (m.clone(), m.clone());
            plus.weights[idx] += h;
            minus.weights[idx] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let a = g.grads[0][idx];
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-7));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        3,
        "gradient correctness",
        worst < 1e-4 && secs < 30.0,
        format!("max relative error {worst:.2e} over {instances} instances, {secs:.2} s"),
    );
}

#[test]
fn c04_coincidence_detection() {
    let start = Instant::now();
    let cfg = DeviceConfig::default();
    let delays = [18e-3, 36e-3, 48e-3, 58e-3];
    let lags: Vec<f64> = (0..=120).map(|k| k as f64 * 1e-3).collect();
    let mut ok = true;
    let mut detail = String::new();
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let setup = CoincidenceSetup::from_devices(&delays, Some(3), &cfg, 20e-3, 1e-3, &mut rng).unwrap();
        let fired: Vec<bool> = lags.iter().map(|&l| coincidence_experiment(&setup, l).unwrap().fired).collect();
        let on: Vec<usize> = (0..fired.len()).filter(|&k| fired[k]).collect();
        let contiguous = on.windows(2).all(|w| w[1] == w[0] + 1);
        let hrs = CoincidenceSetup::from_devices(&delays, None, &cfg, 20e-3, 1e-3, &mut rng).unwrap();
        let hrs_fires = coincidence_experiment(&hrs, 58e-3).unwrap().fired;
        let pass = fired[58] && !fired[0] && !fired[120] && contiguous && !hrs_fires;
        if seed == 0 || !pass {
            detail = format!(
                "device seed {seed}: window {:?}..{:?} ms, contiguous {contiguous}, HRS fires at 58 ms {hrs_fires}",
                on.first(),
                on.last()
            );
        }
        ok &= pass;
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(4, "coincidence detection", ok && secs < 5.0, format!("{detail}, {secs:.2} s"));
}

#[test]
fn c05_footprint_golden_numbers() {
    let two = DeviceConvention::TwoPerWeightPlusDelay;
    let srnn = count_footprint(Architecture::Srnn { n_in: 2, n_hidden: 32, n_out: 2 }, two);
    let small = count_footprint(
        Architecture::Denram { n_in: 2, n_delays: 8, n_out: 1, shared_banks: true },
        DeviceConvention::FourPerSynapse,
    );
    let shd = count_footprint(Architecture::Denram { n_in: 700, n_delays: 16, n_out: 20, shared_banks: true }, two);
    let got = (
        srnn.trainable_parameters,
        srnn.rram_devices,
        small.trainable_parameters,
        small.rram_devices,
        shd.trainable_parameters,
    );
    verdict(5, "footprint golden numbers", got == (1152, 2304, 16, 64, 224_000), format!("{got:?}"));
}

#[test]
fn c06_power_identity() {
    let table = EnergyTable::default();
    let rates = EventRates { dendritic_events: 1.0 / 30e-3, neuron_updates: 0.0, synops: 0.0 };
    let p = estimate_power(&rates, &table).unwrap();
    let rel = (p.watts - 1.95e-9).abs() / 1.95e-9;
    let share = p.breakdown.threshold_block / p.watts;
    let parts = p.breakdown.threshold_block + p.breakdown.rc_and_weight + p.breakdown.mux;
    verdict(
        6,
        "power identity",
        rel < 1e-9 && (share - 0.667).abs() < 1e-12 && (parts - p.watts).abs() <= 1e-12 * p.watts,
        format!("{:.6e} W (relative error {rel:.1e}), threshold block {:.1}%", p.watts, share * 100.0),
    );
}

/// Cross-correlation of channel 0 shifted by `d` bins against channel 1,
/// for `d` in `0..n_lags`: the delay-expanded coincidence features.
fn coincidence_features(r: &SpikeRaster, n_lags: usize) -> Vec<f64> {
    (0..n_lags)
        .map(|d| {
            (d..r.n_steps())
                .map(|t| f64::from(r.get(0, t - d)) * f64::from(r.get(1, t)))
                .sum()
        })
        .collect()
}

/// Binary logistic regression by full-batch gradient descent; returns
/// training accuracy.
fn logistic_regression_accuracy(x: &[Vec<f64>], y: &[usize]) -> f64 {
    let n_f = x[0].len();
    let (mut w, mut b) = (vec![0.0; n_f], 0.0);
    for _ in 0..2000 {
        let (mut gw, mut gb) = (vec![0.0; n_f], 0.0);
        for (xi, &yi) in x.iter().zip(y) {
            let z: f64 = b + xi.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let err = 1.0 / (1.0 + (-z).exp()) - yi as f64;
            gb += err;
            for (g, a) in gw.iter_mut().zip(xi) {
                *g += err * a;
            }
        }
        b -= 0.5 * gb / x.len() as f64;
        for (wk, g) in w.iter_mut().zip(&gw) {
            *wk -= 0.5 * g / x.len() as f64;
        }
    }
    let correct = x
        .iter()
        .zip(y)
        .filter(|(xi, &yi)| {
            let z: f64 = b + xi.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            usize::from(z > 0.0) == yi
        })
        .count();
    correct as f64 / x.len() as f64
}

#[test]
fn c07_synthetic_task_end_to_end() {
    let cfg = ExperimentConfig::from_toml_str(
        &std::fs::read_to_string(configs_dir().join("synth_coincidence.toml")).unwrap(),
        "synth_coincidence.toml",
    )
    .unwrap()
    .resolved();
    assert!(cfg.train.epochs_pretrain + cfg.train.epochs_noise_aware <= 50);
    let start = Instant::now();
    let data = build_task(&cfg).unwrap();
    let shape = (data.train.len(), data.val.len(), data.test.len(), data.train.layout.n_channels);
    let model = fit(build_model(&cfg, &data).unwrap(), &data, &cfg.train).unwrap();
    let acc = noisy_accuracy(&model, &data.test, 0.0, 1, 0).unwrap().mean_accuracy;
    let secs = start.elapsed().as_secs_f64();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let oracle_set: LabeledRasterSet = synth_coincidence_dataset(300, &[0.01, 0.04], 0.0, 1e-3, 100, &mut rng).unwrap();
    let x: Vec<Vec<f64>> = oracle_set.samples.iter().map(|s| coincidence_features(&s.raster, 60)).collect();
    let y: Vec<usize> = oracle_set.samples.iter().map(|s| s.label).collect();
    let oracle = logistic_regression_accuracy(&x, &y);
    verdict(
        7,
        "synthetic task end to end",
        shape == (200, 50, 50, 2) && acc >= 0.95 && secs < 60.0 && oracle == 1.0,
        format!("test accuracy {acc:.3} in {secs:.2} s, logistic-regression oracle {oracle:.3}"),
    );
}

#[test]
fn c08_noise_aware_training_benefit() {
    let start = Instant::now();
    let base = ExperimentConfig::from_toml_str(
        &std::fs::read_to_string(configs_dir().join("synth_coincidence.toml")).unwrap(),
        "synth_coincidence.toml",
    )
    .unwrap();
    let (mut drop_aware, mut drop_plain) = (0.0, 0.0);
    let seeds = 0..5u64;
    for seed in seeds.clone() {
        let cfg = ExperimentConfig { seed, ..base.clone() }.resolved();
        let data = build_task(&cfg).unwrap();
        let plain = TrainConfig {
            epochs_pretrain: cfg.train.epochs_pretrain + cfg.train.epochs_noise_aware,
            epochs_noise_aware: 0,
            ..cfg.train.clone()
        };
        for (tc, acc_drop) in [(&cfg.train, &mut drop_aware), (&plain, &mut drop_plain)] {
            let m = fit(build_model(&cfg, &data).unwrap(), &data, tc).unwrap();
            let clean = noisy_accuracy(&m, &data.test, 0.0, 1, seed).unwrap().mean_accuracy;
            let noisy = noisy_accuracy(&m, &data.test, 0.1, 20, seed).unwrap().mean_accuracy;
            *acc_drop += (clean - noisy) / seeds.clone().count() as f64;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        8,
        "noise-aware training benefit",
        drop_aware <= 0.05 && drop_aware < drop_plain && secs < 300.0,
        format!(
            "drop at 10% noise: noise-aware {:.2} pts, noise-free {:.2} pts, {secs:.1} s",
            100.0 * drop_aware,
            100.0 * drop_plain
        ),
    );
}

#[test]
fn c09_ecg_benchmark() {
    let Some(dir) = std::env::var_os("DENRAM_ECG_DIR").map(PathBuf::from) else {
        let _ = std::io::stderr()
            .lock()
            .write_all(b"criterion  9 SKIP ECG benchmark: set DENRAM_ECG_DIR to a directory with 208.csv and 208_annotations.csv\n");
        return;
    };
    let start = Instant::now();
    let load = |name: &str| {
        let mut cfg = ExperimentConfig::from_toml_str(
            &std::fs::read_to_string(configs_dir().join(name)).unwrap(),
            name,
        )
        .unwrap();
        if let TaskConfig::Ecg(t) = &mut cfg.task {
            t.record = dir.join("208.csv");
            t.annotations = dir.join("208_annotations.csv");
        }
        cfg
    };
    let (denram_cfg, srnn_cfg) = (load("ecg.toml"), load("ecg_srnn.toml"));
    let mut acc = [0.0, 0.0];
    let mut params = [0, 0];
    for seed in 0..5u64 {
        for (k, base) in [&denram_cfg, &srnn_cfg].into_iter().enumerate() {
            let cfg = ExperimentConfig { seed, ..base.clone() }.resolved();
            let data = build_task(&cfg).unwrap();
            let m = fit(build_model(&cfg, &data).unwrap(), &data, &cfg.train).unwrap();
            acc[k] += noisy_accuracy(&m, &data.test, 0.1, 5, seed).unwrap().mean_accuracy / 5.0;
            params[k] = count_footprint(Architecture::of(&m), DeviceConvention::TwoPerWeightPlusDelay).trainable_parameters;
        }
    }
    let ratio = params[1] as f64 / params[0] as f64;
    let secs = start.elapsed().as_secs_f64();
    verdict(
        9,
        "ECG benchmark",
        acc[0] >= 0.93 && acc[1] >= acc[0] - 0.05 && ratio == 72.0,
        format!(
            "delay network {:.2}%, recurrent {:.2}% with {ratio}× the parameters, {secs:.0} s",
            100.0 * acc[0],
            100.0 * acc[1]
        ),
    );
}

#[test]
fn c10_reduced_raster_kws() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let params = LagTaskParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let set = synth_lag_dataset(500, &params, &mut rng).unwrap();
    let eras = dir.path().join("lag_kws.eras");
    write_eras_text(&eras, &set).unwrap();
    let mut cfg = ExperimentConfig::from_toml_str(
        &std::fs::read_to_string(configs_dir().join("kws_reduced.toml")).unwrap(),
        "kws_reduced.toml",
    )
    .unwrap();
    if let TaskConfig::RasterKws(t) = &mut cfg.task {
        t.train = eras;
    }
    assert!(matches!(cfg.model, ModelConfig::Denram(_)));
    let summary = cmd_train(&cfg, &dir.path().join("train")).unwrap();
    let chance = 1.0 / params.lags.len() as f64;
    let sweep = cmd_sweep(&cfg, &dir.path().join("sweep")).unwrap();
    let curve: Vec<(f64, f64)> = sweep.delay_summary.iter().map(|c| (c.0, c.2)).collect();
    let best = curve.iter().map(|c| c.1).fold(f64::MIN, f64::max);
    let interior_peak = best > curve[0].1 && best > curve[curve.len() - 1].1;
    let secs = start.elapsed().as_secs_f64();
    let shape = (set.layout.n_channels, set.n_classes, set.len());
    verdict(
        10,
        "reduced raster KWS",
        shape.0 <= 64
            && shape.1 <= 5
            && shape.2 <= 500
            && summary.test_accuracy_noisy > 4.0 * chance
            && interior_peak
            && secs < 1800.0,
        format!(
            "{shape:?} (channels, classes, samples); accuracy at 10% noise {:.3} vs 4×chance {:.2}; \
             sweep {}; {secs:.0} s",
            summary.test_accuracy_noisy,
            4.0 * chance,
            curve.iter().map(|(m, a)| format!("{:.0}ms:{a:.3}", m * 1e3)).collect::<Vec<_>>().join(" ")
        ),
    );
}

#[test]
fn c11_aggregation_convolution_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let dt = 1e-3;
        let (n_in, n_delays, n_out, n_steps) =
            (rng.gen_range(1..6), rng.gen_range(1..9), rng.gen_range(1..4), rng.gen_range(1..40));
        let delays = Array2::from_shape_fn((n_in, n_delays), |_| rng.gen_range(0.0..20e-3));
        let bank = DelayBank::from_delays(delays, dt).unwrap();
        let lif = LifParams::new(0.9, 1.0).unwrap();
        let m = DenramModel::init(bank, n_out, lif, ReadoutMode::MaxPotential, 0.9, &mut rng).unwrap();
        let r = random_raster(&mut rng, n_in, n_steps, dt, 0.2);
        let expanded = expand_with_delays(&r, &m.bank).unwrap();
        let current = dendritic_current(&expanded, &m.weights).unwrap();
        for o in 0..n_out {
            let profile = aggregate_weight_delay(&m, o).unwrap();
            for t in 0..current.ncols() {
                let mut conv = 0.0;
                for i in 0..n_in {
                    for k in 0..profile.ncols() {
                        if k <= t && t - k < n_steps {
                            conv += profile[[i, k]] * f64::from(r.get(i, t - k));
                        }
                    }
                }
                worst = worst.max((conv - current[[o, t]]).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        11,
        "aggregation-convolution equivalence",
        worst <= 1e-12 && secs < 10.0,
        format!("max abs difference {worst:.1e} over 50 models, {secs:.2} s"),
    );
}

fn run_cli(args: &[&str], out: &Path) {
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_denram"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("DENRAM_OUT")
        .env_remove("DENRAM_THREADS")
        .status()
        .unwrap();
    assert!(status.success(), "denram {args:?} failed with {status}");
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn c12_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.toml");
    let mut cfg = ExperimentConfig::from_toml_str(
        &std::fs::read_to_string(configs_dir().join("synth_coincidence.toml")).unwrap(),
        "synth_coincidence.toml",
    )
    .unwrap();
    cfg.seed = 3;
    cfg.sweep.means = vec![10e-3, 40e-3];
    cfg.sweep.seeds = vec![0, 1];
    cfg.sweep.hidden_sizes = vec![4];
    std::fs::write(&cfg_path, cfg.to_toml()).unwrap();
    let c = cfg_path.to_str().unwrap();
    let mut identical = true;
    let mut compared = 0;
    let mut runs = Vec::new();
    for rep in 0..2 {
        let root = dir.path().join(format!("rep{rep}"));
        let train = root.join("train");
        let threads = if rep == 0 { "1" } else { "4" };
        run_cli(&["--config", c, "--threads", threads, "train"], &train);
        let ck = train.join("checkpoint.bin");
        let test = train.join("test.eras");
        run_cli(
            &["--config", c, "eval", "--checkpoint", ck.to_str().unwrap(), "--data", test.to_str().unwrap()],
            &root.join("eval"),
        );
        run_cli(&["--config", c, "cd-demo"], &root.join("cd"));
        run_cli(&["--config", c, "--threads", threads, "sweep"], &root.join("sweep"));
        runs.push(root);
    }
    for sub in ["train", "eval", "cd", "sweep"] {
        let (a, b) = (csv_files(&runs[0].join(sub)), csv_files(&runs[1].join(sub)));
        identical &= !a.is_empty() && a == b;
        compared += a.len();
    }
    let manifests_equal = ["train", "eval", "cd", "sweep"].iter().all(|sub| {
        let read = |k: usize| std::fs::read_to_string(runs[k].join(sub).join("manifest.json")).unwrap();
        let strip = |s: String| s.replace(runs[0].to_str().unwrap(), "").replace(runs[1].to_str().unwrap(), "");
        strip(read(0)) == strip(read(1))
    });
    verdict(
        12,
        "determinism",
        identical && manifests_equal,
        format!("{compared} CSV files byte-identical across reruns with 1 and 4 threads: {identical}; manifests equal: {manifests_equal}"),
    );
}
