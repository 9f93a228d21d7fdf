//! Seeded end-to-end checks of the attack procedures.

use qleak::attacks::{
    co_iteration_accuracy, detect_backend, null_false_positive_rate, qp_crossing_rate, CoIdentifier,
    SeedStream,
};
use qleak::baseline::{grover_catalog, Backend, BaselineTable, GroverCalibration, GroverVariant};
use qleak::cloudsim::{DeviceProfile, Scenario};
use qleak::stats::{normal_cdf, PowerSpec, TimingDistribution};

fn draws(model: &TimingDistribution, n: usize, seed: u64) -> Vec<f64> {
    model.sample_n(&mut SeedStream(seed).rng(0), n)
}

#[test]
fn backend_detection_on_grover() {
    let table = BaselineTable::bundled();
    let g = table.find("Grover").unwrap();
    let spec = PowerSpec::default();
    let hw = detect_backend(&draws(&table.model(g, Backend::Hardware), 50, 1), &table, &spec).unwrap();
    assert_eq!(hw.label, "hardware");
    let sim = detect_backend(&draws(&table.model(g, Backend::Simulator), 50, 2), &table, &spec).unwrap();
    assert_eq!(sim.label, "simulator");
}

fn variant_key5_iter2() -> (Vec<GroverVariant>, usize) {
    let cat = grover_catalog(&GroverCalibration::default()).unwrap();
    (cat, GroverVariant::index_of(5, 2) - 1)
}

#[test]
fn co_thousand_samples_name_the_iteration() {
    let (cat, v) = variant_key5_iter2();
    let id = CoIdentifier::new(&cat, &PowerSpec::default()).unwrap();
    let verdict = id.identify(&draws(&cat[v].timing, 1000, 7)).unwrap();
    assert_eq!(verdict.label, "iter=2");
}

/// Iteration-stage accuracy at 1000 samples, compared with the Gaussian
/// prediction for the nearest-group-mean rule.
#[test]
fn co_iteration_stage_accuracy_at_1000_samples() {
    let (cat, v) = variant_key5_iter2();
    let id = CoIdentifier::new(&cat, &PowerSpec::default()).unwrap();
    let n = 1000;
    let acc = co_iteration_accuracy(&id, &cat[v].timing, 2, n, 1000, 11).unwrap();
    let group = |it: u8| {
        let m: Vec<f64> = cat.iter().filter(|x| x.iterations == it).map(|x| x.timing.mean).collect();
        m.iter().sum::<f64>() / m.len() as f64
    };
    let se = cat[v].timing.std_dev() / (n as f64).sqrt();
    let mu = cat[v].timing.mean;
    let lo = 0.5 * (group(1) + group(2));
    let hi = 0.5 * (group(2) + group(3));
    let predicted = normal_cdf((hi - mu) / se) - normal_cdf((lo - mu) / se);
    println!("CO iteration accuracy at n = {n}: {acc:.3} (Gaussian prediction {predicted:.3})");
    assert!((acc - predicted).abs() < 0.04, "{acc} vs {predicted}");
    assert!(acc >= 0.99, "iteration accuracy {acc} at n = {n}");
}

/// Key-stage accuracy once the trace reaches the planned same-iteration n,
/// on a catalog whose key plan is short enough to simulate.
#[test]
fn co_key_stage_accuracy_at_planned_n() {
    let cal = GroverCalibration {
        base_latency: 1.0,
        per_iteration: 1.0,
        per_oracle_spread: 0.7,
        variance: 0.01,
    };
    let cat = grover_catalog(&cal).unwrap();
    let spec = PowerSpec::default();
    let id = CoIdentifier::new(&cat, &spec).unwrap();
    let v = GroverVariant::index_of(3, 2) - 1;
    let n = id.key_plan(v).samples().unwrap().ceil() as usize;
    let want = cat[v].to_string();
    let runs = 1000;
    let seeds = SeedStream(21);
    let hits = (0..runs)
        .filter(|&r| {
            let s = cat[v].timing.sample_n(&mut seeds.rng(r), n);
            id.identify(&s).unwrap().label == want
        })
        .count();
    let acc = hits as f64 / runs as f64;
    println!("CO key accuracy at planned n = {n}: {acc:.3}");
    assert!(acc >= 0.99, "key accuracy {acc} at planned n = {n}");
}

#[test]
fn null_false_positive_rate_is_calibrated() {
    let model = TimingDistribution::new(2.5, 0.3).unwrap();
    for (n, seed) in [(50, 1), (700, 2), (5000, 3)] {
        let rate = null_false_positive_rate(&model, n, 1000, 0.95, seed).unwrap();
        println!("null false-positive rate at n = {n}: {rate:.3}");
        assert!(rate <= 0.05 + 0.02, "{rate} at n = {n}");
    }
}

fn qp_setup(means: &[f64], var: f64) -> (Scenario, Vec<DeviceProfile>) {
    let devices: Vec<DeviceProfile> = means
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            DeviceProfile::new(format!("dev{i}"))
                .with_circuit("c", TimingDistribution::new(m, var).unwrap())
                .with_circuit("probe", TimingDistribution::new(0.5, 1e-3).unwrap())
        })
        .collect();
    let scenario = Scenario {
        device: devices[0].clone(),
        victim_circuit: "c".into(),
        victim_repetitions: 10,
        probe_circuit: "probe".into(),
        probe_every: 1,
        seed: 0,
    };
    (scenario, devices)
}

#[test]
fn qp_three_well_separated_devices() {
    // sigma = 0.1; means 5 sigma apart
    let (scenario, devices) = qp_setup(&[3.0, 3.5, 4.0], 0.01);
    let (crossed, labelled) = qp_crossing_rate(&scenario, &devices, 3.0, 10, 0.95, 1000, 100).unwrap();
    println!("QP three devices: crossed {crossed:.3}, labelled {labelled:.3}");
    assert!(crossed >= 0.99);
    assert!(labelled >= 0.99);
}

#[test]
fn qp_rarely_rejects_the_true_device() {
    let (scenario, devices) = qp_setup(&[2.0, 6.0], 0.3);
    let (_, labelled) = qp_crossing_rate(&scenario, &devices, 2.0, 10, 0.95, 1000, 500).unwrap();
    assert!(1.0 - labelled <= 0.05 + 0.02, "true device lost in {:.3} of runs", 1.0 - labelled);
}
