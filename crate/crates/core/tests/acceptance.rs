//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits non-zero if any criterion fails.
//!
//! Run with `cargo test --test acceptance` (optimized test profile).

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use acav::cli::main_with_args;
use acav::nn::{train, Model, TrainConfig};
use acav::probe::{
    cosine_angle, delta_v, pattern_entropy, reference_vectors, run_concept_experiment,
    AcavReport, ConceptConfig, ExperimentOptions, References,
};
use acav::selftest::{conv_oracle_case, gradient_check, toy_model};
use acav::synth::{gen_dataset, ConceptKind, DatasetSpec, Domain, Label, LabeledDataset, ScaleClass};
use acav::Tensor;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const MARGIN: f64 = 0.2;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report_line(id: u32, name: &str, elapsed: Duration, o: &Outcome) -> bool {
    println!(
        "{} criterion {id}: {name} ({}; {:.1}s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64()
    );
    o.pass
}

/// Everything one trained model needs for the concept sweeps.
struct Trained {
    model: Model<f32>,
    train: LabeledDataset,
    references: References,
    layers: Vec<usize>,
}

fn train_model(spec: &DatasetSpec, learning_rate: f64, seed: u64) -> acav::Result<Trained> {
    let data = gen_dataset(spec)?;
    let (inputs, labels) = data.training_set();
    let init = Model::classifier(spec.domain.channels(), spec.height, spec.width, seed)?;
    let cfg = TrainConfig { learning_rate, epochs: 30, batch_size: 8, master_seed: seed };
    let model = train(init, &inputs, &labels, &cfg)?.model;
    let layers = vec![model.penultimate_index(), model.probe_layer(2)?];
    let labels: Vec<Label> = data.samples.iter().map(|s| s.label).collect();
    let references = References::compute(&model, &inputs, &labels, &layers, MARGIN)?;
    Ok(Trained { model, train: data, references, layers })
}

fn sweep(t: &Trained, spec: &DatasetSpec, configs: &[ConceptConfig], seed: u64) -> acav::Result<AcavReport> {
    // 50 held-out healthy images from a stream the training set never uses
    let pool = gen_dataset(&DatasetSpec { healthy: 50, diseased: 0, seed: seed + 10_000, ..spec.clone() })?;
    let options = ExperimentOptions { seed, margin: MARGIN, domain: spec.domain, entropy: t.train.entropy() };
    run_concept_experiment(&t.model, &t.references, &pool.samples, configs, &t.layers, &options)
}

fn fundus_spec(seed: u64) -> DatasetSpec {
    DatasetSpec::new(Domain::Fundus, 150, 150, seed)
        .with_frequency(ConceptKind::Bleeding, 1.2)
        .with_frequency(ConceptKind::FattyDots, 0.8)
        .with_frequency(ConceptKind::CottonWool, 0.6)
}

fn mri_spec(seed: u64) -> DatasetSpec {
    DatasetSpec::new(Domain::Mri, 100, 100, seed)
        .with_frequency(ConceptKind::Tumor, 1.0)
        .with_scale_mix([0.1, 0.2, 0.7])
}

fn fundus_configs() -> Vec<ConceptConfig> {
    let mut configs = Vec::new();
    for kind in ConceptKind::FUNDUS {
        for count in [1, 3] {
            configs.push(ConceptConfig::new(&[kind], count, ScaleClass::Medium));
        }
    }
    configs.push(ConceptConfig::new(&ConceptKind::FUNDUS, 3, ScaleClass::Medium));
    configs
}

fn criterion_1() -> Outcome {
    let (mut failures, mut checked, mut skipped, mut worst, mut max_params) = (0, 0, 0, 0.0f64, 0);
    for seed in 0..100 {
        let (m, x, t) = toy_model(seed).expect("toy model");
        max_params = max_params.max(m.parameter_count());
        let g = gradient_check(&m, &x, t, 1e-4, 1e-3).expect("gradient check");
        failures += g.failures;
        checked += g.checked;
        skipped += g.skipped_kinks;
        worst = worst.max(g.max_relative_error);
    }
    Outcome {
        pass: failures == 0 && max_params <= 500,
        detail: format!("100 models, {checked} coordinates, {skipped} kink crossings skipped, max rel err {worst:.1e}, {failures} failures, max {max_params} params"),
    }
}

fn criterion_2() -> Outcome {
    let mismatches = (0..100u64).filter(|&s| !conv_oracle_case(s)).count();
    Outcome { pass: mismatches == 0, detail: format!("100 cases, {mismatches} mismatches") }
}

fn criterion_3() -> Outcome {
    let h = pattern_entropy(&[0.25; 4]).unwrap();
    let a = cosine_angle(&[1.0, 0.0], &[1.0, 1.0]).unwrap().degrees;
    let d = delta_v([(&[0.0, 0.0][..], &[3.0, 4.0][..])]).unwrap();
    let (eh, ea, ed) = ((h - 4f64.ln()).abs(), (a - 45.0).abs(), (d - 5.0).abs());
    Outcome {
        pass: eh <= 1e-12 && ea <= 1e-9 && ed <= 1e-9,
        detail: format!("entropy err {eh:.1e}, angle err {ea:.1e}, delta_v err {ed:.1e}"),
    }
}

fn criterion_4(reports: &[&AcavReport]) -> Outcome {
    let mut worst = 0.0f64;
    let mut rows = 0;
    for r in reports {
        // through the CSV as well, the form other tools read
        let csv = r.to_csv().expect("csv");
        let mut rdr = csv::Reader::from_reader(csv.as_bytes());
        for rec in rdr.deserialize::<acav::probe::CsvRecord>() {
            let rec = rec.expect("record");
            worst = worst.max((rec.deviation - (rec.similarity_original - rec.similarity_augmented).abs()).abs());
            rows += 1;
        }
    }
    Outcome { pass: rows > 0 && worst <= 1e-9, detail: format!("{rows} rows, max gap {worst:.1e}") }
}

fn deviation(report: &AcavReport, layer: usize, kinds: &[ConceptKind], count: usize) -> f64 {
    report
        .rows
        .iter()
        .find(|r| r.layer == layer && r.kinds == kinds && r.count == count)
        .expect("row present")
        .deviation
}

struct SeedResult<T> {
    seed: u64,
    value: Result<T, String>,
}

fn count_passing<T>(results: &[SeedResult<T>], ok: impl Fn(&T) -> bool) -> usize {
    results.iter().filter(|r| r.value.as_ref().map(&ok).unwrap_or(false)).count()
}

fn criterion_5(fundus: &[SeedResult<(Trained, AcavReport)>], elapsed: Duration) -> Outcome {
    let mut detail = String::new();
    let ok = |(t, r): &(Trained, AcavReport)| {
        ConceptKind::FUNDUS.iter().all(|&k| deviation(r, t.layers[0], &[k], 3) > deviation(r, t.layers[0], &[k], 1))
    };
    for s in fundus {
        match &s.value {
            Ok((t, r)) => {
                let parts: Vec<String> = ConceptKind::FUNDUS
                    .iter()
                    .map(|&k| format!("{k} {:.3}->{:.3}", deviation(r, t.layers[0], &[k], 1), deviation(r, t.layers[0], &[k], 3)))
                    .collect();
                let _ = write!(detail, "seed {}: {}; ", s.seed, parts.join(", "));
            }
            Err(e) => {
                let _ = write!(detail, "seed {}: {e}; ", s.seed);
            }
        }
    }
    let n = count_passing(fundus, ok);
    let _ = write!(detail, "{n}/5 seeds");
    Outcome { pass: n >= 4 && elapsed < Duration::from_secs(600), detail }
}

fn criterion_7(fundus: &[SeedResult<(Trained, AcavReport)>]) -> Outcome {
    let combined = |(t, r): &(Trained, AcavReport)| {
        r.rows
            .iter()
            .find(|row| row.layer == t.layers[0] && row.kinds.len() == 3 && row.count == 3)
            .map(|row| (row.flip_rate, row.samples))
            .expect("combined row")
    };
    let mut detail = String::new();
    for s in fundus {
        match &s.value {
            Ok(v) => {
                let (f, n) = combined(v);
                let _ = write!(detail, "seed {}: {f:.2} over {n}; ", s.seed);
            }
            Err(e) => {
                let _ = write!(detail, "seed {}: {e}; ", s.seed);
            }
        }
    }
    let n = count_passing(fundus, |v| combined(v).0 >= 0.9);
    let _ = write!(detail, "{n}/5 seeds");
    Outcome { pass: n >= 4, detail }
}

fn criterion_6(mri: &[SeedResult<(Trained, AcavReport)>], elapsed: Duration) -> Outcome {
    let series = |(t, r): &(Trained, AcavReport)| -> Vec<(f64, f64)> {
        ScaleClass::ALL
            .iter()
            .map(|&s| {
                let row = r.rows.iter().find(|row| row.layer == t.layers[0] && row.scale == s).expect("scale row");
                (row.angle_diseased, row.flip_rate)
            })
            .collect()
    };
    let ok = |v: &(Trained, AcavReport)| {
        let s = series(v);
        s[0].0 > s[1].0 && s[1].0 > s[2].0 && s[0].1 <= s[1].1 && s[1].1 <= s[2].1
    };
    let mut detail = String::new();
    for s in mri {
        match &s.value {
            Ok(v) => {
                let p = series(v);
                let _ = write!(
                    detail,
                    "seed {}: angle {:.1}>{:.1}>{:.1}, flips {:.2}<={:.2}<={:.2}; ",
                    s.seed, p[0].0, p[1].0, p[2].0, p[0].1, p[1].1, p[2].1
                );
            }
            Err(e) => {
                let _ = write!(detail, "seed {}: {e}; ", s.seed);
            }
        }
    }
    let n = count_passing(mri, ok);
    let _ = write!(detail, "{n}/5 seeds");
    Outcome { pass: n >= 4 && elapsed < Duration::from_secs(600), detail }
}

/// Ten held-out images of each class, deliberately given the wrong label,
/// are added to the reference pool of a trained model.
fn criterion_8(t: &Trained, spec: &DatasetSpec) -> Outcome {
    let held_out = gen_dataset(&DatasetSpec { healthy: 10, diseased: 10, seed: spec.seed + 20_000, ..spec.clone() })
        .expect("held-out data");
    let (inputs, _) = t.train.training_set();
    let labels: Vec<Label> = t.train.samples.iter().map(|s| s.label).collect();
    let mut noisy_inputs: Vec<Tensor<f32>> = inputs.clone();
    let mut noisy_labels = labels.clone();
    for s in &held_out.samples {
        noisy_inputs.push(s.image.to_tensor());
        noisy_labels.push(if s.label == Label::Healthy { Label::Diseased } else { Label::Healthy });
    }
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for class in [Label::Healthy, Label::Diseased] {
        let clean = reference_vectors(&t.model, &inputs, &labels, class, &t.layers, MARGIN).expect("clean reference");
        let noisy = reference_vectors(&t.model, &noisy_inputs, &noisy_labels, class, &t.layers, MARGIN).expect("noisy reference");
        for (c, n) in clean.iter().zip(&noisy) {
            for (a, b) in c.values.iter().zip(&n.values) {
                worst = worst.max((a - b).abs());
            }
            let _ = write!(detail, "{} layer {}: {} -> {} samples; ", class.as_str(), c.layer, c.count, n.count);
        }
    }
    let _ = write!(detail, "max change {worst:e}");
    Outcome { pass: worst == 0.0, detail }
}

const PIPELINE_CONFIG: &str = r#"{
  "seed": 21,
  "output_dir": "unused",
  "dataset": {"domain": "mri", "healthy": 60, "diseased": 60,
              "frequencies": {"tumor": 1.0}, "scale_mix": [0.1, 0.2, 0.7]},
  "pool_size": 20,
  "train": {"learning_rate": 0.03, "epochs": 15, "batch_size": 8},
  "probe": {
    "layers": [1, 2],
    "sweeps": [
      {"kinds": ["tumor"], "count": 1, "scale": "small"},
      {"kinds": ["tumor"], "count": 1, "scale": "large"},
      {"kinds": ["tumor"], "count": 2, "scale": "medium", "intensity": 0.7}
    ]
  }
}"#;

fn run_cli_pipeline(config: &Path, out: &Path, threads: usize) -> Result<Vec<u8>, String> {
    let t = threads.to_string();
    for cmd in ["gen-data", "train", "probe"] {
        let args = ["acav", "--threads", &t, cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "csv"];
        let args: Vec<&str> = if cmd == "probe" { args.to_vec() } else { args[..8].to_vec() };
        let code = main_with_args(args);
        if code != 0 {
            return Err(format!("{cmd} exited with {code}"));
        }
    }
    std::fs::read(out.join("report").join("report.csv")).map_err(|e| e.to_string())
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = dir.path().join("config.json");
    std::fs::write(&config, PIPELINE_CONFIG).expect("write config");
    let a = run_cli_pipeline(&config, &dir.path().join("one_thread"), 1);
    let b = run_cli_pipeline(&config, &dir.path().join("four_threads"), 4);
    match (a, b) {
        (Ok(a), Ok(b)) => Outcome {
            pass: a == b && !a.is_empty(),
            detail: format!("--threads 1 vs 4: {} vs {} bytes, identical: {}", a.len(), b.len(), a == b),
        },
        (a, b) => Outcome { pass: false, detail: format!("pipeline failed: {:?} / {:?}", a.err(), b.err()) },
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn main() {
    // `cargo test -- --list` and filters are meaningless here
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut all = true;

    let (o, t) = timed(criterion_1);
    all &= report_line(1, "gradient correctness", t, &Outcome { pass: o.pass && t < Duration::from_secs(30), ..o });
    let (o, t) = timed(criterion_2);
    all &= report_line(2, "convolution oracle", t, &Outcome { pass: o.pass && t < Duration::from_secs(10), ..o });
    let (o, t) = timed(criterion_3);
    all &= report_line(3, "metric exactness", t, &o);

    let (fundus, fundus_time) = timed(|| {
        SEEDS
            .iter()
            .map(|&seed| {
                let spec = fundus_spec(seed);
                let value = train_model(&spec, 0.04, seed)
                    .and_then(|t| sweep(&t, &spec, &fundus_configs(), seed).map(|r| (t, r)))
                    .map_err(|e| e.to_string());
                SeedResult { seed, value }
            })
            .collect::<Vec<_>>()
    });
    let (mri, mri_time) = timed(|| {
        SEEDS
            .iter()
            .map(|&seed| {
                let spec = mri_spec(seed);
                let configs: Vec<_> = ScaleClass::ALL
                    .iter()
                    .map(|&s| ConceptConfig::new(&[ConceptKind::Tumor], 1, s))
                    .collect();
                let value = train_model(&spec, 0.03, seed)
                    .and_then(|t| sweep(&t, &spec, &configs, seed).map(|r| (t, r)))
                    .map_err(|e| e.to_string());
                SeedResult { seed, value }
            })
            .collect::<Vec<_>>()
    });

    let reports: Vec<&AcavReport> = fundus.iter().chain(&mri).filter_map(|s| s.value.as_ref().ok().map(|(_, r)| r)).collect();
    let (o, t) = timed(|| criterion_4(&reports));
    all &= report_line(4, "deviation column equals |original - augmented|", t, &o);
    all &= report_line(5, "3 patterns deviate more than 1 pattern", fundus_time, &criterion_5(&fundus, fundus_time));
    all &= report_line(6, "tumor scale monotonicity", mri_time, &criterion_6(&mri, mri_time));
    all &= report_line(7, "combined-pattern saturation", fundus_time, &criterion_7(&fundus));

    let gating = mri.iter().chain(&fundus).find_map(|s| s.value.as_ref().ok().map(|(t, _)| (s.seed, t)));
    let (o, t) = timed(|| match gating {
        Some((seed, trained)) => criterion_8(trained, &trained.train.spec).with_seed(seed),
        None => Outcome { pass: false, detail: "no trained model available".into() },
    });
    all &= report_line(8, "reference-vector gating", t, &o);

    let (o, t) = timed(criterion_9);
    all &= report_line(9, "end-to-end determinism", t, &o);

    println!("\nacceptance: {}", if all { "all criteria PASS" } else { "FAILED" });
    if !all {
        std::process::exit(1);
    }
}

impl Outcome {
    fn with_seed(mut self, seed: u64) -> Self {
        self.detail = format!("model seed {seed}; {}", self.detail);
        self
    }
}
