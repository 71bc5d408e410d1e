//! The subcommands as library functions. Each writes its artifacts under the
//! configured output directory together with a [`RunManifest`].
//!
//! ```text
//! <out>/data/        training dataset          (gen-data)
//! <out>/pool/        held-out healthy images   (gen-data)
//! <out>/model/       checkpoint.acav, loss_history.csv   (train)
//! <out>/report/      report.csv, report.md, report.json  (probe)
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{sha256_hex, LoadedConfig};
use super::manifest::RunManifest;
use crate::error::{AcavError, Result};
use crate::nn::{load_checkpoint, save_checkpoint, train, Checkpoint, Model, TrainingMetadata};
use crate::probe::report::{REPORT_CSV, REPORT_SCHEMA_VERSION};
use crate::probe::{
    read_report_csv, run_concept_experiment, AcavReport, CsvRecord, ExperimentOptions, References,
};
use crate::selftest::{run_selftest, SelftestReport};
use crate::synth::{gen_dataset, load_dataset, write_dataset, ConceptKind, Label, ScaleClass};

pub const CHECKPOINT_FILE: &str = "checkpoint.acav";
pub const LOSS_HISTORY_FILE: &str = "loss_history.csv";

#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn pool(&self) -> PathBuf {
        self.root.join("pool")
    }

    pub fn model(&self) -> PathBuf {
        self.root.join("model")
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.model().join(CHECKPOINT_FILE)
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenDataSummary {
    pub healthy: usize,
    pub diseased: usize,
    pub pool: usize,
    pub totals: BTreeMap<ConceptKind, usize>,
    /// Pattern entropy in nats.
    pub entropy: f64,
}

impl std::fmt::Display for GenDataSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "healthy: {}", self.healthy)?;
        writeln!(f, "diseased: {}", self.diseased)?;
        writeln!(f, "probe pool: {}", self.pool)?;
        for (k, n) in &self.totals {
            writeln!(f, "  {k}: {n}")?;
        }
        write!(f, "pattern entropy H = {:.4} nats", self.entropy)
    }
}

pub fn cmd_gen_data(cfg: &LoadedConfig) -> Result<GenDataSummary> {
    let layout = Layout::new(&cfg.config.output_dir);
    let mut manifest = RunManifest::new("gen-data", cfg);
    let data = manifest.time("generate", || gen_dataset(&cfg.config.dataset_spec()))?;
    let pool = manifest.time("generate_pool", || gen_dataset(&cfg.config.pool_spec()))?;
    manifest.time("write", || {
        let mut written = write_dataset(&data, &layout.data(), Some(&cfg.hash))?;
        written.extend(write_dataset(&pool, &layout.pool(), Some(&cfg.hash))?);
        Ok(())
    })?;
    manifest.outputs = vec![layout.data(), layout.pool()];
    manifest.write(&layout.root)?;
    Ok(GenDataSummary {
        healthy: data.count(Label::Healthy),
        diseased: data.count(Label::Diseased),
        pool: pool.len(),
        totals: data.totals(),
        entropy: data.entropy(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub history: Vec<f64>,
    pub checkpoint_sha256: String,
    /// False when the loss failed to fall strictly over the first three
    /// epochs; such runs are flagged in the log and on stdout.
    pub early_loss_decreasing: bool,
}

fn strictly_decreasing_start(history: &[f64]) -> bool {
    history.iter().take(3).collect::<Vec<_>>().windows(2).all(|w| w[1] < w[0])
}

pub fn cmd_train(cfg: &LoadedConfig) -> Result<TrainSummary> {
    let layout = Layout::new(&cfg.config.output_dir);
    let mut manifest = RunManifest::new("train", cfg);
    let data_dir = layout.data();
    manifest.add_input(&data_dir.join(crate::synth::dataset::MANIFEST_FILE))?;
    let dataset = load_dataset(&data_dir)?;
    let (inputs, labels) = dataset.training_set();
    let spec = &dataset.spec;
    let model = Model::classifier(spec.domain.channels(), spec.height, spec.width, cfg.config.init_seed())?;
    let train_cfg = cfg.config.train_config();
    let outcome = manifest.time("train", || train(model, &inputs, &labels, &train_cfg))?;

    let mut hash = [0u8; 32];
    hex::decode_to_slice(&cfg.hash, &mut hash)
        .map_err(|e| AcavError::Config(format!("config hash: {e}")))?;
    let checkpoint = Checkpoint::new(
        outcome.model,
        TrainingMetadata {
            seed: cfg.config.seed,
            epochs: train_cfg.epochs as u32,
            final_loss: outcome.history.last().copied(),
            config_hash: Some(hash),
        },
    )?;
    let model_dir = layout.model();
    fs::create_dir_all(&model_dir).map_err(|e| AcavError::io(&model_dir, e))?;
    let ckpt_path = layout.checkpoint();
    save_checkpoint(&checkpoint, &ckpt_path)?;

    let mut csv = String::from("epoch,loss,seed,config_hash\n");
    for (i, loss) in outcome.history.iter().enumerate() {
        let _ = writeln!(csv, "{},{loss},{},{}", i + 1, cfg.config.seed, cfg.hash);
    }
    let hist_path = model_dir.join(LOSS_HISTORY_FILE);
    fs::write(&hist_path, csv).map_err(|e| AcavError::io(&hist_path, e))?;

    manifest.outputs = vec![ckpt_path.clone(), hist_path];
    manifest.write(&model_dir)?;
    let early_loss_decreasing = strictly_decreasing_start(&outcome.history);
    if !early_loss_decreasing {
        log::warn!("loss did not decrease over the first epochs: {:?}", &outcome.history[..outcome.history.len().min(3)]);
    }
    Ok(TrainSummary {
        early_loss_decreasing,
        checkpoint_sha256: sha256_hex(&checkpoint.to_bytes()),
        checkpoint: ckpt_path,
        history: outcome.history,
    })
}

/// Probes the trained model with every configured sweep and writes the
/// report. References come from the training data, the augmented images
/// from the held-out pool.
pub fn cmd_probe(cfg: &LoadedConfig, checkpoint: Option<&Path>) -> Result<AcavReport> {
    let c = &cfg.config;
    let layout = Layout::new(&c.output_dir);
    let mut manifest = RunManifest::new("probe", cfg);
    let ckpt_path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| layout.checkpoint());
    manifest.add_input(&ckpt_path)?;
    manifest.add_input(&layout.data().join(crate::synth::dataset::MANIFEST_FILE))?;
    manifest.add_input(&layout.pool().join(crate::synth::dataset::MANIFEST_FILE))?;

    let model = load_checkpoint(&ckpt_path)?.model;
    let dataset = load_dataset(&layout.data())?;
    let pool = load_dataset(&layout.pool())?;
    let layers = c
        .probe
        .layers
        .iter()
        .map(|&d| model.probe_layer(d))
        .collect::<Result<Vec<_>>>()?;

    let inputs: Vec<_> = dataset.samples.iter().map(|s| s.image.to_tensor()).collect();
    let labels: Vec<Label> = dataset.samples.iter().map(|s| s.label).collect();
    let references = manifest.time("references", || {
        References::compute(&model, &inputs, &labels, &layers, c.probe.margin)
    })?;
    let options = ExperimentOptions {
        seed: c.probe_seed(),
        margin: c.probe.margin,
        domain: dataset.spec.domain,
        entropy: dataset.entropy(),
    };
    let mut report = manifest.time("experiment", || {
        run_concept_experiment(&model, &references, &pool.samples, &c.probe.sweeps, &layers, &options)
    })?;
    report.seed = c.seed;
    report.config_hash = Some(cfg.hash.clone());
    manifest.outputs = report.write(&layout.report())?;
    manifest.write(&layout.report())?;
    Ok(report)
}

/// Runs gen-data, train and probe in sequence.
pub fn run_pipeline(cfg: &LoadedConfig) -> Result<AcavReport> {
    cmd_gen_data(cfg)?;
    cmd_train(cfg)?;
    cmd_probe(cfg, None)
}

pub fn cmd_selftest(models: usize, conv_cases: usize, seed: u64) -> Result<SelftestReport> {
    run_selftest(models, conv_cases, seed)
}

pub const MERGED_CSV: &str = "merged.csv";
pub const COMPARISON_MD: &str = "comparison.md";
pub const ANGLE_VS_SCALE_CSV: &str = "angle_vs_scale.csv";
pub const DEVIATION_VS_COUNT_CSV: &str = "deviation_vs_count.csv";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeSummary {
    pub runs: usize,
    pub rows: usize,
    pub duplicates: usize,
    pub outputs: Vec<PathBuf>,
}

/// Identifies a report row within one run.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct RowKey {
    concept: String,
    layer: usize,
    count: usize,
    scale: ScaleClass,
    intensity_bits: u32,
    depth: String,
}

impl RowKey {
    fn of(r: &CsvRecord) -> Self {
        RowKey {
            concept: r.concept.clone(),
            layer: r.layer,
            count: r.count,
            scale: r.scale,
            intensity_bits: r.intensity.to_bits(),
            depth: r.depth.clone(),
        }
    }
}

type RunKey = (u64, String);

const WIDE_METRICS: [&str; 7] = [
    "similarity_original",
    "similarity_augmented",
    "deviation",
    "delta_v",
    "flip_rate",
    "angle_healthy",
    "angle_diseased",
];

fn metric(r: &CsvRecord, name: &str) -> f64 {
    match name {
        "similarity_original" => r.similarity_original,
        "similarity_augmented" => r.similarity_augmented,
        "deviation" => r.deviation,
        "delta_v" => r.delta_v,
        "flip_rate" => r.flip_rate,
        "angle_healthy" => r.angle_healthy,
        "angle_diseased" => r.angle_diseased,
        _ => unreachable!("unknown metric {name}"),
    }
}

fn report_csv_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(REPORT_CSV)
    } else {
        p.to_path_buf()
    }
}

/// Merges report CSVs into a wide table with one column group per run, plus
/// plot-ready series. Rows repeated under the same config hash and seed are
/// kept once.
pub fn cmd_report(inputs: &[PathBuf], out: &Path) -> Result<MergeSummary> {
    if inputs.is_empty() {
        return Err(AcavError::Merge("no report files given".into()));
    }
    let mut manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: "report".into(),
        config_hash: String::new(),
        config_path: None,
        seed: 0,
        inputs: BTreeMap::new(),
        outputs: Vec::new(),
        timings_ms: BTreeMap::new(),
    };
    // row -> run -> record
    let mut table: BTreeMap<RowKey, BTreeMap<RunKey, CsvRecord>> = BTreeMap::new();
    let mut duplicates = 0;
    for input in inputs {
        let path = report_csv_path(input);
        manifest.add_input(&path)?;
        for rec in read_report_csv(&path)? {
            let run = (rec.seed, rec.config_hash.clone());
            let cell = table.entry(RowKey::of(&rec)).or_default();
            if cell.contains_key(&run) {
                duplicates += 1;
            } else {
                cell.insert(run, rec);
            }
        }
    }
    let runs: BTreeSet<RunKey> = table.values().flat_map(|m| m.keys().cloned()).collect();
    manifest.config_hash = sha256_hex(
        runs.iter()
            .map(|(_, h)| h.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect::<Vec<_>>()
            .join("\n")
            .as_bytes(),
    );
    let seed_counts = runs.iter().fold(BTreeMap::<u64, usize>::new(), |mut m, (s, _)| {
        *m.entry(*s).or_default() += 1;
        m
    });
    let run_label = |(seed, hash): &RunKey| {
        if seed_counts[seed] > 1 {
            format!("s{seed}-{}", &hash[..hash.len().min(8)])
        } else {
            format!("s{seed}")
        }
    };

    // wide table
    let mut merged = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["concept", "kinds", "depth", "layer", "count", "scale", "intensity", "config_hashes"]
        .map(String::from)
        .to_vec();
    for run in &runs {
        for m in WIDE_METRICS {
            header.push(format!("{m}_{}", run_label(run)));
        }
    }
    let csv_err = |e: csv::Error| AcavError::Format(format!("csv: {e}"));
    merged.write_record(&header).map_err(csv_err)?;
    for (key, cells) in &table {
        let first = cells.values().next().expect("non-empty cell");
        let hashes: BTreeSet<&str> = cells.keys().map(|(_, h)| h.as_str()).collect();
        let mut row = vec![
            key.concept.clone(),
            first.kinds.clone(),
            key.depth.clone(),
            key.layer.to_string(),
            key.count.to_string(),
            key.scale.to_string(),
            first.intensity.to_string(),
            hashes.into_iter().collect::<Vec<_>>().join("+"),
        ];
        for run in &runs {
            for m in WIDE_METRICS {
                row.push(cells.get(run).map(|r| metric(r, m).to_string()).unwrap_or_default());
            }
        }
        merged.write_record(&row).map_err(csv_err)?;
    }
    let merged = String::from_utf8(merged.into_inner().map_err(|e| AcavError::Format(e.to_string()))?)
        .expect("csv output is utf-8");

    let mean = |cells: &BTreeMap<RunKey, CsvRecord>, m: &str| {
        cells.values().map(|r| metric(r, m)).sum::<f64>() / cells.len() as f64
    };

    // comparison table of means across runs
    let mut md = String::from(
        "| Concept | Layer | Count | Scale | Average Absolute Deviation | ΔV | Flip Rate \
         | Angle to Healthy (°) | Angle to Diseased (°) | Runs |\n\
         |---|---|---:|---|---:|---:|---:|---:|---:|---:|\n",
    );
    for (key, cells) in &table {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {:.3} | {:.3} | {:.2} | {:.1} | {:.1} | {} |",
            key.concept,
            key.depth,
            key.count,
            key.scale,
            mean(cells, "deviation"),
            mean(cells, "delta_v"),
            mean(cells, "flip_rate"),
            mean(cells, "angle_healthy"),
            mean(cells, "angle_diseased"),
            cells.len()
        );
    }

    // plot series: one per concept and layer (and fixed count or scale)
    let mut angle = String::from("series,concept,depth,count,scale,angle_healthy,angle_diseased,flip_rate,runs\n");
    let mut by_scale: BTreeMap<(String, usize, usize, ScaleClass), &BTreeMap<RunKey, CsvRecord>> = BTreeMap::new();
    let mut by_count: BTreeMap<(String, usize, ScaleClass, usize), &BTreeMap<RunKey, CsvRecord>> = BTreeMap::new();
    for (key, cells) in &table {
        by_scale.insert((key.concept.clone(), key.layer, key.count, key.scale), cells);
        by_count.insert((key.concept.clone(), key.layer, key.scale, key.count), cells);
    }
    for ((concept, _, count, scale), cells) in &by_scale {
        let depth = &cells.values().next().expect("non-empty").depth;
        let _ = writeln!(
            angle,
            "{concept}|{depth}|x{count},{concept},{depth},{count},{scale},{},{},{},{}",
            mean(cells, "angle_healthy"),
            mean(cells, "angle_diseased"),
            mean(cells, "flip_rate"),
            cells.len()
        );
    }
    let mut deviation = String::from("series,concept,depth,scale,count,deviation,delta_v,flip_rate,runs\n");
    for ((concept, _, scale, count), cells) in &by_count {
        let depth = &cells.values().next().expect("non-empty").depth;
        let _ = writeln!(
            deviation,
            "{concept}|{depth}|{scale},{concept},{depth},{scale},{count},{},{},{},{}",
            mean(cells, "deviation"),
            mean(cells, "delta_v"),
            mean(cells, "flip_rate"),
            cells.len()
        );
    }

    fs::create_dir_all(out).map_err(|e| AcavError::io(out, e))?;
    for (name, body) in [
        (MERGED_CSV, merged),
        (COMPARISON_MD, md),
        (ANGLE_VS_SCALE_CSV, angle),
        (DEVIATION_VS_COUNT_CSV, deviation),
    ] {
        let path = out.join(name);
        fs::write(&path, body).map_err(|e| AcavError::io(&path, e))?;
        manifest.outputs.push(path);
    }
    manifest.write(out)?;
    log::info!("merged {} runs of schema {REPORT_SCHEMA_VERSION}", runs.len());
    Ok(MergeSummary {
        runs: runs.len(),
        rows: table.len(),
        duplicates,
        outputs: manifest.outputs,
    })
}
