//! Report rows and their three serializations: a CSV with one row per
//! concept and layer, a markdown table, and a JSON footer with run metadata.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{AcavError, Result};
use crate::synth::{ConceptKind, ScaleClass};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_MD: &str = "report.md";
pub const REPORT_JSON: &str = "report.json";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub concept: String,
    pub kinds: Vec<ConceptKind>,
    pub count: usize,
    pub scale: ScaleClass,
    pub intensity: f32,
    pub layer: usize,
    pub depth: String,
    /// Mean cosine similarity of original activations to the healthy reference.
    pub similarity_original: f64,
    /// Same for the augmented activations.
    pub similarity_augmented: f64,
    /// `|similarity_original - similarity_augmented|`.
    pub deviation: f64,
    pub delta_v: f64,
    pub flip_rate: f64,
    pub literal_ratio: f64,
    /// Angle in degrees between the mean augmented activation and the references.
    pub angle_healthy: f64,
    pub angle_diseased: f64,
    /// The same angles for the mean original activation.
    pub original_angle_healthy: f64,
    pub original_angle_diseased: f64,
    pub samples: usize,
    pub abstained: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcavReport {
    pub rows: Vec<ReportRow>,
    /// Pattern entropy of the training data, in nats.
    pub entropy: f64,
    pub seed: u64,
    pub margin: f64,
    pub config_hash: Option<String>,
}

/// Flat CSV record. Every row repeats the seed and config hash so a CSV
/// stays attributable after it is separated from its footer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRecord {
    pub schema_version: u32,
    pub concept: String,
    pub kinds: String,
    pub count: usize,
    pub scale: ScaleClass,
    pub intensity: f32,
    pub layer: usize,
    pub depth: String,
    pub similarity_original: f64,
    pub similarity_augmented: f64,
    pub deviation: f64,
    pub delta_v: f64,
    pub flip_rate: f64,
    pub literal_ratio: f64,
    pub angle_healthy: f64,
    pub angle_diseased: f64,
    pub original_angle_healthy: f64,
    pub original_angle_diseased: f64,
    pub samples: usize,
    pub abstained: usize,
    pub seed: u64,
    pub config_hash: String,
}

impl CsvRecord {
    pub fn kinds(&self) -> Result<Vec<ConceptKind>> {
        self.kinds.split('+').map(str::parse).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFooter {
    pub schema_version: u32,
    pub entropy: f64,
    pub entropy_base: String,
    pub seed: u64,
    pub config_hash: Option<String>,
    pub margin: f64,
    pub rows: usize,
    pub tool_version: String,
}

impl AcavReport {
    pub fn records(&self) -> Vec<CsvRecord> {
        self.rows
            .iter()
            .map(|r| CsvRecord {
                schema_version: REPORT_SCHEMA_VERSION,
                concept: r.concept.clone(),
                kinds: r.kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>().join("+"),
                count: r.count,
                scale: r.scale,
                intensity: r.intensity,
                layer: r.layer,
                depth: r.depth.clone(),
                similarity_original: r.similarity_original,
                similarity_augmented: r.similarity_augmented,
                deviation: r.deviation,
                delta_v: r.delta_v,
                flip_rate: r.flip_rate,
                literal_ratio: r.literal_ratio,
                angle_healthy: r.angle_healthy,
                angle_diseased: r.angle_diseased,
                original_angle_healthy: r.original_angle_healthy,
                original_angle_diseased: r.original_angle_diseased,
                samples: r.samples,
                abstained: r.abstained,
                seed: self.seed,
                config_hash: self.config_hash.clone().unwrap_or_default(),
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        records_to_csv(&self.records())
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(
            "| Concept | Count | Scale | Layer | Average Norm Vector Original Image \
             | Average Norm Vector Augmented Image | Average Absolute Deviation \
             | ΔV | Flip Rate | Angle to Healthy (°) | Angle to Diseased (°) | n |\n",
        );
        out.push_str("|---|---:|---|---|---:|---:|---:|---:|---:|---:|---:|---:|\n");
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {:.3} | {:.3} | {:.3} | {:.3} | {:.2} | {:.1} | {:.1} | {} |\n",
                r.concept,
                r.count,
                r.scale,
                r.depth,
                r.similarity_original,
                r.similarity_augmented,
                r.deviation,
                r.delta_v,
                r.flip_rate,
                r.angle_healthy,
                r.angle_diseased,
                r.samples
            ));
        }
        out.push_str(&format!("\nPattern entropy H = {:.4} nats\n", self.entropy));
        out
    }

    pub fn footer(&self) -> ReportFooter {
        ReportFooter {
            schema_version: REPORT_SCHEMA_VERSION,
            entropy: self.entropy,
            entropy_base: "e".into(),
            seed: self.seed,
            config_hash: self.config_hash.clone(),
            margin: self.margin,
            rows: self.rows.len(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    /// Writes `report.csv`, `report.md` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| AcavError::io(dir, e))?;
        let files = [
            (dir.join(REPORT_CSV), self.to_csv()?),
            (dir.join(REPORT_MD), self.to_markdown()),
            (
                dir.join(REPORT_JSON),
                serde_json::to_string_pretty(&self.footer()).expect("footer serializes") + "\n",
            ),
        ];
        let mut written = Vec::new();
        for (path, body) in files {
            fs::write(&path, body).map_err(|e| AcavError::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn records_to_csv(records: &[CsvRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)
            .map_err(|e| AcavError::Format(format!("csv: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| AcavError::Format(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Reads a report CSV, rejecting rows written under another schema version.
pub fn read_report_csv(path: &Path) -> Result<Vec<CsvRecord>> {
    let text = fs::read_to_string(path).map_err(|e| AcavError::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.deserialize::<CsvRecord>() {
        let rec = rec.map_err(|e| AcavError::Format(format!("{}: {e}", path.display())))?;
        if rec.schema_version != REPORT_SCHEMA_VERSION {
            return Err(AcavError::Merge(format!(
                "{} has schema version {}, expected {REPORT_SCHEMA_VERSION}",
                path.display(),
                rec.schema_version
            )));
        }
        out.push(rec);
    }
    Ok(out)
}
