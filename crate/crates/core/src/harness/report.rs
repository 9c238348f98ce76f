use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 64-bit FNV-1a, used to fingerprint configurations in report metadata.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct RunMetadata {
    pub config_hash: u64,
    pub seed: u64,
}

impl RunMetadata {
    /// Metadata for any serializable configuration.
    pub fn for_config<C: Serialize>(config: &C, seed: u64) -> Result<Self> {
        let json = serde_json::to_vec(config).map_err(|e| Error::Numeric(format!("config serialization: {e}")))?;
        Ok(Self {
            config_hash: fnv1a64(&json),
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub strategy: String,
    pub trials: usize,
    pub accuracy: f64,
    pub mean_per_class_accuracy: f64,
    pub evaluations: usize,
    /// Seconds; left empty unless timing was requested, so reports stay
    /// byte-for-byte reproducible by default.
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ExperimentReport {
    pub metadata: RunMetadata,
    pub rows: Vec<MetricRow>,
}

impl ExperimentReport {
    pub fn new(metadata: RunMetadata) -> Self {
        Self {
            metadata,
            rows: Vec::new(),
        }
    }

    /// Writes one line per row with the metadata repeated in every line.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "config_hash",
            "seed",
            "strategy",
            "trials",
            "accuracy",
            "mean_per_class_accuracy",
            "evaluations",
            "wall_time",
        ])?;
        for r in &self.rows {
            w.write_record([
                format!("{:016x}", self.metadata.config_hash),
                self.metadata.seed.to_string(),
                r.strategy.clone(),
                r.trials.to_string(),
                r.accuracy.to_string(),
                r.mean_per_class_accuracy.to_string(),
                r.evaluations.to_string(),
                r.wall_time.map(|t| t.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Accuracy of the named strategy at the given budget.
    pub fn accuracy(&self, strategy: &str, trials: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy && r.trials == trials)
            .map(|r| r.accuracy)
    }
}
