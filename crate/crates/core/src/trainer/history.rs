use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;

/// One completed epoch. Loss components are means over the epoch's batches.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub loss: f64,
    pub structure: f64,
    pub cluster: f64,
    pub seconds: f64,
    pub val_metric: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// Deterministic columns only; wall-clock time goes to [`Self::timing_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::from("#epoch\tloss\tstructure_loss\tcluster_loss\tval_metric\n");
        for r in &self.records {
            let val = r.val_metric.map_or_else(|| "-".to_string(), |v| v.to_string());
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.epoch, r.loss, r.structure, r.cluster, val
            ));
        }
        out
    }

    pub fn timing_text(&self) -> String {
        let mut out = String::from("#epoch\tseconds\n");
        for r in &self.records {
            out.push_str(&format!("{}\t{:.6}\n", r.epoch, r.seconds));
        }
        out
    }

    /// Writes `history.tsv` and `timing.tsv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for (name, text) in [
            ("history.tsv", self.to_text()),
            ("timing.tsv", self.timing_text()),
        ] {
            let mut w = BufWriter::new(File::create(dir.join(name))?);
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        Ok(())
    }
}
