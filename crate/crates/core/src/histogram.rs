//! Two-detector count histograms and their CSV + JSON sidecar files.
//!
//! The CSV has the header `m1,m2,count`. A sidecar `<stem>.json` next to it
//! holds `{power_uw, bs_setting, shots}`; shots beyond the listed counts are
//! events that were not resolved into an outcome (overflow).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::FCTable;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramMeta {
    #[serde(default)]
    pub power_uw: Option<f64>,
    #[serde(default)]
    pub bs_setting: Option<String>,
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountHistogram {
    counts: BTreeMap<Vec<usize>, u64>,
    overflow: u64,
    pub power_uw: Option<f64>,
    pub bs_setting: Option<String>,
}

impl CountHistogram {
    pub fn new(counts: BTreeMap<Vec<usize>, u64>, overflow: u64) -> Result<Self> {
        let h = Self {
            counts,
            overflow,
            power_uw: None,
            bs_setting: None,
        };
        if h.total_shots() == 0 {
            return Err(Error::Histogram("histogram holds no shots".into()));
        }
        let modes: Vec<usize> = h.counts.keys().map(Vec::len).collect();
        if modes.windows(2).any(|w| w[0] != w[1]) || modes.first() == Some(&0) {
            return Err(Error::Histogram("outcomes differ in length".into()));
        }
        Ok(h)
    }

    pub fn counts(&self) -> &BTreeMap<Vec<usize>, u64> {
        &self.counts
    }

    pub fn count(&self, outcome: &[usize]) -> u64 {
        self.counts.get(outcome).copied().unwrap_or(0)
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    pub fn total_shots(&self) -> u64 {
        self.counts.values().sum::<u64>() + self.overflow
    }

    pub fn num_modes(&self) -> usize {
        self.counts.keys().next().map_or(2, Vec::len)
    }

    /// Relative frequencies; overflow becomes the tail.
    pub fn to_table(&self) -> FCTable {
        let n = self.total_shots() as f64;
        let cutoff = self
            .counts
            .keys()
            .flat_map(|k| k.iter().copied())
            .max()
            .map_or(1, |m| m + 1);
        FCTable::from_entries(
            self.num_modes(),
            cutoff,
            self.counts
                .iter()
                .filter(|(_, &c)| c > 0)
                .map(|(k, &c)| (k.clone(), c as f64 / n)),
        )
        .expect("frequencies are a sub-normalized distribution")
    }

    /// Moves outcomes with any count at or above `cutoff` into overflow.
    pub fn pooled(&self, cutoff: usize) -> Self {
        let mut counts = BTreeMap::new();
        let mut overflow = self.overflow;
        for (k, &c) in &self.counts {
            if k.iter().all(|&m| m < cutoff) {
                counts.insert(k.clone(), c);
            } else {
                overflow += c;
            }
        }
        Self {
            counts,
            overflow,
            power_uw: self.power_uw,
            bs_setting: self.bs_setting.clone(),
        }
    }

    /// Swaps the two detectors.
    pub fn transposed(&self) -> Self {
        let counts = self
            .counts
            .iter()
            .map(|(k, &c)| (k.iter().rev().copied().collect(), c))
            .collect();
        Self {
            counts,
            ..self.clone()
        }
    }

    pub fn meta(&self) -> HistogramMeta {
        HistogramMeta {
            power_uw: self.power_uw,
            bs_setting: self.bs_setting.clone(),
            shots: self.total_shots(),
        }
    }

    /// Parses the CSV body; errors name the offending line.
    pub fn read_csv<R: Read>(reader: R) -> Result<BTreeMap<Vec<usize>, u64>> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::Histogram(format!("line 1: {e}")))?
            .clone();
        if header.iter().collect::<Vec<_>>() != ["m1", "m2", "count"] {
            return Err(Error::Histogram(
                "line 1: expected header m1,m2,count".into(),
            ));
        }
        let mut counts = BTreeMap::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                Error::Histogram(format!("line {line}: {e}"))
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |i: usize| -> Result<u64> {
                record[i].parse::<u64>().map_err(|_| {
                    Error::Histogram(format!(
                        "line {line}: '{}' is not a non-negative integer",
                        &record[i]
                    ))
                })
            };
            let outcome = vec![field(0)? as usize, field(1)? as usize];
            let c = field(2)?;
            if counts.insert(outcome, c).is_some() {
                return Err(Error::Histogram(format!("line {line}: duplicate outcome")));
            }
        }
        Ok(counts)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let map_err = |e: csv::Error| Error::Histogram(e.to_string());
        w.write_record(["m1", "m2", "count"]).map_err(map_err)?;
        for (k, c) in &self.counts {
            w.write_record([k[0].to_string(), k[1].to_string(), c.to_string()])
                .map_err(map_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV file and, when present, its JSON sidecar.
    pub fn read(path: &Path) -> Result<Self> {
        let counts = Self::read_csv(std::fs::File::open(path)?)?;
        let listed: u64 = counts.values().sum();
        let sidecar = sidecar_path(path);
        let meta = if sidecar.exists() {
            let meta: HistogramMeta = serde_json::from_reader(std::fs::File::open(&sidecar)?)?;
            if meta.shots < listed {
                return Err(Error::Histogram(format!(
                    "sidecar reports {} shots but the file lists {listed}",
                    meta.shots
                )));
            }
            meta
        } else {
            HistogramMeta {
                shots: listed,
                ..HistogramMeta::default()
            }
        };
        let mut h = Self::new(counts, meta.shots - listed)?;
        h.power_uw = meta.power_uw;
        h.bs_setting = meta.bs_setting;
        Ok(h)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)?;
        let sidecar = std::fs::File::create(sidecar_path(path))?;
        serde_json::to_writer_pretty(sidecar, &self.meta())?;
        Ok(())
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}
