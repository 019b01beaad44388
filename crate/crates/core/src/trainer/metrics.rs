//! Comma-separated metrics log, one row per training episode.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::train::MetricsRow;
use crate::error::{Error, Result};

pub const LOG_VERSION: u32 = 1;

pub fn header(num_agents: usize) -> Vec<String> {
    let mut h = vec!["log_version".to_string(), "episode".into(), "update".into()];
    h.extend((0..num_agents).map(|n| format!("return_{n}")));
    h.extend(
        [
            "mean_return",
            "fairness_total",
            "delay_total_s",
            "energy_total_j",
            "offload_total",
            "flight_loss",
            "alloc_loss",
            "critic_loss",
            "disc_loss",
            "intrinsic_mean",
            "skipped_samples",
            "expert_episodes",
        ]
        .map(String::from),
    );
    h
}

pub fn record(row: &MetricsRow) -> Vec<String> {
    let f = |v: f64| v.to_string();
    let mut r = vec![LOG_VERSION.to_string(), row.episode.to_string(), row.update.to_string()];
    r.extend(row.returns.iter().copied().map(f));
    r.extend([
        f(row.mean_return),
        f(row.fairness_total),
        f(row.delay_total_s),
        f(row.energy_total_j),
        row.offload_total.to_string(),
        f(row.flight_loss),
        f(row.alloc_loss),
        f(row.critic_loss),
        row.disc_loss.map(f).unwrap_or_default(),
        f(row.intrinsic_mean),
        row.skipped_samples.to_string(),
        row.expert_episodes.to_string(),
    ]);
    r
}

/// Append-only writer; rows are flushed after every batch.
pub struct MetricsLog {
    writer: csv::Writer<File>,
    last_episode: Option<usize>,
}

impl MetricsLog {
    pub fn create(path: impl AsRef<Path>, num_agents: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header(num_agents))?;
        Ok(Self {
            writer,
            last_episode: None,
        })
    }

    pub fn append(&mut self, rows: &[MetricsRow]) -> Result<()> {
        for row in rows {
            if self.last_episode.is_some_and(|e| row.episode <= e) {
                return Err(Error::Config(format!("metrics row for episode {} is out of order", row.episode)));
            }
            self.writer.write_record(record(row))?;
            self.last_episode = Some(row.episode);
        }
        self.writer.flush().map_err(|e| Error::io("metrics log", e))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io("metrics log", e))?;
        self.writer
            .into_inner()
            .map_err(|e| Error::io("metrics log", e.into_error()))?
            .flush()
            .map_err(|e| Error::io("metrics log", e))
    }
}
