//! CSV/JSON emission for analysis outputs.
//!
//! JSON is the canonical form; CSV mirrors it one record per row for
//! plotting. All writers emit rows in a deterministic order.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::attribution::{HeadReport, NeuronReport};
use crate::editing::CnaRow;
use crate::error::{Error, Result};
use crate::eval::metrics::BiasMetrics;

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(path: &Path, mut w: csv::Writer<std::fs::File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn token_list(tokens: &[crate::attribution::TokenProb]) -> String {
    tokens
        .iter()
        .map(|t| {
            t.token
                .clone()
                .unwrap_or_else(|| format!("#{}", t.token_id))
        })
        .collect::<Vec<_>>()
        .join("|")
}

/// One neuron per row: id fields, scores, dominant position, top/last tokens.
pub fn write_neuron_csv(path: impl AsRef<Path>, reports: &[NeuronReport]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record([
        "rank",
        "kind",
        "layer",
        "head",
        "index",
        "role",
        "importance",
        "query_score",
        "dominant_position",
        "top_tokens",
        "last_tokens",
    ])
    .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for (rank, r) in reports.iter().enumerate() {
        let head = r.id.head.map_or(String::new(), |h| h.to_string());
        w.write_record([
            (rank + 1).to_string(),
            format!("{:?}", r.id.kind).to_lowercase(),
            r.id.layer.to_string(),
            head,
            r.id.index.to_string(),
            format!("{:?}", r.role),
            r.importance.map_or(String::new(), |v| v.to_string()),
            r.query_score.map_or(String::new(), |v| v.to_string()),
            r.dominant_position.to_string(),
            token_list(&r.projection.top_tokens),
            token_list(&r.projection.last_tokens),
        ])
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    finish(path, w)
}

/// Layer x head score matrix; row = layer, one column per head.
pub fn write_head_grid_csv(path: impl AsRef<Path>, grid: &[Vec<f64>]) -> Result<()> {
    let path = path.as_ref();
    let n_heads = grid.first().map_or(0, Vec::len);
    let mut w = csv_writer(path)?;
    let mut header = vec!["layer".to_string()];
    header.extend((0..n_heads).map(|h| format!("h{h}")));
    w.write_record(&header)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for (l, row) in grid.iter().enumerate() {
        let mut record = vec![l.to_string()];
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    finish(path, w)
}

pub fn write_top_heads_csv(path: impl AsRef<Path>, heads: &[HeadReport]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["rank", "layer", "head", "logit_score", "causal_score"])
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for (rank, h) in heads.iter().enumerate() {
        w.write_record([
            (rank + 1).to_string(),
            h.layer.to_string(),
            h.head.to_string(),
            h.logit_score.map_or(String::new(), |v| v.to_string()),
            h.causal_score.map_or(String::new(), |v| v.to_string()),
        ])
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    finish(path, w)
}

/// Overall row plus one row per category.
pub fn write_bias_csv(path: impl AsRef<Path>, metrics: &BiasMetrics) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record([
        "category",
        "pairs_evaluated",
        "pairs_skipped",
        "mean_abs_entropy_diff",
        "mean_signed_entropy_diff",
        "proportion_male_lower",
    ])
    .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for c in &metrics.per_category {
        w.write_record([
            c.category.clone(),
            c.pairs_evaluated.to_string(),
            c.pairs_skipped.to_string(),
            c.mean_abs_entropy_diff.to_string(),
            c.mean_signed_entropy_diff.to_string(),
            c.proportion_male_lower.to_string(),
        ])
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    w.write_record([
        "all".to_string(),
        metrics.pairs_evaluated.to_string(),
        metrics.pairs_skipped.to_string(),
        metrics.mean_abs_entropy_diff.to_string(),
        metrics.mean_signed_entropy_diff.to_string(),
        metrics.proportion_male_lower.to_string(),
    ])
    .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    finish(path, w)
}

pub fn write_cna_csv(path: impl AsRef<Path>, rows: &[CnaRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["neuron", "coef_before", "coef_after", "top_tokens"])
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for r in rows {
        w.write_record([
            r.neuron.to_string(),
            r.coef_before.to_string(),
            r.coef_after.to_string(),
            token_list(&r.projection.top_tokens),
        ])
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    finish(path, w)
}

/// Frequency curve rows (k, fraction).
pub fn write_frequency_csv(path: impl AsRef<Path>, curve: &[(usize, f64)]) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(file, "k,fraction").map_err(|e| Error::io(path, e))?;
    for (k, f) in curve {
        writeln!(file, "{k},{f}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
