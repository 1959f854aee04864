//! PSNR/MSE and benchmark tables.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::image::Image;

pub fn mse(reference: &Image, test: &Image) -> Result<f64> {
    reference.same_dims(test)?;
    if reference.is_empty() {
        return Err(Error::Degenerate("empty image".into()));
    }
    let sum: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / reference.len() as f64)
}

/// `10·log10(peak² / MSE)`; `+∞` when the images are identical.
pub fn psnr(reference: &Image, test: &Image, peak: f64) -> Result<f64> {
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::Config(format!("peak must be > 0, got {peak}")));
    }
    Ok(psnr_from_mse(mse(reference, test)?, peak))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub image: String,
    pub peak: f64,
    pub method: String,
    pub psnr: f64,
    pub mse: f64,
    pub wall_seconds: f64,
    /// Set when the cell failed; the numeric fields are then meaningless.
    pub error: Option<String>,
}

impl EvalRecord {
    pub fn failed(image: &str, peak: f64, method: &str, error: String) -> Self {
        Self {
            image: image.to_string(),
            peak,
            method: method.to_string(),
            psnr: f64::NAN,
            mse: f64::NAN,
            wall_seconds: 0.0,
            error: Some(error),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

pub const CSV_HEADER: &str = "peak,image,method,psnr_db,mse,wall_s,status";
pub const AVERAGE_LABEL: &str = "Average";

/// Rows ordered by peak, then image (in first-seen order); each peak block is
/// followed by one average row per method.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub rows: Vec<EvalRecord>,
}

fn first_seen<'a>(it: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for s in it {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

fn sorted_peaks(records: &[EvalRecord]) -> Vec<f64> {
    let mut peaks: Vec<f64> = records.iter().map(|r| r.peak).collect();
    peaks.sort_by(f64::total_cmp);
    peaks.dedup();
    peaks
}

pub fn build_table(records: &[EvalRecord]) -> Table {
    let images = first_seen(records.iter().map(|r| r.image.as_str()));
    let methods = first_seen(records.iter().map(|r| r.method.as_str()));
    let mut rows = Vec::new();
    for peak in sorted_peaks(records) {
        let at_peak: Vec<&EvalRecord> = records.iter().filter(|r| r.peak == peak).collect();
        for image in &images {
            for method in &methods {
                rows.extend(
                    at_peak
                        .iter()
                        .filter(|r| r.image == *image && r.method == *method)
                        .map(|r| (*r).clone()),
                );
            }
        }
        for method in &methods {
            let ok: Vec<&&EvalRecord> = at_peak
                .iter()
                .filter(|r| r.method == *method && r.is_ok())
                .collect();
            if ok.is_empty() {
                continue;
            }
            let n = ok.len() as f64;
            rows.push(EvalRecord {
                image: AVERAGE_LABEL.to_string(),
                peak,
                method: method.to_string(),
                psnr: ok.iter().map(|r| r.psnr).sum::<f64>() / n,
                mse: ok.iter().map(|r| r.mse).sum::<f64>() / n,
                wall_seconds: ok.iter().map(|r| r.wall_seconds).sum::<f64>() / n,
                error: None,
            });
        }
    }
    Table { rows }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fmt_num(v: f64, prec: usize) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.prec$}")
    }
}

impl Table {
    /// CSV text. Each `comments` line is written first, prefixed with `# `.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = write!(out, "# {c}\r\n");
        }
        out.push_str(CSV_HEADER);
        out.push_str("\r\n");
        for r in &self.rows {
            let status = match &r.error {
                None => "ok".to_string(),
                Some(e) => format!("error: {e}"),
            };
            let fields = [
                r.peak.to_string(),
                csv_field(&r.image),
                csv_field(&r.method),
                fmt_num(r.psnr, 4),
                fmt_num(r.mse, 8),
                fmt_num(r.wall_seconds, 3),
                csv_field(&status),
            ];
            out.push_str(&fields.join(","));
            out.push_str("\r\n");
        }
        out
    }

    /// Images down, (peak, method) across, PSNR in dB.
    pub fn to_text(&self) -> String {
        let peaks = sorted_peaks(&self.rows);
        let methods = first_seen(self.rows.iter().map(|r| r.method.as_str()));
        let mut images = first_seen(
            self.rows
                .iter()
                .filter(|r| r.image != AVERAGE_LABEL)
                .map(|r| r.image.as_str()),
        );
        images.push(AVERAGE_LABEL);

        let mut header = vec![String::new()];
        for p in &peaks {
            for m in &methods {
                header.push(format!("peak={p} {m}"));
            }
        }
        let mut lines = vec![header];
        for image in &images {
            let mut line = vec![image.to_string()];
            for &p in &peaks {
                for m in &methods {
                    let cell = self
                        .rows
                        .iter()
                        .find(|r| r.peak == p && r.method == *m && r.image == *image)
                        .map(|r| if r.is_ok() { fmt_num(r.psnr, 2) } else { "failed".into() })
                        .unwrap_or_else(|| "-".into());
                    line.push(cell);
                }
            }
            lines.push(line);
        }
        let ncol = lines[0].len();
        let widths: Vec<usize> = (0..ncol)
            .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for line in &lines {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (s, &w))| if i == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect();
            out.push_str(cells.join(" | ").trim_end());
            out.push('\n');
        }
        out
    }
}
