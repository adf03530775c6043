//! Per-iteration metrics rows and their CSV form.

use std::fmt::Write;

pub const METRICS_HEADER: &str = "iter,l1,d_ssim,depth,total,test_psnr,test_ssim,gaussian_count,wall_ms";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iter: usize,
    pub l1: f64,
    pub d_ssim: f64,
    pub depth: f64,
    pub total: f64,
    pub test_psnr: Option<f64>,
    pub test_ssim: Option<f64>,
    pub gaussian_count: usize,
    pub wall_ms: Option<f64>,
}

impl MetricsRow {
    /// One CSV line without the trailing newline. Floats use the shortest
    /// representation that round-trips; absent values are empty.
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            self.iter,
            self.l1,
            self.d_ssim,
            self.depth,
            self.total,
            opt(self.test_psnr),
            opt(self.test_ssim),
            self.gaussian_count,
            opt(self.wall_ms)
        )
        .unwrap();
        s
    }

    /// Parses a line produced by [`MetricsRow::csv_line`].
    pub fn parse(line: &str) -> Option<MetricsRow> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 9 {
            return None;
        }
        let opt = |s: &str| if s.is_empty() { Some(None) } else { s.parse().ok().map(Some) };
        Some(MetricsRow {
            iter: f[0].parse().ok()?,
            l1: f[1].parse().ok()?,
            d_ssim: f[2].parse().ok()?,
            depth: f[3].parse().ok()?,
            total: f[4].parse().ok()?,
            test_psnr: opt(f[5])?,
            test_ssim: opt(f[6])?,
            gaussian_count: f[7].parse().ok()?,
            wall_ms: opt(f[8])?,
        })
    }
}

/// Full CSV text (header plus rows).
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        s += &r.csv_line();
        s.push('\n');
    }
    s
}
