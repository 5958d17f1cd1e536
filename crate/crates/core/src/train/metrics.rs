use std::io::Write;

use crate::error::Result;

pub const METRICS_HEADER: &str = "epoch,loss,rmse_train,rmse_test,seconds";

/// Summary of one completed epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean training BCE over the epoch's samples.
    pub loss: f64,
    pub rmse_train: Option<f64>,
    pub rmse_test: Option<f64>,
    /// Wall-clock seconds spent in the epoch.
    pub seconds: f64,
}

/// CSV metrics log. The header goes out with the first row; floats use the
/// shortest representation that parses back to the same value; absent
/// evaluations are empty fields.
pub struct MetricsCsv<W: Write> {
    out: W,
    header_written: bool,
    record_timing: bool,
}

impl<W: Write> MetricsCsv<W> {
    /// With `record_timing` off the `seconds` column is written as `0`, so
    /// reruns produce byte-identical logs.
    pub fn new(out: W, record_timing: bool) -> Self {
        MetricsCsv {
            out,
            header_written: false,
            record_timing,
        }
    }

    pub fn log(&mut self, r: &MetricsRecord) -> Result<()> {
        self.log_io(r).map_err(|e| crate::Error::io("metrics log", e))
    }

    fn log_io(&mut self, r: &MetricsRecord) -> std::io::Result<()> {
        if !self.header_written {
            writeln!(self.out, "{METRICS_HEADER}")?;
            self.header_written = true;
        }
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let seconds = if self.record_timing { r.seconds } else { 0.0 };
        writeln!(
            self.out,
            "{},{},{},{},{}",
            r.epoch,
            r.loss,
            opt(r.rmse_train),
            opt(r.rmse_test),
            seconds
        )?;
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Parses rows written by [`MetricsCsv`].
pub fn parse_metrics(text: &str) -> Option<Vec<MetricsRecord>> {
    let mut lines = text.lines();
    if lines.next()? != METRICS_HEADER {
        return None;
    }
    let opt = |s: &str| -> Option<Option<f64>> {
        if s.is_empty() { Some(None) } else { s.parse().ok().map(Some) }
    };
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return None;
            }
            Some(MetricsRecord {
                epoch: f[0].parse().ok()?,
                loss: f[1].parse().ok()?,
                rmse_train: opt(f[2])?,
                rmse_test: opt(f[3])?,
                seconds: f[4].parse().ok()?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_row_count() {
        let mut log = MetricsCsv::new(Vec::new(), true);
        for epoch in 1..=3 {
            log.log(&MetricsRecord {
                epoch,
                loss: 0.5,
                rmse_train: None,
                rmse_test: None,
                seconds: 1.0,
            })
            .unwrap();
        }
        let text = String::from_utf8(log.into_inner()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap(), "epoch,loss,rmse_train,rmse_test,seconds");
    }

    #[test]
    fn values_parse_back_exactly() {
        let records = vec![
            MetricsRecord { epoch: 1, loss: std::f64::consts::LN_2, rmse_train: Some(1.0 / 3.0), rmse_test: Some(2e-3), seconds: 12.345 },
            MetricsRecord { epoch: 2, loss: 0.1 + 0.2, rmse_train: None, rmse_test: Some(f64::MIN_POSITIVE), seconds: 0.0 },
        ];
        let mut log = MetricsCsv::new(Vec::new(), true);
        for r in &records {
            log.log(r).unwrap();
        }
        let parsed = parse_metrics(&String::from_utf8(log.into_inner()).unwrap()).unwrap();
        assert_eq!(parsed, records);
    }

    #[test]
    fn timing_can_be_suppressed() {
        let mut log = MetricsCsv::new(Vec::new(), false);
        log.log(&MetricsRecord { epoch: 1, loss: 0.25, rmse_train: None, rmse_test: None, seconds: 3.5 })
            .unwrap();
        let text = String::from_utf8(log.into_inner()).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "1,0.25,,,0");
    }
}
