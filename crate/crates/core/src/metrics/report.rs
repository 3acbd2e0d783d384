use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wall time of `action` on the monotonic clock, with its result.
pub fn time_op<R>(action: impl FnOnce() -> R) -> (R, f64) {
    let start = Instant::now();
    let out = action();
    (out, start.elapsed().as_secs_f64())
}

/// One reconstruction of one image. Serialized as
/// `algorithm,image,ratio,psnr_db,ssim,seconds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub algorithm: String,
    pub image: String,
    pub ratio: f64,
    pub psnr_db: f64,
    pub ssim: f64,
    pub seconds: f64,
}

/// Means over one `(algorithm, ratio)` group. Serialized as
/// `algorithm,ratio,mean_psnr_db,mean_ssim,mean_seconds,n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algorithm: String,
    pub ratio: f64,
    /// Over finite PSNR values only; infinite when every member is exact.
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
    pub mean_seconds: f64,
    /// Group size, including records left out of the PSNR mean.
    pub n: usize,
    /// Members with infinite PSNR (exact reconstructions).
    #[serde(skip)]
    pub infinite_psnr: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub records: Vec<EvalRecord>,
    /// Sorted by algorithm name, then ratio.
    pub aggregates: Vec<AggregateRow>,
    pub warnings: Vec<String>,
}

/// Groups records by `(algorithm, ratio)` and averages each group.
pub fn aggregate(records: &[EvalRecord]) -> EvalReport {
    let mut groups: BTreeMap<(String, u64), Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        // ratios are positive, so their bit patterns sort numerically
        groups.entry((r.algorithm.clone(), r.ratio.to_bits())).or_default().push(r);
    }
    let mut warnings = Vec::new();
    let aggregates = groups
        .into_iter()
        .map(|((algorithm, bits), members)| {
            let n = members.len();
            let finite: Vec<f64> = members.iter().map(|r| r.psnr_db).filter(|p| p.is_finite()).collect();
            let infinite_psnr = n - finite.len();
            if infinite_psnr > 0 {
                let msg = format!(
                    "{algorithm} at ratio {}: {infinite_psnr} of {n} records have infinite PSNR and are left out of the PSNR mean",
                    f64::from_bits(bits)
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
            let mean = |v: &mut dyn Iterator<Item = f64>, count: usize| v.sum::<f64>() / count as f64;
            AggregateRow {
                ratio: f64::from_bits(bits),
                mean_psnr_db: if finite.is_empty() {
                    f64::INFINITY
                } else {
                    mean(&mut finite.iter().copied(), finite.len())
                },
                mean_ssim: mean(&mut members.iter().map(|r| r.ssim), n),
                mean_seconds: mean(&mut members.iter().map(|r| r.seconds), n),
                n,
                infinite_psnr,
                algorithm,
            }
        })
        .collect();
    EvalReport {
        records: records.to_vec(),
        aggregates,
        warnings,
    }
}

impl EvalReport {
    /// Adds a warning for every expected group that has no records.
    pub fn expect_groups(&mut self, algorithms: &[&str], ratios: &[f64]) {
        for alg in algorithms {
            for &ratio in ratios {
                let present = self
                    .aggregates
                    .iter()
                    .any(|a| a.algorithm == *alg && a.ratio == ratio);
                if !present {
                    let msg = format!("{alg} at ratio {ratio}: no records, group omitted");
                    log::warn!("{msg}");
                    self.warnings.push(msg);
                }
            }
        }
    }
}

pub fn write_records_csv(records: &[EvalRecord], out: impl Write) -> Result<()> {
    write_rows(records, out)
}

pub fn read_records_csv(input: impl Read) -> Result<Vec<EvalRecord>> {
    read_rows(input, &["algorithm", "image", "ratio", "psnr_db", "ssim", "seconds"])
}

pub fn write_aggregates_csv(rows: &[AggregateRow], out: impl Write) -> Result<()> {
    write_rows(rows, out)
}

pub fn read_aggregates_csv(input: impl Read) -> Result<Vec<AggregateRow>> {
    read_rows(
        input,
        &["algorithm", "ratio", "mean_psnr_db", "mean_ssim", "mean_seconds", "n"],
    )
}

fn write_rows<S: Serialize>(rows: &[S], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(Error::csv)?;
    }
    w.flush().map_err(|e| Error::io("csv stream", e))
}

fn read_rows<S: for<'de> Deserialize<'de>>(input: impl Read, header: &[&str]) -> Result<Vec<S>> {
    let mut r = csv::Reader::from_reader(input);
    let found: Vec<String> = r.headers().map_err(Error::csv)?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(Error::format(
            "csv",
            format!("header: expected {}, found {}", header.join(","), found.join(",")),
        ));
    }
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(Error::csv)
}
