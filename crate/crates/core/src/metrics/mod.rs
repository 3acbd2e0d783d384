//! Image quality, timing and CSV reports.

mod quality;
mod report;

pub use quality::{psnr, ssim, ssim_with_peak, SSIM_SIGMA, SSIM_WINDOW};
pub use report::{
    aggregate, read_aggregates_csv, read_records_csv, time_op, write_aggregates_csv, write_records_csv,
    AggregateRow, EvalRecord, EvalReport,
};
