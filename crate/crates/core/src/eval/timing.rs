//! Wall-clock cost of one training epoch, per variant.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Variant;

/// Seconds-per-epoch per variant, with the headline ratio precomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    /// Mean wall-clock seconds of one epoch, keyed by variant label.
    pub seconds_per_epoch: BTreeMap<String, f64>,
    /// `rdiffbr / backbone` epoch-time ratio, when both were measured.
    pub overhead_ratio: Option<f64>,
    /// How many consecutive epochs each mean averages.
    pub epochs_averaged: usize,
}

/// Time `epochs_to_average` consecutive calls of each variant's epoch handle
/// and average them. The handles should run one full training epoch each;
/// errors abort the measurement.
pub fn timing_report(
    variants: &mut [(String, &mut dyn FnMut() -> Result<()>)],
    epochs_to_average: usize,
) -> Result<TimingReport> {
    if epochs_to_average == 0 {
        return Err(Error::invalid(
            "epochs_to_average",
            "need at least one epoch to time",
        ));
    }
    let mut seconds_per_epoch = BTreeMap::new();
    for (label, run_epoch) in variants.iter_mut() {
        let mut total = 0.0f64;
        for _ in 0..epochs_to_average {
            let start = Instant::now();
            run_epoch()?;
            total += start.elapsed().as_secs_f64();
        }
        seconds_per_epoch.insert(label.clone(), total / epochs_to_average as f64);
    }
    let overhead_ratio = match (
        seconds_per_epoch.get(Variant::RDiffBr.label()),
        seconds_per_epoch.get(Variant::Backbone.label()),
    ) {
        (Some(&full), Some(&base)) if base > 0.0 => Some(full / base),
        _ => None,
    };
    Ok(TimingReport {
        seconds_per_epoch,
        overhead_ratio,
        epochs_averaged: epochs_to_average,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn each_variant_runs_exactly_the_averaged_epoch_count() {
        let mut a_calls = 0usize;
        let mut b_calls = 0usize;
        let mut run_a = || -> Result<()> {
            a_calls += 1;
            Ok(())
        };
        let mut run_b = || -> Result<()> {
            b_calls += 1;
            Ok(())
        };
        let report = timing_report(
            &mut [
                ("backbone".to_string(), &mut run_a),
                ("rdiffbr".to_string(), &mut run_b),
            ],
            5,
        )
        .unwrap();
        assert_eq!((a_calls, b_calls), (5, 5));
        assert_eq!(report.epochs_averaged, 5);
        assert_eq!(report.seconds_per_epoch.len(), 2);
        let ratio = report.overhead_ratio.unwrap();
        assert!(ratio > 0.0, "ratio {ratio} should be positive");
    }

    #[test]
    fn ratio_needs_both_reference_variants() {
        let mut run = || -> Result<()> { Ok(()) };
        let report = timing_report(&mut [("rdiffbr".to_string(), &mut run)], 2).unwrap();
        assert!(report.overhead_ratio.is_none());
    }

    #[test]
    fn zero_epochs_is_rejected() {
        let report = timing_report(&mut [], 0);
        assert!(report.is_err());
    }

    #[test]
    fn handle_errors_abort_the_run() {
        let mut run = || -> Result<()> { Err(Error::invalid("boom", "synthetic failure")) };
        assert!(timing_report(&mut [("backbone".to_string(), &mut run)], 3).is_err());
    }
}
