//! Batch evaluation over modulation-frequency grids and the bandwidth-ratio
//! rule of thumb.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filterlib::{Frequency, TransferFunction};
use crate::scatter::{compute_scatter, ScatterResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Spacing {
    #[default]
    Linear,
    Logarithmic,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub tf: TransferFunction,
    pub fc: Frequency,
    pub fm_start: Frequency,
    pub fm_stop: Frequency,
    pub points: usize,
    pub spacing: Spacing,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.fm_start.hz() <= 0.0 {
            return Err(Error::invalid("fm start must be positive"));
        }
        if self.fm_stop <= self.fm_start {
            return Err(Error::invalid(format!(
                "empty sweep range: fm stop ({}) must exceed fm start ({})",
                self.fm_stop, self.fm_start
            )));
        }
        if self.fm_stop >= self.fc {
            return Err(Error::invalid(format!(
                "fm stop ({}) must be below the carrier ({})",
                self.fm_stop, self.fc
            )));
        }
        if self.points < 2 {
            return Err(Error::invalid("a sweep needs at least 2 points"));
        }
        Ok(())
    }

    /// Grid of modulation frequencies, ascending, endpoints exact.
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = (self.fm_start.hz(), self.fm_stop.hz());
        let last = self.points - 1;
        (0..self.points)
            .map(|i| {
                if i == 0 {
                    return lo;
                }
                if i == last {
                    return hi;
                }
                let t = i as f64 / last as f64;
                match self.spacing {
                    Spacing::Linear => lo + (hi - lo) * t,
                    Spacing::Logarithmic => lo * (hi / lo).powf(t),
                }
            })
            .collect()
    }
}

/// Scalar figures of one [`ScatterResult`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowMetrics {
    pub hc_mag: f64,
    pub hc_phase_deg: f64,
    pub hd_mag: f64,
    pub hd_phase_deg: f64,
    pub am_am_db: f64,
    pub am_pm_db: f64,
    pub carrier_gain_db: f64,
}

impl From<&ScatterResult> for RowMetrics {
    fn from(r: &ScatterResult) -> Self {
        RowMetrics {
            hc_mag: r.hc.norm(),
            hc_phase_deg: r.hc.arg().to_degrees(),
            hd_mag: r.hd.norm(),
            hd_phase_deg: r.hd.arg().to_degrees(),
            am_am_db: r.am_am_db(),
            am_pm_db: r.am_pm_db(),
            carrier_gain_db: r.carrier_gain_db(),
        }
    }
}

/// One grid point. Failed points keep their frequency and the error.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub fm_hz: f64,
    pub outcome: std::result::Result<RowMetrics, Error>,
}

impl SweepRow {
    pub fn status(&self) -> &'static str {
        match &self.outcome {
            Ok(_) => "ok",
            Err(e) => e.token(),
        }
    }

    pub fn metrics(&self) -> Option<&RowMetrics> {
        self.outcome.as_ref().ok()
    }
}

/// Runs the sweep, one row per grid point in ascending `fm`. A failing point
/// is recorded in its row and does not stop the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let rows = spec
        .grid()
        .into_par_iter()
        .map(|fm_hz| {
            let outcome = Frequency::new(fm_hz)
                .and_then(|fm| compute_scatter(&spec.tf, spec.fc, fm))
                .map(|r| RowMetrics::from(&r));
            SweepRow { fm_hz, outcome }
        })
        .collect();
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleOfThumbQuery {
    pub fm: Frequency,
    pub fc: Frequency,
    /// Required AM→PM suppression, as a positive number of dB.
    pub isolation_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleOfThumbResult {
    /// Bandwidth ratio `f0 / fc` from the `fm / (k·fc)` approximation.
    pub k: f64,
    pub f0: f64,
    /// Exact AM→PM figure of a one-pole lowpass at `f0`.
    pub predicted_db: f64,
    /// Set when `k ≤ 1`: the corner is at or below the carrier and the
    /// approximation no longer holds.
    pub approximation_breakdown: bool,
}

/// Smallest one-pole bandwidth ratio `k` meeting the isolation target
/// according to `|hd| ≈ fm / (k·fc)`, with the exact figure at that `k`.
pub fn min_bandwidth_ratio(q: &RuleOfThumbQuery) -> Result<RuleOfThumbResult> {
    if !(q.fm.hz() > 0.0 && q.fm < q.fc) {
        return Err(Error::invalid(format!(
            "need 0 < fm < fc, got fm = {}, fc = {}",
            q.fm, q.fc
        )));
    }
    if !(q.isolation_db.is_finite() && q.isolation_db > 0.0) {
        return Err(Error::invalid(format!(
            "isolation must be a positive number of dB, got {}",
            q.isolation_db
        )));
    }
    let k = q.fm.hz() / q.fc.hz() * 10f64.powf(q.isolation_db / 20.0);
    let f0 = k * q.fc.hz();
    let tf = TransferFunction::one_pole_lowpass(f0)?;
    let predicted_db = compute_scatter(&tf, q.fc, q.fm)?.am_pm_db();
    Ok(RuleOfThumbResult {
        k,
        f0,
        predicted_db,
        approximation_breakdown: k <= 1.0,
    })
}
