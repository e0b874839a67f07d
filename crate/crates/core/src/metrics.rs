//! Per-load loss statistics.
//!
//! A load level is measured with `K` repeated runs of duration `T` at a
//! constant offered load `O`. Each run yields a loss ratio
//! `L / (O·T)`; the level's PLR is the mean over runs, its spread the sample
//! standard deviation (K−1 divisor), and the 95% confidence limits come from
//! the Student-t critical value with K−1 degrees of freedom.
//!
//! All rates are packets per second.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance between the generator's transmitted count and
/// `offered_load · duration`.
pub const DEFAULT_TX_TOLERANCE: f64 = 0.01;

/// Degrees of freedom beyond which [`t_critical`] returns the normal quantile.
pub const DEFAULT_T_CUTOFF: u64 = 10_000;

/// 97.5th percentile of the standard normal distribution.
pub const Z_975: f64 = 1.959_963_984_540_054;

/// One repetition at one offered load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunObservation {
    /// Offered load, packets/s.
    pub offered_load: u64,
    /// Observation interval, seconds.
    pub duration: f64,
    /// Packets transmitted by the generator.
    pub offered_count: u64,
    /// Packets forwarded by the device under test.
    pub delivered_count: u64,
}

impl RunObservation {
    pub fn new(offered_load: u64, duration: f64, offered_count: u64, delivered_count: u64) -> Self {
        RunObservation {
            offered_load,
            duration,
            offered_count,
            delivered_count,
        }
    }

    /// Lost packets, `offered_count − delivered_count`.
    pub fn lost(&self) -> u64 {
        self.offered_count.saturating_sub(self.delivered_count)
    }

    /// Structural invariants: positive load and duration, and
    /// `offered_count ≥ delivered_count ≥ 0` with `offered_count > 0`.
    pub fn validate(&self) -> Result<()> {
        if self.offered_load == 0 {
            return Err(Error::invalid("offered_load must be > 0"));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::invalid("duration must be > 0"));
        }
        if self.offered_count == 0 || self.delivered_count > self.offered_count {
            return Err(Error::invalid(
                "offered_count ≥ delivered_count ≥ 0 and > 0",
            ));
        }
        Ok(())
    }

    /// Relative gap between the transmitted count and `offered_load · duration`.
    pub fn tx_deviation(&self) -> f64 {
        let nominal = self.offered_load as f64 * self.duration;
        (self.offered_count as f64 - nominal).abs() / nominal
    }

    pub fn check_tx_tolerance(&self, tolerance: f64) -> Result<()> {
        let dev = self.tx_deviation();
        if dev > tolerance {
            return Err(Error::invalid(format!(
                "offered_count {} deviates {:.3}% from offered_load·duration (tolerance {:.3}%)",
                self.offered_count,
                dev * 100.0,
                tolerance * 100.0
            )));
        }
        Ok(())
    }
}

/// Aggregated statistics for one offered load.
///
/// `sigma_plr`, `lcl95` and `ucl95` need at least two runs and are `None`
/// for `k == 1`. `delta_ucl95` is additionally `None` when `plr == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadLevelStats {
    #[serde(rename = "offered_load_pps")]
    pub offered_load: f64,
    pub k: usize,
    pub plr: f64,
    pub dr: f64,
    #[serde(rename = "throughput_pps")]
    pub throughput: f64,
    pub sigma_plr: Option<f64>,
    pub lcl95: Option<f64>,
    pub ucl95: Option<f64>,
    pub delta_ucl95: Option<f64>,
}

impl LoadLevelStats {
    /// Width of the 95% confidence interval, when defined.
    pub fn ci_width(&self) -> Option<f64> {
        Some(self.ucl95? - self.lcl95?)
    }
}

/// Loss ratio of a single run.
pub fn run_plr(run: &RunObservation) -> Result<f64> {
    if run.offered_count == 0 {
        return Err(Error::invalid("offered_count is 0; PLR undefined"));
    }
    if run.delivered_count > run.offered_count {
        return Err(Error::invalid("delivered_count exceeds offered_count"));
    }
    Ok(run.lost() as f64 / run.offered_count as f64)
}

/// Aggregate the runs of one load level.
pub fn aggregate_level(runs: &[RunObservation]) -> Result<LoadLevelStats> {
    let first = runs
        .first()
        .ok_or_else(|| Error::invalid("no runs to aggregate"))?;
    for r in runs {
        if r.offered_load != first.offered_load {
            return Err(Error::invalid(format!(
                "mixed offered loads in one level ({} and {} pps)",
                first.offered_load, r.offered_load
            )));
        }
        if r.duration != first.duration {
            return Err(Error::invalid(format!(
                "mixed durations in one level ({} and {} s)",
                first.duration, r.duration
            )));
        }
        r.validate()?;
    }

    let k = runs.len();
    let kf = k as f64;
    let plrs = runs.iter().map(run_plr).collect::<Result<Vec<_>>>()?;
    let plr = plrs.iter().sum::<f64>() / kf;
    let throughput = runs
        .iter()
        .map(|r| r.delivered_count as f64 / r.duration)
        .sum::<f64>()
        / kf;

    let (sigma_plr, lcl95, ucl95, delta_ucl95) = if k >= 2 {
        let var = plrs.iter().map(|x| (x - plr).powi(2)).sum::<f64>() / (kf - 1.0);
        let sigma = var.sqrt();
        let half = t_critical(k as u64 - 1)? * sigma / kf.sqrt();
        let ucl = plr + half;
        let delta = (plr > 0.0).then(|| (ucl - plr) / plr);
        (Some(sigma), Some(plr - half), Some(ucl), delta)
    } else {
        (None, None, None, None)
    };

    Ok(LoadLevelStats {
        offered_load: first.offered_load as f64,
        k,
        plr,
        dr: 1.0 - plr,
        throughput,
        sigma_plr,
        lcl95,
        ucl95,
        delta_ucl95,
    })
}

// t_{df, 0.025} for df = 1..=100.
#[rustfmt::skip]
const T_975: [f64; 100] = [
    12.706205, 4.302653, 3.182446, 2.776445, 2.570582,
    2.446912, 2.364624, 2.306004, 2.262157, 2.228139,
    2.200985, 2.178813, 2.160369, 2.144787, 2.131450,
    2.119905, 2.109816, 2.100922, 2.093024, 2.085963,
    2.079614, 2.073873, 2.068658, 2.063899, 2.059539,
    2.055529, 2.051831, 2.048407, 2.045230, 2.042272,
    2.039513, 2.036933, 2.034515, 2.032245, 2.030108,
    2.028094, 2.026192, 2.024394, 2.022691, 2.021075,
    2.019541, 2.018082, 2.016692, 2.015368, 2.014103,
    2.012896, 2.011741, 2.010635, 2.009575, 2.008559,
    2.007584, 2.006647, 2.005746, 2.004879, 2.004045,
    2.003241, 2.002465, 2.001717, 2.000995, 2.000298,
    1.999624, 1.998972, 1.998341, 1.997730, 1.997138,
    1.996564, 1.996008, 1.995469, 1.994945, 1.994437,
    1.993943, 1.993464, 1.992997, 1.992543, 1.992102,
    1.991673, 1.991254, 1.990847, 1.990450, 1.990063,
    1.989686, 1.989319, 1.988960, 1.988610, 1.988268,
    1.987934, 1.987608, 1.987290, 1.986979, 1.986675,
    1.986377, 1.986086, 1.985802, 1.985523, 1.985251,
    1.984984, 1.984723, 1.984467, 1.984217, 1.983972,
];

/// Two-sided 95% Student-t critical value `t_{df, 0.025}`.
pub fn t_critical(df: u64) -> Result<f64> {
    t_critical_with_cutoff(df, DEFAULT_T_CUTOFF)
}

/// Like [`t_critical`], returning [`Z_975`] for `df > cutoff`.
///
/// Between the end of the table (df 100) and the cutoff the quantile comes
/// from the Cornish-Fisher expansion around the normal quantile, which is
/// accurate to better than 1e-6 in that range.
pub fn t_critical_with_cutoff(df: u64, cutoff: u64) -> Result<f64> {
    if df < 1 {
        return Err(Error::invalid("degrees of freedom must be ≥ 1"));
    }
    if df > cutoff {
        return Ok(Z_975);
    }
    if let Some(&t) = T_975.get(df as usize - 1) {
        return Ok(t);
    }
    let z = Z_975;
    let v = df as f64;
    let z2 = z * z;
    let g1 = (z2 + 1.0) * z / 4.0;
    let g2 = ((5.0 * z2 + 16.0) * z2 + 3.0) * z / 96.0;
    let g3 = (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) * z / 384.0;
    let g4 = ((((79.0 * z2 + 776.0) * z2 + 1482.0) * z2 - 1920.0) * z2 - 945.0) * z / 92160.0;
    Ok(z + g1 / v + g2 / v.powi(2) + g3 / v.powi(3) + g4 / v.powi(4))
}
