//! Saturation detection over a completed load sweep.
//!
//! The Throughput Increase Ratio between two load levels is
//! `TIR = ΔT / ΔO`: the share of the added offered load that came out as
//! extra throughput. Starting at the first level whose PLR exceeds the PDR
//! threshold, every consecutive pair must show `TIR < η` for the sweep to be
//! classified GOOD, meaning PDR@X% sits at the onset of saturation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::LoadLevelStats;

/// PDR@0.5%: highest load with a delivery ratio of at least 99.5%.
pub const DEFAULT_PDR_THRESHOLD: f64 = 0.005;
pub const DEFAULT_ETA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    Good,
    Bad,
    NoSaturation,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Good => "GOOD",
            Classification::Bad => "BAD",
            Classification::NoSaturation => "NO_SATURATION",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TirPoint {
    pub from_load_pps: f64,
    pub to_load_pps: f64,
    pub tir: f64,
}

/// Where PDR@X% lands on a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdrEstimate {
    /// Interpolated crossing load; absent when the first level already
    /// exceeds the threshold.
    pub load_pps: Option<f64>,
    /// Last sampled load before the crossing.
    pub grid_load_pps: Option<f64>,
    /// The threshold was never exceeded; `load_pps` is the top load.
    pub sweep_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationVerdict {
    pub classification: Classification,
    pub pdr_threshold: f64,
    pub eta: f64,
    pub pdr_load_pps: Option<f64>,
    pub pdr_grid_load_pps: Option<f64>,
    pub sweep_exhausted: bool,
    /// First level with PLR above the threshold.
    pub potential_sat_index: Option<usize>,
    pub potential_sat_load_pps: Option<f64>,
    /// Consecutive pairs from the potential saturation point to the end.
    pub tir_series: Vec<TirPoint>,
    /// State at the end of the sweep.
    pub entered_saturation: bool,
    /// Index into `tir_series` where the final run of `TIR < η` began.
    pub saturation_pair_index: Option<usize>,
    /// Highest mean throughput over the sweep.
    pub peak_throughput_pps: f64,
    pub reason: Option<String>,
}

impl SaturationVerdict {
    /// Pairs whose TIR was at or above η.
    pub fn violations(&self) -> impl Iterator<Item = &TirPoint> {
        self.tir_series.iter().filter(move |p| p.tir >= self.eta)
    }
}

/// TIR between two levels, `b` at the higher load.
pub fn tir(a: &LoadLevelStats, b: &LoadLevelStats) -> Result<f64> {
    let d_o = b.offered_load - a.offered_load;
    if d_o <= 0.0 {
        return Err(Error::invalid(format!(
            "TIR needs an increasing load pair, got {} → {} pps",
            a.offered_load, b.offered_load
        )));
    }
    Ok((b.throughput - a.throughput) / d_o)
}

fn check_sweep(levels: &[LoadLevelStats]) -> Result<()> {
    if levels.len() < 2 {
        return Err(Error::invalid("need at least two load levels"));
    }
    if let Some(w) = levels
        .windows(2)
        .find(|w| w[1].offered_load <= w[0].offered_load)
    {
        return Err(Error::invalid(format!(
            "offered loads must be strictly increasing ({} then {} pps)",
            w[0].offered_load, w[1].offered_load
        )));
    }
    Ok(())
}

fn check_ratio(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must lie in (0, 1), got {v}"
        )))
    }
}

/// Locate PDR at `threshold`, interpolating linearly in (load, PLR) between
/// the last compliant level and the first level over the threshold.
pub fn pdr_at(levels: &[LoadLevelStats], threshold: f64) -> Result<PdrEstimate> {
    check_sweep(levels)?;
    check_ratio("PDR threshold", threshold)?;
    let crossing = levels.iter().position(|l| l.plr > threshold);
    Ok(match crossing {
        Some(0) => PdrEstimate {
            load_pps: None,
            grid_load_pps: None,
            sweep_exhausted: false,
        },
        Some(i) => {
            let (a, b) = (&levels[i - 1], &levels[i]);
            let frac = (threshold - a.plr) / (b.plr - a.plr);
            PdrEstimate {
                load_pps: Some(a.offered_load + frac * (b.offered_load - a.offered_load)),
                grid_load_pps: Some(a.offered_load),
                sweep_exhausted: false,
            }
        }
        None => {
            let top = levels[levels.len() - 1].offered_load;
            PdrEstimate {
                load_pps: Some(top),
                grid_load_pps: Some(top),
                sweep_exhausted: true,
            }
        }
    })
}

/// Run the saturation check over a sweep.
///
/// A TIR at or above `eta` after entering saturation clears the detection;
/// the potential saturation point itself is never moved. GOOD requires
/// `TIR < eta` on every pair from the potential point on, and at least two
/// such pairs so that persistence is actually observed.
pub fn detect_saturation(
    levels: &[LoadLevelStats],
    pdr_threshold: f64,
    eta: f64,
) -> Result<SaturationVerdict> {
    check_sweep(levels)?;
    check_ratio("eta", eta)?;
    let pdr = pdr_at(levels, pdr_threshold)?;
    let peak = levels
        .iter()
        .map(|l| l.throughput)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut verdict = SaturationVerdict {
        classification: Classification::NoSaturation,
        pdr_threshold,
        eta,
        pdr_load_pps: pdr.load_pps,
        pdr_grid_load_pps: pdr.grid_load_pps,
        sweep_exhausted: pdr.sweep_exhausted,
        potential_sat_index: None,
        potential_sat_load_pps: None,
        tir_series: Vec::new(),
        entered_saturation: false,
        saturation_pair_index: None,
        peak_throughput_pps: peak,
        reason: None,
    };

    let Some(start) = levels.iter().position(|l| l.plr > pdr_threshold) else {
        verdict.reason = Some("sweep never crossed PDR threshold".into());
        return Ok(verdict);
    };
    verdict.potential_sat_index = Some(start);
    verdict.potential_sat_load_pps = Some(levels[start].offered_load);

    for w in levels[start..].windows(2) {
        verdict.tir_series.push(TirPoint {
            from_load_pps: w[0].offered_load,
            to_load_pps: w[1].offered_load,
            tir: tir(&w[0], &w[1])?,
        });
    }

    let mut entered = false;
    let mut entry = None;
    for (j, p) in verdict.tir_series.iter().enumerate() {
        if p.tir < eta {
            if !entered {
                entered = true;
                entry = Some(j);
            }
        } else {
            entered = false;
            entry = None;
        }
    }
    verdict.entered_saturation = entered;
    verdict.saturation_pair_index = entry;

    let pairs = verdict.tir_series.len();
    let consistent = entered && entry == Some(0);
    verdict.classification = if consistent && pairs >= 2 {
        Classification::Good
    } else {
        Classification::Bad
    };
    verdict.reason = match pairs {
        0 => Some("no load level beyond the potential saturation point".into()),
        1 if consistent => Some(
            "only one load pair beyond the potential saturation point; persistence unverified"
                .into(),
        ),
        _ if !consistent => Some(describe_violations(&verdict)),
        _ => None,
    };
    Ok(verdict)
}

fn mpps(pps: f64) -> String {
    format!("{:.3}", pps / 1e6)
}

fn describe_violations(v: &SaturationVerdict) -> String {
    let pairs: Vec<String> = v
        .violations()
        .map(|p| {
            format!(
                "{}→{} Mpps TIR={:.3}",
                mpps(p.from_load_pps),
                mpps(p.to_load_pps),
                p.tir
            )
        })
        .collect();
    if pairs.is_empty() {
        return "saturation not sustained from the potential saturation point".into();
    }
    format!("TIR ≥ η={} at {}", v.eta, pairs.join(", "))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PdrAccuracy {
    pub accurate: bool,
    pub reason: String,
}

/// PDR@X% is representative exactly when the sweep classified GOOD.
pub fn assess_pdr_accuracy(verdict: &SaturationVerdict) -> PdrAccuracy {
    match verdict.classification {
        Classification::Good => PdrAccuracy {
            accurate: true,
            reason: "saturation holds from the PDR crossing to the end of the sweep".into(),
        },
        Classification::NoSaturation => PdrAccuracy {
            accurate: false,
            reason: "sweep never crossed PDR threshold".into(),
        },
        Classification::Bad => PdrAccuracy {
            accurate: false,
            reason: verdict
                .reason
                .clone()
                .unwrap_or_else(|| describe_violations(verdict)),
        },
    }
}
