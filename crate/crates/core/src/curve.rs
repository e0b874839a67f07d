//! Synthetic load-loss curves and a binomial sampler over them.
//!
//! The ideal model forwards everything up to the saturation load and then
//! holds throughput flat at `t_sat`. The realistic model adds a small
//! pre-saturation loss ramp, a non-zero loss at saturation, and a linear
//! throughput decline ("trashing") past `o_trash`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::RunObservation;

/// Anything that maps an offered load (pps) to an expected loss ratio.
pub trait LoadLossModel {
    /// Expected packet loss ratio at `load` packets/s, in `[0, 1]`.
    fn plr(&self, load: f64) -> f64;

    /// Expected throughput at `load` packets/s.
    fn throughput(&self, load: f64) -> f64 {
        load * (1.0 - self.plr(load))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelMode {
    Ideal,
    Realistic,
}

/// Low-load loss ramp: PLR is 0 below `o_floor`, then rises log-linearly
/// from `plr_floor` at `o_floor` to the model's `plr_at_sat` at `o_sat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreSatRamp {
    pub plr_floor: f64,
    pub o_floor: f64,
}

impl PreSatRamp {
    /// `plr_floor = 1e-6` at half the saturation load.
    pub fn default_for(o_sat: f64) -> Self {
        PreSatRamp {
            plr_floor: 1e-6,
            o_floor: 0.5 * o_sat,
        }
    }
}

/// Parameters of the ideal or realistic curve. Loads in packets/s.
///
/// In ideal mode `plr_at_sat` is 0, `o_trash` is `o_sat` and `m` is unused.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModel {
    pub o_sat: f64,
    pub plr_at_sat: f64,
    pub o_trash: f64,
    pub m: f64,
    pub pre_sat_ramp: Option<PreSatRamp>,
    pub mode: ModelMode,
}

impl SyntheticModel {
    pub fn ideal(o_sat: f64) -> Result<Self> {
        let model = SyntheticModel {
            o_sat,
            plr_at_sat: 0.0,
            o_trash: o_sat,
            m: 1.0,
            pre_sat_ramp: None,
            mode: ModelMode::Ideal,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn realistic(
        o_sat: f64,
        plr_at_sat: f64,
        o_trash: f64,
        m: f64,
        pre_sat_ramp: Option<PreSatRamp>,
    ) -> Result<Self> {
        let model = SyntheticModel {
            o_sat,
            plr_at_sat,
            o_trash,
            m,
            pre_sat_ramp,
            mode: ModelMode::Realistic,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.o_sat, self.plr_at_sat, self.o_trash, self.m]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("model parameters must be finite"));
        }
        if self.o_sat <= 0.0 {
            return Err(Error::invalid("o_sat must be > 0"));
        }
        if !(0.0..1.0).contains(&self.plr_at_sat) {
            return Err(Error::invalid("plr_at_sat must lie in [0, 1)"));
        }
        if self.o_trash < self.o_sat {
            return Err(Error::invalid("o_trash must be ≥ o_sat"));
        }
        if self.m <= 0.0 {
            return Err(Error::invalid("m must be > 0"));
        }
        match (self.mode, self.pre_sat_ramp) {
            (ModelMode::Ideal, Some(_)) => {
                return Err(Error::invalid("ideal model takes no pre-saturation ramp"))
            }
            (ModelMode::Ideal, None) if self.plr_at_sat != 0.0 => {
                return Err(Error::invalid("ideal model has zero loss at saturation"))
            }
            (_, Some(r)) => {
                if !(0.0..=self.plr_at_sat).contains(&r.plr_floor) {
                    return Err(Error::invalid("plr_floor must lie in [0, plr_at_sat]"));
                }
                if !(r.o_floor > 0.0 && r.o_floor < self.o_sat) {
                    return Err(Error::invalid("o_floor must lie in (0, o_sat)"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Saturation throughput `o_sat · (1 − plr_at_sat)`.
    pub fn t_sat(&self) -> f64 {
        self.o_sat * (1.0 - self.plr_at_sat)
    }

    /// Ideal-curve PLR: 0 up to `o_sat`, `1 − t_sat/o` beyond.
    pub fn ideal_plr(&self, o: f64) -> Result<f64> {
        if self.mode != ModelMode::Ideal {
            return Err(Error::invalid("ideal_plr needs an ideal model"));
        }
        check_load(o)?;
        Ok(ideal(o, self.o_sat, self.t_sat()))
    }

    /// Realistic throughput. Flat at `t_sat` on `(o_sat, o_trash]`, then
    /// `t_sat · max(0, 1 − (o − o_trash)/m)`. At or below `o_sat` this is
    /// `o · (1 − plr(o))`.
    pub fn realistic_throughput(&self, o: f64) -> Result<f64> {
        if self.mode != ModelMode::Realistic {
            return Err(Error::invalid(
                "realistic_throughput needs a realistic model",
            ));
        }
        check_load(o)?;
        Ok(self.realistic_throughput_unchecked(o))
    }

    /// Realistic PLR: the pre-saturation ramp up to `o_sat`, then
    /// `1 − T(o)/o`. Exactly 1 once throughput reaches 0.
    pub fn realistic_plr(&self, o: f64) -> Result<f64> {
        if self.mode != ModelMode::Realistic {
            return Err(Error::invalid("realistic_plr needs a realistic model"));
        }
        check_load(o)?;
        Ok(self.realistic_plr_unchecked(o))
    }

    fn realistic_throughput_unchecked(&self, o: f64) -> f64 {
        if o <= self.o_sat {
            return o * (1.0 - self.pre_sat_plr(o));
        }
        let f = if o <= self.o_trash {
            1.0
        } else {
            (1.0 - (o - self.o_trash) / self.m).max(0.0)
        };
        f * self.t_sat()
    }

    fn realistic_plr_unchecked(&self, o: f64) -> f64 {
        if o <= self.o_sat {
            self.pre_sat_plr(o)
        } else {
            1.0 - self.realistic_throughput_unchecked(o) / o
        }
    }

    fn pre_sat_plr(&self, o: f64) -> f64 {
        if o >= self.o_sat {
            return self.plr_at_sat;
        }
        let Some(ramp) = self.pre_sat_ramp else {
            return 0.0;
        };
        if o < ramp.o_floor || self.plr_at_sat == 0.0 {
            return 0.0;
        }
        let frac = (o - ramp.o_floor) / (self.o_sat - ramp.o_floor);
        if ramp.plr_floor == 0.0 {
            // no log anchor; fall back to linear
            return frac * self.plr_at_sat;
        }
        let lo = ramp.plr_floor.log10();
        let hi = self.plr_at_sat.log10();
        10f64.powf(lo + frac * (hi - lo))
    }
}

impl LoadLossModel for SyntheticModel {
    fn plr(&self, load: f64) -> f64 {
        if load <= 0.0 {
            return 0.0;
        }
        match self.mode {
            ModelMode::Ideal => ideal(load, self.o_sat, self.t_sat()),
            ModelMode::Realistic => self.realistic_plr_unchecked(load),
        }
    }

    fn throughput(&self, load: f64) -> f64 {
        match self.mode {
            ModelMode::Ideal => load.min(self.t_sat()).max(0.0),
            ModelMode::Realistic if load > 0.0 => self.realistic_throughput_unchecked(load),
            ModelMode::Realistic => 0.0,
        }
    }
}

fn ideal(o: f64, o_sat: f64, t_sat: f64) -> f64 {
    if o <= o_sat {
        0.0
    } else {
        1.0 - t_sat / o
    }
}

fn check_load(o: f64) -> Result<()> {
    if o.is_finite() && o > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("offered load must be > 0"))
    }
}

/// Throughput given by linear interpolation between `(load, throughput)`
/// knots. Below the first knot throughput scales proportionally with load;
/// past the last knot it stays flat.
///
/// Handy for shaping curves the closed-form models cannot express, such as
/// a slow, partial transition into saturation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseThroughput {
    knots: Vec<(f64, f64)>,
}

impl PiecewiseThroughput {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::invalid("at least one knot is required"));
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::invalid("knot loads must be strictly increasing"));
            }
        }
        for &(o, t) in &knots {
            if !(o.is_finite() && t.is_finite() && o > 0.0 && t >= 0.0 && t <= o) {
                return Err(Error::invalid(format!(
                    "knot ({o}, {t}) must satisfy 0 ≤ throughput ≤ load and load > 0"
                )));
            }
        }
        Ok(PiecewiseThroughput { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }
}

impl LoadLossModel for PiecewiseThroughput {
    fn throughput(&self, load: f64) -> f64 {
        if load <= 0.0 {
            return 0.0;
        }
        let (o0, t0) = self.knots[0];
        if load <= o0 {
            return load * t0 / o0;
        }
        for w in self.knots.windows(2) {
            let ((oa, ta), (ob, tb)) = (w[0], w[1]);
            if load <= ob {
                return ta + (tb - ta) * (load - oa) / (ob - oa);
            }
        }
        self.knots[self.knots.len() - 1].1.min(load)
    }

    fn plr(&self, load: f64) -> f64 {
        if load <= 0.0 {
            return 0.0;
        }
        (1.0 - self.throughput(load) / load).clamp(0.0, 1.0)
    }
}

fn check_sweep(loads: &[u64], duration: f64, k: usize) -> Result<()> {
    if loads.is_empty() {
        return Err(Error::invalid("no offered loads to sample"));
    }
    if loads[0] == 0 {
        return Err(Error::invalid("offered loads must be > 0"));
    }
    if loads.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("offered loads must be strictly increasing"));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::invalid("duration must be > 0"));
    }
    if k == 0 {
        return Err(Error::invalid("run count must be ≥ 1"));
    }
    Ok(())
}

fn offered_count(load: u64, duration: f64) -> u64 {
    (load as f64 * duration).round() as u64
}

/// Draw `k` runs per load with binomial delivered counts. Output is ordered
/// by load then run and depends only on the arguments.
pub fn sample_campaign<M: LoadLossModel + ?Sized>(
    model: &M,
    loads: &[u64],
    duration: f64,
    k: usize,
    seed: u64,
) -> Result<Vec<RunObservation>> {
    check_sweep(loads, duration, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(loads.len() * k);
    for &load in loads {
        let n = offered_count(load, duration);
        if n == 0 {
            return Err(Error::invalid(format!(
                "load {load} pps over {duration} s transmits no packets"
            )));
        }
        let p_deliver = (1.0 - model.plr(load as f64)).clamp(0.0, 1.0);
        let dist = Binomial::new(n, p_deliver)
            .map_err(|e| Error::invalid(format!("binomial({n}, {p_deliver}): {e}")))?;
        for _ in 0..k {
            out.push(RunObservation::new(
                load,
                duration,
                n,
                dist.sample(&mut rng),
            ));
        }
    }
    Ok(out)
}

/// Noiseless counterpart of [`sample_campaign`]: every run delivers the
/// expected count rounded to the nearest packet.
pub fn expected_campaign<M: LoadLossModel + ?Sized>(
    model: &M,
    loads: &[u64],
    duration: f64,
    k: usize,
) -> Result<Vec<RunObservation>> {
    check_sweep(loads, duration, k)?;
    let mut out = Vec::with_capacity(loads.len() * k);
    for &load in loads {
        let n = offered_count(load, duration);
        let delivered = ((n as f64) * (1.0 - model.plr(load as f64))).round() as u64;
        let delivered = delivered.min(n);
        out.extend(std::iter::repeat_n(
            RunObservation::new(load, duration, n, delivered),
            k,
        ));
    }
    Ok(out)
}
