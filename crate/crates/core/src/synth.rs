//! Synthetic combined-sewer data.
//!
//! Rain is a marked point process: Poisson arrivals per hour, Weibull
//! intensities (shape below 1 gives a tail heavier than exponential) and
//! an exponential decay after each burst. The basin level follows
//!
//! ```text
//! runoff(t) = g * runoff(t-1) + (1 - g) * k * rain(t)
//! level(t)  = clamp(level(t-1) * (1 - drain) + runoff(t) + inflow + eps, 0, capacity)
//! ```
//!
//! where `g = exp(-1 / routing_hours)` models pipe storage upstream of the
//! basin and `inflow` is a constant dry-weather wastewater inflow. Pump energy
//! grows with the level, the valve opens above a level threshold and the
//! nuisance channels are independent AR(1) noise. `rain_forecast` is the
//! rain series plus Gaussian noise and is the only future covariate.

use chrono::{DateTime, TimeZone, Utc};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, Weibull};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ChannelSpec, Role, TimeSeriesFrame};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Number of hourly steps.
    pub length: usize,
    pub seed: u64,
    /// Mean number of rain bursts per day.
    pub rain_event_rate: f64,
    /// Weibull shape of the burst intensity.
    pub intensity_shape: f64,
    /// Weibull scale of the burst intensity (mm/h).
    pub intensity_scale: f64,
    /// e-folding time of a burst, hours.
    pub rain_decay_hours: f64,
    pub basin_capacity: f64,
    /// Fraction of the level drained per hour.
    pub drain_rate: f64,
    /// Level gain per unit of rain.
    pub rain_gain: f64,
    /// e-folding time of the pipe storage between catchment and basin,
    /// hours. Zero sends runoff straight into the basin.
    pub routing_hours: f64,
    /// Constant dry-weather inflow per hour.
    pub dry_inflow: f64,
    pub initial_level: f64,
    pub noise_sd: f64,
    pub n_aux_channels: usize,
    pub forecast_noise_sd: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::canonical(0)
    }
}

impl SynthConfig {
    /// The benchmark configuration: one year of hourly data.
    pub fn canonical(seed: u64) -> Self {
        Self {
            length: 24 * 365,
            seed,
            rain_event_rate: 0.3,
            intensity_shape: 0.8,
            intensity_scale: 2.0,
            rain_decay_hours: 3.0,
            basin_capacity: 130.0,
            drain_rate: 0.08,
            rain_gain: 3.0,
            routing_hours: 2.0,
            dry_inflow: 1.6,
            initial_level: 20.0,
            noise_sd: 0.5,
            n_aux_channels: 2,
            forecast_noise_sd: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("intensity_shape", self.intensity_shape),
            ("intensity_scale", self.intensity_scale),
            ("rain_decay_hours", self.rain_decay_hours),
            ("basin_capacity", self.basin_capacity),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let non_negative = [
            ("rain_event_rate", self.rain_event_rate),
            ("rain_gain", self.rain_gain),
            ("routing_hours", self.routing_hours),
            ("dry_inflow", self.dry_inflow),
            ("initial_level", self.initial_level),
            ("noise_sd", self.noise_sd),
            ("forecast_noise_sd", self.forecast_noise_sd),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !(self.drain_rate > 0.0 && self.drain_rate < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "drain_rate {} outside (0, 1)",
                self.drain_rate
            )));
        }
        if self.length == 0 {
            return Err(Error::InvalidArgument("length must be positive".into()));
        }
        Ok(())
    }
}

pub const TARGET: &str = "level";
pub const RAIN: &str = "rain";
pub const RAIN_FORECAST: &str = "rain_forecast";

/// Fixed start of every generated frame.
pub fn synth_start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap()
}

/// Rain series alone.
pub fn rain_series(cfg: &SynthConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = cfg.length;
    let mut rain = vec![0.0; n];
    if cfg.rain_event_rate == 0.0 {
        return Ok(rain);
    }
    let mut draw = rng::stream(cfg.seed, &["synth", "rain"]);
    let arrivals = Poisson::new(cfg.rain_event_rate / 24.0).expect("positive rate");
    let intensity = Weibull::new(cfg.intensity_scale, cfg.intensity_shape).expect("validated");
    let tail = (cfg.rain_decay_hours * 12.0).ceil() as usize;
    for t in 0..n {
        let bursts: f64 = arrivals.sample(&mut draw);
        for _ in 0..bursts as usize {
            let peak: f64 = intensity.sample(&mut draw);
            for (j, cell) in rain[t..n.min(t + tail)].iter_mut().enumerate() {
                *cell += peak * (-(j as f64) / cfg.rain_decay_hours).exp();
            }
        }
    }
    Ok(rain)
}

pub fn generate(cfg: &SynthConfig) -> Result<TimeSeriesFrame> {
    let rain = rain_series(cfg)?;
    let n = cfg.length;
    let cap = cfg.basin_capacity;

    let mut level = vec![0.0; n];
    let mut noise = rng::stream(cfg.seed, &["synth", "level"]);
    let eps = Normal::new(0.0, cfg.noise_sd).expect("validated");
    let mut prev = cfg.initial_level.min(cap);
    let keep = if cfg.routing_hours > 0.0 {
        (-1.0 / cfg.routing_hours).exp()
    } else {
        0.0
    };
    let mut runoff = 0.0;
    for t in 0..n {
        let e = if cfg.noise_sd > 0.0 {
            eps.sample(&mut noise)
        } else {
            0.0
        };
        runoff = keep * runoff + (1.0 - keep) * cfg.rain_gain * rain[t];
        let next = prev * (1.0 - cfg.drain_rate) + runoff + cfg.dry_inflow + e;
        level[t] = next.clamp(0.0, cap);
        prev = level[t];
    }

    let mut aux_rng = rng::stream(cfg.seed, &["synth", "pump"]);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let pump: Vec<f64> = level
        .iter()
        .map(|l| 5.0 + 40.0 * (l / cap).powf(1.5) + 0.5 * unit.sample(&mut aux_rng))
        .collect();
    let valve: Vec<f64> = level
        .iter()
        .map(|l| if *l > 0.6 * cap { 1.0 } else { 0.0 })
        .collect();

    let mut fc_rng = rng::stream(cfg.seed, &["synth", "rain_forecast"]);
    let forecast: Vec<f64> = rain
        .iter()
        .map(|r| {
            if cfg.forecast_noise_sd > 0.0 {
                r + cfg.forecast_noise_sd * unit.sample(&mut fc_rng)
            } else {
                *r
            }
        })
        .collect();

    let mut channels = vec![
        ChannelSpec::new(TARGET, Role::Target).with_unit("cm"),
        ChannelSpec::new(RAIN, Role::PastCovariate).with_unit("mm/h"),
        ChannelSpec::new(RAIN_FORECAST, Role::FutureCovariate).with_unit("mm/h"),
        ChannelSpec::new("pump_energy", Role::PastCovariate).with_unit("kWh"),
        ChannelSpec::new("valve_state", Role::PastCovariate),
    ];
    let mut data = vec![level, rain, forecast, pump, valve];
    for i in 0..cfg.n_aux_channels {
        let name = format!("aux_{i}");
        let mut r = rng::stream(cfg.seed, &["synth", &name]);
        let mut x = 0.0;
        let series = (0..n)
            .map(|_| {
                x = 0.9 * x + r.random::<f64>() - 0.5;
                x
            })
            .collect();
        channels.push(ChannelSpec::new(name, Role::PastCovariate));
        data.push(series);
    }
    TimeSeriesFrame::new(synth_start(), 1, channels, data)
}
