use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{ArrayGeometry, CarrierGrid, PathComponent, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

/// Inclusive range for the number of paths per channel sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathCountRange {
    pub min: usize,
    pub max: usize,
}

fn full_circle() -> [f64; 2] {
    [0.0, 2.0 * PI]
}

/// Parameters of the synthetic scenario used to draw channel samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_t: usize,
    pub n_c: usize,
    /// Element spacing of the uniform linear array, meters.
    pub antenna_spacing: f64,
    pub path_count_range: PathCountRange,
    /// Upper bound of the uniform delay distribution, seconds.
    pub max_delay: f64,
    /// Exponential power-delay-profile constant, seconds.
    pub delay_profile_decay: f64,
    pub bandwidth: f64,
    pub f0: f64,
    pub rng_seed: u64,
    /// Azimuth sector `[lo, hi)` that departure directions are drawn from, radians.
    #[serde(default = "full_circle")]
    pub azimuth_range: [f64; 2],
}

impl ScenarioConfig {
    /// 32 antennas at half-wavelength spacing, 32 subcarriers over 40 MHz at 3.5 GHz.
    pub fn default_32x32(seed: u64) -> Self {
        let f0 = 3.5e9;
        Self {
            n_t: 32,
            n_c: 32,
            antenna_spacing: SPEED_OF_LIGHT / (2.0 * f0),
            path_count_range: PathCountRange { min: 1, max: 4 },
            max_delay: 100e-9,
            delay_profile_decay: 40e-9,
            bandwidth: 40e6,
            f0,
            rng_seed: seed,
            azimuth_range: full_circle(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.path_count_range;
        if r.min < 1 || r.max > 64 || r.min > r.max {
            return Err(Error::Validation(format!(
                "path_count_range [{}, {}] must lie within [1, 64]",
                r.min, r.max
            )));
        }
        if self.n_t == 0 || self.n_c == 0 {
            return Err(Error::Validation("n_t and n_c must be positive".into()));
        }
        if !(self.bandwidth > 0.0) || !(self.f0 > 0.0) {
            return Err(Error::Validation("bandwidth and f0 must be > 0".into()));
        }
        if !(self.max_delay >= 0.0) || !(self.delay_profile_decay > 0.0) {
            return Err(Error::Validation(
                "max_delay must be >= 0 and delay_profile_decay > 0".into(),
            ));
        }
        if !(self.antenna_spacing >= 0.0) {
            return Err(Error::Validation("antenna_spacing must be >= 0".into()));
        }
        let [lo, hi] = self.azimuth_range;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::Validation(format!(
                "azimuth_range [{lo}, {hi}] must be a non-empty interval"
            )));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::ula(self.n_t, self.antenna_spacing)
    }

    pub fn grid(&self) -> Result<CarrierGrid> {
        CarrierGrid::uniform(self.f0, self.bandwidth, self.n_c)
    }
}

/// Draw one multipath realisation.
///
/// Path count is uniform over the configured range, delays are uniform on
/// `[0, max_delay]`, gains are circularly-symmetric complex Gaussian with
/// variance `exp(-tau / delay_profile_decay)` and azimuths are uniform over
/// the configured sector in the horizontal plane.
pub fn sample_scenario<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<Vec<PathComponent>> {
    config.validate()?;
    let r = config.path_count_range;
    let count = rng.gen_range(r.min..=r.max);
    let [az_lo, az_hi] = config.azimuth_range;
    (0..count)
        .map(|_| {
            let tau = rng.gen::<f64>() * config.max_delay;
            let std = (0.5 * (-tau / config.delay_profile_decay).exp()).sqrt();
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let theta = az_lo + rng.gen::<f64>() * (az_hi - az_lo);
            PathComponent::planar(Complex64::new(std * re, std * im), tau, theta)
        })
        .collect()
}
