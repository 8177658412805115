//! Synthetic multipath MIMO-OFDM channels.
//!
//! A channel is a sum of plane-wave paths. Each path has a complex gain, a
//! delay and a departure direction; the base station observes it through an
//! antenna array at a set of OFDM subcarrier frequencies. The resulting CSI
//! matrix has one row per antenna and one column per subcarrier.
//!
//! Two independent routes produce the same matrix: [`assemble_csi`] stacks
//! per-frequency channel vectors, while [`q_h`] evaluates the shared-feature
//! function at an (antenna offset, frequency offset) pair. They agree to
//! rounding error, which the tests rely on.

mod dataset;
mod scenario;
mod subset;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub use dataset::{
    generate_dataset, ChannelDataset, DatasetMetadata, DATASET_MAGIC, DATASET_VERSION,
};
pub use scenario::{sample_scenario, PathCountRange, ScenarioConfig};
pub use subset::{extract_known, uniform_subset, SubsetSpec};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const UNIT_NORM_TOL: f64 = 1e-12;

pub type Vec3 = [f64; 3];

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn check_unit(direction: &Vec3) -> Result<()> {
    let norm = dot(direction, direction).sqrt();
    if (norm - 1.0).abs() > UNIT_NORM_TOL || !norm.is_finite() {
        return Err(Error::Validation(format!(
            "direction {direction:?} has norm {norm}, expected 1"
        )));
    }
    Ok(())
}

/// One propagation path: complex gain, delay in seconds and unit departure direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    pub alpha: Complex64,
    pub tau: f64,
    pub direction: Vec3,
}

impl PathComponent {
    pub fn new(alpha: Complex64, tau: f64, direction: Vec3) -> Result<Self> {
        check_unit(&direction)?;
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::Validation(format!("path delay {tau} must be >= 0")));
        }
        if !alpha.re.is_finite() || !alpha.im.is_finite() {
            return Err(Error::Validation("path gain must be finite".into()));
        }
        Ok(Self {
            alpha,
            tau,
            direction,
        })
    }

    /// Path leaving in the horizontal plane at azimuth `theta` (radians from the x-axis).
    pub fn planar(alpha: Complex64, tau: f64, theta: f64) -> Result<Self> {
        Self::new(alpha, tau, [theta.cos(), theta.sin(), 0.0])
    }
}

/// Antenna positions relative to the first element, in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    element_offsets: Vec<Vec3>,
}

impl ArrayGeometry {
    pub fn new(element_offsets: Vec<Vec3>) -> Result<Self> {
        match element_offsets.first() {
            None => Err(Error::Validation("array needs at least one element".into())),
            Some(first) if *first != [0.0; 3] => Err(Error::Validation(
                "first array element must sit at the origin".into(),
            )),
            Some(_) => Ok(Self { element_offsets }),
        }
    }

    /// Uniform linear array along the x-axis.
    pub fn ula(n_t: usize, spacing: f64) -> Result<Self> {
        Self::new((0..n_t).map(|i| [i as f64 * spacing, 0.0, 0.0]).collect())
    }

    /// Uniform linear array with half-wavelength spacing at `f0`.
    pub fn half_wavelength_ula(n_t: usize, f0: f64) -> Result<Self> {
        Self::ula(n_t, SPEED_OF_LIGHT / (2.0 * f0))
    }

    pub fn len(&self) -> usize {
        self.element_offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.element_offsets.is_empty()
    }

    pub fn offsets(&self) -> &[Vec3] {
        &self.element_offsets
    }
}

/// OFDM subcarrier frequencies `f0 + offsets[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarrierGrid {
    f0: f64,
    offsets: Vec<f64>,
}

impl CarrierGrid {
    pub fn new(f0: f64, offsets: Vec<f64>) -> Result<Self> {
        if !(f0 > 0.0) {
            return Err(Error::Validation(format!(
                "base frequency {f0} must be > 0"
            )));
        }
        if offsets.first() != Some(&0.0) {
            return Err(Error::Validation(
                "first subcarrier offset must be exactly 0".into(),
            ));
        }
        if offsets.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation(
                "subcarrier offsets must be strictly increasing".into(),
            ));
        }
        Ok(Self { f0, offsets })
    }

    /// `n_c` subcarriers spaced `bandwidth / n_c` apart, starting at `f0`.
    pub fn uniform(f0: f64, bandwidth: f64, n_c: usize) -> Result<Self> {
        if !(bandwidth > 0.0) || n_c == 0 {
            return Err(Error::Validation(
                "bandwidth must be > 0 and the grid non-empty".into(),
            ));
        }
        let spacing = bandwidth / n_c as f64;
        Self::new(f0, (0..n_c).map(|i| i as f64 * spacing).collect())
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.f0 + self.offsets[i]
    }
}

/// Complex `n_t x n_c` channel matrix, antenna-major (row = antenna, column = subcarrier).
#[derive(Clone, Debug, PartialEq)]
pub struct CsiMatrix {
    n_t: usize,
    n_c: usize,
    entries: Vec<Complex64>,
}

impl CsiMatrix {
    pub fn zeros(n_t: usize, n_c: usize) -> Self {
        Self {
            n_t,
            n_c,
            entries: vec![Complex64::new(0.0, 0.0); n_t * n_c],
        }
    }

    pub fn from_entries(n_t: usize, n_c: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != n_t * n_c {
            return Err(Error::shape("CsiMatrix", &[n_t, n_c], &[entries.len()]));
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Validation("CSI entries must be finite".into()));
        }
        Ok(Self { n_t, n_c, entries })
    }

    pub fn from_fn(n_t: usize, n_c: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(n_t * n_c);
        for m in 0..n_t {
            for n in 0..n_c {
                entries.push(f(m, n));
            }
        }
        Self { n_t, n_c, entries }
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.entries[m * self.n_c + n]
    }

    pub fn set(&mut self, m: usize, n: usize, value: Complex64) {
        self.entries[m * self.n_c + n] = value;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Channel vector of subcarrier `n` across all antennas.
    pub fn column(&self, n: usize) -> Vec<Complex64> {
        (0..self.n_t).map(|m| self.get(m, n)).collect()
    }

    /// Squared Frobenius norm.
    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            n_t: self.n_t,
            n_c: self.n_c,
            entries: self.entries.iter().map(|z| z * c).collect(),
        }
    }
}

/// Array steering vector `a(p)` at frequency `f`.
pub fn array_response(
    geometry: &ArrayGeometry,
    direction: &Vec3,
    f: f64,
) -> Result<Vec<Complex64>> {
    check_unit(direction)?;
    if !(f > 0.0) {
        return Err(Error::Validation(format!("frequency {f} must be > 0")));
    }
    let k = -2.0 * PI * f / SPEED_OF_LIGHT;
    Ok(geometry
        .offsets()
        .iter()
        .map(|d| Complex64::from_polar(1.0, k * dot(d, direction)))
        .collect())
}

/// Narrowband channel vector `h(f) = sum_p alpha_p exp(-j 2 pi f tau_p) a(p_p)`.
pub fn channel_vector(
    paths: &[PathComponent],
    geometry: &ArrayGeometry,
    f: f64,
) -> Result<Vec<Complex64>> {
    if paths.is_empty() {
        return Err(Error::Validation("path list is empty".into()));
    }
    let mut h = vec![Complex64::new(0.0, 0.0); geometry.len()];
    for path in paths {
        let gain = path.alpha * Complex64::from_polar(1.0, -2.0 * PI * f * path.tau);
        for (acc, a) in h
            .iter_mut()
            .zip(array_response(geometry, &path.direction, f)?)
        {
            *acc += gain * a;
        }
    }
    Ok(h)
}

/// Full CSI matrix: column `i` is the channel vector at `f0 + offsets[i]`.
pub fn assemble_csi(
    paths: &[PathComponent],
    geometry: &ArrayGeometry,
    grid: &CarrierGrid,
) -> Result<CsiMatrix> {
    let mut csi = CsiMatrix::zeros(geometry.len(), grid.len());
    for n in 0..grid.len() {
        let h = channel_vector(paths, geometry, grid.frequency(n))?;
        for (m, value) in h.into_iter().enumerate() {
            csi.set(m, n, value);
        }
    }
    Ok(csi)
}

/// Shared-feature function: the CSI seen at antenna offset `d` and
/// frequency offset `delta_f`, written with the base-frequency terms split
/// out from the space and frequency shifts.
pub fn q_h(paths: &[PathComponent], f0: f64, d: &Vec3, delta_f: f64) -> Result<Complex64> {
    if paths.is_empty() {
        return Err(Error::Validation("path list is empty".into()));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for p in paths {
        let shift = dot(d, &p.direction) / SPEED_OF_LIGHT;
        let large_scale = p.alpha * Complex64::from_polar(1.0, -2.0 * PI * f0 * p.tau);
        let phase = 2.0 * PI * f0 * shift + 2.0 * PI * delta_f * p.tau + 2.0 * PI * delta_f * shift;
        acc += large_scale * Complex64::from_polar(1.0, -phase);
    }
    Ok(acc)
}

/// CSI matrix tiled from `q_h` evaluations, one per (antenna, subcarrier) pair.
pub fn q_h_grid(
    paths: &[PathComponent],
    geometry: &ArrayGeometry,
    grid: &CarrierGrid,
) -> Result<CsiMatrix> {
    let mut out = CsiMatrix::zeros(geometry.len(), grid.len());
    for (m, d) in geometry.offsets().iter().enumerate() {
        for (n, &df) in grid.offsets().iter().enumerate() {
            out.set(m, n, q_h(paths, grid.f0(), d, df)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_element_array_is_unit() {
        let g = ArrayGeometry::ula(1, 0.05).unwrap();
        let a = array_response(&g, &[0.6, 0.8, 0.0], 3.5e9).unwrap();
        assert_eq!(a, vec![c(1.0, 0.0)]);
    }

    #[test]
    fn broadside_direction_gives_all_ones() {
        let g = ArrayGeometry::ula(8, 0.04).unwrap();
        let a = array_response(&g, &[0.0, 1.0, 0.0], 3.5e9).unwrap();
        for z in a {
            assert!((z - c(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn ula_elements_match_scalar_formula() {
        let f = 3.5e9;
        let d = SPEED_OF_LIGHT / (2.0 * f);
        let theta: f64 = 0.7;
        let g = ArrayGeometry::ula(4, d).unwrap();
        let a = array_response(&g, &[theta.cos(), theta.sin(), 0.0], f).unwrap();
        assert_eq!(a[0], c(1.0, 0.0));
        for (i, z) in a.iter().enumerate() {
            let phase = -2.0 * PI * f * i as f64 * d * theta.cos() / SPEED_OF_LIGHT;
            let expect = c(phase.cos(), phase.sin());
            assert!((z - expect).norm() < 1e-12, "element {i}");
        }
    }

    #[test]
    fn non_unit_direction_rejected() {
        let g = ArrayGeometry::ula(2, 0.04).unwrap();
        assert!(matches!(
            array_response(&g, &[1.0, 1.0, 0.0], 1e9),
            Err(Error::Validation(_))
        ));
        assert!(array_response(&g, &[1.0, 0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn geometry_and_grid_invariants() {
        assert!(ArrayGeometry::new(vec![]).is_err());
        assert!(ArrayGeometry::new(vec![[1.0, 0.0, 0.0]]).is_err());
        assert!(CarrierGrid::new(1e9, vec![1.0, 2.0]).is_err());
        assert!(CarrierGrid::new(1e9, vec![0.0, 2.0, 2.0]).is_err());
        assert!(CarrierGrid::new(0.0, vec![0.0]).is_err());
        let grid = CarrierGrid::uniform(3.5e9, 40e6, 32).unwrap();
        assert_eq!(grid.offsets()[1], 1.25e6);
    }

    #[test]
    fn path_validation() {
        assert!(PathComponent::new(c(1.0, 0.0), -1e-9, [1.0, 0.0, 0.0]).is_err());
        assert!(PathComponent::new(c(1.0, 0.0), 0.0, [0.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn single_unit_path_equals_steering_vector() {
        let g = ArrayGeometry::half_wavelength_ula(8, 3.5e9).unwrap();
        let p = PathComponent::planar(c(1.0, 0.0), 0.0, 1.1).unwrap();
        let h = channel_vector(std::slice::from_ref(&p), &g, 3.5e9).unwrap();
        assert_eq!(h, array_response(&g, &p.direction, 3.5e9).unwrap());
    }

    #[test]
    fn opposite_paths_cancel() {
        let g = ArrayGeometry::half_wavelength_ula(8, 3.5e9).unwrap();
        let p1 = PathComponent::planar(c(0.3, -0.2), 4e-8, 0.4).unwrap();
        let p2 = PathComponent::planar(-p1.alpha, p1.tau, 0.4).unwrap();
        let h = channel_vector(&[p1, p2], &g, 3.5e9).unwrap();
        assert!(h.iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn empty_paths_rejected() {
        let g = ArrayGeometry::ula(2, 0.04).unwrap();
        assert!(channel_vector(&[], &g, 1e9).is_err());
        assert!(q_h(&[], 1e9, &[0.0; 3], 0.0).is_err());
    }

    #[test]
    fn degenerate_grid_is_single_column() {
        let g = ArrayGeometry::half_wavelength_ula(4, 3.5e9).unwrap();
        let grid = CarrierGrid::new(3.5e9, vec![0.0]).unwrap();
        let paths = [PathComponent::planar(c(0.5, 0.5), 1e-8, 2.0).unwrap()];
        let h = assemble_csi(&paths, &g, &grid).unwrap();
        assert_eq!(h.n_c(), 1);
        assert_eq!(h.column(0), channel_vector(&paths, &g, 3.5e9).unwrap());
    }

    #[test]
    fn single_path_has_constant_magnitude() {
        let g = ArrayGeometry::half_wavelength_ula(6, 3.5e9).unwrap();
        let grid = CarrierGrid::uniform(3.5e9, 40e6, 5).unwrap();
        let alpha = c(0.3, -0.4);
        let paths = [PathComponent::planar(alpha, 3e-8, 0.9).unwrap()];
        let h = assemble_csi(&paths, &g, &grid).unwrap();
        for z in h.entries() {
            assert!((z.norm() - alpha.norm()).abs() < 1e-12);
        }
        let q = q_h(&paths, 3.5e9, &[0.1, 0.0, 0.0], 2e6).unwrap();
        assert!((q.norm() - alpha.norm()).abs() < 1e-12);
    }

    #[test]
    fn q_h_at_origin_is_base_entry() {
        let paths = [
            PathComponent::planar(c(0.5, 0.1), 1e-8, 0.2).unwrap(),
            PathComponent::planar(c(-0.2, 0.3), 7e-8, 2.2).unwrap(),
        ];
        let f0 = 3.5e9;
        let expect: Complex64 = paths
            .iter()
            .map(|p| p.alpha * Complex64::from_polar(1.0, -2.0 * PI * f0 * p.tau))
            .sum();
        let q = q_h(&paths, f0, &[0.0; 3], 0.0).unwrap();
        assert!((q - expect).norm() < 1e-15);
    }
}
