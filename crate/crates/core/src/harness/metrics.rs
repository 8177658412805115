use serde::{Deserialize, Serialize};

use crate::chanmodel::CsiMatrix;
use crate::error::{Error, Result};

/// Serialized floor for the dB value of a (near-)perfect prediction.
pub const NMSE_DB_FLOOR: f64 = -120.0;
/// Linear NMSE below which the dB value is reported as [`NMSE_DB_FLOOR`].
pub const NMSE_LINEAR_FLOOR: f64 = 1e-12;

/// Normalized mean squared error, linear and in dB.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nmse {
    pub linear: f64,
    /// `10 log10(linear)`; `-inf` for a perfect prediction.
    pub db: f64,
}

impl Nmse {
    pub fn from_linear(linear: f64) -> Self {
        Self {
            linear,
            db: 10.0 * linear.log10(),
        }
    }

    /// dB value with the `-inf` sentinel replaced by the serialization floor.
    pub fn db_floored(&self) -> f64 {
        if self.linear < NMSE_LINEAR_FLOOR {
            NMSE_DB_FLOOR
        } else {
            self.db
        }
    }
}

/// Test-set metrics as stored in a report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub nmse_linear: f64,
    pub nmse_db: f64,
    pub rho: f64,
}

impl TestMetrics {
    pub fn new(nmse: Nmse, rho: f64) -> Self {
        Self {
            nmse_linear: nmse.linear,
            nmse_db: nmse.db_floored(),
            rho,
        }
    }
}

fn check_pair(truth: &[CsiMatrix], pred: &[CsiMatrix]) -> Result<()> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::Validation(format!(
            "metric needs equally sized non-empty batches, got {} and {}",
            truth.len(),
            pred.len()
        )));
    }
    for (h, p) in truth.iter().zip(pred) {
        if (h.n_t(), h.n_c()) != (p.n_t(), p.n_c()) {
            return Err(Error::shape(
                "metric",
                &[h.n_t(), h.n_c()],
                &[p.n_t(), p.n_c()],
            ));
        }
    }
    Ok(())
}

/// Mean over samples of `||H - H_hat||^2 / ||H||^2`. Zero-norm truth samples
/// are skipped with a warning.
pub fn nmse(truth: &[CsiMatrix], pred: &[CsiMatrix]) -> Result<Nmse> {
    check_pair(truth, pred)?;
    let mut total = 0.0;
    let mut used = 0usize;
    for (i, (h, p)) in truth.iter().zip(pred).enumerate() {
        let power = h.norm_sqr();
        if power == 0.0 {
            log::warn!("nmse: sample {i} has zero norm and is excluded");
            continue;
        }
        let err: f64 = h
            .entries()
            .iter()
            .zip(p.entries())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        total += err / power;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Validation(
            "nmse: every truth sample has zero norm".into(),
        ));
    }
    Ok(Nmse::from_linear(total / used as f64))
}

/// Mean over samples of the per-subcarrier cosine correlation
/// `|h_hat^H h| / (||h_hat|| ||h||)`, averaged over subcarrier columns.
/// Columns with a zero norm on either side are skipped with a warning.
pub fn rho(truth: &[CsiMatrix], pred: &[CsiMatrix]) -> Result<f64> {
    check_pair(truth, pred)?;
    let mut total = 0.0;
    let mut used = 0usize;
    for (i, (h, p)) in truth.iter().zip(pred).enumerate() {
        let mut sample = 0.0;
        let mut cols = 0usize;
        for n in 0..h.n_c() {
            let (mut dot, mut nh, mut np) = (num_complex::Complex64::new(0.0, 0.0), 0.0, 0.0);
            for m in 0..h.n_t() {
                let (a, b) = (h.get(m, n), p.get(m, n));
                dot += b.conj() * a;
                nh += a.norm_sqr();
                np += b.norm_sqr();
            }
            if nh == 0.0 || np == 0.0 {
                log::warn!("rho: sample {i} column {n} has zero norm and is excluded");
                continue;
            }
            sample += dot.norm() / (nh.sqrt() * np.sqrt());
            cols += 1;
        }
        if cols > 0 {
            total += sample / cols as f64;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::Validation(
            "rho: no column with non-zero norm".into(),
        ));
    }
    Ok(total / used as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_csi(n_t: usize, n_c: usize, rng: &mut ChaCha8Rng) -> CsiMatrix {
        CsiMatrix::from_fn(n_t, n_c, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn perfect_and_null_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h: Vec<_> = (0..3).map(|_| random_csi(4, 5, &mut rng)).collect();
        let perfect = nmse(&h, &h).unwrap();
        assert_eq!(perfect.linear, 0.0);
        assert_eq!(perfect.db, f64::NEG_INFINITY);
        assert_eq!(perfect.db_floored(), NMSE_DB_FLOOR);
        let zeros: Vec<_> = h
            .iter()
            .map(|m| CsiMatrix::zeros(m.n_t(), m.n_c()))
            .collect();
        let null = nmse(&h, &zeros).unwrap();
        assert!((null.linear - 1.0).abs() < 1e-15);
        assert!(null.db.abs() < 1e-12);
    }

    #[test]
    fn nmse_matches_scalar_loop() {
        let h = vec![
            CsiMatrix::from_entries(
                1,
                2,
                vec![Complex64::new(3.0, 4.0), Complex64::new(0.0, 0.0)],
            )
            .unwrap(),
            CsiMatrix::from_entries(
                1,
                2,
                vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
            )
            .unwrap(),
        ];
        let p = vec![
            CsiMatrix::from_entries(
                1,
                2,
                vec![Complex64::new(3.0, 3.0), Complex64::new(1.0, 0.0)],
            )
            .unwrap(),
            CsiMatrix::from_entries(
                1,
                2,
                vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)],
            )
            .unwrap(),
        ];
        // sample 0: (1 + 1) / 25, sample 1: 1 / 2
        let expect = (2.0 / 25.0 + 0.5) / 2.0;
        assert!((nmse(&h, &p).unwrap().linear - expect).abs() < 1e-12);
    }

    #[test]
    fn rho_is_one_for_scaled_copies() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h: Vec<_> = (0..4).map(|_| random_csi(6, 3, &mut rng)).collect();
        for _ in 0..10 {
            let c = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let scaled: Vec<_> = h.iter().map(|m| m.scaled(c)).collect();
            assert!((rho(&h, &scaled).unwrap() - 1.0).abs() < 1e-9);
        }
        assert!((rho(&h, &h).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rho_matches_column_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h: Vec<_> = (0..2).map(|_| random_csi(3, 4, &mut rng)).collect();
        let p: Vec<_> = (0..2).map(|_| random_csi(3, 4, &mut rng)).collect();
        let mut expect = 0.0;
        for (a, b) in h.iter().zip(&p) {
            let mut s = 0.0;
            for n in 0..4 {
                let (ca, cb) = (a.column(n), b.column(n));
                let dot: Complex64 = ca.iter().zip(&cb).map(|(x, y)| y.conj() * x).sum();
                let na: f64 = ca.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                let nb: f64 = cb.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                s += dot.norm() / (na * nb);
            }
            expect += s / 4.0;
        }
        expect /= 2.0;
        let got = rho(&h, &p).unwrap();
        assert!((got - expect).abs() < 1e-12);
        assert!((0.0..=1.0 + 1e-9).contains(&got));
    }

    #[test]
    fn degenerate_inputs() {
        let z = vec![CsiMatrix::zeros(2, 2)];
        assert!(nmse(&z, &z).is_err());
        assert!(rho(&z, &z).is_err());
        assert!(nmse(&[], &[]).is_err());
        let a = vec![CsiMatrix::zeros(2, 2)];
        let b = vec![CsiMatrix::zeros(2, 3)];
        assert!(matches!(nmse(&a, &b), Err(Error::Shape { .. })));
    }

    #[test]
    fn nmse_invariant_to_common_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h: Vec<_> = (0..3).map(|_| random_csi(3, 3, &mut rng)).collect();
        let p: Vec<_> = (0..3).map(|_| random_csi(3, 3, &mut rng)).collect();
        let c = Complex64::new(0.3, -2.0);
        let hs: Vec<_> = h.iter().map(|m| m.scaled(c)).collect();
        let ps: Vec<_> = p.iter().map(|m| m.scaled(c)).collect();
        let a = nmse(&h, &p).unwrap().linear;
        let b = nmse(&hs, &ps).unwrap().linear;
        assert!((a - b).abs() < 1e-12 * a.max(1.0));
    }
}
