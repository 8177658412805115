use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chanmodel::CsiMatrix;
use crate::error::{Error, Result};

/// A bijection on `0..len`, stored as `k -> sigma[k]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &k in &map {
            if k >= map.len() || std::mem::replace(&mut seen[k], true) {
                return Err(Error::Validation(format!(
                    "not a permutation of 0..{}: {map:?}",
                    map.len()
                )));
            }
        }
        Ok(Self(map))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(rng);
        Self(map)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, k: usize) -> usize {
        self.0[k]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (k, &s) in self.0.iter().enumerate() {
            inv[s] = k;
        }
        Self(inv)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

fn check_len(p: &Permutation, n: usize, what: &str) -> Result<()> {
    if p.len() != n {
        return Err(Error::Validation(format!(
            "{what} permutation has size {}, expected {n}",
            p.len()
        )));
    }
    Ok(())
}

/// Permute rows by `p_t` and columns by `p_c`: entry `(a, b)` moves to
/// `(p_t(a), p_c(b))`, so rows and columns still each belong to one antenna
/// and one subcarrier.
pub fn interlaced_shuffle(
    h: &CsiMatrix,
    p_t: &Permutation,
    p_c: &Permutation,
) -> Result<CsiMatrix> {
    check_len(p_t, h.n_t(), "antenna")?;
    check_len(p_c, h.n_c(), "subcarrier")?;
    let mut out = CsiMatrix::zeros(h.n_t(), h.n_c());
    for a in 0..h.n_t() {
        for b in 0..h.n_c() {
            out.set(p_t.apply(a), p_c.apply(b), h.get(a, b));
        }
    }
    Ok(out)
}

/// Column-major vectorize, move entry `k` to `p(k)`, then reshape back.
pub fn non_interlaced_shuffle(h: &CsiMatrix, p: &Permutation) -> Result<CsiMatrix> {
    let n_t = h.n_t();
    check_len(p, n_t * h.n_c(), "vectorized")?;
    let mut out = CsiMatrix::zeros(n_t, h.n_c());
    for k in 0..p.len() {
        let dst = p.apply(k);
        out.set(dst % n_t, dst / n_t, h.get(k % n_t, k / n_t));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShuffleMode {
    #[default]
    Origin,
    Interlaced,
    NonInterlaced,
}

impl std::fmt::Display for ShuffleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ShuffleMode::Origin => "origin",
            ShuffleMode::Interlaced => "interlaced",
            ShuffleMode::NonInterlaced => "non-interlaced",
        })
    }
}

/// Which shuffle a run applies to its targets; permutations are drawn from `seed`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuffleSpec {
    pub mode: ShuffleMode,
    #[serde(default)]
    pub seed: u64,
    /// Also shuffle the full channel before the known sub-grid is extracted.
    #[serde(default)]
    pub shuffle_inputs: bool,
}

/// Concrete permutations for one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ShufflePlan {
    Origin,
    Interlaced { p_t: Permutation, p_c: Permutation },
    NonInterlaced { p: Permutation },
}

impl ShufflePlan {
    pub fn from_spec(spec: &ShuffleSpec, n_t: usize, n_c: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        match spec.mode {
            ShuffleMode::Origin => ShufflePlan::Origin,
            ShuffleMode::Interlaced => ShufflePlan::Interlaced {
                p_t: Permutation::random(n_t, &mut rng),
                p_c: Permutation::random(n_c, &mut rng),
            },
            ShuffleMode::NonInterlaced => ShufflePlan::NonInterlaced {
                p: Permutation::random(n_t * n_c, &mut rng),
            },
        }
    }

    pub fn mode(&self) -> ShuffleMode {
        match self {
            ShufflePlan::Origin => ShuffleMode::Origin,
            ShufflePlan::Interlaced { .. } => ShuffleMode::Interlaced,
            ShufflePlan::NonInterlaced { .. } => ShuffleMode::NonInterlaced,
        }
    }

    pub fn apply(&self, h: &CsiMatrix) -> Result<CsiMatrix> {
        match self {
            ShufflePlan::Origin => Ok(h.clone()),
            ShufflePlan::Interlaced { p_t, p_c } => interlaced_shuffle(h, p_t, p_c),
            ShufflePlan::NonInterlaced { p } => non_interlaced_shuffle(h, p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn counting(n_t: usize, n_c: usize) -> CsiMatrix {
        CsiMatrix::from_fn(n_t, n_c, |m, n| {
            Complex64::new((m * n_c + n) as f64, -(m as f64))
        })
    }

    fn sorted_entries(h: &CsiMatrix) -> Vec<(u64, u64)> {
        let mut v: Vec<_> = h
            .entries()
            .iter()
            .map(|z| (z.re.to_bits(), z.im.to_bits()))
            .collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn identities_leave_h_unchanged() {
        let h = counting(3, 4);
        assert_eq!(
            interlaced_shuffle(&h, &Permutation::identity(3), &Permutation::identity(4)).unwrap(),
            h
        );
        assert_eq!(
            non_interlaced_shuffle(&h, &Permutation::identity(12)).unwrap(),
            h
        );
    }

    #[test]
    fn interlaced_matches_permutation_matrix_product() {
        let h = counting(3, 4);
        let p_t = Permutation::new(vec![2, 0, 1]).unwrap();
        let p_c = Permutation::new(vec![1, 3, 0, 2]).unwrap();
        // L[s(k), k] = 1 and R[k, s(k)] = 1, out = L H R.
        let mut l = vec![vec![0.0; 3]; 3];
        for k in 0..3 {
            l[p_t.apply(k)][k] = 1.0;
        }
        let mut r = vec![vec![0.0; 4]; 4];
        for k in 0..4 {
            r[k][p_c.apply(k)] = 1.0;
        }
        let out = interlaced_shuffle(&h, &p_t, &p_c).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..3 {
                    for b in 0..4 {
                        acc += h.get(a, b) * l[i][a] * r[b][j];
                    }
                }
                assert_eq!(out.get(i, j), acc);
                let (ti, tj) = (p_t.inverse().apply(i), p_c.inverse().apply(j));
                assert_eq!(out.get(i, j), h.get(ti, tj));
            }
        }
    }

    #[test]
    fn inverse_permutations_recover_h() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = counting(5, 7);
        let (p_t, p_c) = (
            Permutation::random(5, &mut rng),
            Permutation::random(7, &mut rng),
        );
        let s = interlaced_shuffle(&h, &p_t, &p_c).unwrap();
        assert_eq!(
            interlaced_shuffle(&s, &p_t.inverse(), &p_c.inverse()).unwrap(),
            h
        );
        let p = Permutation::random(35, &mut rng);
        let s = non_interlaced_shuffle(&h, &p).unwrap();
        assert_eq!(non_interlaced_shuffle(&s, &p.inverse()).unwrap(), h);
    }

    #[test]
    fn non_interlaced_matches_vec_oracle() {
        let h = counting(3, 4);
        let p = Permutation::new(vec![5, 11, 0, 3, 8, 1, 10, 2, 7, 4, 9, 6]).unwrap();
        let mut vec_h = Vec::new();
        for col in 0..4 {
            for row in 0..3 {
                vec_h.push(h.get(row, col));
            }
        }
        let mut shuffled = vec![Complex64::new(0.0, 0.0); 12];
        for (k, v) in vec_h.iter().enumerate() {
            shuffled[p.apply(k)] = *v;
        }
        let out = non_interlaced_shuffle(&h, &p).unwrap();
        for col in 0..4 {
            for row in 0..3 {
                assert_eq!(out.get(row, col), shuffled[col * 3 + row]);
            }
        }
    }

    #[test]
    fn bad_permutations_rejected() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3]).is_err());
        assert!(serde_json::from_str::<Permutation>("[1, 1]").is_err());
        let h = counting(3, 4);
        assert!(
            interlaced_shuffle(&h, &Permutation::identity(4), &Permutation::identity(4)).is_err()
        );
        assert!(non_interlaced_shuffle(&h, &Permutation::identity(11)).is_err());
    }

    #[test]
    fn plans_are_seeded() {
        for mode in [ShuffleMode::Interlaced, ShuffleMode::NonInterlaced] {
            let spec = ShuffleSpec {
                mode,
                seed: 9,
                shuffle_inputs: false,
            };
            assert_eq!(
                ShufflePlan::from_spec(&spec, 4, 6),
                ShufflePlan::from_spec(&spec, 4, 6)
            );
            assert_eq!(ShufflePlan::from_spec(&spec, 4, 6).mode(), mode);
        }
    }

    proptest! {
        #[test]
        fn shuffles_conserve_entries(n_t in 1usize..7, n_c in 1usize..7, seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = CsiMatrix::from_fn(n_t, n_c, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            for mode in [ShuffleMode::Interlaced, ShuffleMode::NonInterlaced] {
                let plan = ShufflePlan::from_spec(&ShuffleSpec { mode, seed, shuffle_inputs: false }, n_t, n_c);
                let out = plan.apply(&h).unwrap();
                prop_assert_eq!(sorted_entries(&out), sorted_entries(&h));
                // Same multiset of |h|^2, so the Frobenius norm agrees up to summation order.
                prop_assert!((out.norm_sqr() - h.norm_sqr()).abs() <= 1e-12 * h.norm_sqr().max(1.0));
            }
        }
    }
}
