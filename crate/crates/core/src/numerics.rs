//! Dense complex linear algebra and power-allocation primitives.

use nalgebra::{DMatrix, SVD};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Dense matrix of complex scalars used for every channel, precoder and
/// reflection matrix in the crate.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Tolerance for algebraic identities (orthonormality, reconstruction).
pub const ALGEBRA_TOL: f64 = 1e-9;

/// Tolerance for comparisons of rates in bits per channel use.
pub const RATE_TOL: f64 = 1e-6;

/// Full singular value decomposition `m = U diag(s) V[:, ..k]^H`.
///
/// `left_vectors` is `rows x k` with `k = min(rows, cols)`; `right_vectors`
/// is always square (`cols x cols`). The trailing `cols - k` columns of
/// `right_vectors` complete the basis of the domain and therefore span the
/// null space together with any right vectors whose singular value is zero.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub left_vectors: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub right_vectors: ComplexMatrix,
}

impl SvdResult {
    /// Multiplies the factors back together.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let k = self.singular_values.len();
        let mut scaled = self.left_vectors.clone();
        for (j, &s) in self.singular_values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(s);
        }
        scaled * self.right_vectors.columns(0, k).adjoint()
    }

    /// Number of singular values above `rel_tol` times the largest one.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        if top == 0.0 {
            return 0;
        }
        self.singular_values
            .iter()
            .filter(|&&s| s > rel_tol * top)
            .count()
    }

    /// Right singular vectors associated with the `count` largest singular values.
    pub fn leading_right(&self, count: usize) -> ComplexMatrix {
        self.right_vectors.columns(0, count).into_owned()
    }

    /// Left singular vectors associated with the `count` largest singular values.
    pub fn leading_left(&self, count: usize) -> ComplexMatrix {
        self.left_vectors.columns(0, count).into_owned()
    }
}

fn ensure_finite(m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{what} has non-finite entries")))
    }
}

/// Full SVD with singular values sorted nonincreasing. Equal singular values
/// keep the order in which the underlying factorization produced them.
pub fn svd(m: &ComplexMatrix) -> Result<SvdResult> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(invalid("svd of an empty matrix"));
    }
    ensure_finite(m, "svd input")?;

    let k = rows.min(cols);
    let factor = SVD::new(m.clone(), true, true);
    let u = factor
        .u
        .ok_or_else(|| Error::Consistency("svd did not produce left vectors".into()))?;
    let v_t = factor
        .v_t
        .ok_or_else(|| Error::Consistency("svd did not produce right vectors".into()))?;
    let values = factor.singular_values;

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let mut left = ComplexMatrix::zeros(rows, k);
    let mut right_thin = ComplexMatrix::zeros(cols, k);
    let mut singular_values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        left.set_column(dst, &u.column(src));
        right_thin.set_column(dst, &v_t.row(src).adjoint());
        singular_values.push(values[src].max(0.0));
    }

    let right_vectors = if k == cols {
        right_thin
    } else {
        let completion = orthogonal_complement(&right_thin, cols)?;
        let mut full = ComplexMatrix::zeros(cols, cols);
        full.columns_mut(0, k).copy_from(&right_thin);
        full.columns_mut(k, cols - k).copy_from(&completion);
        full
    };

    Ok(SvdResult {
        left_vectors: left,
        singular_values,
        right_vectors,
    })
}

/// Largest absolute deviation of `q^H q` from the identity.
pub fn orthonormality_defect(q: &ComplexMatrix) -> f64 {
    let gram = q.adjoint() * q;
    let n = gram.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Orthonormal basis of the orthogonal complement of the column space of
/// `basis` inside `C^ambient_dim`.
///
/// `basis` must have orthonormal columns. A matrix with zero columns is the
/// empty basis and yields a full unitary matrix.
pub fn orthogonal_complement(basis: &ComplexMatrix, ambient_dim: usize) -> Result<ComplexMatrix> {
    let used = basis.ncols();
    if used == 0 {
        return Ok(householder_q(&ComplexMatrix::identity(ambient_dim, ambient_dim)));
    }
    if basis.nrows() != ambient_dim {
        return Err(invalid(format!(
            "basis has {} rows but the ambient dimension is {ambient_dim}",
            basis.nrows()
        )));
    }
    if used > ambient_dim {
        return Err(invalid("more basis vectors than the ambient dimension"));
    }
    ensure_finite(basis, "complement basis")?;
    if orthonormality_defect(basis) > ALGEBRA_TOL {
        return Err(invalid("basis columns are not orthonormal"));
    }
    if used == ambient_dim {
        return Ok(ComplexMatrix::zeros(ambient_dim, 0));
    }

    // Householder QR of [basis | I]: the first `used` columns of Q span the
    // basis, the remaining ones span its complement.
    let mut stacked = ComplexMatrix::zeros(ambient_dim, used + ambient_dim);
    stacked.columns_mut(0, used).copy_from(basis);
    stacked
        .columns_mut(used, ambient_dim)
        .fill_with_identity();
    let q = householder_q(&stacked);
    Ok(q.columns(used, ambient_dim - used).into_owned())
}

fn householder_q(m: &ComplexMatrix) -> ComplexMatrix {
    m.clone().qr().q()
}

/// Power allocation over parallel Gaussian channels.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillResult {
    pub powers: Vec<f64>,
    pub water_level: f64,
    pub rate_bits: f64,
}

/// Capacity of parallel channels with the given gains and powers, in bits.
pub fn parallel_rate(gains: &[f64], powers: &[f64], noise_power: f64) -> f64 {
    gains
        .iter()
        .zip(powers)
        .map(|(g, p)| (g * p / noise_power).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2
}

/// Classic waterfilling: maximizes `sum log2(1 + g_i P_i / noise)` subject to
/// `sum P_i = budget`, `P_i >= 0`.
///
/// The water level is found analytically by scanning the inverse gains in
/// ascending order.
pub fn waterfill(gains: &[f64], budget: f64, noise_power: f64) -> Result<WaterfillResult> {
    if !(noise_power.is_finite() && noise_power > 0.0) {
        return Err(invalid("noise power must be positive and finite"));
    }
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(invalid("power budget must be nonnegative and finite"));
    }
    if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return Err(invalid(format!("channel gain {g} is not positive and finite")));
    }
    if gains.is_empty() {
        if budget > 0.0 {
            return Err(Error::Infeasible(
                "positive power budget with no channels to carry it".into(),
            ));
        }
        return Ok(WaterfillResult {
            powers: Vec::new(),
            water_level: 0.0,
            rate_bits: 0.0,
        });
    }

    let floors: Vec<f64> = gains.iter().map(|g| noise_power / g).collect();
    let mut order: Vec<usize> = (0..floors.len()).collect();
    order.sort_by(|&a, &b| floors[a].total_cmp(&floors[b]));

    if budget == 0.0 {
        return Ok(WaterfillResult {
            powers: vec![0.0; gains.len()],
            water_level: floors[order[0]],
            rate_bits: 0.0,
        });
    }

    let mut prefix = Vec::with_capacity(order.len());
    let mut acc = 0.0;
    for &i in &order {
        acc += floors[i];
        prefix.push(acc);
    }
    let mut water_level = budget + floors[order[0]];
    for active in (1..=order.len()).rev() {
        let level = (budget + prefix[active - 1]) / active as f64;
        if level > floors[order[active - 1]] {
            water_level = level;
            break;
        }
    }

    let powers: Vec<f64> = floors
        .iter()
        .map(|&floor| (water_level - floor).max(0.0))
        .collect();
    let rate_bits = parallel_rate(gains, &powers, noise_power);
    Ok(WaterfillResult {
        powers,
        water_level,
        rate_bits,
    })
}

pub fn db_to_power_ratio(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn power_ratio_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Amplitude factor whose squared magnitude corresponds to `db`.
pub fn db_to_amplitude_ratio(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn projector(q: &ComplexMatrix) -> ComplexMatrix {
        q * q.adjoint()
    }

    #[test]
    fn svd_of_identity() {
        let out = svd(&ComplexMatrix::identity(2, 2)).unwrap();
        assert_eq!(out.singular_values.len(), 2);
        for s in &out.singular_values {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_of_rank_deficient_diagonal_keeps_null_direction() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let out = svd(&m).unwrap();
        assert!((out.singular_values[0] - 3.0).abs() < 1e-12);
        assert!(out.singular_values[1].abs() < 1e-12);
        // second right vector is the null direction e2 up to phase
        let null = out.right_vectors.column(1);
        assert!((null[1].norm() - 1.0).abs() < 1e-12);
        assert!((&m * null).norm() < 1e-12);
    }

    #[test]
    fn wide_svd_is_full_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_matrix(&mut rng, 4, 6);
        let out = svd(&m).unwrap();
        assert_eq!(out.right_vectors.shape(), (6, 6));
        assert_eq!(out.left_vectors.shape(), (4, 4));
        let err = (out.reconstruct() - &m).norm() / m.norm();
        assert!(err < 1e-9, "reconstruction error {err}");
        assert!(orthonormality_defect(&out.right_vectors) < 1e-9);
        assert!(orthonormality_defect(&out.left_vectors) < 1e-9);
        assert!(out
            .singular_values
            .windows(2)
            .all(|w| w[0] >= w[1] && w[1] >= 0.0));
        // trailing right vectors are null directions
        let tail = out.right_vectors.columns(4, 2);
        assert!((&m * tail).norm() < 1e-9 * m.norm());
    }

    #[test]
    fn tall_svd_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_matrix(&mut rng, 7, 3);
        let out = svd(&m).unwrap();
        assert_eq!(out.right_vectors.shape(), (3, 3));
        assert!((out.reconstruct() - &m).norm() < 1e-9 * m.norm());
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut m = ComplexMatrix::identity(2, 2);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(svd(&m), Err(Error::InvalidInput(_))));
        assert!(matches!(svd(&ComplexMatrix::zeros(0, 3)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn complement_of_first_axis() {
        let mut e1 = ComplexMatrix::zeros(3, 1);
        e1[(0, 0)] = c(1.0, 0.0);
        let comp = orthogonal_complement(&e1, 3).unwrap();
        assert_eq!(comp.shape(), (3, 2));
        assert!(comp.row(0).norm() < 1e-12);
        assert!(orthonormality_defect(&comp) < 1e-12);
    }

    #[test]
    fn complement_of_nothing_is_unitary() {
        let comp = orthogonal_complement(&ComplexMatrix::zeros(4, 0), 4).unwrap();
        assert_eq!(comp.shape(), (4, 4));
        assert!(orthonormality_defect(&comp) < 1e-12);
    }

    #[test]
    fn double_complement_recovers_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = random_matrix(&mut rng, 6, 2).qr().q();
        let back = orthogonal_complement(&orthogonal_complement(&q, 6).unwrap(), 6).unwrap();
        let diff = (projector(&q) - projector(&back)).norm();
        assert!(diff < 1e-9, "projector mismatch {diff}");
    }

    #[test]
    fn complement_rejects_non_orthonormal() {
        let m = ComplexMatrix::from_element(3, 1, c(1.0, 0.0));
        assert!(matches!(orthogonal_complement(&m, 3), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn waterfill_single_channel() {
        let out = waterfill(&[1.0], 9.0, 1.0).unwrap();
        assert_eq!(out.powers, vec![9.0]);
        assert!((out.rate_bits - 10f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn waterfill_symmetric_channels() {
        let out = waterfill(&[1.0, 1.0], 4.0, 1.0).unwrap();
        assert!((out.powers[0] - 2.0).abs() < 1e-12);
        assert!((out.powers[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn waterfill_leaves_weak_channel_dry() {
        // Fine grid over the split of one unit of power; the optimum is at
        // (1, 0) with rate log2(3).
        let grid_best = (0..=100_000)
            .map(|i| {
                let p = i as f64 / 100_000.0;
                (1.0 + 2.0 * p).log2() + (1.0 + 0.5 * (1.0 - p)).log2()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((grid_best - 3f64.log2()).abs() < 1e-9);

        let out = waterfill(&[2.0, 0.5], 1.0, 1.0).unwrap();
        assert!((out.powers[0] - 1.0).abs() < 1e-12);
        assert_eq!(out.powers[1], 0.0);
        assert!((out.rate_bits - grid_best).abs() < 1e-9);
    }

    #[test]
    fn waterfill_edge_cases() {
        assert!(matches!(waterfill(&[], 1.0, 1.0), Err(Error::Infeasible(_))));
        let empty = waterfill(&[], 0.0, 1.0).unwrap();
        assert!(empty.powers.is_empty());
        let zero = waterfill(&[1.0, 3.0], 0.0, 1.0).unwrap();
        assert_eq!(zero.powers, vec![0.0, 0.0]);
        assert_eq!(zero.rate_bits, 0.0);
        assert!(waterfill(&[0.0], 1.0, 1.0).is_err());
        assert!(waterfill(&[1.0], -1.0, 1.0).is_err());
        assert!(waterfill(&[1.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn db_round_trip() {
        assert!((db_to_power_ratio(10.0) - 10.0).abs() < 1e-12);
        assert!((power_ratio_to_db(100.0) - 20.0).abs() < 1e-12);
        assert_eq!(db_to_amplitude_ratio(0.0), 1.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn waterfill_satisfies_kkt(
                gains in proptest::collection::vec(0.01f64..50.0, 1..6),
                budget in 0.0f64..20.0,
                noise in 0.05f64..3.0,
            ) {
                let out = waterfill(&gains, budget, noise).unwrap();
                let total: f64 = out.powers.iter().sum();
                prop_assert!((total - budget).abs() <= 1e-9 * budget.max(1.0));
                for (g, p) in gains.iter().zip(&out.powers) {
                    prop_assert!(*p >= 0.0);
                    if *p > 0.0 {
                        prop_assert!((p + noise / g - out.water_level).abs() <= 1e-9 * out.water_level.max(1.0));
                    } else {
                        prop_assert!(noise / g >= out.water_level - 1e-9);
                    }
                }
            }

            #[test]
            fn waterfill_rate_is_monotone(
                gains in proptest::collection::vec(0.01f64..50.0, 1..5),
                budget in 0.0f64..20.0,
                extra in 0.0f64..5.0,
                boost in 1.0f64..3.0,
                which in 0usize..5,
            ) {
                let base = waterfill(&gains, budget, 1.0).unwrap().rate_bits;
                let more_power = waterfill(&gains, budget + extra, 1.0).unwrap().rate_bits;
                prop_assert!(more_power >= base - 1e-12);
                let mut boosted = gains.clone();
                let idx = which % boosted.len();
                boosted[idx] *= boost;
                let better_gain = waterfill(&boosted, budget, 1.0).unwrap().rate_bits;
                prop_assert!(better_gain >= base - 1e-12);
            }

            #[test]
            fn svd_invariants_hold(rows in 1usize..7, cols in 1usize..7, seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m = random_matrix(&mut rng, rows, cols);
                let out = svd(&m).unwrap();
                prop_assert!((out.reconstruct() - &m).norm() <= 1e-9 * m.norm().max(1.0));
                prop_assert!(orthonormality_defect(&out.left_vectors) < 1e-9);
                prop_assert!(orthonormality_defect(&out.right_vectors) < 1e-9);
                prop_assert_eq!(out.right_vectors.shape(), (cols, cols));
            }
        }
    }
}
