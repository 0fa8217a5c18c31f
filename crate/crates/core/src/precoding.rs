//! Effective channels and precoder construction for both stages.
//!
//! Stage 1 serves the destination (through the surface) and the relay at the
//! same time. Interference between the two streams is removed by block
//! diagonalization: each link's receive filter is fixed to the leading left
//! singular vectors of its raw effective channel, and each link's precoder is
//! confined to the orthogonal complement of the other link's selected right
//! singular vectors. Because `W^H G = Gamma_sel V_sel^H` for the leading
//! singular triplets, the complement is exactly the null space of the other
//! receiver's filtered channel, in both directions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{invalid, Error, Result};
use crate::numerics::{orthogonal_complement, svd, ComplexMatrix};

/// Number of streams carried on each link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamSelection {
    pub sd_count: usize,
    pub sr_count: usize,
    pub rd_count: usize,
}

/// Antenna counts of the three terminals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terminals {
    pub source: usize,
    pub relay: usize,
    pub destination: usize,
}

impl Terminals {
    pub fn of(channels: &ChannelSet) -> Self {
        Self {
            source: channels.h_sr.ncols(),
            relay: channels.h_sr.nrows(),
            destination: channels.h_rd.nrows(),
        }
    }

    pub fn max_sd(&self) -> usize {
        self.destination.min(self.source)
    }

    pub fn max_sr(&self) -> usize {
        self.relay.min(self.source)
    }

    pub fn max_rd(&self) -> usize {
        self.relay.min(self.destination)
    }
}

impl StreamSelection {
    /// Stage-1 counts with the stage-2 stream set spanning every direction.
    pub fn new(sd_count: usize, sr_count: usize, terminals: &Terminals) -> Self {
        Self {
            sd_count,
            sr_count,
            rd_count: terminals.max_rd(),
        }
    }

    pub fn validate(&self, terminals: &Terminals) -> Result<()> {
        let total = self.sd_count + self.sr_count;
        if total == 0 {
            return Err(Error::Infeasible("no stage-1 streams selected".into()));
        }
        if total > terminals.source {
            return Err(Error::Infeasible(format!(
                "{total} stage-1 streams exceed {} source antennas",
                terminals.source
            )));
        }
        if self.sd_count > terminals.max_sd() {
            return Err(Error::Infeasible(format!(
                "{} destination streams exceed the link dimension {}",
                self.sd_count,
                terminals.max_sd()
            )));
        }
        if self.sr_count > terminals.max_sr() {
            return Err(Error::Infeasible(format!(
                "{} relay streams exceed the link dimension {}",
                self.sr_count,
                terminals.max_sr()
            )));
        }
        if self.rd_count > terminals.max_rd() {
            return Err(Error::Infeasible("too many relay-destination streams".into()));
        }
        Ok(())
    }
}

/// Block-diagonalized stage-1 link.
#[derive(Debug, Clone)]
pub struct Stage1Decomposition {
    /// Squared singular values of the filtered, projected S-D channel.
    pub sd_gains: Vec<f64>,
    /// Squared singular values of the filtered, projected S-R channel.
    pub sr_gains: Vec<f64>,
    pub precoder_sd: ComplexMatrix,
    pub precoder_sr: ComplexMatrix,
    pub receive_filter_d: ComplexMatrix,
    pub receive_filter_r: ComplexMatrix,
}

impl Stage1Decomposition {
    /// `||W_D^H G_SD B_SR||_F / ||G_SD||_F`.
    pub fn interference_at_destination(&self, g_sd: &ComplexMatrix) -> f64 {
        relative_leak(&self.receive_filter_d, g_sd, &self.precoder_sr)
    }

    /// `||W_R^H G_SR B_SD||_F / ||G_SR||_F`.
    pub fn interference_at_relay(&self, g_sr: &ComplexMatrix) -> f64 {
        relative_leak(&self.receive_filter_r, g_sr, &self.precoder_sd)
    }
}

fn relative_leak(filter: &ComplexMatrix, g: &ComplexMatrix, precoder: &ComplexMatrix) -> f64 {
    let scale = g.norm();
    if scale == 0.0 || filter.ncols() == 0 || precoder.ncols() == 0 {
        return 0.0;
    }
    (filter.adjoint() * g * precoder).norm() / scale
}

#[derive(Debug, Clone)]
pub struct Stage2Decomposition {
    /// Squared singular values of the R-D channel, nonincreasing.
    pub rd_gains: Vec<f64>,
    pub precoder_rd: ComplexMatrix,
}

fn check_shape(m: &ComplexMatrix, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(invalid(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn check_reflection(channels: &ChannelSet, phi: &ComplexMatrix) -> Result<()> {
    let n = channels.h_si.nrows();
    check_shape(phi, n, n, "reflection matrix")
}

/// `h * diag(d)`.
pub(crate) fn scale_columns(h: &ComplexMatrix, d: &[Complex64]) -> ComplexMatrix {
    let mut out = h.clone();
    for (j, &s) in d.iter().enumerate() {
        let mut col = out.column_mut(j);
        col *= s;
    }
    out
}

/// `G_SD = H_ID Phi_1 H_SI`.
pub fn effective_sd(channels: &ChannelSet, phi1: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_reflection(channels, phi1)?;
    Ok(&channels.h_id * phi1 * &channels.h_si)
}

/// `G_SR = H_SR + H_IR Phi_1 H_SI`.
pub fn effective_sr(channels: &ChannelSet, phi1: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_reflection(channels, phi1)?;
    Ok(&channels.h_sr + &channels.h_ir * phi1 * &channels.h_si)
}

/// `H_RD + H_ID Phi_2 H_RI`.
pub fn effective_rd(channels: &ChannelSet, phi2: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_reflection(channels, phi2)?;
    Ok(&channels.h_rd + &channels.h_id * phi2 * &channels.h_ri)
}

/// Same as [`effective_sd`] for a reflection matrix given by its diagonal.
pub fn effective_sd_diag(channels: &ChannelSet, diag: &[Complex64]) -> ComplexMatrix {
    scale_columns(&channels.h_id, diag) * &channels.h_si
}

pub fn effective_sr_diag(channels: &ChannelSet, diag: &[Complex64]) -> ComplexMatrix {
    &channels.h_sr + scale_columns(&channels.h_ir, diag) * &channels.h_si
}

pub fn effective_rd_diag(channels: &ChannelSet, diag: &[Complex64]) -> ComplexMatrix {
    &channels.h_rd + scale_columns(&channels.h_id, diag) * &channels.h_ri
}

/// One link of the block-diagonal construction: the filtered channel
/// `W^H G` restricted to `complement`, diagonalized by its own SVD.
struct LinkDesign {
    gains: Vec<f64>,
    precoder: ComplexMatrix,
    filter: ComplexMatrix,
}

fn design_link(
    filter: &ComplexMatrix,
    g: &ComplexMatrix,
    complement: &ComplexMatrix,
    streams: usize,
) -> Result<LinkDesign> {
    let ns = g.ncols();
    if streams == 0 {
        return Ok(LinkDesign {
            gains: Vec::new(),
            precoder: ComplexMatrix::zeros(ns, 0),
            filter: ComplexMatrix::zeros(g.nrows(), 0),
        });
    }
    if complement.ncols() < streams {
        return Err(Error::Infeasible(format!(
            "null space of dimension {} cannot carry {streams} streams",
            complement.ncols()
        )));
    }
    let projected = filter.adjoint() * g * complement;
    let inner = svd(&projected)?;
    let gains = inner.singular_values[..streams]
        .iter()
        .map(|s| s * s)
        .collect();
    Ok(LinkDesign {
        gains,
        precoder: complement * inner.leading_right(streams),
        filter: filter * inner.leading_left(streams),
    })
}

/// Block diagonalization of the two stage-1 links.
pub fn block_diagonalize(
    g_sd: &ComplexMatrix,
    g_sr: &ComplexMatrix,
    selection: &StreamSelection,
) -> Result<Stage1Decomposition> {
    let ns = g_sd.ncols();
    if g_sr.ncols() != ns {
        return Err(invalid("stage-1 channels disagree on the source dimension"));
    }
    let terminals = Terminals {
        source: ns,
        relay: g_sr.nrows(),
        destination: g_sd.nrows(),
    };
    let check = StreamSelection {
        rd_count: 0,
        ..*selection
    };
    check.validate(&terminals)?;
    let (sd, sr) = (selection.sd_count, selection.sr_count);

    let (filter_d, null_sd) = leading_filter_and_null(g_sd, sd)?;
    let (filter_r, null_sr) = leading_filter_and_null(g_sr, sr)?;

    let to_relay = design_link(&filter_r, g_sr, &null_sd, sr)?;
    let to_destination = design_link(&filter_d, g_sd, &null_sr, sd)?;

    Ok(Stage1Decomposition {
        sd_gains: to_destination.gains,
        sr_gains: to_relay.gains,
        precoder_sd: to_destination.precoder,
        precoder_sr: to_relay.precoder,
        receive_filter_d: to_destination.filter,
        receive_filter_r: to_relay.filter,
    })
}

/// Leading `count` left singular vectors and the complement of the leading
/// `count` right singular vectors.
fn leading_filter_and_null(g: &ComplexMatrix, count: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let ns = g.ncols();
    if count == 0 {
        return Ok((
            ComplexMatrix::zeros(g.nrows(), 0),
            ComplexMatrix::identity(ns, ns),
        ));
    }
    let dec = svd(g)?;
    let null = orthogonal_complement(&dec.leading_right(count), ns)?;
    Ok((dec.leading_left(count), null))
}

/// Capacity-achieving decomposition of the stage-2 channel over all
/// `min(N_R, N_D)` directions.
pub fn stage2_decompose(h_rd_eff: &ComplexMatrix) -> Result<Stage2Decomposition> {
    let dec = svd(h_rd_eff)?;
    let k = dec.singular_values.len();
    Ok(Stage2Decomposition {
        rd_gains: dec.singular_values.iter().map(|s| s * s).collect(),
        precoder_rd: dec.leading_right(k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::orthonormality_defect;
    use crate::seeding::substream;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random(seed: u64, rows: usize, cols: usize) -> ComplexMatrix {
        let mut rng = substream(&[seed]);
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn channels(seed: u64, ni: usize) -> ChannelSet {
        let h_ri = random(seed + 3, ni, 8);
        ChannelSet {
            h_si: random(seed, ni, 16),
            h_sr: random(seed + 1, 8, 16),
            h_rd: random(seed + 2, 4, 8),
            h_id: random(seed + 4, 4, ni),
            h_ir: h_ri.transpose(),
            h_ri,
        }
    }

    fn terminals() -> Terminals {
        Terminals {
            source: 16,
            relay: 8,
            destination: 4,
        }
    }

    #[test]
    fn zero_reflection_cases() {
        let ch = channels(1, 6);
        let off = ComplexMatrix::zeros(6, 6);
        assert_eq!(effective_sd(&ch, &off).unwrap(), ComplexMatrix::zeros(4, 16));
        assert_eq!(effective_sr(&ch, &off).unwrap(), ch.h_sr);
        assert_eq!(effective_rd(&ch, &off).unwrap(), ch.h_rd);
        assert!(effective_sd(&ch, &ComplexMatrix::zeros(5, 5)).is_err());
    }

    #[test]
    fn single_element_is_scaled_outer_product() {
        let ch = channels(2, 1);
        let phi = c(0.3, -0.7);
        let g = effective_sd(&ch, &ComplexMatrix::from_element(1, 1, phi)).unwrap();
        let outer = ch.h_id.column(0) * ch.h_si.row(0) * phi;
        assert!((g - outer).norm() < 1e-12);
        let rd = effective_rd(&ch, &ComplexMatrix::from_element(1, 1, c(0.0, 1.0))).unwrap();
        let correction = rd - &ch.h_rd;
        assert!(svd(&correction).unwrap().rank(1e-9) == 1);
    }

    #[test]
    fn effective_channels_match_explicit_sums() {
        let ch = channels(3, 6);
        let diag: Vec<Complex64> = (0..6).map(|k| Complex64::from_polar(0.5 + 0.1 * k as f64, k as f64)).collect();
        let phi = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag.clone()));
        let sd = effective_sd(&ch, &phi).unwrap();
        let sr = effective_sr(&ch, &phi).unwrap();
        let rd = effective_rd(&ch, &phi).unwrap();
        // explicit entrywise sums over the surface elements
        for d in 0..4 {
            for s in 0..16 {
                let want: Complex64 = (0..6).map(|n| ch.h_id[(d, n)] * diag[n] * ch.h_si[(n, s)]).sum();
                assert!((sd[(d, s)] - want).norm() < 1e-12);
            }
        }
        for r in 0..8 {
            for s in 0..16 {
                let want: Complex64 = ch.h_sr[(r, s)]
                    + (0..6).map(|n| ch.h_ri[(n, r)] * diag[n] * ch.h_si[(n, s)]).sum::<Complex64>();
                assert!((sr[(r, s)] - want).norm() < 1e-12);
            }
        }
        for d in 0..4 {
            for r in 0..8 {
                let want: Complex64 = ch.h_rd[(d, r)]
                    + (0..6).map(|n| ch.h_id[(d, n)] * diag[n] * ch.h_ri[(n, r)]).sum::<Complex64>();
                assert!((rd[(d, r)] - want).norm() < 1e-12);
            }
        }
        assert!((effective_sd_diag(&ch, &diag) - sd).norm() < 1e-12);
        assert!((effective_sr_diag(&ch, &diag) - sr).norm() < 1e-12);
        assert!((effective_rd_diag(&ch, &diag) - rd).norm() < 1e-12);
    }

    #[test]
    fn without_relay_streams_bd_is_plain_svd() {
        let g_sd = random(10, 4, 16);
        let g_sr = random(11, 8, 16);
        let sel = StreamSelection::new(3, 0, &terminals());
        let bd = block_diagonalize(&g_sd, &g_sr, &sel).unwrap();
        let sv = svd(&g_sd).unwrap().singular_values;
        assert_eq!(bd.sd_gains.len(), 3);
        for i in 0..3 {
            assert!((bd.sd_gains[i] - sv[i] * sv[i]).abs() < 1e-9 * sv[0] * sv[0]);
        }
        assert!(bd.sr_gains.is_empty());
        assert_eq!(bd.precoder_sr.ncols(), 0);
    }

    #[test]
    fn relay_only_case() {
        let g_sd = ComplexMatrix::zeros(4, 16);
        let g_sr = random(12, 8, 16);
        let bd = block_diagonalize(&g_sd, &g_sr, &StreamSelection::new(0, 5, &terminals())).unwrap();
        let sv = svd(&g_sr).unwrap().singular_values;
        assert!(bd.sd_gains.is_empty());
        for i in 0..5 {
            assert!((bd.sr_gains[i] - sv[i] * sv[i]).abs() < 1e-9 * sv[0] * sv[0]);
        }
    }

    #[test]
    fn interference_vanishes_both_ways() {
        for seed in 0..20 {
            let g_sd = random(100 + seed, 4, 16);
            let g_sr = random(200 + seed, 8, 16);
            let sel = StreamSelection::new(1 + (seed as usize % 4), 1 + (seed as usize % 8), &terminals());
            let bd = block_diagonalize(&g_sd, &g_sr, &sel).unwrap();
            assert!(bd.interference_at_destination(&g_sd) <= 1e-9);
            assert!(bd.interference_at_relay(&g_sr) <= 1e-9);
            assert!(orthonormality_defect(&bd.precoder_sd) < 1e-9);
            assert!(orthonormality_defect(&bd.precoder_sr) < 1e-9);
            assert!(bd.sd_gains.windows(2).all(|w| w[0] >= w[1]));
            assert!(bd.sd_gains.iter().sum::<f64>() <= g_sd.norm_squared() * (1.0 + 1e-12));
            assert!(bd.sr_gains.iter().sum::<f64>() <= g_sr.norm_squared() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn gains_are_rotation_invariant() {
        let g_sd = random(30, 4, 16);
        let g_sr = random(31, 8, 16);
        let q = random(32, 16, 16).qr().q();
        let sel = StreamSelection::new(2, 4, &terminals());
        let a = block_diagonalize(&g_sd, &g_sr, &sel).unwrap();
        let b = block_diagonalize(&(&g_sd * &q), &(&g_sr * &q), &sel).unwrap();
        for (x, y) in a.sd_gains.iter().zip(&b.sd_gains).chain(a.sr_gains.iter().zip(&b.sr_gains)) {
            assert!((x - y).abs() < 1e-9 * x.max(1.0));
        }
    }

    #[test]
    fn infeasible_selections() {
        let g_sd = random(40, 4, 16);
        let g_sr = random(41, 8, 16);
        let t = terminals();
        for (sd, sr) in [(0, 0), (5, 0), (0, 9)] {
            let sel = StreamSelection::new(sd, sr, &t);
            assert!(matches!(block_diagonalize(&g_sd, &g_sr, &sel), Err(Error::Infeasible(_))));
        }
        let small = Terminals { source: 4, relay: 4, destination: 4 };
        assert!(StreamSelection::new(3, 2, &small).validate(&small).is_err());
        assert!(StreamSelection::new(2, 2, &small).validate(&small).is_ok());
    }

    #[test]
    fn stage2_cases() {
        let mut d = ComplexMatrix::zeros(4, 8);
        d[(0, 0)] = c(1.0, 0.0);
        d[(1, 1)] = c(3.0, 0.0);
        d[(2, 2)] = c(-2.0, 0.0);
        let out = stage2_decompose(&d).unwrap();
        let want = [9.0, 4.0, 1.0, 0.0];
        for (g, w) in out.rd_gains.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
        let zero = stage2_decompose(&ComplexMatrix::zeros(4, 8)).unwrap();
        assert!(zero.rd_gains.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn stage2_gains_are_eigenvalues_of_gram() {
        let h = random(50, 4, 8);
        let out = stage2_decompose(&h).unwrap();
        let gram = &h * h.adjoint();
        // Hermitian eigenvalues via the real symmetric embedding [[A, -B], [B, A]],
        // which lists every eigenvalue twice.
        let n = gram.nrows();
        let real = nalgebra::DMatrix::<f64>::from_fn(2 * n, 2 * n, |r, col| {
            let z = gram[(r % n, col % n)];
            match (r < n, col < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        let mut eig: Vec<f64> = real.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        for (k, g) in out.rd_gains.iter().enumerate() {
            assert!((g - eig[2 * k]).abs() < 1e-9 * eig[0]);
        }
    }
}
