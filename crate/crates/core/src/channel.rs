//! Geometric narrowband mmWave channels.
//!
//! Each link is a sum of `M` non-line-of-sight paths with a circularly
//! symmetric Gaussian gain, a common distance-dependent path loss, and random
//! steering directions at both ends. Node positions only enter through the
//! path loss; angles are drawn at random.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{db_to_amplitude_ratio, ComplexMatrix};
use crate::seeding::{label, substream};

/// Cartesian position in meters.
pub type Position = [f64; 3];

pub fn distance(a: &Position, b: &Position) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeGeometry {
    pub source: Position,
    pub relay: Position,
    pub destination: Position,
    pub irs: Position,
}

impl NodeGeometry {
    pub fn validate(&self) -> Result<()> {
        let nodes = [
            ("source", &self.source),
            ("relay", &self.relay),
            ("destination", &self.destination),
            ("irs", &self.irs),
        ];
        for (name, p) in &nodes {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(invalid(format!("{name} position is not finite")));
            }
        }
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                if distance(nodes[i].1, nodes[j].1) <= 0.0 {
                    return Err(invalid(format!(
                        "{} and {} share a position",
                        nodes[i].0, nodes[j].0
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrayKind {
    /// Uniform linear array.
    Ula,
    /// Uniform planar array laid out on a square grid.
    Upa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub kind: ArrayKind,
    pub element_count: usize,
}

impl ArraySpec {
    pub fn ula(element_count: usize) -> Self {
        Self {
            kind: ArrayKind::Ula,
            element_count,
        }
    }

    pub fn upa(element_count: usize) -> Self {
        Self {
            kind: ArrayKind::Upa,
            element_count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.element_count == 0 {
            return Err(invalid("array must have at least one element"));
        }
        if self.kind == ArrayKind::Upa && self.grid_side().is_none() {
            return Err(invalid(format!(
                "planar array with {} elements is not a square grid",
                self.element_count
            )));
        }
        Ok(())
    }

    /// Side length of the square grid of a planar array.
    pub fn grid_side(&self) -> Option<usize> {
        let side = (self.element_count as f64).sqrt().round() as usize;
        (side * side == self.element_count).then_some(side)
    }

    /// Grid offset `(x, y)` of element `n`; linear arrays use `y = 0`.
    pub fn offset(&self, n: usize) -> (f64, f64) {
        match self.kind {
            ArrayKind::Ula => (n as f64, 0.0),
            ArrayKind::Upa => {
                let side = self.grid_side().unwrap_or(1);
                ((n % side) as f64, (n / side) as f64)
            }
        }
    }
}

/// Steering direction at one end of a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub azimuth: f64,
    pub elevation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRealization {
    pub gain: Complex64,
    pub at_transmitter: Direction,
    pub at_receiver: Direction,
}

/// Amplitude path-loss factor `K0 (d / d0)^(-alpha / 2)`.
pub fn path_loss(distance: f64, reference_distance: f64, k0_db: f64, exponent: f64) -> Result<f64> {
    if !(distance.is_finite() && distance > 0.0) {
        return Err(invalid(format!("distance {distance} must be positive")));
    }
    if !(reference_distance.is_finite() && reference_distance > 0.0) {
        return Err(invalid("reference distance must be positive"));
    }
    Ok(db_to_amplitude_ratio(k0_db) * (distance / reference_distance).powf(-exponent / 2.0))
}

/// Array response `exp(j pi [x sin(el) cos(az) + y sin(el) sin(az)])` for every
/// element offset of the array.
pub fn array_response(spec: &ArraySpec, azimuth: f64, elevation: f64) -> Result<Vec<Complex64>> {
    spec.validate()?;
    let (sa, ca) = azimuth.sin_cos();
    let se = elevation.sin();
    Ok((0..spec.element_count)
        .map(|n| {
            let (x, y) = spec.offset(n);
            Complex64::from_polar(1.0, PI * (x * se * ca + y * se * sa))
        })
        .collect())
}

/// Draws a steering direction: elevation uniform on `[0, 2pi)` everywhere;
/// azimuth uniform on `[0, pi/2)` for planar arrays and zero for linear ones.
pub fn sample_direction<R: Rng + ?Sized>(spec: &ArraySpec, rng: &mut R) -> Direction {
    let elevation = rng.random_range(0.0..2.0 * PI);
    let azimuth = match spec.kind {
        ArrayKind::Upa => rng.random_range(0.0..FRAC_PI_2),
        ArrayKind::Ula => 0.0,
    };
    Direction { azimuth, elevation }
}

/// Unit-variance circularly symmetric complex Gaussian draw.
pub fn sample_gain<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn sample_path<R: Rng + ?Sized>(tx: &ArraySpec, rx: &ArraySpec, rng: &mut R) -> PathRealization {
    let gain = sample_gain(rng);
    let at_transmitter = sample_direction(tx, rng);
    let at_receiver = sample_direction(rx, rng);
    PathRealization {
        gain,
        at_transmitter,
        at_receiver,
    }
}

/// `rx x tx` matrix `amplitude / sqrt(M) * sum_m g_m a_rx a_tx^H`.
pub fn channel_from_paths(
    tx: &ArraySpec,
    rx: &ArraySpec,
    amplitude: f64,
    paths: &[PathRealization],
) -> Result<ComplexMatrix> {
    let mut h = ComplexMatrix::zeros(rx.element_count, tx.element_count);
    if paths.is_empty() {
        return Ok(h);
    }
    let scale = amplitude / (paths.len() as f64).sqrt();
    for path in paths {
        let a_tx = array_response(tx, path.at_transmitter.azimuth, path.at_transmitter.elevation)?;
        let a_rx = array_response(rx, path.at_receiver.azimuth, path.at_receiver.elevation)?;
        let g = path.gain * scale;
        for (r, ar) in a_rx.iter().enumerate() {
            let gr = g * ar;
            for (t, at) in a_tx.iter().enumerate() {
                h[(r, t)] += gr * at.conj();
            }
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub k0_db: f64,
    pub reference_distance: f64,
    pub exponent: f64,
}

impl PathLossModel {
    pub fn amplitude(&self, distance: f64) -> Result<f64> {
        path_loss(distance, self.reference_distance, self.k0_db, self.exponent)
    }
}

/// Samples one `rx x tx` link with `path_count` paths.
pub fn sample_channel<R: Rng + ?Sized>(
    tx: &ArraySpec,
    rx: &ArraySpec,
    distance: f64,
    path_count: usize,
    rng: &mut R,
    path_loss: &PathLossModel,
) -> Result<ComplexMatrix> {
    if path_count == 0 {
        return Err(invalid("at least one path is required"));
    }
    tx.validate()?;
    rx.validate()?;
    let amplitude = path_loss.amplitude(distance)?;
    let paths: Vec<PathRealization> = (0..path_count).map(|_| sample_path(tx, rx, rng)).collect();
    channel_from_paths(tx, rx, amplitude, &paths)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arrays {
    pub source: ArraySpec,
    pub relay: ArraySpec,
    pub destination: ArraySpec,
    pub irs: ArraySpec,
}

/// Everything needed to draw the channels of one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub geometry: NodeGeometry,
    pub arrays: Arrays,
    pub path_count: usize,
    pub path_loss: PathLossModel,
}

/// Independently sampled links.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    SourceIrs,
    SourceRelay,
    RelayIrs,
    RelayDestination,
    IrsDestination,
}

impl Link {
    pub const ALL: [Link; 5] = [
        Link::SourceIrs,
        Link::SourceRelay,
        Link::RelayIrs,
        Link::RelayDestination,
        Link::IrsDestination,
    ];

    fn id(self) -> u64 {
        self as u64
    }
}

/// The six channel matrices of one drop. `h_ir` is the plain transpose of
/// `h_ri`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// S to I, `N_I x N_S`.
    pub h_si: ComplexMatrix,
    /// S to R, `N_R x N_S`.
    pub h_sr: ComplexMatrix,
    /// R to I, `N_I x N_R`.
    pub h_ri: ComplexMatrix,
    /// R to D, `N_D x N_R`.
    pub h_rd: ComplexMatrix,
    /// I to D, `N_D x N_I`.
    pub h_id: ComplexMatrix,
    /// I to R, `N_R x N_I`.
    pub h_ir: ComplexMatrix,
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        for spec in [
            &self.arrays.source,
            &self.arrays.relay,
            &self.arrays.destination,
            &self.arrays.irs,
        ] {
            spec.validate()?;
        }
        if self.path_count == 0 {
            return Err(invalid("path count must be positive"));
        }
        if !(self.path_loss.reference_distance > 0.0 && self.path_loss.exponent.is_finite()) {
            return Err(invalid("invalid path-loss constants"));
        }
        Ok(())
    }

    fn endpoints(&self, link: Link) -> (&ArraySpec, &ArraySpec, &Position, &Position) {
        let g = &self.geometry;
        let a = &self.arrays;
        match link {
            Link::SourceIrs => (&a.source, &a.irs, &g.source, &g.irs),
            Link::SourceRelay => (&a.source, &a.relay, &g.source, &g.relay),
            Link::RelayIrs => (&a.relay, &a.irs, &g.relay, &g.irs),
            Link::RelayDestination => (&a.relay, &a.destination, &g.relay, &g.destination),
            Link::IrsDestination => (&a.irs, &a.destination, &g.irs, &g.destination),
        }
    }

    /// Samples one link from its own substream of `drop_seed`.
    pub fn sample_link(&self, link: Link, drop_seed: u64) -> Result<ComplexMatrix> {
        let (tx, rx, p_tx, p_rx) = self.endpoints(link);
        let mut rng = substream(&[drop_seed, label::CHANNEL, link.id()]);
        sample_channel(tx, rx, distance(p_tx, p_rx), self.path_count, &mut rng, &self.path_loss)
    }
}

/// Samples all links of one drop. Identical `(model, drop_seed)` pairs give
/// bit-identical channel sets.
pub fn sample_channel_set(model: &ChannelModel, drop_seed: u64) -> Result<ChannelSet> {
    model.validate()?;
    let h_si = model.sample_link(Link::SourceIrs, drop_seed)?;
    let h_sr = model.sample_link(Link::SourceRelay, drop_seed)?;
    let h_ri = model.sample_link(Link::RelayIrs, drop_seed)?;
    let h_rd = model.sample_link(Link::RelayDestination, drop_seed)?;
    let h_id = model.sample_link(Link::IrsDestination, drop_seed)?;
    let h_ir = h_ri.transpose();
    Ok(ChannelSet {
        h_si,
        h_sr,
        h_ri,
        h_rd,
        h_id,
        h_ir,
    })
}
