//! Power allocation for the two transmission stages.
//!
//! For a fixed relay power `P_R,eff` the problem separates: stage 2 is plain
//! waterfilling over the relay-destination gains, which yields the rate
//! `C*_RD` the relay can forward. Stage 1 then splits the source budget
//! between destination and relay streams so that `C_SD + C_SR` is maximal
//! while `C_SR <= C*_RD`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{parallel_rate, waterfill};

/// Transmit power limits and receiver noise, in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    /// Source cap `P_S`.
    pub p_s: f64,
    /// Relay cap `P_R`.
    pub p_r: f64,
    /// Cap on the sum of source and relay power `P_max`.
    pub p_max: f64,
    /// Noise power at every receiver.
    pub noise_power: f64,
}

impl PowerBudget {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_s", self.p_s),
            ("p_r", self.p_r),
            ("p_max", self.p_max),
            ("noise_power", self.noise_power),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(format!("{name} = {v} must be finite and nonnegative")));
            }
        }
        if self.p_max <= 0.0 || self.noise_power <= 0.0 {
            return Err(invalid("p_max and noise power must be positive"));
        }
        if self.p_s > self.p_max || self.p_r > self.p_max {
            return Err(invalid("per-node caps cannot exceed the total cap"));
        }
        Ok(())
    }

    /// Largest relay power that can be spent in stage 2.
    pub fn relay_cap(&self) -> f64 {
        self.p_r.min(self.p_max)
    }

    pub fn split(&self, p_r_eff: f64) -> Result<PowerSplit> {
        if !(0.0..=self.relay_cap()).contains(&p_r_eff) {
            return Err(invalid(format!(
                "relay power {p_r_eff} outside [0, {}]",
                self.relay_cap()
            )));
        }
        Ok(PowerSplit {
            p_r_eff,
            p_s_eff: self.p_s.min(self.p_max - p_r_eff).max(0.0),
        })
    }

    /// Relay power of level `level` on a grid of `levels` equally spaced
    /// values over `[0, relay_cap]`. A one-level grid holds only the cap.
    pub fn relay_level(&self, level: usize, levels: usize) -> f64 {
        if levels <= 1 {
            return self.relay_cap();
        }
        self.relay_cap() * level.min(levels - 1) as f64 / (levels - 1) as f64
    }
}

/// Relay power actually spent and the source power it leaves available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    pub p_r_eff: f64,
    pub p_s_eff: f64,
}

/// Which branch of the stage-1 solution produced the allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binding {
    /// Joint waterfilling already respects `C_SR <= C*_RD`.
    RelayConstraintSlack,
    /// `C_SR` pinned to `C*_RD` with minimum relay-stream power.
    RelayConstraintTight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Allocation {
    pub powers_sd: Vec<f64>,
    pub powers_sr: Vec<f64>,
    pub c_sd: f64,
    pub c_sr: f64,
    pub binding: Binding,
}

impl Stage1Allocation {
    pub fn total_power(&self) -> f64 {
        self.powers_sd.iter().sum::<f64>() + self.powers_sr.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Allocation {
    pub powers_rd: Vec<f64>,
    pub c_rd_star: f64,
}

fn usable(gain: f64, noise_power: f64) -> bool {
    gain.is_finite() && gain > 0.0 && (noise_power / gain).is_finite()
}

/// Waterfilling that tolerates zero gains. Zero-gain channels receive no
/// power unless every channel is dead, in which case the budget is spread
/// evenly (it carries no rate either way).
fn allocate(gains: &[f64], budget: f64, noise_power: f64) -> Result<Vec<f64>> {
    let live: Vec<usize> = (0..gains.len())
        .filter(|&i| usable(gains[i], noise_power))
        .collect();
    let mut powers = vec![0.0; gains.len()];
    if live.is_empty() {
        if !gains.is_empty() && budget > 0.0 {
            powers.fill(budget / gains.len() as f64);
        }
        return Ok(powers);
    }
    let live_gains: Vec<f64> = live.iter().map(|&i| gains[i]).collect();
    let out = waterfill(&live_gains, budget, noise_power)?;
    for (&i, p) in live.iter().zip(out.powers) {
        powers[i] = p;
    }
    Ok(powers)
}

/// Stage 2: waterfilling over the relay-destination gains with budget
/// `p_r_eff`.
pub fn solve_stage2(rd_gains: &[f64], p_r_eff: f64, noise_power: f64) -> Result<Stage2Allocation> {
    if !(p_r_eff.is_finite() && p_r_eff >= 0.0) {
        return Err(invalid("relay power must be nonnegative"));
    }
    let powers_rd = allocate(rd_gains, p_r_eff, noise_power)?;
    let c_rd_star = parallel_rate(rd_gains, &powers_rd, noise_power);
    Ok(Stage2Allocation {
        powers_rd,
        c_rd_star,
    })
}

/// Minimum total power reaching `target_bits` over parallel channels
/// (inverse waterfilling).
///
/// Active channels share the level `mu = (2^target prod_j noise/g_j)^(1/n)`
/// and receive `mu - noise/g_j`. Channels whose floor `noise/g_j` lies above
/// the level are dropped and the level recomputed over the survivors until
/// every active power is positive.
pub fn min_power_for_rate(gains: &[f64], target_bits: f64, noise_power: f64) -> Result<Vec<f64>> {
    let mut powers = vec![0.0; gains.len()];
    if target_bits <= 0.0 {
        return Ok(powers);
    }
    let mut active: Vec<usize> = (0..gains.len())
        .filter(|&i| usable(gains[i], noise_power))
        .collect();
    if active.is_empty() {
        return Err(Error::Infeasible(format!(
            "no usable channel can carry {target_bits} bits"
        )));
    }
    let floor = |i: usize| noise_power / gains[i];
    active.sort_by(|&a, &b| floor(a).total_cmp(&floor(b)));

    let level = loop {
        let n = active.len() as f64;
        let log_sum: f64 = active.iter().map(|&i| floor(i).ln()).sum();
        let level = ((target_bits * std::f64::consts::LN_2 + log_sum) / n).exp();
        match active.last() {
            Some(&weakest) if active.len() > 1 && floor(weakest) >= level => {
                active.pop();
            }
            _ => break level,
        }
    };
    for &i in &active {
        powers[i] = (level - floor(i)).max(0.0);
    }
    Ok(powers)
}

/// Stage 1: maximize `C_SD + C_SR` over the source budget subject to
/// `C_SR <= C*_RD`.
///
/// Joint waterfilling over both stream sets is optimal whenever it already
/// respects the relay constraint. Otherwise the constraint is tight: the
/// relay streams get the least power reaching `C*_RD` and the rest of the
/// budget is waterfilled over the destination streams.
pub fn solve_stage1(
    sd_gains: &[f64],
    sr_gains: &[f64],
    p_s_eff: f64,
    c_rd_star: f64,
    noise_power: f64,
) -> Result<Stage1Allocation> {
    if !(p_s_eff.is_finite() && p_s_eff >= 0.0) {
        return Err(invalid("source power must be nonnegative"));
    }
    if !(c_rd_star.is_finite() && c_rd_star >= 0.0) {
        return Err(invalid("relay rate must be nonnegative"));
    }

    let joint_gains: Vec<f64> = sd_gains.iter().chain(sr_gains).copied().collect();
    let joint = allocate(&joint_gains, p_s_eff, noise_power)?;
    let (powers_sd, powers_sr) = joint.split_at(sd_gains.len());
    let c_sr = parallel_rate(sr_gains, powers_sr, noise_power);
    if c_sr <= c_rd_star {
        return Ok(Stage1Allocation {
            c_sd: parallel_rate(sd_gains, powers_sd, noise_power),
            c_sr,
            powers_sd: powers_sd.to_vec(),
            powers_sr: powers_sr.to_vec(),
            binding: Binding::RelayConstraintSlack,
        });
    }

    let powers_sr = min_power_for_rate(sr_gains, c_rd_star, noise_power)?;
    let spent: f64 = powers_sr.iter().sum();
    if spent > p_s_eff * (1.0 + 1e-12) + 1e-300 {
        return Err(Error::Consistency(format!(
            "relay streams need {spent} W to reach {c_rd_star} bits but joint waterfilling exceeded it within {p_s_eff} W"
        )));
    }
    let remaining = (p_s_eff - spent).max(0.0);
    let powers_sd = allocate(sd_gains, remaining, noise_power)?;
    Ok(Stage1Allocation {
        c_sd: parallel_rate(sd_gains, &powers_sd, noise_power),
        c_sr: parallel_rate(sr_gains, &powers_sr, noise_power),
        powers_sd,
        powers_sr,
        binding: Binding::RelayConstraintTight,
    })
}

/// Two-stage achievable rate `(C_SD + min(C_SR, C*_RD)) / 2`.
pub fn total_rate(alloc: &Stage1Allocation, c_rd_star: f64) -> f64 {
    0.5 * (alloc.c_sd + alloc.c_sr.min(c_rd_star))
}
