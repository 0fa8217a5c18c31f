//! The compared transmission schemes.
//!
//! * `hybrid_optimized`: surface and relay together, everything searched.
//! * `hybrid_random_irs`: surface and relay, random surface configurations,
//!   stream counts and relay power optimized.
//! * `irs_optimized`: surface only, single stage, configuration searched.
//! * `irs_random`: surface only, single stage, random configuration.
//! * `relay_only`: relay only, two stages, surface switched off.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::irs::IrsConfiguration;
use crate::numerics::ComplexMatrix;
use crate::optimizer::{exhaustive_search_in, genetic_search, GaSettings, Problem, SearchSpace, SolutionCandidate};
use crate::power::{solve_stage1, solve_stage2, total_rate};
use crate::precoding::{block_diagonalize, stage2_decompose, StreamSelection};
use crate::seeding::{derive_seed, label, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    HybridOptimized,
    HybridRandomIrs,
    IrsOptimized,
    IrsRandom,
    RelayOnly,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [
        SchemeId::HybridOptimized,
        SchemeId::HybridRandomIrs,
        SchemeId::IrsOptimized,
        SchemeId::IrsRandom,
        SchemeId::RelayOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::HybridOptimized => "hybrid_optimized",
            SchemeId::HybridRandomIrs => "hybrid_random_irs",
            SchemeId::IrsOptimized => "irs_optimized",
            SchemeId::IrsRandom => "irs_random",
            SchemeId::RelayOnly => "relay_only",
        }
    }

    /// Schemes whose result this scheme reuses.
    pub fn dependencies(self) -> &'static [SchemeId] {
        match self {
            SchemeId::HybridOptimized => &[SchemeId::HybridRandomIrs, SchemeId::IrsOptimized],
            SchemeId::IrsOptimized => &[SchemeId::IrsRandom],
            _ => &[],
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| invalid(format!("unknown scheme '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransmissionMode {
    /// Source to destination through the surface only, full time slot.
    SingleStage,
    /// Two half-slots with decode-and-forward at the relay.
    TwoStage,
}

/// Rates and powers of one evaluated transmission. Rates are in bits per
/// channel use; `c_rd` is the rate the relay can forward in stage 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub mode: TransmissionMode,
    pub c_sd: f64,
    pub c_sr: f64,
    pub c_rd: f64,
    pub achievable_rate: f64,
    pub p_s_eff: f64,
    pub p_r_eff: f64,
    pub powers_sd: Vec<f64>,
    pub powers_sr: Vec<f64>,
    pub powers_rd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub breakdown: RateBreakdown,
    /// Chosen point of the search space; `None` for the relay-only scheme.
    pub candidate: Option<SolutionCandidate>,
}

/// Evaluates schemes on one drop, sharing results between schemes that
/// build on each other.
pub struct DropEvaluator<'a> {
    problem: Problem<'a>,
    ga: GaSettings,
    drop_seed: u64,
    done: HashMap<SchemeId, SchemeOutcome>,
}

impl<'a> DropEvaluator<'a> {
    pub fn new(problem: Problem<'a>, ga: GaSettings, drop_seed: u64) -> Self {
        Self {
            problem,
            ga,
            drop_seed,
            done: HashMap::new(),
        }
    }

    pub fn problem(&self) -> &Problem<'a> {
        &self.problem
    }

    pub fn evaluate(&mut self, scheme: SchemeId) -> Result<SchemeOutcome> {
        if let Some(hit) = self.done.get(&scheme) {
            return Ok(hit.clone());
        }
        let outcome = match scheme {
            SchemeId::IrsRandom => self.irs_random()?,
            SchemeId::IrsOptimized => self.irs_optimized()?,
            SchemeId::HybridRandomIrs => self.hybrid_random()?,
            SchemeId::HybridOptimized => self.hybrid_optimized()?,
            SchemeId::RelayOnly => SchemeOutcome {
                breakdown: relay_only(&self.problem)?,
                candidate: None,
            },
        };
        self.done.insert(scheme, outcome.clone());
        Ok(outcome)
    }

    fn ga_settings(&self, tag: u64) -> GaSettings {
        GaSettings {
            seed: derive_seed(&[self.ga.seed, self.drop_seed, tag]),
            ..self.ga.clone()
        }
    }

    fn single_stage_candidate(&self, phi1: IrsConfiguration) -> SolutionCandidate {
        let n = self.problem.irs().element_count;
        SolutionCandidate {
            phi1,
            phi2: IrsConfiguration::uniform(n, 0),
            sd_count: self.problem.terminals().max_sd(),
            sr_count: 0,
            p_r_eff_level: 0,
        }
    }

    fn irs_random(&self) -> Result<SchemeOutcome> {
        let mut rng = substream(&[self.drop_seed, label::RANDOM_IRS_SINGLE]);
        let phi1 = IrsConfiguration::random(self.problem.irs(), &mut rng);
        let candidate = self.single_stage_candidate(phi1);
        Ok(SchemeOutcome {
            breakdown: self.problem.evaluate(&candidate)?,
            candidate: Some(candidate),
        })
    }

    fn irs_optimized(&mut self) -> Result<SchemeOutcome> {
        let seeds = self.seed_candidates(SchemeId::IrsOptimized)?;
        let space = SearchSpace::irs_only(&self.problem);
        let settings = self.ga_settings(label::GA_IRS_ONLY);
        let out = genetic_search(&self.problem, &space, &settings, &seeds)?;
        Ok(SchemeOutcome {
            breakdown: out.rate_breakdown,
            candidate: Some(out.best_candidate),
        })
    }

    fn hybrid_random(&self) -> Result<SchemeOutcome> {
        let irs = self.problem.irs();
        let phi1 = IrsConfiguration::random(irs, &mut substream(&[self.drop_seed, label::RANDOM_IRS_HYBRID, 1]));
        let phi2 = IrsConfiguration::random(irs, &mut substream(&[self.drop_seed, label::RANDOM_IRS_HYBRID, 2]));
        let space = SearchSpace::fixed_phases(&self.problem, &phi1, &phi2)?;
        let out = exhaustive_search_in(&self.problem, &space)?;
        Ok(SchemeOutcome {
            breakdown: out.rate_breakdown,
            candidate: Some(out.best_candidate),
        })
    }

    fn hybrid_optimized(&mut self) -> Result<SchemeOutcome> {
        let seeds = self.seed_candidates(SchemeId::HybridOptimized)?;
        let space = SearchSpace::hybrid(&self.problem);
        let settings = self.ga_settings(label::GA_HYBRID);
        let out = genetic_search(&self.problem, &space, &settings, &seeds)?;
        Ok(SchemeOutcome {
            breakdown: out.rate_breakdown,
            candidate: Some(out.best_candidate),
        })
    }

    /// Solutions of the dependencies, used to seed a search so that it never
    /// ends below the schemes it generalizes.
    fn seed_candidates(&mut self, scheme: SchemeId) -> Result<Vec<SolutionCandidate>> {
        let mut seeds = Vec::new();
        for &dep in scheme.dependencies() {
            if let Some(c) = self.evaluate(dep)?.candidate {
                seeds.push(c);
            }
        }
        Ok(seeds)
    }
}

/// Two-stage relaying with the surface switched off, all relay streams and
/// the best relay power on the grid.
pub fn relay_only(problem: &Problem) -> Result<RateBreakdown> {
    let ch = problem.channels();
    let t = problem.terminals();
    let budget = problem.budget();
    let g_sd = ComplexMatrix::zeros(t.destination, t.source);
    let selection = StreamSelection::new(0, t.max_sr(), &t);
    let stage1 = block_diagonalize(&g_sd, &ch.h_sr, &selection)?;
    let stage2 = stage2_decompose(&ch.h_rd)?;

    let mut best: Option<RateBreakdown> = None;
    for level in 0..problem.relay_levels() {
        let split = budget.split(budget.relay_level(level, problem.relay_levels()))?;
        let s2 = solve_stage2(&stage2.rd_gains, split.p_r_eff, budget.noise_power)?;
        let s1 = solve_stage1(&stage1.sd_gains, &stage1.sr_gains, split.p_s_eff, s2.c_rd_star, budget.noise_power)?;
        let rate = total_rate(&s1, s2.c_rd_star);
        if best.as_ref().is_none_or(|b| rate > b.achievable_rate) {
            best = Some(RateBreakdown {
                mode: TransmissionMode::TwoStage,
                c_sd: s1.c_sd,
                c_sr: s1.c_sr,
                c_rd: s2.c_rd_star,
                achievable_rate: rate,
                p_s_eff: split.p_s_eff,
                p_r_eff: split.p_r_eff,
                powers_sd: s1.powers_sd,
                powers_sr: s1.powers_sr,
                powers_rd: s2.powers_rd,
            });
        }
    }
    best.ok_or_else(|| invalid("empty relay power grid"))
}

/// Rate of a single scheme on one drop.
pub fn evaluate(scheme: SchemeId, problem: Problem, ga: &GaSettings, drop_seed: u64) -> Result<RateBreakdown> {
    DropEvaluator::new(problem, ga.clone(), drop_seed)
        .evaluate(scheme)
        .map(|o| o.breakdown)
}
