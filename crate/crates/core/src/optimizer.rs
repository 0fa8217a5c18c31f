//! Search over surface configurations, stream counts and relay power.
//!
//! A candidate fixes both stage configurations of the surface, the number of
//! streams sent to the destination and to the relay, and a level on the
//! relay-power grid. For a fixed candidate every remaining variable (the
//! precoders and the per-stream powers) has a closed-form optimum, so the
//! search only explores this discrete space: with a generational genetic
//! algorithm in general, or by plain enumeration on tiny instances.
//!
//! A candidate with no relay streams is a single-stage transmission through
//! the surface: the relay stays silent, the source may spend the whole
//! `P_max`, and no half-duplex penalty applies.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{invalid, Error, Result};
use crate::irs::{IrsConfiguration, IrsModelParams};
use crate::numerics::waterfill;
use crate::power::{solve_stage1, solve_stage2, total_rate, PowerBudget};
use crate::precoding::{
    block_diagonalize, effective_rd_diag, effective_sd_diag, effective_sr_diag, stage2_decompose,
    StreamSelection, Terminals,
};
use crate::schemes::{RateBreakdown, TransmissionMode};
use crate::seeding::substream;

/// Largest search space [`exhaustive_search`] will enumerate.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

/// One point of the discrete search space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SolutionCandidate {
    pub phi1: IrsConfiguration,
    pub phi2: IrsConfiguration,
    pub sd_count: usize,
    pub sr_count: usize,
    pub p_r_eff_level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaSettings {
    pub population_size: usize,
    pub generation_count: usize,
    pub elite_count: usize,
    pub crossover_probability: f64,
    /// Per-gene mutation probability; `None` means `1 / L` with `L` the
    /// number of free genes.
    pub mutation_probability: Option<f64>,
    pub tournament_size: usize,
    pub seed: u64,
}

impl Default for GaSettings {
    fn default() -> Self {
        Self {
            population_size: 50,
            generation_count: 100,
            elite_count: 2,
            crossover_probability: 0.9,
            mutation_probability: None,
            tournament_size: 3,
            seed: 0,
        }
    }
}

impl GaSettings {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 || self.generation_count == 0 {
            return Err(invalid("population and generation count must be positive"));
        }
        if self.elite_count >= self.population_size {
            return Err(invalid("elite count must be smaller than the population"));
        }
        if self.tournament_size == 0 {
            return Err(invalid("tournament size must be positive"));
        }
        if !(0.0..=1.0).contains(&self.crossover_probability) {
            return Err(invalid("crossover probability outside [0, 1]"));
        }
        if let Some(p) = self.mutation_probability {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid("mutation probability outside [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best_candidate: SolutionCandidate,
    pub best_rate: f64,
    pub rate_breakdown: RateBreakdown,
    /// Best fitness found so far, one entry per generation.
    pub fitness_trace: Vec<f64>,
    /// Number of distinct candidates evaluated.
    pub evaluations: usize,
}

/// Rate evaluation for one channel drop.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    channels: &'a ChannelSet,
    irs: IrsModelParams,
    budget: PowerBudget,
    relay_levels: usize,
    terminals: Terminals,
    coefficients: Vec<Complex64>,
}

/// Decomposition of a candidate that does not depend on the relay power.
enum Prepared {
    SingleStage { sd_gains: Vec<f64> },
    TwoStage {
        sd_gains: Vec<f64>,
        sr_gains: Vec<f64>,
        rd_gains: Vec<f64>,
    },
}

impl<'a> Problem<'a> {
    pub fn new(
        channels: &'a ChannelSet,
        irs: IrsModelParams,
        budget: PowerBudget,
        relay_levels: usize,
    ) -> Result<Self> {
        irs.validate()?;
        budget.validate()?;
        if relay_levels == 0 {
            return Err(invalid("relay power grid needs at least one level"));
        }
        if channels.h_si.nrows() != irs.element_count {
            return Err(invalid(format!(
                "channels describe {} surface elements, parameters {}",
                channels.h_si.nrows(),
                irs.element_count
            )));
        }
        Ok(Self {
            channels,
            irs,
            budget,
            relay_levels,
            terminals: Terminals::of(channels),
            coefficients: irs.coefficient_table(),
        })
    }

    pub fn channels(&self) -> &ChannelSet {
        self.channels
    }

    pub fn irs(&self) -> &IrsModelParams {
        &self.irs
    }

    pub fn budget(&self) -> &PowerBudget {
        &self.budget
    }

    pub fn relay_levels(&self) -> usize {
        self.relay_levels
    }

    pub fn terminals(&self) -> Terminals {
        self.terminals
    }

    fn diagonal(&self, config: &IrsConfiguration) -> Result<Vec<Complex64>> {
        config.validate(&self.irs)?;
        Ok(config
            .phase_indices
            .iter()
            .map(|&i| self.coefficients[i as usize])
            .collect())
    }

    fn prepare(&self, cand: &SolutionCandidate) -> Result<Prepared> {
        let selection = StreamSelection::new(cand.sd_count, cand.sr_count, &self.terminals);
        selection.validate(&self.terminals)?;
        let phi1 = self.diagonal(&cand.phi1)?;
        let g_sd = effective_sd_diag(self.channels, &phi1);
        if cand.sr_count == 0 {
            let dec = crate::numerics::svd(&g_sd)?;
            let sd_gains = dec.singular_values[..cand.sd_count]
                .iter()
                .map(|s| s * s)
                .collect();
            return Ok(Prepared::SingleStage { sd_gains });
        }
        let phi2 = self.diagonal(&cand.phi2)?;
        let g_sr = effective_sr_diag(self.channels, &phi1);
        let stage1 = block_diagonalize(&g_sd, &g_sr, &selection)?;
        let stage2 = stage2_decompose(&effective_rd_diag(self.channels, &phi2))?;
        Ok(Prepared::TwoStage {
            sd_gains: stage1.sd_gains,
            sr_gains: stage1.sr_gains,
            rd_gains: stage2.rd_gains,
        })
    }

    fn finish(&self, prepared: &Prepared, level: usize) -> Result<RateBreakdown> {
        let noise = self.budget.noise_power;
        match prepared {
            Prepared::SingleStage { sd_gains } => {
                let p_s_eff = self.budget.p_max;
                let live: Vec<f64> = sd_gains.iter().copied().filter(|&g| g > 0.0).collect();
                let (powers_sd, c_sd) = if live.is_empty() {
                    (vec![0.0; sd_gains.len()], 0.0)
                } else {
                    let wf = waterfill(&live, p_s_eff, noise)?;
                    let mut powers = vec![0.0; sd_gains.len()];
                    let mut it = wf.powers.into_iter();
                    for (p, g) in powers.iter_mut().zip(sd_gains) {
                        if *g > 0.0 {
                            *p = it.next().unwrap_or(0.0);
                        }
                    }
                    (powers, wf.rate_bits)
                };
                Ok(RateBreakdown {
                    mode: TransmissionMode::SingleStage,
                    c_sd,
                    c_sr: 0.0,
                    c_rd: 0.0,
                    achievable_rate: c_sd,
                    p_s_eff,
                    p_r_eff: 0.0,
                    powers_sd,
                    powers_sr: Vec::new(),
                    powers_rd: Vec::new(),
                })
            }
            Prepared::TwoStage {
                sd_gains,
                sr_gains,
                rd_gains,
            } => {
                if level >= self.relay_levels {
                    return Err(invalid(format!("relay power level {level} out of range")));
                }
                let split = self
                    .budget
                    .split(self.budget.relay_level(level, self.relay_levels))?;
                let stage2 = solve_stage2(rd_gains, split.p_r_eff, noise)?;
                let stage1 = solve_stage1(sd_gains, sr_gains, split.p_s_eff, stage2.c_rd_star, noise)?;
                Ok(RateBreakdown {
                    mode: TransmissionMode::TwoStage,
                    achievable_rate: total_rate(&stage1, stage2.c_rd_star),
                    c_sd: stage1.c_sd,
                    c_sr: stage1.c_sr,
                    c_rd: stage2.c_rd_star,
                    p_s_eff: split.p_s_eff,
                    p_r_eff: split.p_r_eff,
                    powers_sd: stage1.powers_sd,
                    powers_sr: stage1.powers_sr,
                    powers_rd: stage2.powers_rd,
                })
            }
        }
    }

    /// Full evaluation of a candidate. Stream selections violating the
    /// stream-count constraints are reported as [`Error::Infeasible`].
    pub fn evaluate(&self, cand: &SolutionCandidate) -> Result<RateBreakdown> {
        let prepared = self.prepare(cand)?;
        self.finish(&prepared, cand.p_r_eff_level)
    }

    /// Achievable rate of a candidate; infeasible candidates score `-inf`.
    pub fn fitness(&self, cand: &SolutionCandidate) -> f64 {
        match self.evaluate(cand) {
            Ok(b) => b.achievable_rate,
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

/// Inclusive bounds of every gene. Genes with equal bounds are fixed.
///
/// Layout: `[phi1; N_I] [phi2; N_I] sd_count sr_count level`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSpace {
    element_count: usize,
    bounds: Vec<(u16, u16)>,
}

impl SearchSpace {
    fn build(
        element_count: usize,
        phi1: Vec<(u16, u16)>,
        phi2: Vec<(u16, u16)>,
        sd: (u16, u16),
        sr: (u16, u16),
        level: (u16, u16),
    ) -> Self {
        let mut bounds = phi1;
        bounds.extend(phi2);
        bounds.extend([sd, sr, level]);
        Self {
            element_count,
            bounds,
        }
    }

    fn phase_bounds(problem: &Problem) -> Vec<(u16, u16)> {
        let top = (problem.irs.phase_count() - 1) as u16;
        vec![(0, top); problem.irs.element_count]
    }

    /// Every gene free: both configurations, both stream counts and the
    /// relay power level.
    pub fn hybrid(problem: &Problem) -> Self {
        let t = problem.terminals;
        Self::build(
            problem.irs.element_count,
            Self::phase_bounds(problem),
            Self::phase_bounds(problem),
            (0, t.max_sd() as u16),
            (0, t.max_sr() as u16),
            (0, (problem.relay_levels - 1) as u16),
        )
    }

    /// Single-stage transmission through the surface: only the stage-1
    /// configuration is free, all destination streams are offered.
    pub fn irs_only(problem: &Problem) -> Self {
        let n = problem.irs.element_count;
        let sd = problem.terminals.max_sd() as u16;
        Self::build(
            n,
            Self::phase_bounds(problem),
            vec![(0, 0); n],
            (sd, sd),
            (0, 0),
            (0, 0),
        )
    }

    /// Both configurations pinned; stream counts and relay power free.
    pub fn fixed_phases(problem: &Problem, phi1: &IrsConfiguration, phi2: &IrsConfiguration) -> Result<Self> {
        phi1.validate(&problem.irs)?;
        phi2.validate(&problem.irs)?;
        let pin = |c: &IrsConfiguration| c.phase_indices.iter().map(|&i| (i, i)).collect();
        let t = problem.terminals;
        Ok(Self::build(
            problem.irs.element_count,
            pin(phi1),
            pin(phi2),
            (0, t.max_sd() as u16),
            (0, t.max_sr() as u16),
            (0, (problem.relay_levels - 1) as u16),
        ))
    }

    pub fn gene_count(&self) -> usize {
        self.bounds.len()
    }

    pub fn free_gene_count(&self) -> usize {
        self.bounds.iter().filter(|(lo, hi)| hi > lo).count()
    }

    /// Number of points in the space.
    pub fn size(&self) -> u128 {
        self.bounds
            .iter()
            .try_fold(1u128, |acc, (lo, hi)| acc.checked_mul((hi - lo) as u128 + 1))
            .unwrap_or(u128::MAX)
    }

    pub fn decode(&self, genes: &[u16]) -> SolutionCandidate {
        let n = self.element_count;
        SolutionCandidate {
            phi1: IrsConfiguration {
                phase_indices: genes[..n].to_vec(),
            },
            phi2: IrsConfiguration {
                phase_indices: genes[n..2 * n].to_vec(),
            },
            sd_count: genes[2 * n] as usize,
            sr_count: genes[2 * n + 1] as usize,
            p_r_eff_level: genes[2 * n + 2] as usize,
        }
    }

    /// Genes of a candidate, or `None` if it lies outside the space.
    pub fn encode(&self, cand: &SolutionCandidate) -> Option<Vec<u16>> {
        let n = self.element_count;
        if cand.phi1.phase_indices.len() != n || cand.phi2.phase_indices.len() != n {
            return None;
        }
        let mut genes = cand.phi1.phase_indices.clone();
        genes.extend(&cand.phi2.phase_indices);
        genes.extend([
            u16::try_from(cand.sd_count).ok()?,
            u16::try_from(cand.sr_count).ok()?,
            u16::try_from(cand.p_r_eff_level).ok()?,
        ]);
        let inside = genes
            .iter()
            .zip(&self.bounds)
            .all(|(g, (lo, hi))| (lo..=hi).contains(&g));
        inside.then_some(genes)
    }

    fn random_genes<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u16> {
        self.bounds
            .iter()
            .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
            .collect()
    }

    /// Gene groups inherited as a unit during crossover.
    fn crossover_units(&self) -> Vec<std::ops::Range<usize>> {
        let n = self.element_count;
        let mut units: Vec<_> = (0..2 * n).map(|i| i..i + 1).collect();
        units.push(2 * n..2 * n + 2);
        units.push(2 * n + 2..2 * n + 3);
        units
    }
}

struct FitnessCache<'p, 'a> {
    problem: &'p Problem<'a>,
    space: &'p SearchSpace,
    memo: HashMap<Vec<u16>, f64>,
}

impl FitnessCache<'_, '_> {
    fn fitness(&mut self, genes: &[u16]) -> f64 {
        if let Some(&f) = self.memo.get(genes) {
            return f;
        }
        let f = self.problem.fitness(&self.space.decode(genes));
        self.memo.insert(genes.to_vec(), f);
        f
    }
}

fn finalize(problem: &Problem, space: &SearchSpace, best: &[u16], trace: Vec<f64>, evaluations: usize) -> Result<OptimizationResult> {
    let best_candidate = space.decode(best);
    let rate_breakdown = problem
        .evaluate(&best_candidate)
        .map_err(|e| Error::Infeasible(format!("search found no feasible candidate: {e}")))?;
    Ok(OptimizationResult {
        best_rate: rate_breakdown.achievable_rate,
        best_candidate,
        rate_breakdown,
        fitness_trace: trace,
        evaluations,
    })
}

/// Elitist generational genetic algorithm over `space`.
///
/// `seeds` enter the initial population ahead of random candidates (seeds
/// outside the space are ignored). Selection is by tournament, crossover is
/// uniform over crossover units (each phase gene, the stream-count pair, the
/// relay level), and mutation redraws a gene to a different value in its
/// range. Randomness for slot `s` of generation `g` comes from the stream
/// `(seed, g, s)`, so results depend only on the inputs.
pub fn genetic_search(
    problem: &Problem,
    space: &SearchSpace,
    settings: &GaSettings,
    seeds: &[SolutionCandidate],
) -> Result<OptimizationResult> {
    settings.validate()?;
    let mut cache = FitnessCache {
        problem,
        space,
        memo: HashMap::new(),
    };
    let pop_size = settings.population_size;
    let free = space.free_gene_count().max(1);
    let p_mut = settings.mutation_probability.unwrap_or(1.0 / free as f64);
    let units = space.crossover_units();

    let mut population: Vec<Vec<u16>> = seeds
        .iter()
        .filter_map(|c| space.encode(c))
        .take(pop_size)
        .collect();
    for slot in population.len()..pop_size {
        let mut rng = substream(&[settings.seed, 0, slot as u64]);
        population.push(space.random_genes(&mut rng));
    }
    let mut scores: Vec<f64> = population.iter().map(|g| cache.fitness(g)).collect();

    let leader = |scores: &[f64]| {
        (0..scores.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b })
    };
    let first = leader(&scores);
    let mut best_genes = population[first].clone();
    let mut best_score = scores[first];
    let mut trace = vec![best_score];

    for generation in 1..settings.generation_count {
        let mut ranked: Vec<usize> = (0..pop_size).collect();
        ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

        let mut next: Vec<Vec<u16>> = ranked[..settings.elite_count]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        for slot in next.len()..pop_size {
            let mut rng = substream(&[settings.seed, generation as u64, slot as u64]);
            let tournament = |rng: &mut rand_chacha::ChaCha8Rng| {
                let mut winner = rng.random_range(0..pop_size);
                for _ in 1..settings.tournament_size {
                    let rival = rng.random_range(0..pop_size);
                    if scores[rival] > scores[winner] || (scores[rival] == scores[winner] && rival < winner) {
                        winner = rival;
                    }
                }
                winner
            };
            let a = tournament(&mut rng);
            let b = tournament(&mut rng);
            let mut child = population[a].clone();
            if rng.random_bool(settings.crossover_probability) {
                for unit in &units {
                    if rng.random_bool(0.5) {
                        child[unit.clone()].copy_from_slice(&population[b][unit.clone()]);
                    }
                }
            }
            for (gene, &(lo, hi)) in child.iter_mut().zip(&space.bounds) {
                if hi > lo && rng.random_bool(p_mut) {
                    let pick = rng.random_range(lo..hi);
                    *gene = if pick >= *gene { pick + 1 } else { pick };
                }
            }
            next.push(child);
        }
        population = next;
        scores = population.iter().map(|g| cache.fitness(g)).collect();
        let top = leader(&scores);
        if scores[top] > best_score {
            best_score = scores[top];
            best_genes = population[top].clone();
        }
        trace.push(best_score);
    }

    let evaluations = cache.memo.len();
    finalize(problem, space, &best_genes, trace, evaluations)
}

/// Genetic search over the full hybrid space.
pub fn run_ga(problem: &Problem, settings: &GaSettings) -> Result<OptimizationResult> {
    genetic_search(problem, &SearchSpace::hybrid(problem), settings, &[])
}

/// Global optimum of `space` by enumeration.
pub fn exhaustive_search_in(problem: &Problem, space: &SearchSpace) -> Result<OptimizationResult> {
    let size = space.size();
    if size > EXHAUSTIVE_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let genes = space.gene_count();
    let level_gene = genes - 1;
    let (level_lo, level_hi) = space.bounds[level_gene];

    let mut current: Vec<u16> = space.bounds.iter().map(|b| b.0).collect();
    let mut best: Option<(Vec<u16>, f64)> = None;
    let mut evaluations = 0usize;
    loop {
        // everything except the relay level: decompose once, sweep the levels
        let cand = space.decode(&current);
        if let Ok(prepared) = problem.prepare(&cand) {
            for level in level_lo..=level_hi {
                evaluations += 1;
                let rate = problem
                    .finish(&prepared, level as usize)
                    .map(|b| b.achievable_rate)
                    .unwrap_or(f64::NEG_INFINITY);
                if best.as_ref().is_none_or(|(_, r)| rate > *r) {
                    current[level_gene] = level;
                    best = Some((current.clone(), rate));
                }
            }
        } else {
            evaluations += (level_hi - level_lo) as usize + 1;
        }
        current[level_gene] = level_lo;

        // odometer increment over the remaining genes, last gene fastest
        let mut pos = level_gene;
        loop {
            if pos == 0 {
                let (genes, _) = best.ok_or_else(|| Error::Infeasible("empty search space".into()))?;
                let value = problem.fitness(&space.decode(&genes));
                return finalize(problem, space, &genes, vec![value], evaluations);
            }
            pos -= 1;
            let (lo, hi) = space.bounds[pos];
            if current[pos] < hi {
                current[pos] += 1;
                break;
            }
            current[pos] = lo;
        }
    }
}

/// Global optimum of the full hybrid space by enumeration.
pub fn exhaustive_search(problem: &Problem) -> Result<OptimizationResult> {
    exhaustive_search_in(problem, &SearchSpace::hybrid(problem))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channel_set, ArraySpec, Arrays, ChannelModel, NodeGeometry, PathLossModel};
    use crate::irs::AmplitudeModel;
    use std::f64::consts::PI;

    fn tiny(seed: u64, ns: usize, nr: usize, nd: usize, ni: usize) -> ChannelSet {
        let model = ChannelModel {
            geometry: NodeGeometry {
                source: [0.0, 0.0, 3.0],
                relay: [10.0, -10.0, 3.0],
                destination: [20.0, 0.0, 1.5],
                irs: [10.0, 5.0, 3.0],
            },
            arrays: Arrays {
                source: ArraySpec::ula(ns),
                relay: ArraySpec::ula(nr),
                destination: ArraySpec::ula(nd),
                irs: ArraySpec::upa(ni),
            },
            path_count: 2,
            path_loss: PathLossModel {
                k0_db: 0.0,
                reference_distance: 10.0,
                exponent: 5.76,
            },
        };
        sample_channel_set(&model, seed).unwrap()
    }

    fn params(ni: usize, bits: u32) -> IrsModelParams {
        IrsModelParams::new(
            AmplitudeModel {
                a_min: 0.2,
                zeta: 0.43 * PI,
                nu: 1.6,
            },
            ni,
            bits,
        )
        .unwrap()
    }

    fn budget() -> PowerBudget {
        PowerBudget {
            p_s: 0.5,
            p_r: 0.5,
            p_max: 1.0,
            noise_power: 0.1,
        }
    }

    fn candidate(ni: usize, sd: usize, sr: usize, level: usize) -> SolutionCandidate {
        SolutionCandidate {
            phi1: IrsConfiguration::uniform(ni, 1),
            phi2: IrsConfiguration::uniform(ni, 0),
            sd_count: sd,
            sr_count: sr,
            p_r_eff_level: level,
        }
    }

    #[test]
    fn empty_stream_selection_is_infeasible() {
        let ch = tiny(1, 4, 2, 2, 4);
        let p = Problem::new(&ch, params(4, 1), budget(), 9).unwrap();
        assert!(matches!(p.evaluate(&candidate(4, 0, 0, 0)), Err(Error::Infeasible(_))));
        assert_eq!(p.fitness(&candidate(4, 0, 0, 0)), f64::NEG_INFINITY);
    }

    #[test]
    fn fitness_matches_recomposed_pipeline() {
        use crate::irs::reflection_matrix;
        use crate::precoding::{effective_rd, effective_sd, effective_sr};

        let ch = tiny(2, 4, 2, 2, 4);
        let irs = params(4, 1);
        let p = Problem::new(&ch, irs, budget(), 9).unwrap();
        let cand = candidate(4, 1, 2, 6);
        let got = p.fitness(&cand);

        let phi1 = reflection_matrix(&cand.phi1, &irs).unwrap();
        let phi2 = reflection_matrix(&cand.phi2, &irs).unwrap();
        let g_sd = effective_sd(&ch, &phi1).unwrap();
        let g_sr = effective_sr(&ch, &phi1).unwrap();
        let sel = StreamSelection::new(1, 2, &Terminals::of(&ch));
        let bd = block_diagonalize(&g_sd, &g_sr, &sel).unwrap();
        let s2 = stage2_decompose(&effective_rd(&ch, &phi2).unwrap()).unwrap();
        let b = budget();
        let p_r = b.relay_level(6, 9);
        let split = b.split(p_r).unwrap();
        let st2 = solve_stage2(&s2.rd_gains, split.p_r_eff, b.noise_power).unwrap();
        let st1 = solve_stage1(&bd.sd_gains, &bd.sr_gains, split.p_s_eff, st2.c_rd_star, b.noise_power).unwrap();
        let want = total_rate(&st1, st2.c_rd_star);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn irs_off_gives_no_destination_rate() {
        let mut ch = tiny(3, 4, 2, 2, 4);
        ch.h_id.fill(Complex64::new(0.0, 0.0));
        let p = Problem::new(&ch, params(4, 1), budget(), 9).unwrap();
        let single = p.evaluate(&candidate(4, 2, 0, 0)).unwrap();
        assert_eq!(single.c_sd, 0.0);
        let two = p.evaluate(&candidate(4, 2, 1, 8)).unwrap();
        assert_eq!(two.c_sd, 0.0);
        assert!(two.c_sr > 0.0);
    }

    #[test]
    fn single_stage_has_no_half_duplex_penalty() {
        let ch = tiny(4, 4, 2, 2, 4);
        let p = Problem::new(&ch, params(4, 1), budget(), 9).unwrap();
        let b = p.evaluate(&candidate(4, 2, 0, 3)).unwrap();
        assert_eq!(b.mode, TransmissionMode::SingleStage);
        assert_eq!(b.achievable_rate, b.c_sd);
        assert_eq!(b.p_s_eff, 1.0);
        assert!((b.powers_sd.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_member_one_generation() {
        let ch = tiny(5, 4, 2, 2, 4);
        let p = Problem::new(&ch, params(4, 1), budget(), 9).unwrap();
        let settings = GaSettings {
            population_size: 1,
            generation_count: 1,
            elite_count: 0,
            ..GaSettings::default()
        };
        let seed = candidate(4, 1, 1, 4);
        let out = genetic_search(&p, &SearchSpace::hybrid(&p), &settings, &[seed.clone()]).unwrap();
        assert_eq!(out.best_candidate, seed);
        assert_eq!(out.best_rate, p.fitness(&seed));
        assert_eq!(out.fitness_trace.len(), 1);
    }

    #[test]
    fn ga_trace_is_monotone_and_deterministic() {
        let ch = tiny(6, 8, 4, 2, 9);
        let p = Problem::new(&ch, params(9, 2), budget(), 17).unwrap();
        let settings = GaSettings {
            seed: 42,
            ..GaSettings::default()
        };
        let a = run_ga(&p, &settings).unwrap();
        assert_eq!(a.fitness_trace.len(), 100);
        assert!(a.fitness_trace.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(a.best_rate, *a.fitness_trace.last().unwrap());
        assert_eq!(a.best_rate, p.fitness(&a.best_candidate));
        let b = run_ga(&p, &settings).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exhaustive_enumerates_everything() {
        let ch = tiny(7, 2, 1, 1, 4);
        let p = Problem::new(&ch, params(4, 1), budget(), 3).unwrap();
        let space = SearchSpace::hybrid(&p);
        // 2^4 * 2^4 phase pairs, sd in {0,1}, sr in {0,1}, 3 levels
        assert_eq!(space.size(), 16 * 16 * 2 * 2 * 3);
        let out = exhaustive_search(&p).unwrap();
        assert_eq!(out.evaluations as u128, space.size());
        let mut rng = substream(&[9]);
        for _ in 0..200 {
            let cand = space.decode(&space.random_genes(&mut rng));
            assert!(out.best_rate >= p.fitness(&cand));
        }
    }

    #[test]
    fn exhaustive_refuses_huge_spaces() {
        let ch = tiny(8, 4, 2, 2, 36);
        let p = Problem::new(&ch, params(36, 2), budget(), 65).unwrap();
        assert!(matches!(exhaustive_search(&p), Err(Error::SearchSpaceTooLarge { .. })));
    }

    #[test]
    fn encode_decode_and_bounds() {
        let ch = tiny(9, 4, 2, 2, 4);
        let p = Problem::new(&ch, params(4, 1), budget(), 9).unwrap();
        let space = SearchSpace::hybrid(&p);
        let cand = candidate(4, 2, 1, 8);
        assert_eq!(space.decode(&space.encode(&cand).unwrap()), cand);
        assert!(space.encode(&candidate(4, 3, 1, 8)).is_none());
        let only = SearchSpace::irs_only(&p);
        assert!(only.encode(&cand).is_none());
        assert_eq!(only.free_gene_count(), 4);
    }
}
