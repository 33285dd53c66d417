//! Mutation-only genetic algorithm over a bounded hyperparameter space.
//!
//! The algorithm maximizes a fitness equal to a weighted sum of mAP@0.5 and
//! mAP@0.5:0.95 (weights 0.1 and 0.9 by default), reported by a black-box
//! evaluator. Each generation selects a parent from the best evaluated
//! candidates so far and perturbs genes multiplicatively: a mutated gene
//! becomes `clamp(value * (1 + gain * g), lower, upper)` with `g` normal of
//! mean 0, and the whole mutation is redrawn until at least one gene
//! changed. Multiplicative noise is used because the genes span several
//! orders of magnitude.
//!
//! Randomness is drawn from a per-generation seeded stream in candidate
//! order before any evaluation starts, so logs are bit-identical whether
//! candidate evaluations run serially or concurrently, and a run can resume
//! from its log.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::Command;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::annotations::format_number;
use crate::error::{Error, Result};

/// One hyperparameter dimension: bounds, mutation gain, and initial value.
/// A gene with `gain == 0` or `lower == upper` never changes.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub gain: f64,
    pub initial: f64,
}

impl GeneSpec {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64, gain: f64, initial: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            gain,
            initial,
        }
    }

    pub fn frozen(&self) -> bool {
        self.gain == 0.0 || self.lower == self.upper
    }
}

/// Ordered collection of genes with unique names.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperparamSpace {
    genes: Vec<GeneSpec>,
}

impl HyperparamSpace {
    pub fn new(genes: Vec<GeneSpec>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, g) in genes.iter().enumerate() {
            if let Some(prev) = seen.insert(g.name.clone(), i) {
                return Err(Error::Config(format!(
                    "duplicate gene name {:?} (positions {} and {})",
                    g.name,
                    prev + 1,
                    i + 1
                )));
            }
            if g.lower.is_nan() || g.upper.is_nan() || g.lower > g.upper {
                return Err(Error::Config(format!(
                    "gene {:?}: lower {} above upper {}",
                    g.name, g.lower, g.upper
                )));
            }
            if g.gain.is_nan() || g.gain < 0.0 {
                return Err(Error::Config(format!(
                    "gene {:?}: gain {} must be >= 0",
                    g.name, g.gain
                )));
            }
            if g.initial < g.lower || g.initial > g.upper {
                return Err(Error::Config(format!(
                    "gene {:?}: initial {} outside [{}, {}]",
                    g.name, g.initial, g.lower, g.upper
                )));
            }
        }
        Ok(Self { genes })
    }

    pub fn genes(&self) -> &[GeneSpec] {
        &self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn gene_index(&self, name: &str) -> Option<usize> {
        self.genes.iter().position(|g| g.name == name)
    }

    /// Generation-0 candidate built from the genes' initial values.
    pub fn initial_candidate(&self) -> Candidate {
        Candidate {
            values: self.genes.iter().map(|g| g.initial).collect(),
            fitness: None,
            generation: 0,
        }
    }

    /// True when every value lies within its gene's bounds.
    pub fn contains(&self, values: &[f64]) -> bool {
        values.len() == self.genes.len()
            && self
                .genes
                .iter()
                .zip(values)
                .all(|(g, &v)| v >= g.lower && v <= g.upper)
    }

    /// Parse lines of `name lower upper gain initial`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut genes = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(Error::Config(format!(
                    "space line {}: expected `name lower upper gain initial`, found {} fields",
                    i + 1,
                    fields.len()
                )));
            }
            let num = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Config(format!("space line {}: bad {what} {s:?}", i + 1)))
            };
            genes.push(GeneSpec::new(
                fields[0],
                num(fields[1], "lower")?,
                num(fields[2], "upper")?,
                num(fields[3], "gain")?,
                num(fields[4], "initial")?,
            ));
        }
        Self::new(genes)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# name lower upper gain initial\n");
        for g in &self.genes {
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                g.name,
                format_number(g.lower),
                format_number(g.upper),
                format_number(g.gain),
                format_number(g.initial)
            ));
        }
        out
    }

    /// The space shipped with the toolkit: 29 genes with wide brackets
    /// around their defaults; genes whose default is 0 are frozen.
    pub fn builtin_default() -> Self {
        Self::parse(include_str!("defaults/hyp_space.txt")).expect("builtin space must parse")
    }
}

/// One point of the search space, with its fitness once evaluated.
/// Values align with the owning space's gene order.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub values: Vec<f64>,
    pub fitness: Option<f64>,
    pub generation: u32,
}

impl Candidate {
    pub fn value_of(&self, space: &HyperparamSpace, name: &str) -> Option<f64> {
        space.gene_index(name).map(|i| self.values[i])
    }
}

/// Relative weights of mAP@0.5 and mAP@0.5:0.95 in the fitness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessWeights {
    pub map50: f64,
    pub map50_95: f64,
}

impl Default for FitnessWeights {
    fn default() -> Self {
        Self {
            map50: 0.1,
            map50_95: 0.9,
        }
    }
}

/// Weighted sum of the two mAP metrics.
pub fn fitness(map50: f64, map50_95: f64, weights: &FitnessWeights) -> f64 {
    weights.map50 * map50 + weights.map50_95 * map50_95
}

/// Evolution parameters. Defaults: 200 generations of one child each,
/// parents drawn from the top 5, mutation probability 0.8 with sigma 0.2
/// (variance 0.04).
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub generations: u32,
    pub population_per_generation: u32,
    pub parent_pool: usize,
    pub mutation_probability: f64,
    pub mutation_sigma: f64,
    pub seed: u64,
    pub fitness_weights: FitnessWeights,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            generations: 200,
            population_per_generation: 1,
            parent_pool: 5,
            mutation_probability: 0.8,
            mutation_sigma: 0.2,
            seed: 0,
            fitness_weights: FitnessWeights::default(),
        }
    }
}

impl EvolutionConfig {
    fn validate(&self) -> Result<()> {
        let prob = self.mutation_probability;
        if prob.is_nan() || prob <= 0.0 || prob > 1.0 {
            return Err(Error::Config(format!(
                "mutation probability {} outside (0, 1]",
                self.mutation_probability
            )));
        }
        if self.mutation_sigma.is_nan() || self.mutation_sigma <= 0.0 {
            return Err(Error::Config(format!(
                "mutation sigma {} must be > 0",
                self.mutation_sigma
            )));
        }
        if self.population_per_generation < 1 {
            return Err(Error::Config("population must be >= 1".into()));
        }
        if self.parent_pool < 1 {
            return Err(Error::Config("parent pool must be >= 1".into()));
        }
        let wsum = self.fitness_weights.map50 + self.fitness_weights.map50_95;
        if (wsum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "fitness weights sum to {wsum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// One evaluated candidate in the run history.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub candidate: Candidate,
    pub index_in_generation: u32,
    pub map50: f64,
    pub map50_95: f64,
    pub failed: bool,
}

impl LogEntry {
    pub fn fitness(&self) -> f64 {
        self.candidate.fitness.unwrap_or(0.0)
    }
}

/// Every evaluated candidate, in evaluation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvolutionLog {
    pub entries: Vec<LogEntry>,
}

impl EvolutionLog {
    /// Highest-fitness entry; earliest wins ties.
    pub fn best(&self) -> Option<&LogEntry> {
        self.entries
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                a.fitness()
                    .partial_cmp(&b.fitness())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(ib.cmp(ia))
            })
            .map(|(_, e)| e)
    }

    /// Running maximum of fitness along the evaluation order.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.entries
            .iter()
            .map(|e| {
                best = best.max(e.fitness());
                best
            })
            .collect()
    }

    pub fn last_generation(&self) -> Option<u32> {
        self.entries.iter().map(|e| e.candidate.generation).max()
    }

    /// Drop a trailing generation that has fewer entries than expected, so
    /// a resumed run re-evaluates it from scratch. Generation 0 holds one
    /// entry; later generations hold `population` entries.
    pub fn truncate_incomplete(&mut self, population: u32) {
        while let Some(last_gen) = self.last_generation() {
            let expected = if last_gen == 0 {
                1
            } else {
                population as usize
            };
            let have = self
                .entries
                .iter()
                .filter(|e| e.candidate.generation == last_gen)
                .count();
            if have == expected {
                break;
            }
            self.entries.retain(|e| e.candidate.generation != last_gen);
        }
    }

    /// CSV with one row per evaluated candidate:
    /// `generation,candidate,map50,map50_95,fitness,failed,<genes...>`.
    pub fn to_csv(&self, space: &HyperparamSpace) -> String {
        let mut out = String::from("generation,candidate,map50,map50_95,fitness,failed");
        for g in space.genes() {
            out.push(',');
            out.push_str(&g.name);
        }
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{}",
                e.candidate.generation,
                e.index_in_generation,
                format_number(e.map50),
                format_number(e.map50_95),
                format_number(e.fitness()),
                u8::from(e.failed),
            ));
            for v in &e.candidate.values {
                out.push(',');
                out.push_str(&format_number(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str, space: &HyperparamSpace) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty evolution log".into()))?;
        let mut expected = String::from("generation,candidate,map50,map50_95,fitness,failed");
        for g in space.genes() {
            expected.push(',');
            expected.push_str(&g.name);
        }
        if header != expected {
            return Err(Error::Config(format!(
                "evolution log header does not match the space (have {header:?})"
            )));
        }
        let mut entries = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 + space.len() {
                return Err(Error::Config(format!(
                    "evolution log row {}: expected {} fields, found {}",
                    i + 2,
                    6 + space.len(),
                    fields.len()
                )));
            }
            let parse_f = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| {
                    Error::Config(format!("evolution log row {}: bad number {s:?}", i + 2))
                })
            };
            let generation: u32 = fields[0].parse().map_err(|_| {
                Error::Config(format!("evolution log row {}: bad generation", i + 2))
            })?;
            let index: u32 = fields[1].parse().map_err(|_| {
                Error::Config(format!("evolution log row {}: bad candidate", i + 2))
            })?;
            let map50 = parse_f(fields[2])?;
            let map50_95 = parse_f(fields[3])?;
            let fit = parse_f(fields[4])?;
            let failed = fields[5] == "1";
            let mut values = Vec::with_capacity(space.len());
            for f in &fields[6..] {
                values.push(parse_f(f)?);
            }
            entries.push(LogEntry {
                candidate: Candidate {
                    values,
                    fitness: Some(fit),
                    generation,
                },
                index_in_generation: index,
                map50,
                map50_95,
                failed,
            });
        }
        entries.sort_by_key(|e| (e.candidate.generation, e.index_in_generation));
        Ok(Self { entries })
    }
}

const SELECTION_EPSILON: f64 = 1e-8;

/// Pick a parent among the `pool` best entries, with probability
/// proportional to `fitness - min_pool_fitness + 1e-8`.
pub fn select_parent<'a>(
    log: &'a EvolutionLog,
    pool: usize,
    rng: &mut impl Rng,
) -> Result<&'a LogEntry> {
    if log.entries.is_empty() {
        return Err(Error::Config(
            "cannot select a parent from an empty log".into(),
        ));
    }
    let mut order: Vec<usize> = (0..log.entries.len()).collect();
    order.sort_by(|&a, &b| {
        log.entries[b]
            .fitness()
            .partial_cmp(&log.entries[a].fitness())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(pool.max(1));
    let min_fitness = order
        .iter()
        .map(|&i| log.entries[i].fitness())
        .fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = order
        .iter()
        .map(|&i| log.entries[i].fitness() - min_fitness + SELECTION_EPSILON)
        .collect();
    let total: f64 = weights.iter().sum();
    let mut draw = rng.random::<f64>() * total;
    for (pos, &i) in order.iter().enumerate() {
        draw -= weights[pos];
        if draw <= 0.0 {
            return Ok(&log.entries[i]);
        }
    }
    Ok(&log.entries[*order.last().unwrap()])
}

const MUTATE_MAX_ATTEMPTS: usize = 1000;

/// Mutate each unfrozen gene independently with probability `prob`,
/// redrawing the whole mutation until at least one gene changed. When no
/// gene can change at all (every gene frozen, or sigma degenerate enough
/// that attempts keep collapsing), the parent's values are returned
/// unchanged after a bounded number of attempts.
pub fn mutate(
    parent: &Candidate,
    space: &HyperparamSpace,
    prob: f64,
    sigma: f64,
    rng: &mut impl Rng,
) -> Candidate {
    let unevaluated = |values: Vec<f64>| Candidate {
        values,
        fitness: None,
        generation: parent.generation + 1,
    };
    if space.genes().iter().all(GeneSpec::frozen) {
        return unevaluated(parent.values.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated by config");
    for _ in 0..MUTATE_MAX_ATTEMPTS {
        let mut values = parent.values.clone();
        let mut changed = false;
        for (i, gene) in space.genes().iter().enumerate() {
            if gene.frozen() {
                continue;
            }
            if rng.random::<f64>() >= prob {
                continue;
            }
            let factor = 1.0 + gene.gain * normal.sample(rng);
            let mutated = (values[i] * factor).clamp(gene.lower, gene.upper);
            if mutated != values[i] {
                changed = true;
            }
            values[i] = mutated;
        }
        if changed {
            return unevaluated(values);
        }
    }
    unevaluated(parent.values.clone())
}

/// Identifies a candidate within a run, for evaluator bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateId {
    pub generation: u32,
    pub index: u32,
}

impl CandidateId {
    /// Stable directory-name form, e.g. `gen0007_cand00`.
    pub fn tag(&self) -> String {
        format!("gen{:04}_cand{:02}", self.generation, self.index)
    }
}

/// Execution options orthogonal to the evolution parameters.
#[derive(Debug, Default)]
pub struct EvolveOptions {
    /// Concurrent candidate evaluations within a generation; 0 or 1 runs
    /// serially. Has no effect on the resulting log.
    pub jobs: usize,
    /// Continue from a previous log (trailing incomplete generation is
    /// discarded). The space, config, and seed must match the original run.
    pub resume: Option<EvolutionLog>,
}

#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub best: Candidate,
    pub log: EvolutionLog,
}

fn generation_rng(seed: u64, generation: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (generation as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Run the evolution. The evaluator maps candidate values to
/// `(map50, map50_95)`; an `Err` marks the candidate failed with fitness 0
/// and the run continues. Within a generation all randomness is drawn
/// up front in candidate order, then candidates are evaluated (concurrently
/// when `opts.jobs > 1`) and appended in order.
pub fn evolve<E>(
    space: &HyperparamSpace,
    config: &EvolutionConfig,
    evaluator: E,
    opts: EvolveOptions,
) -> Result<EvolveOutcome>
where
    E: Fn(CandidateId, &[f64]) -> Result<(f64, f64), String> + Sync,
{
    config.validate()?;
    if space.is_empty() {
        return Err(Error::Config("hyperparameter space has no genes".into()));
    }

    let make_entry =
        |id: CandidateId, values: Vec<f64>, result: Result<(f64, f64), String>| -> LogEntry {
            let (map50, map50_95, failed, fit) = match result {
                Ok((m50, m5095)) => (
                    m50,
                    m5095,
                    false,
                    fitness(m50, m5095, &config.fitness_weights),
                ),
                Err(_) => (0.0, 0.0, true, 0.0),
            };
            LogEntry {
                candidate: Candidate {
                    values,
                    fitness: Some(fit),
                    generation: id.generation,
                },
                index_in_generation: id.index,
                map50,
                map50_95,
                failed,
            }
        };

    let pool = if opts.jobs > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.jobs)
                .build()
                .map_err(|e| Error::Config(format!("evaluation thread pool: {e}")))?,
        )
    } else {
        None
    };
    let evaluate_batch = |batch: Vec<(CandidateId, Vec<f64>)>| -> Vec<LogEntry> {
        match &pool {
            Some(pool) => pool.install(|| {
                use rayon::prelude::*;
                batch
                    .into_par_iter()
                    .map(|(id, values)| {
                        let result = evaluator(id, &values);
                        make_entry(id, values, result)
                    })
                    .collect()
            }),
            None => batch
                .into_iter()
                .map(|(id, values)| {
                    let result = evaluator(id, &values);
                    make_entry(id, values, result)
                })
                .collect(),
        }
    };

    let mut log = opts.resume.unwrap_or_default();
    log.truncate_incomplete(config.population_per_generation);
    for e in &log.entries {
        if e.candidate.values.len() != space.len() {
            return Err(Error::Config(
                "resume log does not match the space's gene count".into(),
            ));
        }
    }

    if log.entries.is_empty() {
        let id = CandidateId {
            generation: 0,
            index: 0,
        };
        let initial = space.initial_candidate();
        log.entries
            .extend(evaluate_batch(vec![(id, initial.values)]));
    }

    let start = log.last_generation().unwrap_or(0) + 1;
    for generation in start..=config.generations {
        let mut rng = generation_rng(config.seed, generation);
        let mut batch = Vec::with_capacity(config.population_per_generation as usize);
        for index in 0..config.population_per_generation {
            let parent = select_parent(&log, config.parent_pool, &mut rng)?;
            let child = mutate(
                &parent.candidate,
                space,
                config.mutation_probability,
                config.mutation_sigma,
                &mut rng,
            );
            batch.push((CandidateId { generation, index }, child.values));
        }
        log.entries.extend(evaluate_batch(batch));
    }

    let best = log
        .best()
        .expect("log holds at least the initial candidate")
        .candidate
        .clone();
    Ok(EvolveOutcome { best, log })
}

/// Per-gene scatter rows plus the per-gene value of the single best
/// candidate, for plotting fitness against each hyperparameter.
#[derive(Debug, Clone)]
pub struct ScatterExport {
    /// `(gene, value, fitness)` rows: all genes of all evaluated candidates.
    pub rows: Vec<(String, f64, f64)>,
    /// `(gene, value)` taken from the highest-fitness candidate.
    pub best_values: Vec<(String, f64)>,
}

impl ScatterExport {
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("gene,value,fitness\n");
        for (gene, value, fit) in &self.rows {
            out.push_str(&format!(
                "{gene},{},{}\n",
                format_number(*value),
                format_number(*fit)
            ));
        }
        out
    }

    pub fn best_csv(&self) -> String {
        let mut out = String::from("gene,best_value\n");
        for (gene, value) in &self.best_values {
            out.push_str(&format!("{gene},{}\n", format_number(*value)));
        }
        out
    }
}

/// Build the scatter export from a log with at least one evaluated entry.
pub fn export_scatter(log: &EvolutionLog, space: &HyperparamSpace) -> Result<ScatterExport> {
    let best = log
        .best()
        .ok_or_else(|| Error::Config("cannot export scatter from an empty log".into()))?;
    let mut rows = Vec::with_capacity(space.len() * log.entries.len());
    for (gi, gene) in space.genes().iter().enumerate() {
        for e in &log.entries {
            rows.push((gene.name.clone(), e.candidate.values[gi], e.fitness()));
        }
    }
    let best_values = space
        .genes()
        .iter()
        .enumerate()
        .map(|(gi, g)| (g.name.clone(), best.candidate.values[gi]))
        .collect();
    Ok(ScatterExport { rows, best_values })
}

/// `name: value` lines in gene order.
pub fn hyp_file_text(space: &HyperparamSpace, values: &[f64]) -> String {
    let mut out = String::new();
    for (g, v) in space.genes().iter().zip(values) {
        out.push_str(&format!("{}: {}\n", g.name, format_number(*v)));
    }
    out
}

/// Parse a `name: value` hyperparameter file back into space order.
pub fn parse_hyp_file(text: &str, space: &HyperparamSpace) -> Result<Vec<f64>> {
    let mut values = vec![None; space.len()];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, value) = line
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("hyp line {}: expected `name: value`", i + 1)))?;
        let idx = space.gene_index(name.trim()).ok_or_else(|| {
            Error::Config(format!(
                "hyp line {}: unknown gene {:?}",
                i + 1,
                name.trim()
            ))
        })?;
        let v: f64 = value.trim().parse().map_err(|_| {
            Error::Config(format!("hyp line {}: bad value {:?}", i + 1, value.trim()))
        })?;
        values[idx] = Some(v);
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| {
                Error::Config(format!("hyp file missing gene {:?}", space.genes()[i].name))
            })
        })
        .collect()
}

/// Parse an evaluator metrics file containing `map50: <v>` and
/// `map50_95: <v>` lines.
pub fn parse_metrics_file(text: &str) -> Result<(f64, f64)> {
    let mut map50 = None;
    let mut map50_95 = None;
    for raw in text.lines() {
        let line = raw.trim();
        if let Some(v) = line.strip_prefix("map50_95:") {
            map50_95 = Some(
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Evaluator(format!("bad map50_95 value {:?}", v.trim())))?,
            );
        } else if let Some(v) = line.strip_prefix("map50:") {
            map50 = Some(
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Evaluator(format!("bad map50 value {:?}", v.trim())))?,
            );
        }
    }
    let map50 = map50.ok_or_else(|| Error::Evaluator("metrics file missing map50".into()))?;
    let map50_95 =
        map50_95.ok_or_else(|| Error::Evaluator("metrics file missing map50_95".into()))?;
    for (name, v) in [("map50", map50), ("map50_95", map50_95)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Evaluator(format!("{name} {v} outside [0, 1]")));
        }
    }
    Ok((map50, map50_95))
}

/// External evaluator protocol: a shell command template run per candidate.
///
/// The template may reference `{hyp}` (the written hyperparameter file),
/// `{metrics}` (the metrics file the command must produce), and `{workdir}`
/// (the candidate's private directory).
#[derive(Debug, Clone)]
pub struct EvaluatorCommand {
    pub template: String,
    pub workdir: PathBuf,
}

/// Evaluate one candidate through the external command protocol: write the
/// hyp file, run the command, read the metrics file back.
pub fn run_candidate(
    space: &HyperparamSpace,
    values: &[f64],
    command: &EvaluatorCommand,
    tag: &str,
) -> Result<(f64, f64)> {
    let dir = command.workdir.join(tag);
    std::fs::create_dir_all(&dir)?;
    let hyp_path = dir.join("candidate.hyp");
    let metrics_path = dir.join("metrics.txt");
    std::fs::write(&hyp_path, hyp_file_text(space, values))?;

    let rendered = command
        .template
        .replace("{hyp}", &hyp_path.to_string_lossy())
        .replace("{metrics}", &metrics_path.to_string_lossy())
        .replace("{workdir}", &dir.to_string_lossy());
    let output = Command::new("sh")
        .arg("-c")
        .arg(&rendered)
        .current_dir(&dir)
        .output()?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        return Err(Error::Evaluator(format!(
            "command exited with {}: {}",
            output.status,
            stderr.trim()
        )));
    }
    let text = std::fs::read_to_string(&metrics_path).map_err(|e| {
        Error::Evaluator(format!(
            "metrics file {} unreadable: {e}",
            metrics_path.display()
        ))
    })?;
    parse_metrics_file(&text)
}
