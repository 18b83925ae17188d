//! The generational loop shared by E2R and its baselines.
//!
//! Rollouts run in parallel, but every state update happens sequentially in
//! offspring order, so results never depend on thread scheduling.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, PlanarEnv};
use crate::error::{Error, Result};
use crate::metrics::CoverageTracker;
use crate::model::{
    validate_config, Genome, Individual, Meta, MutationKind, Novelty, NoveltyArchive, RunConfig,
    SuccessArchive, Trajectory,
};
use crate::novelty::{extract_descriptors, update_novelty, ReferenceSet};
use crate::rng::{self, RunRng};
use crate::selection::{multi_bc_sel, ns_select, random_sample_indices, random_select, regenerate_select};
use crate::variation::{init_pop, mutate_er_hinted, mutate_uniform_batch};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    E2R,
    NS,
    Random,
    MultiBD,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::E2R, Strategy::NS, Strategy::Random, Strategy::MultiBD];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::E2R => "e2r",
            Strategy::NS => "ns",
            Strategy::Random => "random",
            Strategy::MultiBD => "multibd",
        }
    }

    /// Explore/refine mutation, impatience and regeneration.
    pub fn is_e2r(self) -> bool {
        self == Strategy::E2R
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown strategy `{s}` (expected e2r, ns, random or multibd)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationLog {
    pub generation: usize,
    /// Cumulative rollouts, initial population included.
    pub rollouts: usize,
    pub successes_total: usize,
    /// Size of the novelty archive.
    pub archive_size: usize,
    /// Successful offspring this generation.
    pub successes: usize,
    pub approach_coverage: f64,
    pub grasp_coverage: f64,
    pub wall_time_s: f64,
    pub impatience_reset: bool,
    /// Individuals injected from the success archive.
    pub regenerated: usize,
}

pub fn is_impatience_gen(g: usize, period: usize) -> bool {
    g.is_multiple_of(period)
}

pub fn is_regenerate_gen(g: usize, period: usize) -> bool {
    g.is_multiple_of(period)
}

/// The successful individuals of `offspring`, in order.
pub fn get_successes(offspring: &[Individual]) -> Vec<Individual> {
    offspring.iter().filter(|i| i.success).cloned().collect()
}

/// Ids of success-archive entries that do not replay to a success.
pub fn audit_archive<E: Environment>(archive: &SuccessArchive, env: &E) -> Vec<u64> {
    archive
        .entries()
        .par_iter()
        .filter(|i| !env.rollout(&i.genome).success)
        .map(|i| i.id)
        .collect()
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub success_archive: SuccessArchive,
    pub logs: Vec<GenerationLog>,
}

pub struct Engine<E: Environment = PlanarEnv> {
    cfg: RunConfig,
    strategy: Strategy,
    env: E,
    workers: Option<rayon::ThreadPool>,
    rng: RunRng,
    next_id: u64,
    generation: usize,
    rollouts: usize,
    population: Vec<Individual>,
    hints: Vec<Option<MutationKind>>,
    archive: NoveltyArchive,
    successes: SuccessArchive,
    coverage: CoverageTracker,
    logs: Vec<GenerationLog>,
    started: Instant,
}

impl Engine<PlanarEnv> {
    /// Validates `cfg` and evaluates the initial population.
    pub fn new(cfg: RunConfig, strategy: Strategy) -> Result<Self> {
        let env = PlanarEnv::new(cfg.env.clone());
        Engine::with_env(cfg, strategy, env)
    }
}

impl<E: Environment> Engine<E> {
    pub fn with_env(cfg: RunConfig, strategy: Strategy, env: E) -> Result<Self> {
        validate_config(&cfg).into_result()?;
        let workers = cfg
            .threads
            .map(|n| {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::InvalidConfig(vec![format!("thread pool: {e}")]))
            })
            .transpose()?;
        let mut engine = Engine {
            rng: rng::seeded(cfg.seed),
            coverage: CoverageTracker::new(&cfg.env, &cfg.metrics),
            cfg,
            strategy,
            env,
            workers,
            next_id: 0,
            generation: 0,
            rollouts: 0,
            population: Vec::new(),
            hints: Vec::new(),
            archive: NoveltyArchive::default(),
            successes: SuccessArchive::default(),
            logs: Vec::new(),
            started: Instant::now(),
        };
        engine.initialize_population()?;
        Ok(engine)
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn environment(&self) -> &E {
        &self.env
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn rollouts(&self) -> usize {
        self.rollouts
    }

    pub fn population(&self) -> &[Individual] {
        &self.population
    }

    /// Pending forced mutation operator per population member.
    pub fn hints(&self) -> &[Option<MutationKind>] {
        &self.hints
    }

    pub fn novelty_archive(&self) -> &NoveltyArchive {
        &self.archive
    }

    pub fn success_archive(&self) -> &SuccessArchive {
        &self.successes
    }

    pub fn logs(&self) -> &[GenerationLog] {
        &self.logs
    }

    pub fn finished(&self) -> bool {
        self.rollouts >= self.cfg.budget
    }

    /// Adds an externally built individual to the success archive without
    /// replaying it.
    pub fn inject_success(&mut self, mut ind: Individual) {
        ind.success = true;
        self.successes.push(ind);
    }

    fn parallel<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        match &self.workers {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }

    fn evaluate(&self, genomes: &[Genome]) -> Vec<Trajectory> {
        let env = &self.env;
        self.parallel(|| genomes.par_iter().map(|g| env.rollout(g)).collect())
    }

    /// Turns evaluated genomes into individuals, harvesting successes.
    fn admit(
        &mut self,
        genomes: Vec<Genome>,
        metas: Vec<Meta>,
        trajs: Vec<Trajectory>,
    ) -> Result<(Vec<Individual>, usize)> {
        self.rollouts += genomes.len();
        let mut out = Vec::with_capacity(genomes.len());
        let mut found = 0;
        for ((genome, meta), traj) in genomes.into_iter().zip(metas).zip(trajs) {
            let ind = Individual {
                id: self.next_id,
                genome,
                descriptor: extract_descriptors(&traj, self.env.steps())?,
                novelty: Novelty::default(),
                success: traj.success,
                meta,
            };
            self.next_id += 1;
            if ind.success {
                self.coverage.add(&traj)?;
                self.successes.push(ind.clone());
                found += 1;
            }
            out.push(ind);
        }
        Ok((out, found))
    }

    fn initialize_population(&mut self) -> Result<usize> {
        let genomes = init_pop(self.cfg.mu, self.env.joints(), &mut self.rng);
        let trajs = self.evaluate(&genomes);
        let meta = Meta {
            generation: self.generation,
            parent: None,
            kind: MutationKind::Init,
        };
        let metas = vec![meta; genomes.len()];
        let (mut pop, found) = self.admit(genomes, metas, trajs)?;
        let refs = ReferenceSet::from_parts(&pop, &self.archive);
        self.parallel(|| update_novelty(&mut pop, &refs, self.cfg.k))?;
        self.hints = vec![None; pop.len()];
        self.population = pop;
        Ok(found)
    }

    /// Replaces the population with the most novel archived successes,
    /// topped up with the current population's multi-slot selection.
    fn regenerate(&mut self) -> Result<usize> {
        let mut snapshot = self.successes.entries().to_vec();
        let mut refs = ReferenceSet::from_parts(&self.population, &self.archive);
        let in_pop: std::collections::HashSet<u64> = self.population.iter().map(|i| i.id).collect();
        let extra: Vec<Individual> = snapshot
            .iter()
            .filter(|i| !in_pop.contains(&i.id))
            .cloned()
            .collect();
        refs.extend_individuals(&extra);
        self.parallel(|| update_novelty(&mut snapshot, &refs, self.cfg.k))?;

        let picks = regenerate_select(&snapshot, self.cfg.mu);
        let injected = picks.len();
        let mut pop = Vec::with_capacity(self.cfg.mu);
        let mut hints = Vec::with_capacity(self.cfg.mu);
        let mut ids = std::collections::HashSet::new();
        for (i, kind) in picks {
            ids.insert(snapshot[i].id);
            pop.push(snapshot[i].clone());
            hints.push(Some(kind));
        }
        if pop.len() < self.cfg.mu {
            for i in multi_bc_sel(&self.population, self.population.len())? {
                if pop.len() == self.cfg.mu {
                    break;
                }
                if ids.insert(self.population[i].id) {
                    pop.push(self.population[i].clone());
                    hints.push(self.hints[i]);
                }
            }
        }
        self.population = pop;
        self.hints = hints;
        Ok(injected)
    }

    /// Runs one generation and returns its log.
    pub fn step(&mut self) -> Result<GenerationLog> {
        let g = self.generation + 1;
        self.generation = g;
        let e2r = self.strategy.is_e2r();
        let mut found = 0;

        let impatience = e2r && self.successes.is_empty() && is_impatience_gen(g, self.cfg.impatience_period);
        if impatience {
            if self.cfg.clear_archive_on_impatience {
                self.archive.clear();
            }
            found += self.initialize_population()?;
        }

        let mut regenerated = 0;
        if e2r && !self.successes.is_empty() && is_regenerate_gen(g, self.cfg.regeneration_period) {
            regenerated = self.regenerate()?;
        }

        let parents = random_sample_indices(self.population.len(), self.cfg.lambda, &mut self.rng)?;
        let batch: Vec<Genome> = parents.iter().map(|&i| self.population[i].genome.clone()).collect();
        let stream: u64 = self.rng.random();
        let mutated: Vec<(Genome, MutationKind)> = if e2r {
            let hints: Vec<Option<MutationKind>> = parents.iter().map(|&i| self.hints[i]).collect();
            mutate_er_hinted(
                &batch,
                &hints,
                self.cfg.p_explore,
                self.cfg.p_refine,
                &self.cfg.mutation,
                stream,
            )
        } else {
            mutate_uniform_batch(&batch, self.cfg.mutation.sigma_uniform, stream)
                .into_iter()
                .map(|g| (g, MutationKind::Uniform))
                .collect()
        };
        for &i in &parents {
            self.hints[i] = None;
        }

        let (genomes, kinds): (Vec<Genome>, Vec<MutationKind>) = mutated.into_iter().unzip();
        let metas = parents
            .iter()
            .zip(kinds)
            .map(|(&p, kind)| Meta {
                generation: g,
                parent: Some(self.population[p].id),
                kind,
            })
            .collect();
        let trajs = self.evaluate(&genomes);
        let (offspring, born) = self.admit(genomes, metas, trajs)?;
        found += born;

        let mut pool = std::mem::take(&mut self.population);
        let mut pool_hints = std::mem::take(&mut self.hints);
        pool_hints.resize(pool.len() + offspring.len(), None);
        let offspring_ids: Vec<u64> = offspring.iter().map(|i| i.id).collect();
        let offspring_descs: Vec<_> = offspring.iter().map(|i| i.descriptor).collect();
        pool.extend(offspring);

        let refs = ReferenceSet::from_parts(&pool, &self.archive);
        let k = self.cfg.k;
        self.parallel(|| update_novelty(&mut pool, &refs, k))?;

        let mu = self.cfg.mu;
        let selected = match self.strategy {
            Strategy::E2R | Strategy::MultiBD => multi_bc_sel(&pool, mu)?,
            Strategy::NS => self.parallel(|| ns_select(&pool, &self.archive, k, mu))?,
            Strategy::Random => random_select(&pool, mu, &mut self.rng)?,
        };

        for i in random_sample_indices(offspring_ids.len(), self.cfg.archive_additions, &mut self.rng)? {
            self.archive.push(offspring_ids[i], offspring_descs[i]);
        }

        self.hints = selected.iter().map(|&i| pool_hints[i]).collect();
        self.population = selected.iter().map(|&i| pool[i].clone()).collect();

        let log = GenerationLog {
            generation: g,
            rollouts: self.rollouts,
            successes_total: self.successes.len(),
            archive_size: self.archive.len(),
            successes: found,
            approach_coverage: self.coverage.approach(),
            grasp_coverage: self.coverage.grasp(),
            wall_time_s: if self.cfg.record_wall_time {
                self.started.elapsed().as_secs_f64()
            } else {
                0.0
            },
            impatience_reset: impatience,
            regenerated,
        };
        log::debug!(
            "{} gen {g}: rollouts={} successes={} ac={:.4} gc={:.4}",
            self.strategy,
            log.rollouts,
            log.successes_total,
            log.approach_coverage,
            log.grasp_coverage
        );
        self.logs.push(log.clone());
        Ok(log)
    }

    /// Steps until the budget is spent, then audits the success archive.
    pub fn run_to_end(mut self) -> Result<RunOutput> {
        while !self.finished() {
            self.step()?;
        }
        let failed = audit_archive(&self.successes, &self.env);
        if !failed.is_empty() {
            log::error!("{} archived successes failed to replay: {failed:?}", failed.len());
        }
        Ok(RunOutput {
            success_archive: self.successes,
            logs: self.logs,
        })
    }
}

/// Runs `strategy` under `cfg` from initialization to budget exhaustion.
pub fn run(cfg: &RunConfig, strategy: Strategy) -> Result<RunOutput> {
    Engine::new(cfg.clone(), strategy)?.run_to_end()
}
