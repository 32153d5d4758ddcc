//! The adaptive-sampling driver, replication grid and report writer.

pub mod config;
pub mod report;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acq::analytic::{
    ei_score, mes_score, pi_score, sample_max_values, select_best, ucb_score, UcbSchedule,
    DEFAULT_MES_SAMPLES, DEFAULT_UCB_DELTA,
};
use crate::acq::geometric::{
    eepa_plus_iteration, score_candidates, sop_iteration, weighted_batch, WeightCycle,
    DEFAULT_WEIGHT_CYCLE,
};
use crate::acq::mc::{greedy_batch_select, qkg_batch_select, McConfig, McKind};
use crate::acq::Strategy;
use crate::archive::{BudgetState, Dataset, DUPLICATE_TOL};
use crate::discretize::{
    self, lhd_maximin, CoordinateSchedule, DiscretizerConfig, DiscretizerKind, FAILURE_TOLERANCE,
    MIN_PERTURB_SIGMA,
};
use crate::error::{Error, Result};
use crate::problems::{ProblemKind, ProblemSpec};
use crate::rng::RngStream;
use crate::space::{canonicalize, decanonicalize, ObjectiveSense};
use crate::surrogate::{GpModel, KernelConfig};

pub use report::{load_records, render_reports, save_records, write_reports, ReportFile};

pub const LHD_RESTARTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub acquisition: Strategy,
    pub discretizer: DiscretizerConfig,
    pub budget: usize,
    pub batch_q: usize,
    pub n_init: usize,
    pub replications: usize,
    pub base_seed: u64,
    pub mc: McConfig,
    pub ucb_delta: f64,
    pub mes_samples: usize,
    pub weight_cycle: Vec<f64>,
}

impl ExperimentConfig {
    /// Benchmark protocol defaults: `2(d+1)` initial points (`d+1` for
    /// external objectives), batch 4, and budget / candidate counts of
    /// 400 / 1000 up to ten dimensions and 500 / 5000 beyond.
    pub fn new(problem: ProblemSpec, acquisition: Strategy, disc: DiscretizerKind) -> Self {
        let d = problem.dim;
        let n_init = match problem.name {
            ProblemKind::External => d + 1,
            _ => 2 * (d + 1),
        };
        let (budget, n_candidates) = if d <= 10 { (400, 1000) } else { (500, 5000) };
        let disc = match acquisition {
            Strategy::Dycors | Strategy::EepaPlus => DiscretizerKind::DynamicCoordinate,
            Strategy::Random => DiscretizerKind::Uniform,
            _ => disc,
        };
        Self {
            problem,
            acquisition,
            discretizer: DiscretizerConfig::new(disc, n_candidates),
            budget: budget.max(n_init),
            batch_q: 4,
            n_init,
            replications: 30,
            base_seed: 0,
            mc: McConfig::default(),
            ucb_delta: DEFAULT_UCB_DELTA,
            mes_samples: DEFAULT_MES_SAMPLES,
            weight_cycle: DEFAULT_WEIGHT_CYCLE.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_init < 2 {
            return Err(Error::Config(format!(
                "n_init must be at least 2, got {}",
                self.n_init
            )));
        }
        if self.budget < self.n_init {
            return Err(Error::Config(format!(
                "budget {} is smaller than n_init {}",
                self.budget, self.n_init
            )));
        }
        if self.batch_q == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.problem.bounds.dim() != self.problem.dim {
            return Err(Error::DimensionMismatch {
                expected: self.problem.dim,
                got: self.problem.bounds.dim(),
            });
        }
        self.discretizer.validate()?;
        self.mc.validate()?;
        WeightCycle::new(self.weight_cycle.clone())?;
        UcbSchedule::new(self.ucb_delta, self.discretizer.n_candidates, 1)?;
        if self.mes_samples == 0 {
            return Err(Error::Config("mes_samples must be at least 1".into()));
        }
        let kind = self.discretizer.kind;
        match self.acquisition {
            Strategy::Dycors | Strategy::EepaPlus if kind != DiscretizerKind::DynamicCoordinate => {
                Err(Error::Config(format!(
                    "{} requires the dynamic discretizer, got {kind}",
                    self.acquisition
                )))
            }
            Strategy::Random if kind != DiscretizerKind::Uniform => Err(Error::Config(format!(
                "random search uses uniform candidates, got {kind}"
            ))),
            Strategy::Sop => sop_iteration().map(|_| ()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub evaluations: usize,
    /// Best value so far in the problem's own sense.
    pub best_value: f64,
    /// Seconds since the replication started.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationLog {
    pub evaluations_before: usize,
    pub requested: usize,
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: ProblemKind,
    pub dim: usize,
    pub sense: ObjectiveSense,
    pub acq: Strategy,
    pub disc: DiscretizerKind,
    pub replication: usize,
    pub seed: u64,
    pub budget: usize,
    pub status: RunStatus,
    /// One row per true evaluation, initial design included.
    pub rows: Vec<TraceRow>,
    pub iterations: Vec<IterationLog>,
    pub initial_best: Option<f64>,
    /// Best point (problem space) and value.
    pub final_best: Option<(Vec<f64>, f64)>,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Completed
    }

    pub fn evaluations(&self) -> usize {
        self.rows.len()
    }

    pub fn final_value(&self) -> Option<f64> {
        self.final_best.as_ref().map(|(_, v)| *v)
    }
}

struct Loop<'a> {
    cfg: &'a ExperimentConfig,
    dataset: Dataset,
    budget: BudgetState,
    record: RunRecord,
    started: Instant,
}

impl Loop<'_> {
    fn evaluate(&mut self, points: &[Vec<f64>]) -> Result<()> {
        let problem = &self.cfg.problem;
        for u in points {
            let value = problem.evaluate_unit(u)?;
            let canonical = canonicalize(value, problem.sense)?;
            self.dataset
                .append_evaluations(&[(u.clone(), canonical)], &mut self.budget)?;
            let (_, best) = self.dataset.incumbent()?;
            self.record.rows.push(TraceRow {
                evaluations: self.budget.used(),
                best_value: decanonicalize(best, problem.sense)?,
                wall_time: self.started.elapsed().as_secs_f64(),
            });
        }
        Ok(())
    }

    fn finish(&mut self) {
        if let Ok((x, v)) = self.dataset.incumbent() {
            let sense = self.cfg.problem.sense;
            if let Ok(v) = decanonicalize(v, sense) {
                self.record.final_best = Some((self.cfg.problem.bounds.from_unit(x), v));
            }
        }
    }
}

/// Runs one replication of the adaptive-sampling loop. Errors during the
/// loop mark the record failed and keep the trace collected so far.
pub fn run_single(cfg: &ExperimentConfig, replication: usize) -> RunRecord {
    let record = RunRecord {
        problem: cfg.problem.name,
        dim: cfg.problem.dim,
        sense: cfg.problem.sense,
        acq: cfg.acquisition,
        disc: cfg.discretizer.kind,
        replication,
        seed: cfg.base_seed,
        budget: cfg.budget,
        status: RunStatus::Completed,
        rows: Vec::new(),
        iterations: Vec::new(),
        initial_best: None,
        final_best: None,
    };
    let mut state = Loop {
        cfg,
        dataset: Dataset::new(cfg.problem.dim),
        budget: BudgetState::new(cfg.budget.max(1), cfg.batch_q.max(1)).expect("non-zero budget"),
        record,
        started: Instant::now(),
    };
    if let Err(e) = cfg.validate().and_then(|_| drive(&mut state, replication)) {
        log::warn!(
            "{} {} d={} replication {replication} failed: {e}",
            cfg.problem.name,
            cfg.acquisition,
            cfg.problem.dim
        );
        state.record.status = RunStatus::Failed(e.to_string());
    }
    state.finish();
    state.record
}

fn drive(state: &mut Loop<'_>, replication: usize) -> Result<()> {
    let cfg = state.cfg;
    let dim = cfg.problem.dim;
    // The initial design depends only on (seed, replication), so every
    // strategy in a grid starts from the same points.
    let mut root = RngStream::new(cfg.base_seed, replication as u64);
    let mut init_rng = root.fork();
    let mut rng = root.fork();

    let design = lhd_maximin(cfg.n_init, dim, &mut init_rng, LHD_RESTARTS);
    state.evaluate(&design)?;
    state.record.initial_best = state.record.rows.last().map(|r| r.best_value);
    let kernel = KernelConfig::from_initial_values(state.dataset.values());

    let mut mc = cfg.mc;
    mc.batch_q = cfg.batch_q;
    let mut cycle = WeightCycle::new(cfg.weight_cycle.clone())?;
    let mut disc = cfg.discretizer.clone();
    let mut failures = 0usize;

    while state.budget.remaining() > 0 {
        let t = state.budget.used();
        let want = if cfg.acquisition.is_sequential() {
            1
        } else {
            state.budget.next_request()
        };
        let before = state.dataset.incumbent()?.1;
        let schedule = CoordinateSchedule {
            dim,
            t,
            t0: cfg.n_init,
            total: cfg.budget,
        };

        let picks = if cfg.acquisition == Strategy::Random {
            (0..want)
                .map(|_| (0..dim).map(|_| rng.uniform()).collect())
                .collect()
        } else {
            let model = GpModel::fit_dataset(&state.dataset, &kernel)?;
            select(
                cfg,
                &state.dataset,
                &model,
                &disc,
                &schedule,
                want,
                &mut cycle,
                &mc,
                &mut rng,
            )?
        };
        if picks.is_empty() {
            return Err(Error::NoCandidates);
        }
        state.record.iterations.push(IterationLog {
            evaluations_before: t,
            requested: want,
            selected: picks.len(),
        });
        state.evaluate(&picks)?;

        if state.dataset.incumbent()?.1 > before {
            failures = 0;
        } else {
            failures += 1;
            if failures >= FAILURE_TOLERANCE {
                disc.perturb_sigma = (disc.perturb_sigma / 2.0).max(MIN_PERTURB_SIGMA);
                failures = 0;
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn select(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
    model: &GpModel,
    disc: &DiscretizerConfig,
    schedule: &CoordinateSchedule,
    want: usize,
    cycle: &mut WeightCycle,
    mc: &McConfig,
    rng: &mut RngStream,
) -> Result<Vec<Vec<f64>>> {
    let strategy = cfg.acquisition;
    if strategy == Strategy::EepaPlus {
        return eepa_plus_iteration(dataset, model, disc, schedule, cfg.batch_q, want, rng);
    }
    if strategy == Strategy::Sop {
        return sop_iteration();
    }

    let (incumbent_x, incumbent) = dataset.incumbent()?;
    let candidates = discretize::generate(disc, dataset.dim(), schedule, incumbent_x, rng)?;
    let ucb = || UcbSchedule::new(cfg.ucb_delta, disc.n_candidates, schedule.t.max(1));
    let take = |idx: Vec<usize>| idx.into_iter().map(|i| candidates[i].clone()).collect();

    match strategy {
        Strategy::SeqEi | Strategy::SeqPi | Strategy::SeqUcb | Strategy::SeqMes => {
            let post = model.predict(&candidates, false)?;
            let std = post.std();
            let scores: Vec<f64> = match strategy {
                Strategy::SeqEi => post
                    .mean
                    .iter()
                    .zip(&std)
                    .map(|(m, s)| ei_score(*m, *s, incumbent))
                    .collect(),
                Strategy::SeqPi => post
                    .mean
                    .iter()
                    .zip(&std)
                    .map(|(m, s)| pi_score(*m, *s, incumbent))
                    .collect(),
                Strategy::SeqUcb => {
                    let sched = ucb()?;
                    post.mean
                        .iter()
                        .zip(&std)
                        .map(|(m, s)| ucb_score(*m, *s, &sched))
                        .collect()
                }
                _ => {
                    let samples = sample_max_values(model, &candidates, cfg.mes_samples, rng)?;
                    post.mean
                        .iter()
                        .zip(&std)
                        .map(|(m, s)| mes_score(*m, *s, &samples))
                        .collect()
                }
            };
            Ok(take(vec![select_best(&scores)?]))
        }
        Strategy::BatchEi | Strategy::BatchPi | Strategy::BatchUcb => {
            let kind = match strategy {
                Strategy::BatchEi => McKind::Ei,
                Strategy::BatchPi => McKind::Pi,
                _ => McKind::Ucb {
                    beta: ucb()?.beta(),
                },
            };
            let q = want.min(candidates.len());
            Ok(take(greedy_batch_select(
                model,
                &candidates,
                q,
                incumbent,
                kind,
                mc,
                rng,
            )?))
        }
        Strategy::BatchKg => {
            let q = want.min(candidates.len());
            Ok(take(qkg_batch_select(model, &candidates, q, mc, rng)?))
        }
        Strategy::Wscore | Strategy::Dycors => {
            let scored: Vec<_> = score_candidates(model, &candidates, dataset.points())
                .into_iter()
                .filter(|c| c.delta > DUPLICATE_TOL)
                .collect();
            if scored.is_empty() {
                return Err(Error::NoCandidates);
            }
            let idx = weighted_batch(&scored, want, cycle);
            Ok(idx.into_iter().map(|i| scored[i].point.clone()).collect())
        }
        Strategy::EepaPlus | Strategy::Sop | Strategy::Random => unreachable!("handled above"),
    }
}

/// Expands every config into its replications and runs them on a pool of
/// `parallelism` threads. Output order is (config, replication) regardless
/// of scheduling.
pub fn run_grid(configs: &[ExperimentConfig], parallelism: usize) -> Vec<RunRecord> {
    run_grid_with_progress(configs, parallelism, |_, _| {})
}

pub fn grid_cells(configs: &[ExperimentConfig]) -> usize {
    configs.iter().map(|c| c.replications).sum()
}

/// [`run_grid`] with a callback invoked after each cell as
/// `(cells_done, record)`.
pub fn run_grid_with_progress<F>(
    configs: &[ExperimentConfig],
    parallelism: usize,
    on_done: F,
) -> Vec<RunRecord>
where
    F: Fn(usize, &RunRecord) + Sync,
{
    use rayon::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    let cells: Vec<(&ExperimentConfig, usize)> = configs
        .iter()
        .flat_map(|c| (0..c.replications).map(move |r| (c, r)))
        .collect();
    let total = cells.len();
    let done = AtomicUsize::new(0);
    let run = |(cfg, rep): &(&ExperimentConfig, usize)| {
        let record = run_single(cfg, *rep);
        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
        log::info!(
            "[{n}/{total}] {} d={} {} {} rep {rep}: {:?}",
            record.problem,
            record.dim,
            record.acq,
            record.disc,
            record.final_value()
        );
        on_done(n, &record);
        record
    };
    match rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
    {
        Ok(pool) => pool.install(|| cells.par_iter().map(run).collect()),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}); running sequentially");
            cells.iter().map(run).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(strategy: Strategy, disc: DiscretizerKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(ProblemSpec::rastrigin(2).unwrap(), strategy, disc);
        cfg.budget = 24;
        cfg.n_init = 6;
        cfg.discretizer.n_candidates = 64;
        cfg.mc.n_mc = 256;
        cfg.mc.n_fantasy = 8;
        cfg.replications = 1;
        cfg
    }

    #[test]
    fn every_strategy_spends_the_budget_exactly() {
        for s in Strategy::ALL {
            if s == Strategy::Sop {
                continue;
            }
            let rec = run_single(&small(s, DiscretizerKind::Uniform), 0);
            assert!(rec.is_ok(), "{s}: {:?}", rec.status);
            assert_eq!(rec.evaluations(), 24, "{s}");
            assert_eq!(rec.rows.last().unwrap().evaluations, 24);
            for w in rec.rows.windows(2) {
                assert!(
                    w[1].best_value <= w[0].best_value,
                    "{s}: trace not monotone"
                );
            }
            let selected: usize = rec.iterations.iter().map(|i| i.selected).sum();
            assert_eq!(selected + 6, 24, "{s}");
        }
    }

    #[test]
    fn sequential_strategies_pick_one_point() {
        let rec = run_single(&small(Strategy::SeqEi, DiscretizerKind::Sobol), 0);
        assert_eq!(rec.iterations.len(), 18);
        assert!(rec
            .iterations
            .iter()
            .all(|i| i.requested == 1 && i.selected == 1));
    }

    #[test]
    fn budget_equal_to_design_runs_no_iterations() {
        let mut cfg = small(Strategy::EepaPlus, DiscretizerKind::DynamicCoordinate);
        cfg.budget = cfg.n_init;
        let rec = run_single(&cfg, 0);
        assert!(rec.is_ok());
        assert_eq!(rec.evaluations(), cfg.n_init);
        assert!(rec.iterations.is_empty());
    }

    #[test]
    fn replay_is_bit_identical() {
        let cfg = small(Strategy::Dycors, DiscretizerKind::DynamicCoordinate);
        let strip = |r: RunRecord| -> Vec<(usize, u64)> {
            r.rows
                .iter()
                .map(|t| (t.evaluations, t.best_value.to_bits()))
                .collect()
        };
        assert_eq!(strip(run_single(&cfg, 3)), strip(run_single(&cfg, 3)));
        assert_ne!(strip(run_single(&cfg, 3)), strip(run_single(&cfg, 4)));
    }

    #[test]
    fn strategies_share_the_initial_design() {
        let a = run_single(&small(Strategy::SeqPi, DiscretizerKind::Uniform), 1);
        let b = run_single(
            &small(Strategy::EepaPlus, DiscretizerKind::DynamicCoordinate),
            1,
        );
        assert_eq!(a.initial_best, b.initial_best);
        let head = |r: &RunRecord| -> Vec<u64> {
            r.rows[..6].iter().map(|t| t.best_value.to_bits()).collect()
        };
        assert_eq!(head(&a), head(&b));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = small(Strategy::SeqEi, DiscretizerKind::Uniform);
        cfg.n_init = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = small(Strategy::SeqEi, DiscretizerKind::Uniform);
        cfg.budget = 3;
        assert!(cfg.validate().is_err());
        let mut cfg = small(Strategy::Dycors, DiscretizerKind::DynamicCoordinate);
        cfg.discretizer.kind = DiscretizerKind::Uniform;
        assert!(cfg.validate().is_err());
        assert!(small(Strategy::Sop, DiscretizerKind::Uniform)
            .validate()
            .is_err());
        let rec = run_single(&small(Strategy::Sop, DiscretizerKind::Uniform), 0);
        assert!(!rec.is_ok());
    }

    #[test]
    fn new_applies_protocol_defaults() {
        let cfg = ExperimentConfig::new(
            ProblemSpec::levy(30).unwrap(),
            Strategy::Dycors,
            DiscretizerKind::Uniform,
        );
        assert_eq!(cfg.n_init, 62);
        assert_eq!(cfg.budget, 500);
        assert_eq!(cfg.discretizer.n_candidates, 5000);
        assert_eq!(cfg.discretizer.kind, DiscretizerKind::DynamicCoordinate);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn grid_order_and_parallelism_do_not_change_results() {
        let configs = vec![
            ExperimentConfig {
                replications: 2,
                ..small(Strategy::Wscore, DiscretizerKind::Uniform)
            },
            ExperimentConfig {
                replications: 2,
                ..small(Strategy::BatchEi, DiscretizerKind::Sobol)
            },
        ];
        let key = |rs: Vec<RunRecord>| -> Vec<(Strategy, usize, Vec<u64>)> {
            rs.into_iter()
                .map(|r| {
                    (
                        r.acq,
                        r.replication,
                        r.rows.iter().map(|t| t.best_value.to_bits()).collect(),
                    )
                })
                .collect()
        };
        let one = key(run_grid(&configs, 1));
        let four = key(run_grid(&configs, 4));
        assert_eq!(one.len(), 4);
        assert_eq!(one, four);
    }
}
