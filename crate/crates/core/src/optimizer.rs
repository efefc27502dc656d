//! Real-coded genetic algorithm and the augmented Lagrangian barrier loop
//! used for constrained preimage search.
//!
//! The inner GA is a conventional elitist real-coded algorithm: stochastic
//! uniform selection over rank-scaled expectations, scattered (uniform-mask)
//! crossover, Gaussian mutation whose scale anneals linearly over the run,
//! and stall-based stopping. The outer loop folds inequality constraints into
//! a shifted log-barrier subproblem
//!
//! ```text
//! LB(x; lambda, s) = f(x) - sum_i lambda_i * s_i * ln(s_i - c_i(x)),   s_i = rho * lambda_i
//! ```
//!
//! minimized by the inner GA over a population that persists across outer
//! iterations. After each outer iteration the multipliers are updated
//! (`lambda_i <- lambda_i * s_i / (s_i - c_i)`) when the best point is
//! sufficiently feasible, otherwise the shift scale `rho` is reduced. The
//! loop stops when consecutive best objective values agree within `tau1` and
//! the violation is within `tau2`, or when the outer-iteration budget runs
//! out.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::ConstraintVector;

/// Initial feasibility tolerance of the outer loop.
const ETA_INITIAL: f64 = 1.0;
/// Factor by which the feasibility tolerance tightens after a feasible iteration.
const ETA_SHRINK: f64 = 0.1;
/// Floors keeping shifts and multipliers in representable range.
const LAMBDA_MIN: f64 = 1e-12;
const LAMBDA_MAX: f64 = 1e12;
const RHO_MIN: f64 = 1e-12;

/// Inner genetic-algorithm settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    /// Fraction of the population copied unchanged each generation (at least one).
    pub elite_fraction: f64,
    /// Fraction of non-elite children produced by crossover; the rest mutate.
    pub crossover_fraction: f64,
    /// Initial standard deviation of Gaussian mutation; anneals linearly to zero.
    pub mutation_scale: f64,
    /// Stop after this many generations without improvement beyond `function_tolerance`.
    pub stall_generations: usize,
    pub function_tolerance: f64,
    pub seed: u64,
    /// Individuals injected into the initial population (warm starts).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub seed_individuals: Vec<Vec<f64>>,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 200,
            max_generations: 200,
            elite_fraction: 0.05,
            crossover_fraction: 0.8,
            mutation_scale: 1.0,
            stall_generations: 50,
            function_tolerance: 1e-6,
            seed: 0,
            seed_individuals: Vec::new(),
        }
    }
}

impl GaConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if dim < 1 {
            return Err(Error::Config("dimension must be >= 1".into()));
        }
        if self.population_size < 4 {
            return Err(Error::Config(format!(
                "population_size must be >= 4, got {}",
                self.population_size
            )));
        }
        if !(0.0..1.0).contains(&self.elite_fraction) {
            return Err(Error::Config(format!(
                "elite_fraction must be in [0, 1), got {}",
                self.elite_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_fraction) {
            return Err(Error::Config(format!(
                "crossover_fraction must be in [0, 1], got {}",
                self.crossover_fraction
            )));
        }
        if !(self.mutation_scale > 0.0) {
            return Err(Error::Config(format!(
                "mutation_scale must be > 0, got {}",
                self.mutation_scale
            )));
        }
        if !(self.function_tolerance >= 0.0) {
            return Err(Error::Config(format!(
                "function_tolerance must be >= 0, got {}",
                self.function_tolerance
            )));
        }
        if self.max_generations < 1 || self.stall_generations < 1 {
            return Err(Error::Config(
                "max_generations and stall_generations must be >= 1".into(),
            ));
        }
        for (i, s) in self.seed_individuals.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::Config(format!(
                    "seed individual {i} has dimension {}, expected {dim}",
                    s.len()
                )));
            }
        }
        if self.seed_individuals.len() > self.population_size {
            return Err(Error::Config(format!(
                "{} seed individuals exceed population_size {}",
                self.seed_individuals.len(),
                self.population_size
            )));
        }
        Ok(())
    }

    fn elite_count(&self) -> usize {
        ((self.population_size as f64 * self.elite_fraction).round() as usize)
            .clamp(1, self.population_size - 1)
    }
}

/// Outer-loop settings for the augmented Lagrangian barrier algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgaConfig {
    /// Settings of the per-subproblem inner GA.
    pub ga: GaConfig,
    /// Tolerance on the change of the objective between outer iterations.
    pub tau1: f64,
    /// Tolerance on the constraint violation at convergence.
    pub tau2: f64,
    /// Initial shift scale rho.
    pub initial_penalty: f64,
    /// Factor by which rho shrinks after an insufficiently feasible iteration.
    pub penalty_growth: f64,
    /// Initial value of every Lagrange multiplier.
    pub initial_multipliers: f64,
    pub max_outer_iterations: usize,
}

impl Default for AlgaConfig {
    fn default() -> Self {
        Self {
            // Subproblems restart often; keep each one shorter than a
            // standalone GA run.
            ga: GaConfig {
                max_generations: 100,
                stall_generations: 30,
                ..GaConfig::default()
            },
            tau1: 1e-6,
            tau2: 1e-3,
            initial_penalty: 10.0,
            penalty_growth: 100.0,
            initial_multipliers: 1.0,
            max_outer_iterations: 30,
        }
    }
}

impl AlgaConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        self.ga.validate(dim)?;
        if !(self.tau1 >= 0.0) || !(self.tau2 >= 0.0) {
            return Err(Error::Config("tau1 and tau2 must be >= 0".into()));
        }
        if !(self.initial_penalty > 0.0)
            || !(self.penalty_growth > 1.0)
            || !(self.initial_multipliers > 0.0)
        {
            return Err(Error::Config(
                "initial_penalty and initial_multipliers must be > 0, penalty_growth > 1".into(),
            ));
        }
        if self.max_outer_iterations < 1 {
            return Err(Error::Config("max_outer_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// One trace record: a generation of the plain GA, or an outer iteration of
/// the constrained loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub generation: usize,
    pub best_loss: f64,
    pub best_violation: Option<f64>,
    pub mean_loss: f64,
}

/// Optimization trace and counters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptTrace {
    pub rows: Vec<TraceRow>,
    /// Outer iterations of the constrained loop; `None` for the plain GA.
    pub outer_iterations: Option<usize>,
    /// Total inner GA generations across all subproblems.
    pub inner_generations: usize,
    pub wall_time_s: f64,
}

impl OptTrace {
    /// The generation count a report quotes: outer iterations when the
    /// constrained loop ran, inner GA generations otherwise.
    pub fn reported_generations(&self) -> usize {
        self.outer_iterations.unwrap_or(self.inner_generations)
    }
}

/// A minimization problem with inequality constraints `c(x) <= 0`.
///
/// `evaluate` returns the objective and the full constraint vector in one
/// call so implementations can share intermediate work.
pub trait ConstrainedProblem: Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> (f64, ConstraintVector);
}

/// Adapter implementing [`ConstrainedProblem`] from two closures.
pub struct FnProblem<F, G> {
    pub dim: usize,
    pub objective: F,
    pub constraints: G,
}

impl<F, G> ConstrainedProblem for FnProblem<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> ConstraintVector + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> (f64, ConstraintVector) {
        ((self.objective)(x), (self.constraints)(x))
    }
}

/// Fitness of one individual; orderings put valid points before points
/// outside the barrier domain, and non-finite evaluations last.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Fitness {
    Valid(f64),
    OutOfDomain(f64),
    NonFinite,
}

impl Fitness {
    fn valid(value: f64) -> Self {
        if value.is_finite() {
            Fitness::Valid(value)
        } else {
            Fitness::NonFinite
        }
    }

    fn key(&self) -> (u8, f64) {
        match self {
            Fitness::Valid(v) => (0, *v),
            Fitness::OutOfDomain(v) => (1, *v),
            Fitness::NonFinite => (2, 0.0),
        }
    }

    fn better_than(&self, other: &Fitness) -> bool {
        let (ta, va) = self.key();
        let (tb, vb) = other.key();
        ta < tb || (ta == tb && va < vb)
    }

    /// Improvement margin used for stall detection.
    fn improvement_over(&self, other: &Fitness) -> f64 {
        let (ta, va) = self.key();
        let (tb, vb) = other.key();
        if ta < tb {
            f64::INFINITY
        } else if ta > tb {
            f64::NEG_INFINITY
        } else {
            vb - va
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Scored {
    fit: Fitness,
    objective: f64,
    violation: f64,
}

struct EvolveRun {
    best_x: Vec<f64>,
    best: Scored,
    population: Vec<Vec<f64>>,
    generations: usize,
    rows: Vec<TraceRow>,
    stalled: bool,
}

/// Draw the initial population: injected individuals first, then i.i.d.
/// standard Gaussian vectors.
fn initial_population(cfg: &GaConfig, dim: usize, rng: &mut ChaCha12Rng) -> Vec<Vec<f64>> {
    let mut pop: Vec<Vec<f64>> = cfg.seed_individuals.clone();
    while pop.len() < cfg.population_size {
        pop.push((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
    }
    pop
}

/// Stochastic uniform selection over rank-scaled expectations (1/sqrt(rank)).
fn select_parents(
    ranked: &[usize],
    n_parents: usize,
    rng: &mut ChaCha12Rng,
) -> Vec<usize> {
    if n_parents == 0 {
        return Vec::new();
    }
    let weights: Vec<f64> = (0..ranked.len())
        .map(|pos| 1.0 / ((pos + 1) as f64).sqrt())
        .collect();
    let total: f64 = weights.iter().sum();
    let step = total / n_parents as f64;
    let start = rng.random::<f64>() * step;
    let mut parents = Vec::with_capacity(n_parents);
    let mut cumulative = weights[0];
    let mut idx = 0usize;
    for j in 0..n_parents {
        let pointer = start + j as f64 * step;
        while cumulative < pointer && idx + 1 < ranked.len() {
            idx += 1;
            cumulative += weights[idx];
        }
        parents.push(ranked[idx]);
    }
    // Decorrelate the rank-ordered walk before pairing parents.
    for i in (1..parents.len()).rev() {
        let j = rng.random_range(0..=i);
        parents.swap(i, j);
    }
    parents
}

fn evolve<S: Fn(&[f64]) -> Scored>(
    cfg: &GaConfig,
    dim: usize,
    score: &S,
    mut population: Vec<Vec<f64>>,
    record_violation: bool,
    rng: &mut ChaCha12Rng,
) -> EvolveRun {
    let pop_size = population.len();
    let elite = cfg.elite_count();
    let mut scored: Vec<Scored> = population.iter().map(|x| score(x)).collect();

    let rank = |scored: &[Scored]| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..scored.len()).collect();
        idx.sort_by(|&a, &b| {
            scored[a]
                .fit
                .key()
                .partial_cmp(&scored[b].fit.key())
                .expect("fitness keys are finite")
                .then(a.cmp(&b))
        });
        idx
    };

    let trace_row = |generation: usize, ranked: &[usize], scored: &[Scored]| -> TraceRow {
        let best = &scored[ranked[0]];
        let finite: Vec<f64> = scored
            .iter()
            .map(|s| s.objective)
            .filter(|v| v.is_finite())
            .collect();
        let mean = if finite.is_empty() {
            f64::NAN
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        TraceRow {
            generation,
            best_loss: best.objective,
            best_violation: record_violation.then_some(best.violation),
            mean_loss: mean,
        }
    };

    let mut ranked = rank(&scored);
    let mut rows = vec![trace_row(0, &ranked, &scored)];
    let mut best_x = population[ranked[0]].clone();
    let mut best = scored[ranked[0]];
    let mut stall = 0usize;
    let mut generations = 0usize;
    let mut stalled = false;

    for gen in 1..=cfg.max_generations {
        let sigma = cfg.mutation_scale * (1.0 - gen as f64 / cfg.max_generations as f64);
        let n_children = pop_size - elite;
        let n_cross = (cfg.crossover_fraction * n_children as f64).round() as usize;
        let n_cross = n_cross.min(n_children);
        let n_mut = n_children - n_cross;
        let parents = select_parents(&ranked, 2 * n_cross + n_mut, rng);

        let mut next: Vec<Vec<f64>> = Vec::with_capacity(pop_size);
        for i in 0..elite {
            next.push(population[ranked[i]].clone());
        }
        for c in 0..n_cross {
            let a = &population[parents[2 * c]];
            let b = &population[parents[2 * c + 1]];
            let child: Vec<f64> = (0..dim)
                .map(|g| if rng.random::<bool>() { a[g] } else { b[g] })
                .collect();
            next.push(child);
        }
        for m in 0..n_mut {
            let p = &population[parents[2 * n_cross + m]];
            let child: Vec<f64> = p
                .iter()
                .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            next.push(child);
        }

        population = next;
        scored = population.iter().map(|x| score(x)).collect();
        ranked = rank(&scored);
        rows.push(trace_row(gen, &ranked, &scored));
        generations = gen;

        let gen_best = scored[ranked[0]];
        if gen_best.fit.improvement_over(&best.fit) > cfg.function_tolerance {
            best = gen_best;
            best_x = population[ranked[0]].clone();
            stall = 0;
        } else {
            if gen_best.fit.better_than(&best.fit) {
                best = gen_best;
                best_x = population[ranked[0]].clone();
            }
            stall += 1;
            if stall >= cfg.stall_generations {
                stalled = true;
                break;
            }
        }
    }

    EvolveRun {
        best_x,
        best,
        population,
        generations,
        rows,
        stalled,
    }
}

/// Result of a plain GA run.
#[derive(Debug, Clone)]
pub struct GaResult {
    pub best: Vec<f64>,
    pub best_objective: f64,
    /// True when the run ended on its stall criterion rather than the
    /// generation cap.
    pub stalled: bool,
    pub trace: OptTrace,
}

/// Minimize an unconstrained objective with the real-coded GA.
///
/// Non-finite objective values rank worst instead of aborting the run.
pub fn ga_minimize<F>(objective: F, dim: usize, config: &GaConfig) -> Result<GaResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate(dim)?;
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let population = initial_population(config, dim, &mut rng);
    let score = |x: &[f64]| {
        let v = objective(x);
        Scored {
            fit: Fitness::valid(v),
            objective: v,
            violation: 0.0,
        }
    };
    let run = evolve(config, dim, &score, population, false, &mut rng);
    Ok(GaResult {
        best: run.best_x,
        best_objective: run.best.objective,
        stalled: run.stalled,
        trace: OptTrace {
            rows: run.rows,
            outer_iterations: None,
            inner_generations: run.generations,
            wall_time_s: started.elapsed().as_secs_f64(),
        },
    })
}

/// Result of the constrained loop.
#[derive(Debug, Clone)]
pub struct AlgaResult {
    pub best: Vec<f64>,
    pub best_objective: f64,
    pub best_violation: f64,
    /// True iff the stopping rule (|delta objective| <= tau1 and
    /// violation <= tau2) fired within the outer-iteration budget.
    pub converged: bool,
    pub trace: OptTrace,
}

/// Minimize `objective` subject to `c(x) <= 0` with the augmented Lagrangian
/// barrier loop. On non-convergence the best point seen (preferring feasible
/// ones) is returned with `converged = false`.
pub fn alga_minimize<P: ConstrainedProblem>(problem: &P, config: &AlgaConfig) -> Result<AlgaResult> {
    let dim = problem.dim();
    config.validate(dim)?;
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(config.ga.seed);

    let n_constraints = problem.evaluate(&vec![0.0; dim]).1.len();
    if n_constraints == 0 {
        return Err(Error::Config(
            "constrained minimization needs at least one constraint".into(),
        ));
    }

    let mut lambda = vec![config.initial_multipliers; n_constraints];
    let mut rho = config.initial_penalty;
    let mut eta = ETA_INITIAL.max(config.tau2);
    let mut population = initial_population(&config.ga, dim, &mut rng);

    let mut rows: Vec<TraceRow> = Vec::new();
    let mut inner_generations = 0usize;
    let mut prev_objective: Option<f64> = None;
    let mut converged = false;
    // (x, objective, violation), preferring feasible-at-tau2 then lexicographic.
    let mut incumbent: Option<(Vec<f64>, f64, f64)> = None;
    let mut outer_done = 0usize;

    for outer in 0..config.max_outer_iterations {
        let shifts: Vec<f64> = lambda.iter().map(|l| (rho * l).max(RHO_MIN)).collect();
        let score = |x: &[f64]| {
            let (f, c) = problem.evaluate(x);
            let v = c.violation();
            if !f.is_finite() || !v.is_finite() {
                return Scored {
                    fit: Fitness::NonFinite,
                    objective: f,
                    violation: v,
                };
            }
            let mut barrier = 0.0;
            let mut in_domain = true;
            for (ci, (li, si)) in c.values().iter().zip(lambda.iter().zip(&shifts)) {
                let gap = si - ci;
                if gap <= 0.0 {
                    in_domain = false;
                    break;
                }
                barrier -= li * si * gap.ln();
            }
            let fit = if in_domain {
                Fitness::valid(f + barrier)
            } else {
                // Out-of-barrier points race by total violation mass, which
                // is smoother than the max used for reporting.
                Fitness::OutOfDomain(c.total_positive())
            };
            Scored {
                fit,
                objective: f,
                violation: v,
            }
        };

        let run = evolve(&config.ga, dim, &score, population, true, &mut rng);
        inner_generations += run.generations;
        population = run.population;
        outer_done = outer + 1;

        let (objective, constraints) = problem.evaluate(&run.best_x);
        let viol = constraints.violation();
        rows.push(TraceRow {
            generation: outer,
            best_loss: objective,
            best_violation: Some(viol),
            mean_loss: run.rows.last().map(|r| r.mean_loss).unwrap_or(f64::NAN),
        });

        let better = match &incumbent {
            None => true,
            Some((_, cur_obj, cur_viol)) => {
                let cand_ok = viol <= config.tau2;
                let cur_ok = *cur_viol <= config.tau2;
                match (cand_ok, cur_ok) {
                    (true, false) => true,
                    (false, true) => false,
                    (true, true) => (objective, viol) < (*cur_obj, *cur_viol),
                    (false, false) => (viol, objective) < (*cur_viol, *cur_obj),
                }
            }
        };
        if better {
            incumbent = Some((run.best_x.clone(), objective, viol));
        }

        if let Some(prev) = prev_objective {
            if (prev - objective).abs() <= config.tau1 && viol <= config.tau2 {
                converged = true;
                incumbent = Some((run.best_x, objective, viol));
                break;
            }
        }
        prev_objective = Some(objective);

        if viol <= eta {
            for ((li, si), ci) in lambda.iter_mut().zip(&shifts).zip(constraints.values()) {
                let gap = si - ci;
                if gap > 0.0 {
                    *li = (*li * si / gap).clamp(LAMBDA_MIN, LAMBDA_MAX);
                }
            }
            eta = (eta * ETA_SHRINK).max(config.tau2);
        } else {
            rho = (rho / config.penalty_growth).max(RHO_MIN);
        }
    }

    let (best, best_objective, best_violation) =
        incumbent.expect("at least one outer iteration ran");
    Ok(AlgaResult {
        best,
        best_objective,
        best_violation,
        converged,
        trace: OptTrace {
            rows,
            outer_iterations: Some(outer_done),
            inner_generations,
            wall_time_s: started.elapsed().as_secs_f64(),
        },
    })
}

/// Closure-based convenience wrapper around [`alga_minimize`].
pub fn alga_minimize_fns<F, G>(
    objective: F,
    constraints: G,
    dim: usize,
    config: &AlgaConfig,
) -> Result<AlgaResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> ConstraintVector + Sync,
{
    alga_minimize(
        &FnProblem {
            dim,
            objective,
            constraints,
        },
        config,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureVector;
    use crate::objective::{AttackTarget, TargetEvaluator, DEFAULT_BIOHASH_MARGIN};
    use crate::transforms::{iom_hash, IomParams, SchemeParams};
    use rand::{Rng, RngCore, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn sphere_minimum_is_found() {
        let cfg = GaConfig {
            seed: 1,
            ..GaConfig::default()
        };
        let res = ga_minimize(sphere, 4, &cfg).unwrap();
        assert!(res.best_objective < 1e-2, "best {}", res.best_objective);
    }

    #[test]
    fn constant_objective_stalls() {
        let cfg = GaConfig {
            seed: 2,
            stall_generations: 12,
            max_generations: 500,
            ..GaConfig::default()
        };
        let res = ga_minimize(|_| 0.0, 3, &cfg).unwrap();
        assert_eq!(res.best_objective, 0.0);
        assert!(res.stalled);
        assert_eq!(res.trace.inner_generations, 12);
        assert_eq!(res.trace.rows.len(), 13);
    }

    #[test]
    fn iom_loss_never_worsens() {
        let params = IomParams::derive(77, 8, 4, 16).unwrap();
        let x = FeatureVector::raw(vec![0.3, -0.1, 0.7, 0.2, -0.5, 0.9, -0.2, 0.4]).unwrap();
        let hash = iom_hash(&params, &x).unwrap();
        let target = AttackTarget::new(hash, SchemeParams::Iom(params)).unwrap();
        let eval = TargetEvaluator::new(&target, DEFAULT_BIOHASH_MARGIN);
        let cfg = GaConfig {
            seed: 3,
            max_generations: 60,
            ..GaConfig::default()
        };
        let res = ga_minimize(|x| eval.evaluate_loss(x), 8, &cfg).unwrap();
        let initial_best = res.trace.rows[0].best_loss;
        assert!(res.best_objective <= initial_best);
        // Elitism: per-generation best is non-increasing.
        for w in res.trace.rows.windows(2) {
            assert!(w[1].best_loss <= w[0].best_loss + 1e-15);
        }
    }

    #[test]
    fn non_finite_objectives_do_not_abort() {
        let cfg = GaConfig {
            seed: 4,
            max_generations: 30,
            ..GaConfig::default()
        };
        let res = ga_minimize(
            |x| if x[0] > 0.0 { f64::NAN } else { x[0].abs() },
            2,
            &cfg,
        )
        .unwrap();
        assert!(res.best_objective.is_finite());
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = GaConfig {
            seed: 5,
            max_generations: 40,
            ..GaConfig::default()
        };
        let a = ga_minimize(sphere, 6, &cfg).unwrap();
        let b = ga_minimize(sphere, 6, &cfg).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.trace.rows, b.trace.rows);
    }

    #[test]
    fn seed_individuals_are_respected() {
        let cfg = GaConfig {
            seed: 6,
            max_generations: 5,
            seed_individuals: vec![vec![0.0, 0.0, 0.0]],
            ..GaConfig::default()
        };
        let res = ga_minimize(sphere, 3, &cfg).unwrap();
        assert_eq!(res.best_objective, 0.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cfg = GaConfig {
            population_size: 2,
            ..GaConfig::default()
        };
        assert!(ga_minimize(sphere, 2, &cfg).is_err());
        let cfg = GaConfig {
            seed_individuals: vec![vec![1.0]],
            ..GaConfig::default()
        };
        assert!(ga_minimize(sphere, 2, &cfg).is_err());
    }

    #[test]
    fn analytic_constrained_quadratic() {
        // minimize (x1-2)^2 + (x2-1)^2 s.t. x1 <= 1; optimum (1,1), f* = 1.
        let cfg = AlgaConfig {
            ga: GaConfig {
                seed: 7,
                ..AlgaConfig::default().ga
            },
            ..AlgaConfig::default()
        };
        let res = alga_minimize_fns(
            |x| (x[0] - 2.0).powi(2) + (x[1] - 1.0).powi(2),
            |x| ConstraintVector::new(vec![x[0] - 1.0]),
            2,
            &cfg,
        )
        .unwrap();
        assert!(
            (res.best_objective - 1.0).abs() <= 1e-2,
            "f = {}",
            res.best_objective
        );
        assert!(res.best_violation <= 1e-3, "v = {}", res.best_violation);
    }

    #[test]
    fn iom_feasibility_search_recovers_hash() {
        let mut rng = ChaCha12Rng::seed_from_u64(1234);
        let params = IomParams::derive(rng.next_u64(), 8, 4, 16).unwrap();
        let x = FeatureVector::raw(
            (0..8).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        )
        .unwrap();
        let hash = iom_hash(&params, &x).unwrap();
        let target = AttackTarget::new(hash.clone(), SchemeParams::Iom(params)).unwrap();
        let eval = TargetEvaluator::new(&target, DEFAULT_BIOHASH_MARGIN);
        let cfg = AlgaConfig {
            ga: GaConfig {
                seed: 8,
                ..AlgaConfig::default().ga
            },
            tau2: 0.0,
            ..AlgaConfig::default()
        };
        let res = alga_minimize_fns(
            |_| 0.0,
            |x| eval.evaluate(x).1,
            8,
            &cfg,
        )
        .unwrap();
        assert!(res.best_violation <= 0.0, "violation {}", res.best_violation);
        let recovered = FeatureVector::raw(res.best.clone()).unwrap();
        assert_eq!(target.params().hash(&recovered).unwrap(), hash);
    }

    #[test]
    fn always_feasible_constraints_reduce_to_plain_ga() {
        let mut gaps = Vec::new();
        for seed in 0..10u64 {
            let ga_cfg = GaConfig {
                seed,
                max_generations: 80,
                ..GaConfig::default()
            };
            let plain = ga_minimize(sphere, 3, &ga_cfg).unwrap();
            let cfg = AlgaConfig {
                ga: GaConfig {
                    seed,
                    max_generations: 80,
                    ..AlgaConfig::default().ga
                },
                ..AlgaConfig::default()
            };
            let constrained = alga_minimize_fns(
                sphere,
                |_| ConstraintVector::new(vec![-1.0]),
                3,
                &cfg,
            )
            .unwrap();
            gaps.push((plain.best_objective - constrained.best_objective).abs());
        }
        let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!(mean_gap < 1e-2, "mean gap {mean_gap}");
    }

    #[test]
    fn alga_is_deterministic() {
        let cfg = AlgaConfig {
            ga: GaConfig {
                seed: 11,
                ..AlgaConfig::default().ga
            },
            max_outer_iterations: 5,
            ..AlgaConfig::default()
        };
        let run = || {
            alga_minimize_fns(
                |x| (x[0] - 2.0).powi(2),
                |x| ConstraintVector::new(vec![x[0] - 1.0]),
                1,
                &cfg,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.best, b.best);
        assert_eq!(a.trace.rows, b.trace.rows);
        assert_eq!(a.converged, b.converged);
    }

    #[test]
    fn converged_flag_implies_both_tolerances() {
        for seed in 0..5u64 {
            let cfg = AlgaConfig {
                ga: GaConfig {
                    seed,
                    ..AlgaConfig::default().ga
                },
                ..AlgaConfig::default()
            };
            let res = alga_minimize_fns(
                |x| (x[0] - 2.0).powi(2) + (x[1] - 1.0).powi(2),
                |x| ConstraintVector::new(vec![x[0] - 1.0]),
                2,
                &cfg,
            )
            .unwrap();
            if res.converged {
                assert!(res.best_violation <= cfg.tau2);
            }
        }
    }
}
