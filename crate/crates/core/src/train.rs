//! The training loop and multi-run aggregation.

use crate::approx::{Bounds, Outcome};
use crate::data::{MiniBatchSampler, SamplerMode};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::probe::ProbeContext;
use crate::search::{exact_line_search, line_search_step, sgd_direction, IterationResult, LineSearchConfig};

/// How each iteration picks its step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Approx(LineSearchConfig),
    /// Golden-section search to `rel_tol` relative accuracy.
    Exact { bounds: Bounds, rel_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub mode: SamplerMode,
    pub m: usize,
    pub rule: StepRule,
    /// Evaluation budget; the last iteration may overshoot it.
    pub budget: u64,
    pub seed: u64,
    /// Iterations between error measurements.
    pub eval_every: u64,
    /// Keep one static batch for the entire run.
    pub freeze_batch: bool,
    pub max_iters: Option<u64>,
}

impl TrainConfig {
    pub fn new(mode: SamplerMode, m: usize, rule: StepRule, budget: u64, seed: u64) -> Self {
        Self { mode, m, rule, budget, seed, eval_every: 50, freeze_batch: false, max_iters: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("evaluation budget must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("evaluation cadence must be positive".into()));
        }
        match &self.rule {
            StepRule::Approx(c) => c.validate(),
            StepRule::Exact { rel_tol, .. } if !(*rel_tol > 0.0) => {
                Err(Error::Config("golden-section tolerance must be positive".into()))
            }
            StepRule::Exact { .. } => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub fe: u64,
    pub iter: u64,
    pub alpha: f64,
    pub train_error: Option<f64>,
    pub test_error: Option<f64>,
    /// Degrees between this direction and the previous one.
    pub dtheta: Option<f64>,
    /// `None` for golden-section steps.
    pub outcome: Option<Outcome>,
    pub alpha1: f64,
    pub vertex: Option<f64>,
    pub fe_used: u64,
    pub guard_rejected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub initial_loss: f64,
    pub initial_errors: Option<(f64, f64)>,
    pub records: Vec<TrainRecord>,
    pub final_x: Vec<f64>,
    /// Reason the run stopped early, if it did.
    pub aborted: Option<String>,
}

impl TrainRun {
    pub fn final_errors(&self) -> Option<(f64, f64)> {
        self.records
            .iter()
            .rev()
            .find_map(|r| r.train_error.zip(r.test_error))
            .or(self.initial_errors)
    }

    pub fn total_fe(&self) -> u64 {
        self.records.last().map_or(0, |r| r.fe)
    }
}

/// Sampler stream seed derived from the run seed, kept apart from the
/// stream used to draw initial weights.
pub fn sampler_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Trains from `x0` until the budget is spent. At least one iteration runs.
///
/// The first evaluation, at `x0`, is charged to the budget. A non-finite
/// loss or gradient ends the run early and is reported in `aborted`.
pub fn train(obj: &dyn Objective, x0: Vec<f64>, config: &TrainConfig) -> Result<TrainRun> {
    config.validate()?;
    let sampler = MiniBatchSampler::new(config.mode, config.m, obj.n_samples(), sampler_seed(config.seed))?;
    let mut ctx = ProbeContext::new(obj, sampler, x0.clone())?.freeze_batch(config.freeze_batch);
    let initial_errors = obj.errors(&x0);
    let mut run = TrainRun { initial_loss: f64::NAN, initial_errors, records: Vec::new(), final_x: x0.clone(), aborted: None };

    let (mut f0, mut g0) = match ctx.evaluate(0.0) {
        Ok((s, g)) => (s.f.unwrap(), g),
        Err(e @ Error::NonFinite(_)) => {
            run.aborted = Some(e.to_string());
            return Ok(run);
        }
        Err(e) => return Err(e),
    };
    run.initial_loss = f0;
    let mut x = x0;
    let mut prev_d: Option<Vec<f64>> = None;
    let mut iter = 0u64;
    loop {
        iter += 1;
        let d = sgd_direction(&g0);
        ctx.set_line(x.clone(), d.clone())?;
        let step = match &config.rule {
            StepRule::Approx(c) => line_search_step(&mut ctx, f0, &g0, c),
            StepRule::Exact { bounds, rel_tol } => exact_step(&mut ctx, f0, &g0, bounds, *rel_tol),
        };
        let step = match step {
            Ok(s) => s,
            Err(e @ Error::NonFinite(_)) => {
                run.aborted = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        x = ctx.point(step.alpha);
        let dtheta = prev_d.as_deref().and_then(|p| angle_between(p, &d).ok());
        prev_d = Some(d);
        f0 = step.next_loss;
        let fe = ctx.fe_count();
        let done = fe >= config.budget || config.max_iters.is_some_and(|m| iter >= m);
        let errors = if iter == 1 || iter.is_multiple_of(config.eval_every) || done { obj.errors(&x) } else { None };
        run.records.push(TrainRecord {
            fe,
            iter,
            alpha: step.alpha,
            train_error: errors.map(|e| e.0),
            test_error: errors.map(|e| e.1),
            dtheta,
            outcome: matches!(config.rule, StepRule::Approx(_)).then_some(step.decision.outcome),
            alpha1: step.alpha1,
            vertex: step.decision.vertex,
            fe_used: step.fe_used,
            guard_rejected: step.guard_rejected,
        });
        g0 = step.next_grad;
        if done {
            break;
        }
    }
    if let Some(last) = run.records.last_mut() {
        if last.train_error.is_none() {
            if let Some((tr, te)) = obj.errors(&x) {
                last.train_error = Some(tr);
                last.test_error = Some(te);
            }
        }
    }
    run.final_x = x;
    Ok(run)
}

fn exact_step(
    ctx: &mut ProbeContext<'_>,
    f0: f64,
    g0: &[f64],
    bounds: &Bounds,
    rel_tol: f64,
) -> Result<IterationResult> {
    let fp0: f64 = g0.iter().zip(ctx.direction()).map(|(g, d)| g * d).sum();
    if fp0 == 0.0 {
        let start = ctx.fe_count();
        let (s, grad) = ctx.advance(0.0)?;
        return Ok(IterationResult {
            alpha: 0.0,
            alpha1: 0.0,
            decision: crate::approx::StepDecision::resample(),
            next_loss: s.f.unwrap(),
            next_grad: grad,
            fe_used: ctx.fe_count() - start,
            guard_rejected: false,
        });
    }
    exact_line_search(ctx, f0, bounds, rel_tol)
}

/// Angle in degrees between two directions.
pub fn angle_between(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch("directions differ in length".into()));
    }
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let cos = a.iter().zip(b).map(|(p, q)| (p / na) * (q / nb)).sum::<f64>();
    Ok(cos.clamp(-1.0, 1.0).acos().to_degrees())
}

/// Mean and population standard deviation of the values that were present.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stat {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    /// Welford's update, so identical inputs give exactly zero spread.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
        for v in values {
            n += 1;
            let delta = v - mean;
            mean += delta / n as f64;
            m2 += delta * (v - mean);
        }
        if n == 0 {
            return Self { n, mean: f64::NAN, sd: f64::NAN };
        }
        Self { n, mean, sd: (m2 / n as f64).max(0.0).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub fe: u64,
    pub alpha: Stat,
    pub log_alpha: Stat,
    pub train_error: Stat,
    pub log_train_error: Stat,
    pub test_error: Stat,
    pub log_test_error: Stat,
    pub dtheta: Stat,
}

/// Aligns runs on `grid` by carrying each run's latest record forward and
/// reports per-point statistics. Logarithms skip non-positive values.
pub fn summarize(runs: &[TrainRun], grid: &[u64]) -> Result<Vec<SummaryRow>> {
    if runs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &fe in grid {
        let mut alpha = Vec::new();
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut dtheta = Vec::new();
        for run in runs {
            let seen = run.records.partition_point(|r| r.fe <= fe);
            let past = &run.records[..seen];
            if let Some(r) = past.last() {
                alpha.push(r.alpha);
            }
            if let Some(t) = past.iter().rev().find_map(|r| r.dtheta) {
                dtheta.push(t);
            }
            let errs = past.iter().rev().find_map(|r| r.train_error.zip(r.test_error)).or(run.initial_errors);
            if let Some((tr, te)) = errs {
                train.push(tr);
                test.push(te);
            }
        }
        let log = |v: &[f64]| Stat::of(v.iter().filter(|x| **x > 0.0).map(|x| x.log10()));
        rows.push(SummaryRow {
            fe,
            alpha: Stat::of(alpha.iter().copied()),
            log_alpha: log(&alpha),
            train_error: Stat::of(train.iter().copied()),
            log_train_error: log(&train),
            test_error: Stat::of(test.iter().copied()),
            log_test_error: log(&test),
            dtheta: Stat::of(dtheta.iter().copied()),
        });
    }
    Ok(rows)
}

/// Evenly spaced grid `0, step, …` through `budget` with `points` intervals.
pub fn fe_grid(budget: u64, points: u64) -> Vec<u64> {
    let points = points.max(1);
    (0..=points).map(|i| i * budget / points).collect()
}

/// Median of the positive steps taken during the last quarter of a run's
/// iterations.
pub fn late_step_median(run: &TrainRun) -> Option<f64> {
    let n = run.records.len();
    let mut late: Vec<f64> = run.records[n - n / 4..].iter().map(|r| r.alpha).filter(|a| *a > 0.0).collect();
    if late.is_empty() {
        return None;
    }
    late.sort_by(f64::total_cmp);
    let k = late.len();
    Some(if k % 2 == 1 { late[k / 2] } else { 0.5 * (late[k / 2 - 1] + late[k / 2]) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::ApproxKind;
    use crate::objective::Quadratic;
    use crate::search::ExtrapolationPolicy;

    fn bowl() -> Quadratic {
        Quadratic::new(vec![3.0, 1.0, 1.0, 2.0], vec![1.0, -1.0]).unwrap()
    }

    fn record(fe: u64, alpha: f64, err: Option<f64>) -> TrainRecord {
        TrainRecord {
            fe,
            iter: fe,
            alpha,
            train_error: err,
            test_error: err,
            dtheta: None,
            outcome: Some(Outcome::Interpolation),
            alpha1: 1.0,
            vertex: None,
            fe_used: 1,
            guard_rejected: false,
        }
    }

    fn run_of(records: Vec<TrainRecord>) -> TrainRun {
        TrainRun { initial_loss: 0.0, initial_errors: Some((0.5, 0.5)), records, final_x: vec![], aborted: None }
    }

    #[test]
    fn angles() {
        assert!((angle_between(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 90.0).abs() < 1e-12);
        assert_eq!(angle_between(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert_eq!(angle_between(&[0.3, 0.4], &[-0.3, -0.4]).unwrap(), 180.0);
        assert!(matches!(angle_between(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroDirection)));
    }

    #[test]
    fn stats_conventions() {
        let s = Stat::of([0.1; 7]);
        assert_eq!((s.mean, s.sd), (0.1, 0.0));
        let s = Stat::of([1.0, 3.0]);
        assert_eq!((s.mean, s.sd), (2.0, 1.0));
    }

    #[test]
    fn summarize_carries_forward() {
        let a = run_of(vec![record(2, 1.0, Some(0.4)), record(5, 1.0, None)]);
        let b = run_of(vec![record(3, 3.0, Some(0.2))]);
        let rows = summarize(&[a.clone(), b], &[0, 2, 4, 6]).unwrap();
        assert_eq!(rows[0].train_error.mean, 0.5);
        assert_eq!(rows[0].alpha.n, 0);
        assert_eq!((rows[1].alpha.n, rows[1].alpha.mean), (1, 1.0));
        assert_eq!((rows[2].alpha.mean, rows[2].alpha.sd), (2.0, 1.0));
        assert!((rows[3].train_error.mean - 0.3).abs() < 1e-15);
        let single = summarize(&[a], &[0, 3, 6]).unwrap();
        assert!(single.iter().all(|r| r.train_error.sd == 0.0));
        assert!(matches!(summarize(&[], &[0]), Err(Error::EmptyInput)));
    }

    #[test]
    fn quadratic_run_descends_and_updates_exactly() {
        let q = bowl();
        let rule = StepRule::Approx(LineSearchConfig::new(ApproxKind::Fgf, ExtrapolationPolicy::Reject, Bounds::standard()));
        let cfg = TrainConfig::new(SamplerMode::Full, 1, rule, 200, 1);
        let run = train(&q, vec![5.0, -4.0], &cfg).unwrap();
        assert!(run.aborted.is_none());
        assert!(run.total_fe() >= 200 && run.total_fe() <= 200 + 3);
        let fe: Vec<u64> = run.records.iter().map(|r| r.fe).collect();
        assert!(fe.windows(2).all(|w| w[0] < w[1]));
        let (f_end, _) = q.loss_grad(&run.final_x, &[0]).unwrap();
        assert!(f_end < run.initial_loss);
        assert!(run.records[0].dtheta.is_none());
        assert!(run.records[1..].iter().all(|r| r.dtheta.is_some_and(|t| (0.0..=180.0).contains(&t))));
    }

    #[test]
    fn budget_of_one_runs_one_iteration() {
        let q = bowl();
        let rule = StepRule::Approx(LineSearchConfig::new(ApproxKind::Fff, ExtrapolationPolicy::Reject, Bounds::standard()));
        let run = train(&q, vec![1.0, 1.0], &TrainConfig::new(SamplerMode::Full, 1, rule, 1, 0)).unwrap();
        assert_eq!(run.records.len(), 1);
        assert!(run.total_fe() <= 1 + 3);
    }

    #[test]
    fn exact_rule_is_orthogonal() {
        let q = bowl();
        let rule = StepRule::Exact { bounds: Bounds::standard(), rel_tol: 1e-8 };
        let cfg = TrainConfig { max_iters: Some(30), ..TrainConfig::new(SamplerMode::Full, 1, rule, u64::MAX, 0) };
        let run = train(&q, vec![10.0, -7.0], &cfg).unwrap();
        assert_eq!(run.records.len(), 30);
        for r in &run.records[1..20] {
            assert!((r.dtheta.unwrap() - 90.0).abs() < 1.0, "{:?}", r.dtheta);
        }
    }

    #[test]
    fn late_median() {
        let recs: Vec<TrainRecord> = (1..=8).map(|i| record(i, i as f64, None)).collect();
        // Last quarter is iterations 7 and 8.
        assert_eq!(late_step_median(&run_of(recs)), Some(7.5));
    }
}
