//! Evaluating the loss along `x0 + α d` with evaluation counting.
//!
//! One evaluation (FE) is one forward and backward pass on one batch. Every
//! probe runs the full pass and remembers the gradient, so a step accepted
//! at an already-probed point costs nothing extra.

use crate::data::{MiniBatchSampler, SamplerMode};
use crate::error::{Error, Result};
use crate::objective::Objective;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSample {
    pub alpha: f64,
    pub f: Option<f64>,
    pub fprime: Option<f64>,
    pub fe_cost: u64,
}

#[derive(Debug, Clone)]
struct Cached {
    alpha: f64,
    loss: f64,
    grad: Vec<f64>,
}

pub struct ProbeContext<'a> {
    obj: &'a dyn Objective,
    sampler: MiniBatchSampler,
    x0: Vec<f64>,
    d: Vec<f64>,
    fe: u64,
    frozen: bool,
    cache: Vec<Cached>,
}

impl<'a> ProbeContext<'a> {
    /// Starts at `x0` with a zero direction; call [`set_line`](Self::set_line)
    /// before probing away from the origin.
    pub fn new(obj: &'a dyn Objective, sampler: MiniBatchSampler, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != obj.dim() {
            return Err(Error::DimensionMismatch(format!("point of length {} for dimension {}", x0.len(), obj.dim())));
        }
        if sampler.population() != obj.n_samples() {
            return Err(Error::DimensionMismatch(format!(
                "sampler over {} items for an objective with {}",
                sampler.population(),
                obj.n_samples()
            )));
        }
        let d = vec![0.0; x0.len()];
        Ok(Self { obj, sampler, x0, d, fe: 0, frozen: false, cache: Vec::new() })
    }

    /// Keeps a static batch for the whole run instead of renewing it per
    /// direction.
    pub fn freeze_batch(mut self, frozen: bool) -> Self {
        self.frozen = frozen;
        self
    }

    pub fn set_line(&mut self, x0: Vec<f64>, d: Vec<f64>) -> Result<()> {
        if x0.len() != self.obj.dim() || d.len() != self.obj.dim() {
            return Err(Error::DimensionMismatch("line does not match objective dimension".into()));
        }
        self.x0 = x0;
        self.d = d;
        self.cache.clear();
        Ok(())
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn direction(&self) -> &[f64] {
        &self.d
    }

    pub fn fe_count(&self) -> u64 {
        self.fe
    }

    pub fn sampler(&self) -> &MiniBatchSampler {
        &self.sampler
    }

    pub fn objective(&self) -> &dyn Objective {
        self.obj
    }

    pub fn point(&self, alpha: f64) -> Vec<f64> {
        self.x0.iter().zip(&self.d).map(|(x, d)| x + alpha * d).collect()
    }

    /// Loss only; the derivative is not reported.
    pub fn probe_f(&mut self, alpha: f64) -> Result<LineSample> {
        let (s, _) = self.evaluate(alpha)?;
        Ok(LineSample { fprime: None, ..s })
    }

    /// Loss and directional derivative from one shared pass.
    pub fn probe_fg(&mut self, alpha: f64) -> Result<LineSample> {
        self.evaluate(alpha).map(|(s, _)| s)
    }

    /// Like [`probe_fg`](Self::probe_fg) but also hands back the gradient.
    pub fn evaluate(&mut self, alpha: f64) -> Result<(LineSample, Vec<f64>)> {
        if !alpha.is_finite() {
            return Err(Error::NonFinite("step size"));
        }
        let batch = self.sampler.next_batch();
        let x = self.point(alpha);
        self.fe += 1;
        let (loss, grad) = self.obj.loss_grad(&x, &batch)?;
        let fprime = dot(&grad, &self.d);
        if self.cache.len() >= 4 {
            self.cache.remove(0);
        }
        self.cache.push(Cached { alpha, loss, grad: grad.clone() });
        Ok((LineSample { alpha, f: Some(loss), fprime: Some(fprime), fe_cost: 1 }, grad))
    }

    /// The most recent evaluation at exactly `alpha` on this line, usable
    /// for the next iteration without a new pass.
    pub fn reusable(&self, alpha: f64) -> Option<(f64, &[f64])> {
        if self.renews_batch() {
            return None;
        }
        self.cache.iter().rev().find(|c| c.alpha == alpha).map(|c| (c.loss, c.grad.as_slice()))
    }

    /// True when moving to a new direction swaps the batch, so evaluations
    /// on the current line cannot seed the next one.
    pub fn renews_batch(&self) -> bool {
        self.sampler.mode() == SamplerMode::Static && !self.frozen
    }

    /// Evaluates where the iterate moves to, on the batch the next direction
    /// will use.
    pub fn advance(&mut self, alpha: f64) -> Result<(LineSample, Vec<f64>)> {
        if self.renews_batch() {
            self.sampler.refresh_static()?;
        }
        self.evaluate(alpha)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Consecutive grid pairs where the derivative goes from negative to
/// non-negative.
pub fn sign_changes(grid: &[f64], fprime: &[f64]) -> Vec<(f64, f64)> {
    grid.windows(2)
        .zip(fprime.windows(2))
        .filter(|(_, g)| g[0] < 0.0 && g[1] >= 0.0)
        .map(|(a, _)| (a[0], a[1]))
        .collect()
}

/// Probes the derivative on every grid point and reports the sign-change
/// intervals. Costs one FE per grid point.
pub fn snngpp_scan(ctx: &mut ProbeContext<'_>, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if let Some(w) = grid.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(Error::BadInterval { a: w[0], b: w[1] });
    }
    let fprime = grid
        .iter()
        .map(|&a| ctx.probe_fg(a).map(|s| s.fprime.unwrap()))
        .collect::<Result<Vec<_>>>()?;
    Ok(sign_changes(grid, &fprime))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_wdbc;
    use crate::net::{init_weights, NetworkSpec};
    use crate::objective::{NetObjective, Quadratic};
    use std::path::Path;

    fn wdbc() -> crate::data::Dataset {
        load_wdbc(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/wdbc.data"), 0).unwrap()
    }

    fn ctx_on<'a>(obj: &'a NetObjective<'a>, mode: SamplerMode, m: usize) -> ProbeContext<'a> {
        let sampler = MiniBatchSampler::new(mode, m, obj.n_samples(), 3).unwrap();
        let x = init_weights(obj.spec(), 1).into_inner();
        let mut ctx = ProbeContext::new(obj, sampler, x.clone()).unwrap();
        let (_, g) = obj.loss_grad(&x, &(0..obj.n_samples()).collect::<Vec<_>>()).unwrap();
        ctx.set_line(x, g.iter().map(|v| -v).collect()).unwrap();
        ctx
    }

    #[test]
    fn repeat_probes_by_mode() {
        let ds = wdbc();
        let spec = NetworkSpec::logistic(30);
        let obj = NetObjective::new(&spec, &ds).unwrap();
        for (mode, same) in [(SamplerMode::Full, true), (SamplerMode::Static, true), (SamplerMode::Dynamic, false)] {
            let mut ctx = ctx_on(&obj, mode, 10);
            let a = ctx.probe_f(0.0).unwrap().f.unwrap();
            let b = ctx.probe_f(0.0).unwrap().f.unwrap();
            assert_eq!(a == b, same, "{mode}");
            assert_eq!(ctx.fe_count(), 2);
        }
    }

    #[test]
    fn origin_slope_is_descent() {
        let ds = wdbc();
        let spec = NetworkSpec::logistic(30);
        let obj = NetObjective::new(&spec, &ds).unwrap();
        let mut ctx = ctx_on(&obj, SamplerMode::Full, 1);
        let s = ctx.probe_fg(0.0).unwrap();
        let norm2: f64 = ctx.direction().iter().map(|v| v * v).sum();
        assert!((s.fprime.unwrap() + norm2).abs() <= 1e-12 * norm2);
        assert!(s.fprime.unwrap() < 0.0);
    }

    #[test]
    fn static_f_and_fg_agree_and_count() {
        let ds = wdbc();
        let spec = NetworkSpec::logistic(30);
        let obj = NetObjective::new(&spec, &ds).unwrap();
        let mut ctx = ctx_on(&obj, SamplerMode::Static, 25);
        let a = ctx.probe_fg(0.3).unwrap();
        let b = ctx.probe_f(0.3).unwrap();
        assert_eq!(a.f.unwrap().to_bits(), b.f.unwrap().to_bits());
        assert!(b.fprime.is_none());
        assert_eq!((a.fe_cost, b.fe_cost, ctx.fe_count()), (1, 1, 2));
    }

    #[test]
    fn static_restriction_is_continuous() {
        let ds = wdbc();
        let spec = NetworkSpec::logistic(30);
        let obj = NetObjective::new(&spec, &ds).unwrap();
        let mut ctx = ctx_on(&obj, SamplerMode::Static, 40);
        let base = ctx.probe_f(0.1).unwrap().f.unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..8 {
            let delta = 10f64.powi(-k);
            let gap = (ctx.probe_f(0.1 + delta).unwrap().f.unwrap() - base).abs();
            assert!(gap <= prev * 0.5 || gap < 1e-12, "gap {gap} at δ {delta}");
            prev = gap;
        }
    }

    #[test]
    fn sign_change_on_known_vertex() {
        // f(α) = (α − 2)² along x0 = 0, d = 1 on a 1-D quadratic.
        let q = Quadratic::new(vec![2.0], vec![4.0]).unwrap();
        let sampler = MiniBatchSampler::new(SamplerMode::Full, 1, 1, 0).unwrap();
        let mut ctx = ProbeContext::new(&q, sampler, vec![0.0]).unwrap();
        ctx.set_line(vec![0.0], vec![1.0]).unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| 0.5 * i as f64).collect();
        assert_eq!(snngpp_scan(&mut ctx, &grid).unwrap(), vec![(1.5, 2.0)]);
        assert_eq!(ctx.fe_count(), 11);
        assert!(snngpp_scan(&mut ctx, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn no_sign_change_when_always_descending() {
        let grid = [0.0, 1.0, 2.0, 3.0];
        assert!(sign_changes(&grid, &[-3.0, -2.0, -1.5, -1.0]).is_empty());
    }

    #[test]
    fn reuse_only_when_batch_carries_over() {
        let ds = wdbc();
        let spec = NetworkSpec::logistic(30);
        let obj = NetObjective::new(&spec, &ds).unwrap();
        let mut ctx = ctx_on(&obj, SamplerMode::Dynamic, 10);
        ctx.probe_f(0.5).unwrap();
        assert!(ctx.reusable(0.5).is_some());
        assert!(ctx.reusable(0.25).is_none());
        let mut ctx = ctx_on(&obj, SamplerMode::Static, 10);
        ctx.probe_f(0.5).unwrap();
        assert!(ctx.reusable(0.5).is_none());
    }
}
