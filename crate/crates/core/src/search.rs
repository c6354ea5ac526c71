//! One line-search iteration per approximation kind, plus the golden-section
//! exact search used as a baseline.

use std::fmt;
use std::str::FromStr;

use crate::approx::{
    step_size_fff, step_size_fgf, step_size_ffg, step_size_fgfg, step_size_gg, ApproxKind, Bounds, Outcome,
    StepDecision, EPS_K,
};
use crate::error::{Error, Result};
use crate::probe::ProbeContext;

/// Default tolerance on `|f′(0)|` below which the batch is resampled.
pub const EPS_RESAMPLE: f64 = 1e-16;

/// Whether a convex candidate beyond `α₁` may be taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExtrapolationPolicy {
    /// flag = 1: any positive candidate other than `α₁`.
    Accept,
    /// flag = 0: only candidates strictly inside `(0, α₁)`.
    Reject,
}

impl ExtrapolationPolicy {
    pub fn flag(self) -> u8 {
        match self {
            ExtrapolationPolicy::Accept => 1,
            ExtrapolationPolicy::Reject => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExtrapolationPolicy::Accept => "accept",
            ExtrapolationPolicy::Reject => "reject",
        }
    }
}

impl fmt::Display for ExtrapolationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExtrapolationPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accept" | "1" => Ok(ExtrapolationPolicy::Accept),
            "reject" | "0" => Ok(ExtrapolationPolicy::Reject),
            other => Err(Error::Config(format!("unknown extrapolation policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    pub kind: ApproxKind,
    pub flag: ExtrapolationPolicy,
    pub eps: f64,
    pub bounds: Bounds,
    pub eps_k: f64,
}

impl LineSearchConfig {
    pub fn new(kind: ApproxKind, flag: ExtrapolationPolicy, bounds: Bounds) -> Self {
        Self { kind, flag, eps: EPS_RESAMPLE, bounds, eps_k: EPS_K }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("resample tolerance {} must be positive", self.eps)));
        }
        if !(self.eps_k >= 0.0 && self.eps_k.is_finite()) {
            return Err(Error::Config(format!("curvature tolerance {} must be non-negative", self.eps_k)));
        }
        Bounds::new(self.bounds.alpha_min(), self.bounds.alpha_max(), self.bounds.enforced()).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationResult {
    pub alpha: f64,
    /// Initial guess for this direction; 0 on a resample.
    pub alpha1: f64,
    pub decision: StepDecision,
    pub next_loss: f64,
    pub next_grad: Vec<f64>,
    pub fe_used: u64,
    /// The builder proposed a step the policy refused, so `α₁` was taken.
    pub guard_rejected: bool,
}

/// `1/‖d‖`, clamped when the bounds are enforced.
pub fn initial_guess(d: &[f64], bounds: &Bounds) -> Result<f64> {
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroDirection);
    }
    if !norm.is_finite() {
        return Err(Error::NonFinite("search direction"));
    }
    Ok(bounds.clamp(1.0 / norm))
}

pub fn sgd_direction(grad: &[f64]) -> Vec<f64> {
    grad.iter().map(|g| -g).collect()
}

/// Runs one iteration along the line held by `ctx`.
///
/// `f0` and `g0` are the loss and gradient at the origin of the line on the
/// batch the direction came from. The returned loss and gradient belong to
/// the accepted point and seed the next iteration.
pub fn line_search_step(
    ctx: &mut ProbeContext<'_>,
    f0: f64,
    g0: &[f64],
    config: &LineSearchConfig,
) -> Result<IterationResult> {
    let start = ctx.fe_count();
    if g0.len() != ctx.direction().len() {
        return Err(Error::DimensionMismatch("gradient does not match direction".into()));
    }
    let fp0: f64 = g0.iter().zip(ctx.direction()).map(|(g, d)| g * d).sum();
    if !fp0.is_finite() || !f0.is_finite() {
        return Err(Error::NonFinite("origin sample"));
    }
    if fp0.abs() < config.eps {
        let (s, grad) = ctx.advance(0.0)?;
        return Ok(IterationResult {
            alpha: 0.0,
            alpha1: 0.0,
            decision: StepDecision::resample(),
            next_loss: s.f.unwrap(),
            next_grad: grad,
            fe_used: ctx.fe_count() - start,
            guard_rejected: false,
        });
    }

    let alpha1 = initial_guess(ctx.direction(), &config.bounds)?;
    let (b, ek) = (&config.bounds, config.eps_k);
    let mut decision = match config.kind {
        ApproxKind::Fff => {
            let alpha2 = alpha1 / 2.0;
            let f1 = ctx.probe_f(alpha1)?.f.unwrap();
            let f2 = ctx.probe_f(alpha2)?.f.unwrap();
            step_size_fff(alpha1, alpha2, f0, f1, f2, b, ek)
        }
        ApproxKind::Fgf => {
            let f1 = ctx.probe_f(alpha1)?.f.unwrap();
            step_size_fgf(alpha1, f0, f1, fp0, b, ek)
        }
        ApproxKind::Ffg => {
            let s = ctx.probe_fg(alpha1)?;
            step_size_ffg(alpha1, f0, s.f.unwrap(), s.fprime.unwrap(), b, ek)
        }
        ApproxKind::Fgfg => {
            let s = ctx.probe_fg(alpha1)?;
            step_size_fgfg(alpha1, f0, s.f.unwrap(), fp0, s.fprime.unwrap(), b, ek)
        }
        ApproxKind::Gg => {
            let s = ctx.probe_fg(alpha1)?;
            step_size_gg(alpha1, fp0, s.fprime.unwrap(), b, ek)
        }
    };

    let candidate = decision.alpha_star;
    let (alpha, guard_rejected) = if candidate == alpha1 {
        decision.outcome = Outcome::ImmediateAccept;
        (alpha1, false)
    } else {
        let ok = match config.flag {
            ExtrapolationPolicy::Accept => candidate > 0.0,
            ExtrapolationPolicy::Reject => candidate > 0.0 && candidate < alpha1,
        };
        if ok {
            (candidate, false)
        } else {
            (alpha1, true)
        }
    };

    let reused = if decision.outcome == Outcome::ImmediateAccept {
        ctx.reusable(alpha).map(|(l, g)| (l, g.to_vec()))
    } else {
        None
    };
    let (next_loss, next_grad) = match reused {
        Some(v) => v,
        None => {
            let (s, g) = ctx.advance(alpha)?;
            (s.f.unwrap(), g)
        }
    };
    Ok(IterationResult {
        alpha,
        alpha1,
        decision,
        next_loss,
        next_grad,
        fe_used: ctx.fe_count() - start,
        guard_rejected,
    })
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section minimization of `f` on `[a, b]`, shrinking the bracket
/// until it is no wider than `tol`; returns the bracket midpoint.
pub fn golden_section<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::BadInterval { a, b });
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("golden-section tolerance {tol} must be positive")));
    }
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    // Bracket shrinks by 0.618 per step; stop early once it stops moving.
    for _ in 0..400 {
        if b - a <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Brackets the minimizer along the line from `α₁` and then runs
/// [`golden_section`] to a tolerance of `rel_tol` times the best point
/// found while bracketing.
///
/// Expanding doubles the step while the loss keeps falling, capped at
/// `α_max`. If `α₁` already fails to improve on `f0`, the step is halved
/// until it does or reaches `α_min`.
pub fn exact_line_search(ctx: &mut ProbeContext<'_>, f0: f64, bounds: &Bounds, rel_tol: f64) -> Result<IterationResult> {
    let start = ctx.fe_count();
    let alpha1 = initial_guess(ctx.direction(), bounds)?;
    let (amin, amax) = (bounds.alpha_min(), bounds.alpha_max());
    let f1 = ctx.probe_f(alpha1)?.f.unwrap();
    let (lo, hi, best) = if f1 < f0 {
        let (mut lo, mut mid, mut fmid) = (0.0, alpha1, f1);
        loop {
            let next = (2.0 * mid).min(amax);
            if next <= mid {
                break (lo, mid, mid);
            }
            let fnext = ctx.probe_f(next)?.f.unwrap();
            if fnext >= fmid {
                break (lo, next, mid);
            }
            (lo, mid, fmid) = (mid, next, fnext);
        }
    } else {
        let mut hi = alpha1;
        loop {
            let half = hi / 2.0;
            if half < amin {
                break (0.0, hi, half);
            }
            if ctx.probe_f(half)?.f.unwrap() < f0 {
                break (0.0, hi, half);
            }
            hi = half;
        }
    };
    let tol = (rel_tol * best).max(f64::EPSILON * hi);
    let alpha = golden_section(|a| ctx.probe_f(a).map(|s| s.f.unwrap()), lo, hi, tol)?;
    let (s, grad) = ctx.advance(alpha)?;
    let outcome = if alpha <= alpha1 { Outcome::Interpolation } else { Outcome::BoundedExtrapolation };
    Ok(IterationResult {
        alpha,
        alpha1,
        decision: StepDecision { alpha_star: alpha, outcome, model: None, vertex: None },
        next_loss: s.f.unwrap(),
        next_grad: grad,
        fe_used: ctx.fe_count() - start,
        guard_rejected: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{MiniBatchSampler, SamplerMode};
    use crate::objective::{Objective, Quadratic};

    fn full(obj: &dyn Objective, x: Vec<f64>) -> ProbeContext<'_> {
        let s = MiniBatchSampler::new(SamplerMode::Full, 1, obj.n_samples(), 0).unwrap();
        ProbeContext::new(obj, s, x).unwrap()
    }

    #[test]
    fn initial_guess_cases() {
        let b = Bounds::standard();
        assert_eq!(initial_guess(&[0.0, 4.0], &b).unwrap(), 0.25);
        assert_eq!(initial_guess(&[1e-10], &b).unwrap(), 1e8);
        assert_eq!(initial_guess(&[0.6, 0.8], &b).unwrap(), 1.0);
        assert!(matches!(initial_guess(&[0.0, 0.0], &b), Err(Error::ZeroDirection)));
    }

    #[test]
    fn sgd_direction_cases() {
        assert_eq!(sgd_direction(&[1.0, -2.0]), vec![-1.0, 2.0]);
        let g = [0.3, -0.1];
        let d = sgd_direction(&g);
        assert!(g.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() < 0.0);
        assert!(sgd_direction(&[0.0, 0.0]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn flat_slope_resamples() {
        // Gradient at the origin is 1e-10 along a unit direction: f′(0)² = 1e-20.
        let q = Quadratic::new(vec![1.0], vec![-1e-10]).unwrap();
        let mut ctx = full(&q, vec![0.0]);
        let (f0, g0) = q.loss_grad(&[0.0], &[0]).unwrap();
        ctx.set_line(vec![0.0], sgd_direction(&g0)).unwrap();
        let cfg = LineSearchConfig::new(ApproxKind::Gg, ExtrapolationPolicy::Reject, Bounds::standard());
        let r = line_search_step(&mut ctx, f0, &g0, &cfg).unwrap();
        assert_eq!((r.alpha, r.decision.outcome, r.fe_used), (0.0, Outcome::Resample, 1));
    }

    #[test]
    fn gg_reject_policy_falls_back_to_alpha1() {
        // f = ½·0.5x² − x from x = 0: f′(0) = −1 along d = 1, α₁ = 1,
        // f′(1) = −0.5, a bounded extrapolation to α = 2.
        let q = Quadratic::new(vec![0.5], vec![1.0]).unwrap();
        let mut ctx = full(&q, vec![0.0]);
        let (f0, g0) = q.loss_grad(&[0.0], &[0]).unwrap();
        ctx.set_line(vec![0.0], sgd_direction(&g0)).unwrap();
        let cfg = LineSearchConfig::new(ApproxKind::Gg, ExtrapolationPolicy::Reject, Bounds::standard());
        let r = line_search_step(&mut ctx, f0, &g0, &cfg).unwrap();
        assert_eq!(r.decision.outcome, Outcome::BoundedExtrapolation);
        assert!(r.guard_rejected);
        assert_eq!((r.alpha, r.fe_used), (1.0, 2));

        ctx.set_line(vec![0.0], sgd_direction(&g0)).unwrap();
        let cfg = LineSearchConfig { flag: ExtrapolationPolicy::Accept, ..cfg };
        let r = line_search_step(&mut ctx, f0, &g0, &cfg).unwrap();
        assert!((r.alpha - 2.0).abs() < 1e-12);
        assert!(!r.guard_rejected);
    }

    #[test]
    fn fff_finds_interior_vertex() {
        // f = ½·4x² − x along d = 1: vertex at 0.25, α₁ = 1.
        let q = Quadratic::new(vec![4.0], vec![1.0]).unwrap();
        let mut ctx = full(&q, vec![0.0]);
        let (f0, g0) = q.loss_grad(&[0.0], &[0]).unwrap();
        ctx.set_line(vec![0.0], sgd_direction(&g0)).unwrap();
        let cfg = LineSearchConfig::new(ApproxKind::Fff, ExtrapolationPolicy::Reject, Bounds::standard());
        let r = line_search_step(&mut ctx, f0, &g0, &cfg).unwrap();
        assert!((r.alpha / 0.25 - 1.0).abs() < 1e-6);
        assert_eq!((r.decision.outcome, r.fe_used), (Outcome::Interpolation, 3));
        assert!(r.next_grad[0].abs() < 1e-12);
    }

    #[test]
    fn vertex_at_alpha1_reuses_the_probe() {
        // f = ½x² − x along d = 1: vertex exactly at α₁ = 1.
        let q = Quadratic::new(vec![1.0], vec![1.0]).unwrap();
        for kind in ApproxKind::ALL {
            let mut ctx = full(&q, vec![0.0]);
            let (f0, g0) = q.loss_grad(&[0.0], &[0]).unwrap();
            ctx.set_line(vec![0.0], sgd_direction(&g0)).unwrap();
            let cfg = LineSearchConfig::new(kind, ExtrapolationPolicy::Accept, Bounds::standard());
            let r = line_search_step(&mut ctx, f0, &g0, &cfg).unwrap();
            assert!((r.alpha - 1.0).abs() < 1e-12, "{kind}");
            if r.decision.outcome == Outcome::ImmediateAccept {
                assert_eq!(r.alpha, 1.0);
                assert_eq!(r.fe_used, kind.probe_cost(), "{kind}");
            }
            assert_eq!(r.fe_used, r.decision.outcome.fe_cost(kind), "{kind}");
        }
    }

    #[test]
    fn golden_section_cases() {
        let a = golden_section(|a| Ok((a - 2.0) * (a - 2.0)), 0.0, 5.0, 1e-6).unwrap();
        assert!((a - 2.0).abs() <= 1e-6);
        let a = golden_section(|a: f64| Ok((a - 1.0).abs()), 0.0, 3.0, 1e-6).unwrap();
        assert!((a - 1.0).abs() <= 1e-6);
        assert!(matches!(golden_section(Ok, 1.0, 1.0, 1e-6), Err(Error::BadInterval { .. })));
        assert!(matches!(golden_section(Ok, 2.0, 1.0, 1e-6), Err(Error::BadInterval { .. })));
    }

    #[test]
    fn exact_search_on_quadratic() {
        // f = ½·3x² − x along d = 1 (α₁ = 1): minimizer 1/3 needs the
        // halving branch. f = ½·0.01x² − x: minimizer 100 needs doubling.
        for (a, want) in [(3.0, 1.0 / 3.0), (0.01, 100.0)] {
            let q = Quadratic::new(vec![a], vec![1.0]).unwrap();
            let mut ctx = full(&q, vec![0.0]);
            let (f0, g0) = q.loss_grad(&[0.0], &[0]).unwrap();
            ctx.set_line(vec![0.0], sgd_direction(&g0)).unwrap();
            let r = exact_line_search(&mut ctx, f0, &Bounds::standard(), 1e-6).unwrap();
            assert!((r.alpha / want - 1.0).abs() < 1e-5, "got {} want {want}", r.alpha);
        }
    }

    #[test]
    fn config_parsing() {
        assert_eq!("0".parse::<ExtrapolationPolicy>().unwrap(), ExtrapolationPolicy::Reject);
        assert_eq!("accept".parse::<ExtrapolationPolicy>().unwrap().flag(), 1);
        let mut c = LineSearchConfig::new(ApproxKind::Gg, ExtrapolationPolicy::Reject, Bounds::standard());
        assert!(c.validate().is_ok());
        c.eps = 0.0;
        assert!(c.validate().is_err());
    }
}
