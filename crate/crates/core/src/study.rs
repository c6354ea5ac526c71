//! Spread of the step each approximation proposes at one fixed point and
//! direction when every probe sees a fresh batch.

use rayon::prelude::*;

use crate::approx::{
    step_size_fff, step_size_fgf, step_size_ffg, step_size_fgfg, step_size_gg, ApproxKind, Bounds, EPS_K,
};
use crate::data::{MiniBatchSampler, SamplerMode};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::probe::ProbeContext;
use crate::search::{exact_line_search, initial_guess};
use crate::train::Stat;

pub const HISTOGRAM_BINS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionStats {
    pub kind: ApproxKind,
    /// Fits that produced a convex model with a positive vertex.
    pub n: usize,
    /// Concave fits and fits with a non-positive vertex.
    pub rejected: usize,
    pub mu: f64,
    pub sigma: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    /// `HISTOGRAM_BINS + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub reference_minimizer: f64,
    pub alpha1: f64,
    /// Accepted vertices in fit order.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyConfig {
    pub kind: ApproxKind,
    pub mode: SamplerMode,
    pub m: usize,
    pub n_fits: usize,
    pub seed: u64,
    /// Only used to clamp the initial guess; vertices are kept unclamped.
    pub bounds: Bounds,
}

/// Fits `config.n_fits` models at `x` along `d` and summarizes the vertices.
pub fn distribution_study(obj: &dyn Objective, x: &[f64], d: &[f64], config: &StudyConfig) -> Result<DistributionStats> {
    if config.n_fits < 2 {
        return Err(Error::Config("a distribution study needs at least two fits".into()));
    }
    let alpha1 = initial_guess(d, &config.bounds)?;
    let open = config.bounds.with_enforced(false);
    let fits: Vec<Option<f64>> = (0..config.n_fits as u64)
        .into_par_iter()
        .map(|i| {
            let seed = config.seed.wrapping_mul(0x2545_f491_4f6c_dd1d).wrapping_add(i);
            let sampler = MiniBatchSampler::new(config.mode, config.m, obj.n_samples(), seed)?;
            let mut ctx = ProbeContext::new(obj, sampler, x.to_vec())?;
            ctx.set_line(x.to_vec(), d.to_vec())?;
            let s0 = ctx.probe_fg(0.0)?;
            let (f0, fp0) = (s0.f.unwrap(), s0.fprime.unwrap());
            let decision = match config.kind {
                ApproxKind::Fff => {
                    let f1 = ctx.probe_f(alpha1)?.f.unwrap();
                    let f2 = ctx.probe_f(alpha1 / 2.0)?.f.unwrap();
                    step_size_fff(alpha1, alpha1 / 2.0, f0, f1, f2, &open, EPS_K)
                }
                ApproxKind::Fgf => {
                    let f1 = ctx.probe_f(alpha1)?.f.unwrap();
                    step_size_fgf(alpha1, f0, f1, fp0, &open, EPS_K)
                }
                ApproxKind::Ffg => {
                    let s = ctx.probe_fg(alpha1)?;
                    step_size_ffg(alpha1, f0, s.f.unwrap(), s.fprime.unwrap(), &open, EPS_K)
                }
                ApproxKind::Fgfg => {
                    let s = ctx.probe_fg(alpha1)?;
                    step_size_fgfg(alpha1, f0, s.f.unwrap(), fp0, s.fprime.unwrap(), &open, EPS_K)
                }
                ApproxKind::Gg => {
                    let s = ctx.probe_fg(alpha1)?;
                    step_size_gg(alpha1, fp0, s.fprime.unwrap(), &open, EPS_K)
                }
            };
            Ok(decision.vertex.filter(|v| *v > 0.0 && v.is_finite()))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = fits.iter().flatten().copied().collect();
    let rejected = fits.len() - values.len();

    let reference_minimizer = full_batch_minimizer(obj, x, d, &config.bounds)?;
    if values.is_empty() {
        return Ok(DistributionStats {
            kind: config.kind,
            n: 0,
            rejected,
            mu: f64::NAN,
            sigma: f64::NAN,
            q1: f64::NAN,
            q2: f64::NAN,
            q3: f64::NAN,
            edges: Vec::new(),
            counts: Vec::new(),
            reference_minimizer,
            alpha1,
            values,
        });
    }
    let stat = Stat::of(values.iter().copied());
    let (q1, q2, q3) = quartiles(&values)?;
    let (edges, counts) = histogram(&values, HISTOGRAM_BINS)?;
    Ok(DistributionStats {
        kind: config.kind,
        n: values.len(),
        rejected,
        mu: stat.mean,
        sigma: stat.sd,
        q1,
        q2,
        q3,
        edges,
        counts,
        reference_minimizer,
        alpha1,
        values,
    })
}

/// Golden-section minimizer of the full-batch loss along `d`.
pub fn full_batch_minimizer(obj: &dyn Objective, x: &[f64], d: &[f64], bounds: &Bounds) -> Result<f64> {
    let sampler = MiniBatchSampler::new(SamplerMode::Full, 1, obj.n_samples(), 0)?;
    let mut ctx = ProbeContext::new(obj, sampler, x.to_vec())?;
    ctx.set_line(x.to_vec(), d.to_vec())?;
    let f0 = ctx.probe_f(0.0)?.f.unwrap();
    Ok(exact_line_search(&mut ctx, f0, bounds, 1e-6)?.alpha)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quartiles(values: &[f64]) -> Result<(f64, f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok((quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.5), quantile_sorted(&v, 0.75)))
}

/// Uniform bins over the 1st to 99th percentile; values outside land in the
/// end bins.
pub fn histogram(values: &[f64], bins: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    if values.is_empty() || bins == 0 {
        return Err(Error::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&v, 0.01);
    let hi = quantile_sorted(&v, 0.99);
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + i as f64 * width }).collect();
    let mut counts = vec![0usize; bins];
    for &x in values {
        let idx = if width > 0.0 { ((x - lo) / width).floor().clamp(0.0, (bins - 1) as f64) as usize } else { 0 };
        counts[idx] += 1;
    }
    Ok((edges, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_wdbc;
    use crate::net::{init_weights, NetworkSpec};
    use crate::objective::NetObjective;
    use rand::{Rng, SeedableRng};
    use std::path::Path;

    #[test]
    fn quartile_cases() {
        assert_eq!(quartiles(&[5.0, 1.0, 3.0, 2.0, 4.0]).unwrap(), (2.0, 3.0, 4.0));
        assert_eq!(quartiles(&[7.5]).unwrap(), (7.5, 7.5, 7.5));
        assert!(matches!(quartiles(&[]), Err(Error::EmptyInput)));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let u: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let (a, b, c) = quartiles(&u).unwrap();
        assert!((a - 0.25).abs() < 0.02 && (b - 0.5).abs() < 0.02 && (c - 0.75).abs() < 0.02);
    }

    #[test]
    fn histogram_counts_everything() {
        let v: Vec<f64> = (0..200).map(|i| (i as f64).powi(2)).collect();
        let (edges, counts) = histogram(&v, 40).unwrap();
        assert_eq!(edges.len(), 41);
        assert_eq!(counts.iter().sum::<usize>(), 200);
        let (_, counts) = histogram(&[2.0; 5], 40).unwrap();
        assert_eq!(counts[0], 5);
    }

    #[test]
    fn full_mode_has_no_spread() {
        let ds = load_wdbc(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/wdbc.data"), 0).unwrap();
        let spec = NetworkSpec::logistic(30);
        let obj = NetObjective::new(&spec, &ds).unwrap();
        let x = init_weights(&spec, 2).into_inner();
        let all: Vec<usize> = (0..obj.n_samples()).collect();
        let d: Vec<f64> = obj.loss_grad(&x, &all).unwrap().1.iter().map(|g| -g).collect();
        for kind in ApproxKind::ALL {
            let cfg = StudyConfig {
                kind,
                mode: SamplerMode::Full,
                m: 1,
                n_fits: 20,
                seed: 1,
                bounds: Bounds::wdbc(),
            };
            let s = distribution_study(&obj, &x, &d, &cfg).unwrap();
            assert_eq!(s.n + s.rejected, 20);
            if s.n > 0 {
                assert_eq!(s.sigma, 0.0, "{kind}");
                assert!(s.q1 <= s.q2 && s.q2 <= s.q3);
                assert_eq!(s.counts.iter().sum::<usize>(), s.n);
            }
            assert!(s.reference_minimizer > 0.0);
        }
    }
}
