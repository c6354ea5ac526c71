//! The five quadratic (or linear-derivative) fits and the step each one
//! proposes.
//!
//! Every builder is pure: it takes line samples that were already measured
//! and never evaluates the objective itself.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{solve_least_squares, solve_square, SmallMatrix, SmallVector};

/// Default curvature threshold below which a fit counts as non-convex.
pub const EPS_K: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ApproxKind {
    Fff,
    Fgf,
    Ffg,
    Fgfg,
    Gg,
}

impl ApproxKind {
    pub const ALL: [ApproxKind; 5] = [ApproxKind::Fff, ApproxKind::Fgf, ApproxKind::Ffg, ApproxKind::Fgfg, ApproxKind::Gg];

    /// Short identifier used in file names and configs.
    pub fn as_str(self) -> &'static str {
        match self {
            ApproxKind::Fff => "fff",
            ApproxKind::Fgf => "fgf",
            ApproxKind::Ffg => "ffg",
            ApproxKind::Fgfg => "fgfg",
            ApproxKind::Gg => "gg",
        }
    }

    /// Hyphenated display name, e.g. `fg-f`.
    pub fn label(self) -> &'static str {
        match self {
            ApproxKind::Fff => "f-f-f",
            ApproxKind::Fgf => "fg-f",
            ApproxKind::Ffg => "f-fg",
            ApproxKind::Fgfg => "fg-fg",
            ApproxKind::Gg => "g-g",
        }
    }

    /// True when the fit enforces the derivative at the origin.
    pub fn uses_origin_slope(self) -> bool {
        matches!(self, ApproxKind::Fgf | ApproxKind::Fgfg | ApproxKind::Gg)
    }

    /// Evaluations spent on probes before a step is chosen.
    pub fn probe_cost(self) -> u64 {
        match self {
            ApproxKind::Fff => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for ApproxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ApproxKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ApproxKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s || k.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown approximation kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Resample,
    ImmediateAccept,
    Interpolation,
    BoundedExtrapolation,
    ClampedMin,
    ClampedMax,
}

impl Outcome {
    pub const ALL: [Outcome; 6] = [
        Outcome::Resample,
        Outcome::ImmediateAccept,
        Outcome::Interpolation,
        Outcome::BoundedExtrapolation,
        Outcome::ClampedMin,
        Outcome::ClampedMax,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Resample => "resample",
            Outcome::ImmediateAccept => "immediate-accept",
            Outcome::Interpolation => "interpolation",
            Outcome::BoundedExtrapolation => "bounded-extrapolation",
            Outcome::ClampedMin => "clamped-min",
            Outcome::ClampedMax => "clamped-max",
        }
    }

    /// Evaluations one iteration costs for a given kind and outcome.
    pub fn fe_cost(self, kind: ApproxKind) -> u64 {
        match self {
            Outcome::Resample => 1,
            Outcome::ImmediateAccept => kind.probe_cost(),
            _ => kind.probe_cost() + 1,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Outcome::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown outcome {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    alpha_min: f64,
    alpha_max: f64,
    enforced: bool,
}

impl Bounds {
    pub fn new(alpha_min: f64, alpha_max: f64, enforced: bool) -> Result<Self> {
        if !(alpha_min > 0.0 && alpha_max > alpha_min && alpha_max.is_finite()) {
            return Err(Error::Config(format!("invalid step bounds [{alpha_min}, {alpha_max}]")));
        }
        Ok(Self { alpha_min, alpha_max, enforced })
    }

    /// 1e-7 to 1e8, enforced.
    pub fn standard() -> Self {
        Self { alpha_min: 1e-7, alpha_max: 1e8, enforced: true }
    }

    /// 1e-8 to 1e7, enforced; the logistic-regression setting.
    pub fn wdbc() -> Self {
        Self { alpha_min: 1e-8, alpha_max: 1e7, enforced: true }
    }

    pub fn with_enforced(self, enforced: bool) -> Self {
        Self { enforced, ..self }
    }

    pub fn alpha_min(&self) -> f64 {
        self.alpha_min
    }

    pub fn alpha_max(&self) -> f64 {
        self.alpha_max
    }

    pub fn enforced(&self) -> bool {
        self.enforced
    }

    /// Clamps when enforced; otherwise returns `alpha` unchanged.
    pub fn clamp(&self, alpha: f64) -> f64 {
        if !self.enforced {
            alpha
        } else if alpha >= self.alpha_max {
            self.alpha_max
        } else if alpha <= self.alpha_min {
            self.alpha_min
        } else {
            alpha
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticModel {
    pub k1: f64,
    pub k2: f64,
    /// Absent for `Gg`, which only models the derivative.
    pub k3: Option<f64>,
    pub kind: ApproxKind,
}

impl QuadraticModel {
    pub fn value(&self, alpha: f64) -> Option<f64> {
        self.k3.map(|k3| (self.k1 * alpha + self.k2) * alpha + k3)
    }

    pub fn slope(&self, alpha: f64) -> f64 {
        2.0 * self.k1 * alpha + self.k2
    }

    pub fn is_convex(&self, eps_k: f64) -> bool {
        self.k1 > eps_k
    }

    /// Stationary point `−k2 / (2 k1)`, if `k1 ≠ 0`.
    pub fn vertex(&self) -> Option<f64> {
        (self.k1 != 0.0).then(|| -self.k2 / (2.0 * self.k1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDecision {
    pub alpha_star: f64,
    pub outcome: Outcome,
    pub model: Option<QuadraticModel>,
    /// The convex model's vertex before any clamping or rejection.
    pub vertex: Option<f64>,
}

impl StepDecision {
    pub fn resample() -> Self {
        Self { alpha_star: 0.0, outcome: Outcome::Resample, model: None, vertex: None }
    }
}

/// Tags where a vertex lands relative to `alpha1` and the bounds.
///
/// A vertex exactly at `alpha1` is an immediate accept, since no new point
/// needs evaluating. Non-positive vertices are clamped to the lower bound
/// when bounds are enforced and otherwise fall back to `alpha1`.
pub fn classify_outcome(model: &QuadraticModel, vertex: f64, alpha1: f64, bounds: &Bounds, eps_k: f64) -> Outcome {
    if !model.is_convex(eps_k) || !vertex.is_finite() {
        return Outcome::ImmediateAccept;
    }
    if bounds.enforced() {
        if vertex >= bounds.alpha_max() {
            return if bounds.alpha_max() == alpha1 { Outcome::ImmediateAccept } else { Outcome::ClampedMax };
        }
        if vertex <= bounds.alpha_min() {
            return if bounds.alpha_min() == alpha1 { Outcome::ImmediateAccept } else { Outcome::ClampedMin };
        }
    } else if vertex <= 0.0 {
        return Outcome::ImmediateAccept;
    }
    if vertex == alpha1 {
        Outcome::ImmediateAccept
    } else if vertex < alpha1 {
        Outcome::Interpolation
    } else {
        Outcome::BoundedExtrapolation
    }
}

fn decide(model: Result<QuadraticModel>, alpha1: f64, bounds: &Bounds, eps_k: f64) -> StepDecision {
    let model = match model {
        Ok(m) => m,
        Err(_) => {
            return StepDecision { alpha_star: alpha1, outcome: Outcome::ImmediateAccept, model: None, vertex: None }
        }
    };
    let vertex = if model.is_convex(eps_k) { model.vertex() } else { None };
    let outcome = match vertex {
        Some(v) => classify_outcome(&model, v, alpha1, bounds, eps_k),
        None => Outcome::ImmediateAccept,
    };
    let alpha_star = match (outcome, vertex) {
        (Outcome::ImmediateAccept, _) | (_, None) => alpha1,
        (_, Some(v)) => bounds.clamp(v),
    };
    StepDecision { alpha_star, outcome, model: Some(model), vertex }
}

fn model(kind: ApproxKind, k: SmallVector) -> QuadraticModel {
    QuadraticModel { k1: k[0], k2: k[1], k3: Some(k[2]), kind }
}

fn finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("line samples"))
    }
}

/// Fit through `f` at 0, `alpha1` and `alpha2`.
pub fn step_size_fff(alpha1: f64, alpha2: f64, f0: f64, f1: f64, f2: f64, bounds: &Bounds, eps_k: f64) -> StepDecision {
    let fit = finite(&[alpha1, alpha2, f0, f1, f2]).and_then(|_| {
        let a = SmallMatrix::from_rows(&[
            &[0.0, 0.0, 1.0],
            &[alpha1 * alpha1, alpha1, 1.0],
            &[alpha2 * alpha2, alpha2, 1.0],
        ])?;
        solve_square(&a, &SmallVector::from_slice(&[f0, f1, f2])?).map(|k| model(ApproxKind::Fff, k))
    });
    decide(fit, alpha1, bounds, eps_k)
}

/// Fit through `f` and `f′` at 0 and `f` at `alpha1`.
pub fn step_size_fgf(alpha1: f64, f0: f64, f1: f64, fp0: f64, bounds: &Bounds, eps_k: f64) -> StepDecision {
    let fit = finite(&[alpha1, f0, f1, fp0]).and_then(|_| {
        let a = SmallMatrix::from_rows(&[&[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0], &[alpha1 * alpha1, alpha1, 1.0]])?;
        solve_square(&a, &SmallVector::from_slice(&[f0, fp0, f1])?).map(|k| model(ApproxKind::Fgf, k))
    });
    decide(fit, alpha1, bounds, eps_k)
}

/// Fit through `f` at 0 and `f`, `f′` at `alpha1`.
pub fn step_size_ffg(alpha1: f64, f0: f64, f1: f64, fp1: f64, bounds: &Bounds, eps_k: f64) -> StepDecision {
    let fit = finite(&[alpha1, f0, f1, fp1]).and_then(|_| {
        let a = SmallMatrix::from_rows(&[
            &[0.0, 0.0, 1.0],
            &[alpha1 * alpha1, alpha1, 1.0],
            &[2.0 * alpha1, 1.0, 0.0],
        ])?;
        solve_square(&a, &SmallVector::from_slice(&[f0, f1, fp1])?).map(|k| model(ApproxKind::Ffg, k))
    });
    decide(fit, alpha1, bounds, eps_k)
}

/// Least-squares fit to `f`, `f′` at both 0 and `alpha1`.
pub fn step_size_fgfg(alpha1: f64, f0: f64, f1: f64, fp0: f64, fp1: f64, bounds: &Bounds, eps_k: f64) -> StepDecision {
    let fit = finite(&[alpha1, f0, f1, fp0, fp1]).and_then(|_| {
        let a = SmallMatrix::from_rows(&[
            &[0.0, 0.0, 1.0],
            &[0.0, 1.0, 0.0],
            &[alpha1 * alpha1, alpha1, 1.0],
            &[2.0 * alpha1, 1.0, 0.0],
        ])?;
        solve_least_squares(&a, &SmallVector::from_slice(&[f0, fp0, f1, fp1])?).map(|k| model(ApproxKind::Fgfg, k))
    });
    decide(fit, alpha1, bounds, eps_k)
}

/// Linear fit to `f′` at 0 and `alpha1`.
pub fn step_size_gg(alpha1: f64, fp0: f64, fp1: f64, bounds: &Bounds, eps_k: f64) -> StepDecision {
    let fit = finite(&[alpha1, fp0, fp1]).and_then(|_| {
        let a = SmallMatrix::from_rows(&[&[0.0, 1.0], &[2.0 * alpha1, 1.0]])?;
        solve_square(&a, &SmallVector::from_slice(&[fp0, fp1])?).map(|k| QuadraticModel {
            k1: k[0],
            k2: k[1],
            k3: None,
            kind: ApproxKind::Gg,
        })
    });
    decide(fit, alpha1, bounds, eps_k)
}

/// Integrates a derivative-only model, adding the constant `k3`.
pub fn gg_to_loss_domain(model: &QuadraticModel, k3: f64) -> Result<QuadraticModel> {
    if model.kind != ApproxKind::Gg {
        return Err(Error::WrongKind { expected: "gg" });
    }
    Ok(QuadraticModel { k3: Some(k3), ..*model })
}
