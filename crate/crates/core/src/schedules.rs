//! Step-length rules, their admissibility bounds, and numerical checkers for
//! the testing conditions that drive the convergence theory.
//!
//! Three rules are provided:
//!
//! * [`StepSchedule::Constant`]: fixed `(τ, σ)` with `ω ≡ 1`;
//! * [`StepSchedule::Accelerated`]: `τ_{i+1} = τ_i / (1 + 2γ̃_G τ_i)`, fixed `σ`, `ω ≡ 1`;
//! * [`StepSchedule::LinearRate`]: fixed `τ`, `σ = τ γ̃_G / γ̃_F*`, `ω = 1/(1 + 2γ̃_G τ)`.
//!
//! Bound calculators return `f64::INFINITY` where a denominator vanishes.

use std::fmt;

use crate::error::{Error, Result};
use crate::potts::PottsNorm;

/// Relative tolerance applied to the equality and inequality checks.
pub const CHECK_TOL: f64 = 1e-10;

/// Margin turning the strict Potts inequalities into computable choices.
pub const POTTS_MARGIN: f64 = 1e-6;

/// Step lengths used inside one iteration: `τ_i`, `σ_{i+1}` and `ω_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTriple {
    pub tau: f64,
    pub sigma: f64,
    pub omega: f64,
}

impl StepTriple {
    pub fn new(tau: f64, sigma: f64, omega: f64) -> Result<Self> {
        let t = StepTriple { tau, sigma, omega };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau", self.tau), ("sigma", self.sigma), ("omega", self.omega)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for StepTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tau={:e} sigma={} omega={}", self.tau, self.sigma, self.omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant { tau: f64, sigma: f64 },
    Accelerated { tau0: f64, sigma: f64, gamma_tilde_g: f64 },
    LinearRate { tau: f64, gamma_tilde_g: f64, gamma_tilde_fstar: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl StepSchedule {
    pub fn constant(tau: f64, sigma: f64) -> Result<Self> {
        positive("tau", tau)?;
        positive("sigma", sigma)?;
        Ok(StepSchedule::Constant { tau, sigma })
    }

    pub fn accelerated(tau0: f64, sigma: f64, gamma_tilde_g: f64) -> Result<Self> {
        positive("tau0", tau0)?;
        positive("sigma", sigma)?;
        positive("gamma_tilde_g", gamma_tilde_g)?;
        Ok(StepSchedule::Accelerated { tau0, sigma, gamma_tilde_g })
    }

    pub fn linear_rate(tau: f64, gamma_tilde_g: f64, gamma_tilde_fstar: f64) -> Result<Self> {
        positive("tau", tau)?;
        positive("gamma_tilde_g", gamma_tilde_g)?;
        positive("gamma_tilde_fstar", gamma_tilde_fstar)?;
        Ok(StepSchedule::LinearRate { tau, gamma_tilde_g, gamma_tilde_fstar })
    }

    /// The triple for iteration `i`. Pure in `(self, i)`; the accelerated rule
    /// unrolls its recursion, so prefer [`triples`](Self::triples) in loops.
    pub fn next(&self, i: usize) -> StepTriple {
        self.triples().nth(i).expect("schedules are infinite")
    }

    /// Infinite sequence of triples starting at iteration 0.
    pub fn triples(&self) -> Triples {
        Triples { schedule: *self, tau: self.initial_tau() }
    }

    fn initial_tau(&self) -> f64 {
        match *self {
            StepSchedule::Constant { tau, .. } => tau,
            StepSchedule::Accelerated { tau0, .. } => tau0,
            StepSchedule::LinearRate { tau, .. } => tau,
        }
    }
}

/// Iterator over the triples of a [`StepSchedule`].
#[derive(Debug, Clone)]
pub struct Triples {
    schedule: StepSchedule,
    tau: f64,
}

impl Iterator for Triples {
    type Item = StepTriple;

    fn next(&mut self) -> Option<StepTriple> {
        let t = match self.schedule {
            StepSchedule::Constant { tau, sigma } => StepTriple { tau, sigma, omega: 1.0 },
            StepSchedule::Accelerated { sigma, gamma_tilde_g, .. } => {
                let tau = self.tau;
                self.tau = tau / (1.0 + 2.0 * gamma_tilde_g * tau);
                StepTriple { tau, sigma, omega: 1.0 }
            }
            StepSchedule::LinearRate { tau, gamma_tilde_g, gamma_tilde_fstar } => StepTriple {
                tau,
                sigma: tau * gamma_tilde_g / gamma_tilde_fstar,
                omega: 1.0 / (1.0 + 2.0 * gamma_tilde_g * tau),
            },
        };
        Some(t)
    }
}

/// Constants of the local regularity assumptions on `G`, `F*` and `K`.
///
/// `gamma_g`/`gamma_fstar` are strong-subregularity moduli; the `gamma_tilde_*`
/// are the acceleration factors; `l_*` are Lipschitz moduli of the gradients of
/// `K`; `r_k` bounds the mixed second derivative; `theta_*`, `lambda_*`,
/// `xi_*` are the three-point condition constants; `rho_*` are the radii of
/// the neighbourhood they hold on.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConstants {
    pub r_k: f64,
    pub l_x_at_yhat: f64,
    pub l_y_at_xhat: f64,
    pub l_yx: f64,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub xi_x: f64,
    pub xi_y: f64,
    pub theta_x: f64,
    pub theta_y: f64,
    pub gamma_g: f64,
    pub gamma_fstar: f64,
    pub gamma_tilde_g: f64,
    pub gamma_tilde_fstar: f64,
    pub rho_x: f64,
    pub rho_y: f64,
    pub delta: f64,
    pub mu: f64,
}

impl Default for ProblemConstants {
    fn default() -> Self {
        ProblemConstants {
            r_k: 1.0,
            l_x_at_yhat: 0.0,
            l_y_at_xhat: 0.0,
            l_yx: 0.0,
            lambda_x: 0.0,
            lambda_y: 0.0,
            xi_x: 0.0,
            xi_y: 0.0,
            theta_x: 1.0,
            theta_y: 1.0,
            gamma_g: 0.0,
            gamma_fstar: 0.0,
            gamma_tilde_g: 0.0,
            gamma_tilde_fstar: 0.0,
            rho_x: 0.0,
            rho_y: 0.0,
            delta: 0.5,
            mu: 0.5,
        }
    }
}

impl ProblemConstants {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.delta && self.delta <= self.mu && self.mu < 1.0) {
            return Err(Error::precondition(format!(
                "need 0 < delta <= mu < 1, got delta={} mu={}",
                self.delta, self.mu
            )));
        }
        Ok(())
    }

    /// One `name = value` line per constant.
    pub fn ledger(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("R_K", self.r_k),
            ("L_x(yhat)", self.l_x_at_yhat),
            ("L_y(xhat)", self.l_y_at_xhat),
            ("L_yx", self.l_yx),
            ("lambda_x", self.lambda_x),
            ("lambda_y", self.lambda_y),
            ("xi_x", self.xi_x),
            ("xi_y", self.xi_y),
            ("theta_x", self.theta_x),
            ("theta_y", self.theta_y),
            ("gamma_G", self.gamma_g),
            ("gamma_F*", self.gamma_fstar),
            ("gamma_tilde_G", self.gamma_tilde_g),
            ("gamma_tilde_F*", self.gamma_tilde_fstar),
            ("rho_x", self.rho_x),
            ("rho_y", self.rho_y),
            ("delta", self.delta),
            ("mu", self.mu),
        ]
    }
}

/// `a / b`, or `+∞` when `b` vanishes.
fn ratio_or_inf(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        f64::INFINITY
    } else {
        a / b
    }
}

/// `δ / (λ_x + 3 L_yx ρ_y)`, shared by all three rules.
fn primal_locality_bound(c: &ProblemConstants) -> f64 {
    ratio_or_inf(c.delta, c.lambda_x + 3.0 * c.l_yx * c.rho_y)
}

/// Bounds for [`StepSchedule::Constant`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantBound {
    /// Exclusive upper bound on `τ`.
    pub tau_sup: f64,
    r_k: f64,
    mu: f64,
    lambda_y: f64,
}

impl ConstantBound {
    /// Largest admissible `σ` for a given `τ` (inclusive).
    pub fn sigma_max(&self, tau: f64) -> f64 {
        ratio_or_inf(1.0, self.r_k * self.r_k * tau / (1.0 - self.mu) + self.lambda_y)
    }
}

pub fn bound_constant(c: &ProblemConstants) -> ConstantBound {
    ConstantBound { tau_sup: primal_locality_bound(c), r_k: c.r_k, mu: c.mu, lambda_y: c.lambda_y }
}

/// Bounds for [`StepSchedule::Accelerated`]; both are inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceleratedBound {
    pub tau0_sup: f64,
    /// Upper bound on the product `σ τ₀`.
    pub sigma_tau0_max: f64,
}

pub fn bound_accelerated(c: &ProblemConstants) -> Result<AcceleratedBound> {
    if !(c.r_k > 0.0) {
        return Err(Error::precondition(format!("R_K must be positive, got {}", c.r_k)));
    }
    Ok(AcceleratedBound { tau0_sup: primal_locality_bound(c), sigma_tau0_max: (1.0 - c.mu) / (c.r_k * c.r_k) })
}

/// Positive root of `(R_K²/(1−μ) + 2γ̃_G λ_y) τ² + λ_y τ − γ̃_F*/γ̃_G = 0`,
/// written in the cancellation-free form.
fn linear_rate_root(r_k_sq: f64, mu: f64, lambda_y: f64, gt_g: f64, gt_f: f64) -> f64 {
    let c = gt_f / gt_g;
    let a = r_k_sq / (1.0 - mu) + 2.0 * gt_g * lambda_y;
    2.0 * c / (lambda_y + (lambda_y * lambda_y + 4.0 * c * a).sqrt())
}

/// Largest admissible `τ` for [`StepSchedule::LinearRate`] (inclusive).
pub fn bound_linear(c: &ProblemConstants) -> Result<f64> {
    if !(c.gamma_tilde_g > 0.0 && c.gamma_tilde_fstar > 0.0) {
        return Err(Error::precondition(format!(
            "linear rate needs gamma_tilde_G, gamma_tilde_F* > 0, got {}, {}",
            c.gamma_tilde_g, c.gamma_tilde_fstar
        )));
    }
    if !(c.r_k > 0.0) {
        return Err(Error::precondition(format!("R_K must be positive, got {}", c.r_k)));
    }
    let root = linear_rate_root(c.r_k * c.r_k, c.mu, c.lambda_y, c.gamma_tilde_g, c.gamma_tilde_fstar);
    Ok(primal_locality_bound(c).min(root))
}

/// Parameters of the Potts step-length calculator.
#[derive(Debug, Clone, PartialEq)]
pub struct PottsStepParams {
    pub alpha: f64,
    pub gamma: f64,
    pub norm: PottsNorm,
    /// Expected largest jump of the solution between neighbouring pixels.
    pub dynamic_range: f64,
    /// Over-approximation of `γ` used to bound the dual solution.
    pub gamma_bar: f64,
    pub delta: f64,
    pub mu: f64,
    pub gamma_tilde_g: f64,
    pub gamma_tilde_fstar: f64,
    /// Upper bound on the norm of the discrete gradient.
    pub l: f64,
}

impl PottsStepParams {
    /// Defaults for unit grid spacing: `γ̃_G = 1/(10α)`, `γ̃_F* = γ/100`,
    /// `δ = μ = 0.1`, `γ̄ = 10`, `L = √8`, unit dynamic range.
    pub fn new(alpha: f64, gamma: f64, norm: PottsNorm) -> Self {
        PottsStepParams {
            alpha,
            gamma,
            norm,
            dynamic_range: 1.0,
            gamma_bar: 10.0,
            delta: 0.1,
            mu: 0.1,
            gamma_tilde_g: 1.0 / (10.0 * alpha),
            gamma_tilde_fstar: gamma / 100.0,
            l: 8f64.sqrt(),
        }
    }
}

/// Intermediate quantities of [`potts_steps`], reported for the ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct PottsStepDerivation {
    pub m_x: f64,
    pub m_y: f64,
    pub tau_locality: f64,
    pub tau_dual: f64,
}

/// Linear-rate step lengths for the Huber–Potts problem.
///
/// Selects the smallest feasible `λ_x`, `λ_y` (inflated by [`POTTS_MARGIN`]),
/// takes `R_K = 2L`, and shrinks the admissible `τ` by the same margin.
pub fn potts_steps(p: &PottsStepParams) -> Result<(StepTriple, ProblemConstants, PottsStepDerivation)> {
    positive("alpha", p.alpha)?;
    positive("dynamic_range", p.dynamic_range)?;
    positive("gamma_bar", p.gamma_bar)?;
    positive("L", p.l)?;
    if !(p.gamma_tilde_g > 0.0 && p.gamma_tilde_g < 1.0 / p.alpha) {
        return Err(Error::precondition(format!(
            "gamma_tilde_G must lie in (0, 1/alpha) = (0, {}), got {}",
            1.0 / p.alpha,
            p.gamma_tilde_g
        )));
    }
    if !(p.gamma_tilde_fstar > 0.0 && p.gamma_tilde_fstar < p.gamma) {
        return Err(Error::precondition(format!(
            "gamma_tilde_F* must lie in (0, gamma) = (0, {}), got {}",
            p.gamma, p.gamma_tilde_fstar
        )));
    }
    if !(0.0 < p.delta && p.delta <= p.mu && p.mu < 1.0) {
        return Err(Error::precondition(format!("need 0 < delta <= mu < 1, got delta={} mu={}", p.delta, p.mu)));
    }

    let l = p.l;
    let m_x = match p.norm {
        PottsNorm::Anisotropic => p.dynamic_range,
        PottsNorm::Isotropic => std::f64::consts::SQRT_2 * p.dynamic_range,
    };
    let m_y = 2.0 * m_x / (2.0 * m_x * m_x + p.gamma_bar);
    let xi_x = 1.0 / p.alpha - p.gamma_tilde_g;
    let xi_y = p.gamma - p.gamma_tilde_fstar;

    let jump = 2.0 * l * m_y * m_y;
    if xi_x <= jump {
        return Err(Error::Infeasible {
            inequality: "primal three-point bound xi_x > 2 L m_y^2",
            detail: format!("xi_x = {xi_x}, 2 L m_y^2 = {jump}"),
        });
    }
    let lambda_x = 2.0 * l * l * m_y.powi(4) / (xi_x - jump) * (1.0 + POTTS_MARGIN);
    let lambda_y = m_x * m_x * (1.0 + POTTS_MARGIN);

    let tau_locality = ratio_or_inf(p.delta, lambda_x);
    let tau_dual = linear_rate_root(4.0 * l * l, p.mu, lambda_y, p.gamma_tilde_g, p.gamma_tilde_fstar);
    let tau = (1.0 - POTTS_MARGIN) * tau_locality.min(tau_dual);
    let triple =
        StepTriple::new(tau, tau * p.gamma_tilde_g / p.gamma_tilde_fstar, 1.0 / (1.0 + 2.0 * p.gamma_tilde_g * tau))?;

    // Radii are taken to zero; the three-point constants are only known to
    // exist, so theta carries the margin as a positive placeholder.
    let constants = ProblemConstants {
        r_k: 2.0 * l,
        l_x_at_yhat: 2.0 * l * l * m_y * m_y,
        l_y_at_xhat: 2.0 * m_x * m_x,
        l_yx: 4.0 * l * m_y,
        lambda_x,
        lambda_y,
        xi_x,
        xi_y,
        theta_x: POTTS_MARGIN,
        theta_y: POTTS_MARGIN,
        gamma_g: 1.0 / p.alpha,
        gamma_fstar: p.gamma,
        gamma_tilde_g: p.gamma_tilde_g,
        gamma_tilde_fstar: p.gamma_tilde_fstar,
        rho_x: 0.0,
        rho_y: 0.0,
        delta: p.delta,
        mu: p.mu,
    };
    Ok((triple, constants, PottsStepDerivation { m_x, m_y, tau_locality, tau_dual }))
}

/// Whether `(λ_x, λ_y)` satisfy the strict Potts inequalities for the given
/// `m̂_x`, `m̂_y`, `ξ_x` and `L`.
pub fn potts_inequalities_hold(c: &ProblemConstants, m_x: f64, m_y: f64, l: f64) -> bool {
    let primal = c.xi_x * c.lambda_x > 2.0 * l * l * (c.lambda_x / l + m_y * m_y) * m_y * m_y;
    primal && c.lambda_y > m_x * m_x
}

/// Published linear-rate step lengths for the Potts experiments, stored verbatim.
pub fn published_potts_preset(norm: PottsNorm) -> StepTriple {
    match norm {
        PottsNorm::Anisotropic => StepTriple { tau: 1.04085e-3, sigma: 1.04085, omega: 0.99480 },
        PottsNorm::Isotropic => StepTriple { tau: 5.51922e-4, sigma: 0.551922, omega: 0.99724 },
    }
}

/// `(θ, λ)` together with a warning when the result is degenerate.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaLambda {
    pub theta: f64,
    pub lambda: f64,
    pub warning: Option<String>,
}

/// Three-point constants from a primal second-order growth modulus `γ_x`:
/// `θ_x = 2(γ_x − α)/L_yx`, `λ_x = L_x(ŷ)²/(2α)` for `α ∈ (0, γ_x]`.
pub fn derive_theta_lambda_primal(gamma_x: f64, alpha: f64, l_x_at_yhat: f64, l_yx: f64) -> Result<ThetaLambda> {
    if !(alpha > 0.0 && alpha <= gamma_x) {
        return Err(Error::precondition(format!("need 0 < alpha <= gamma_x, got alpha={alpha} gamma_x={gamma_x}")));
    }
    if l_yx < 0.0 {
        return Err(Error::precondition("L_yx must be non-negative"));
    }
    let slack = gamma_x - alpha;
    let theta = if slack == 0.0 { 0.0 } else { ratio_or_inf(2.0 * slack, l_yx) };
    Ok(ThetaLambda {
        theta,
        lambda: l_x_at_yhat * l_x_at_yhat / (2.0 * alpha),
        warning: (theta == 0.0).then(|| "theta_x = 0: alpha = gamma_x leaves no slack, theta must be positive".into()),
    })
}

/// Dual counterpart: `θ_y = 2(γ_y − α₁)/((1 + α₂) L_xy)`,
/// `λ_y = L̄_y²/(2α₁) + (1 + 1/α₂) L_xy θ_y`.
pub fn derive_theta_lambda_dual(
    gamma_y: f64,
    alpha1: f64,
    alpha2: f64,
    l_y_bar: f64,
    l_xy: f64,
) -> Result<ThetaLambda> {
    if !(alpha1 > 0.0 && alpha1 <= gamma_y) {
        return Err(Error::precondition(format!("need 0 < alpha1 <= gamma_y, got alpha1={alpha1} gamma_y={gamma_y}")));
    }
    if !(alpha2 > 0.0) {
        return Err(Error::precondition(format!("alpha2 must be positive, got {alpha2}")));
    }
    if l_xy < 0.0 {
        return Err(Error::precondition("L_xy must be non-negative"));
    }
    let slack = gamma_y - alpha1;
    let theta = if slack == 0.0 { 0.0 } else { ratio_or_inf(2.0 * slack, (1.0 + alpha2) * l_xy) };
    // L_xy θ_y stays finite when L_xy = 0.
    let l_theta = 2.0 * slack / (1.0 + alpha2);
    Ok(ThetaLambda {
        theta,
        lambda: l_y_bar * l_y_bar / (2.0 * alpha1) + (1.0 + 1.0 / alpha2) * l_theta,
        warning: (theta == 0.0).then(|| "theta_y = 0: alpha1 = gamma_y leaves no slack, theta must be positive".into()),
    })
}

/// One line of a checker report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    /// Worst relative slack; negative when violated.
    pub margin: f64,
    pub detail: String,
}

impl fmt::Display for CheckItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "pass" } else { "FAIL" };
        write!(f, "{},{},{:e}", self.name, status, self.margin)?;
        if !self.detail.is_empty() {
            write!(f, ",{}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }

    pub(crate) fn push(&mut self, name: &str, margin: f64, detail: String) {
        self.items.push(CheckItem { name: name.to_string(), passed: margin >= -CHECK_TOL, margin, detail });
    }

    pub(crate) fn push_exact(&mut self, name: &str, residual: f64, detail: String) {
        self.items.push(CheckItem { name: name.to_string(), passed: residual <= CHECK_TOL, margin: -residual, detail });
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for item in &self.items {
            writeln!(f, "{item}")?;
        }
        Ok(())
    }
}

/// Relative slack of `value ≤ limit`, measured against the limit.
fn slack(value: f64, limit: f64) -> f64 {
    if limit == f64::INFINITY {
        f64::INFINITY
    } else if limit == 0.0 {
        -value
    } else {
        (limit - value) / limit.abs()
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Testing parameters attached to iteration `i`: `φ_i`, `ψ_{i+1}`, `η_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestingState {
    pub phi: f64,
    pub psi: f64,
    pub eta: f64,
}

/// Builds the testing sequences from `ψ₁ = 1`, `φ₀ = σ₁ω₀/τ₀`,
/// `φ_{i+1} = φ_i(1 + 2τ_iγ̃_G)`, `ψ_{i+2} = ψ_{i+1}(1 + 2σ_{i+1}γ̃_F*)`,
/// `η_i = φ_iτ_i`.
pub fn testing_sequence(c: &ProblemConstants, triples: &[StepTriple]) -> Vec<TestingState> {
    let Some(first) = triples.first() else {
        return Vec::new();
    };
    let mut phi = first.sigma * first.omega / first.tau;
    let mut psi = 1.0;
    triples
        .iter()
        .map(|t| {
            let s = TestingState { phi, psi, eta: phi * t.tau };
            phi *= 1.0 + 2.0 * t.tau * c.gamma_tilde_g;
            psi *= 1.0 + 2.0 * t.sigma * c.gamma_tilde_fstar;
            s
        })
        .collect()
}

/// Numerical check of the testing conditions on a finite prefix of step triples.
///
/// `omega_bounds` are the `(ω_low, ω_high)` used in the three-point radius
/// conditions. Failures are reported, never raised.
pub fn check_48(c: &ProblemConstants, triples: &[StepTriple], omega_bounds: (f64, f64)) -> CheckReport {
    let mut report = CheckReport::default();
    if triples.is_empty() {
        report.push("triples-nonempty", -1.0, "no step triples supplied".into());
        return report;
    }
    let (w_lo, w_hi) = omega_bounds;
    let seq = testing_sequence(c, triples);

    // ω_i = η_i/η_{i+1} with η_{i+1} = ψ_{i+1}σ_{i+1}, and φ_iτ_i = ψ_iσ_i.
    let mut omega_res: f64 = 0.0;
    let mut eta_res: f64 = 0.0;
    for (i, (s, t)) in seq.iter().zip(triples).enumerate() {
        let eta_next = s.psi * t.sigma;
        omega_res = omega_res.max(rel_diff(t.omega, s.eta / eta_next));
        if i > 0 {
            let prev = &triples[i - 1];
            let psi_i = seq[i - 1].psi;
            eta_res = eta_res.max(rel_diff(s.eta, psi_i * prev.sigma));
        }
    }
    report.push_exact("coupling-omega", omega_res, "omega_i = eta_i / eta_{i+1}".into());
    report.push_exact("coupling-eta", eta_res, "phi_i tau_i = psi_i sigma_i".into());

    let mut w_margin = f64::INFINITY;
    for t in triples {
        w_margin = w_margin.min(slack(w_lo, t.omega)).min(slack(t.omega, w_hi));
    }
    if !(w_lo > 0.0) {
        w_margin = w_margin.min(-1.0);
    }
    report.push("omega-range", w_margin, format!("{w_lo} <= omega_i <= {w_hi}"));

    let mut sigma_margin = f64::INFINITY;
    let mut tau_margin = f64::INFINITY;
    for t in triples {
        let load = t.sigma * (c.r_k * c.r_k * t.tau / (1.0 - c.mu) + c.lambda_y / t.omega);
        sigma_margin = sigma_margin.min(1.0 - load);
        let limit = ratio_or_inf(c.delta, c.lambda_x + c.l_yx * (t.omega + 2.0) * c.rho_y);
        tau_margin = tau_margin.min(slack(t.tau, limit));
    }
    report.push("dual-step", sigma_margin, "sigma_i (R_K^2 tau_i/(1-mu) + lambda_y/omega_i) <= 1".into());
    report.push("primal-step", tau_margin, "tau_i <= delta/(lambda_x + L_yx (omega_i+2) rho_y)".into());

    report.push("primal-growth", slack(c.gamma_tilde_g + c.xi_x, c.gamma_g), "gamma_G >= gamma_tilde_G + xi_x".into());
    report.push("primal-radius", slack(w_hi * c.rho_x, c.theta_y), "theta_y >= omega_high rho_x".into());
    report.push(
        "dual-growth",
        slack(c.gamma_tilde_fstar + c.xi_y, c.gamma_fstar),
        "gamma_F* >= gamma_tilde_F* + xi_y".into(),
    );
    report.push("dual-radius", slack(c.rho_y / w_lo, c.theta_x), "theta_x >= rho_y / omega_low".into());
    report
}

/// Radii and budgets of the local-iterate containment argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalityBudget {
    pub r_max: f64,
    pub nu: f64,
    pub r_y: f64,
    pub delta_x: f64,
    pub delta_y: f64,
}

impl LocalityBudget {
    /// Computes `ν = σ₁ω₀/τ₀` and the weighted start distance
    /// `r_max = √(2/δ (‖x⁰ − x̂‖² + ‖y⁰ − ŷ‖²/ν))`.
    pub fn from_start(
        first: StepTriple,
        delta: f64,
        dist_x: f64,
        dist_y: f64,
        r_y: f64,
        delta_x: f64,
        delta_y: f64,
    ) -> Self {
        let nu = first.sigma * first.omega / first.tau;
        let r_max = (2.0 / delta * (dist_x * dist_x + dist_y * dist_y / nu)).sqrt();
        LocalityBudget { r_max, nu, r_y, delta_x, delta_y }
    }

    /// Smallest `r_y` the containment argument accepts.
    pub fn min_r_y(&self, delta: f64, mu: f64) -> f64 {
        if self.r_max == 0.0 {
            0.0
        } else if mu > delta {
            self.r_max * (self.nu * (1.0 - delta) * delta / (mu - delta)).sqrt()
        } else {
            f64::INFINITY
        }
    }
}

/// Advisory check that every step stays within the local-iterate budgets.
pub fn check_52(budget: &LocalityBudget, c: &ProblemConstants, triples: &[StepTriple]) -> CheckReport {
    let mut report = CheckReport::default();
    let b = budget;
    let tau_limit = ratio_or_inf(b.delta_x, 2.0 * c.r_k * b.r_y + 2.0 * c.l_x_at_yhat * b.r_max);
    let sigma_limit = ratio_or_inf(b.delta_y, c.l_y_at_xhat * b.r_y + c.r_k * (b.r_max + b.delta_x));
    let tau_margin = triples.iter().map(|t| slack(t.tau, tau_limit)).fold(f64::INFINITY, f64::min);
    let sigma_margin = triples.iter().map(|t| slack(t.sigma, sigma_limit)).fold(f64::INFINITY, f64::min);
    report.push("locality-primal-step", tau_margin, format!("tau_i <= {tau_limit:e}"));
    report.push("locality-dual-step", sigma_margin, format!("sigma_(i+1) <= {sigma_limit:e}"));

    let need = b.min_r_y(c.delta, c.mu);
    let premise = if need == f64::INFINITY { -1.0 } else { slack(need, b.r_y) };
    report.push("locality-radius-premise", premise, format!("r_y >= {need:e} (dual radius premise)"));
    report
}
