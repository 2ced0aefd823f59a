//! Iteration engine for the generalized primal-dual proximal splitting method.
//!
//! One iteration maps `(x, y)` to
//!
//! ```text
//! x⁺ = prox_{τG}(x − τ K_x(x, y))
//! x̄  = x⁺ + ω (x⁺ − x)
//! y⁺ = prox_{σF*}(y + σ K_y(x̄, y))
//! ```
//!
//! The dual gradient is always taken at the over-relaxed point `(x̄, y)`.

use crate::error::{Error, Result};
use crate::schedules::{StepSchedule, StepTriple};

/// A saddle-point problem `min_x max_y G(x) + K(x, y) − F*(y)` on flat vectors.
///
/// Implementors interpret the flat storage according to their own shapes. All
/// kernels are pure functions of their inputs.
pub trait SaddleProblem {
    fn primal_dim(&self) -> usize;
    fn dual_dim(&self) -> usize;

    /// In-place `x ← prox_{τG}(x)`.
    fn prox_primal(&self, tau: f64, x: &mut [f64]);

    /// In-place `y ← prox_{σF*}(y)`.
    fn prox_dual(&self, sigma: f64, y: &mut [f64]);

    /// Writes `K_x(x, y)` into `out`.
    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]);

    /// Writes `K_y(x, y)` into `out`.
    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]);

    /// The coupling value `K(x, y)`. Only oracles use it.
    fn value(&self, _x: &[f64], _y: &[f64]) -> Option<f64> {
        None
    }

    /// `G(x) + F(x)` or whatever the problem reports as its primal objective.
    fn primal_objective(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Quadrature weight of the inner product, `⟨a, b⟩ = w Σ aᵢbᵢ`.
    ///
    /// Gradients returned by [`grad_x`](Self::grad_x) and
    /// [`grad_y`](Self::grad_y) are Riesz representers in this inner product.
    fn inner_weight(&self) -> f64 {
        1.0
    }
}

impl<P: SaddleProblem + ?Sized> SaddleProblem for &P {
    fn primal_dim(&self) -> usize {
        (**self).primal_dim()
    }
    fn dual_dim(&self) -> usize {
        (**self).dual_dim()
    }
    fn prox_primal(&self, tau: f64, x: &mut [f64]) {
        (**self).prox_primal(tau, x)
    }
    fn prox_dual(&self, sigma: f64, y: &mut [f64]) {
        (**self).prox_dual(sigma, y)
    }
    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        (**self).grad_x(x, y, out)
    }
    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        (**self).grad_y(x, y, out)
    }
    fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        (**self).value(x, y)
    }
    fn primal_objective(&self, x: &[f64]) -> Option<f64> {
        (**self).primal_objective(x)
    }
    fn inner_weight(&self) -> f64 {
        (**self).inner_weight()
    }
}

/// Iterate pair plus the over-relaxed primal point of the last step.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub x_bar: Vec<f64>,
    pub iter: usize,
}

impl PrimalDualState {
    /// Starting point `(x⁰, y⁰)`; `x_bar` is initialized to `x⁰`.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let x_bar = x.clone();
        PrimalDualState { x, y, x_bar, iter: 0 }
    }

    pub fn check_dims<P: SaddleProblem + ?Sized>(&self, problem: &P) -> Result<()> {
        let (n, m) = (problem.primal_dim(), problem.dual_dim());
        if self.x.len() != n || self.x_bar.len() != n {
            return Err(Error::config(format!(
                "primal dimension mismatch: state has {} (x_bar {}), problem expects {n}",
                self.x.len(),
                self.x_bar.len()
            )));
        }
        if self.y.len() != m {
            return Err(Error::config(format!(
                "dual dimension mismatch: state has {}, problem expects {m}",
                self.y.len()
            )));
        }
        Ok(())
    }

    /// Weighted distance `‖(x, y) − (x', y')‖` in the problem's inner product.
    pub fn distance(&self, other: &PrimalDualState, weight: f64) -> f64 {
        (weight * (sq_dist(&self.x, &other.x) + sq_dist(&self.y, &other.y))).sqrt()
    }
}

/// Telemetry for one logged iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub tau: f64,
    pub sigma: f64,
    pub omega: f64,
    /// `‖u^{i+1} − u^i‖`.
    pub step_norm: f64,
    pub dist_to_ref: Option<f64>,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Stop once `step_norm ≤ step_tol`; zero disables the test.
    pub step_tol: f64,
    pub log_stride: usize,
    pub reference: Option<PrimalDualState>,
    /// Evaluate [`SaddleProblem::primal_objective`] on logged iterations.
    pub record_objective: bool,
}

impl SolveOptions {
    pub fn fixed(max_iters: usize) -> Self {
        SolveOptions { max_iters, step_tol: 0.0, log_stride: 1, reference: None, record_objective: false }
    }

    pub fn with_stride(mut self, log_stride: usize) -> Self {
        self.log_stride = log_stride;
        self
    }

    pub fn with_reference(mut self, reference: PrimalDualState) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_objective(mut self) -> Self {
        self.record_objective = true;
        self
    }

    pub fn with_step_tol(mut self, step_tol: f64) -> Self {
        self.step_tol = step_tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be at least 1"));
        }
        if self.log_stride == 0 {
            return Err(Error::config("log_stride must be at least 1"));
        }
        if !(self.step_tol >= 0.0) {
            return Err(Error::config("step_tol must be non-negative"));
        }
        Ok(())
    }
}

/// Scratch buffers reused across iterations.
struct Workspace {
    grad_x: Vec<f64>,
    grad_y: Vec<f64>,
    x_old: Vec<f64>,
    y_old: Vec<f64>,
}

impl Workspace {
    fn new(n: usize, m: usize) -> Self {
        Workspace { grad_x: vec![0.0; n], grad_y: vec![0.0; m], x_old: vec![0.0; n], y_old: vec![0.0; m] }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|t| t.is_finite())
}

/// Advances `state` by one iteration in place and returns the unweighted
/// squared step length `‖x⁺ − x‖² + ‖y⁺ − y‖²`.
fn advance<P: SaddleProblem + ?Sized>(
    problem: &P,
    triple: StepTriple,
    state: &mut PrimalDualState,
    ws: &mut Workspace,
) -> Result<f64> {
    let StepTriple { tau, sigma, omega } = triple;
    let iter = state.iter + 1;

    problem.grad_x(&state.x, &state.y, &mut ws.grad_x);
    ws.x_old.copy_from_slice(&state.x);
    for (x, g) in state.x.iter_mut().zip(&ws.grad_x) {
        *x -= tau * g;
    }
    problem.prox_primal(tau, &mut state.x);
    if !all_finite(&state.x) {
        return Err(Error::Divergence { iter, what: "primal iterate" });
    }

    for ((xb, xn), xo) in state.x_bar.iter_mut().zip(&state.x).zip(&ws.x_old) {
        *xb = xn + omega * (xn - xo);
    }

    problem.grad_y(&state.x_bar, &state.y, &mut ws.grad_y);
    ws.y_old.copy_from_slice(&state.y);
    for (y, g) in state.y.iter_mut().zip(&ws.grad_y) {
        *y += sigma * g;
    }
    problem.prox_dual(sigma, &mut state.y);
    if !all_finite(&state.y) {
        return Err(Error::Divergence { iter, what: "dual iterate" });
    }

    state.iter = iter;
    Ok(sq_dist(&state.x, &ws.x_old) + sq_dist(&state.y, &ws.y_old))
}

/// Performs exactly one iteration and returns the new state.
pub fn step<P: SaddleProblem + ?Sized>(
    problem: &P,
    triple: StepTriple,
    state: &PrimalDualState,
) -> Result<PrimalDualState> {
    triple.validate()?;
    state.check_dims(problem)?;
    let mut next = state.clone();
    let mut ws = Workspace::new(problem.primal_dim(), problem.dual_dim());
    advance(problem, triple, &mut next, &mut ws)?;
    Ok(next)
}

/// Runs the method with the step lengths produced by `schedule`.
pub fn solve<P: SaddleProblem + ?Sized>(
    problem: &P,
    schedule: &StepSchedule,
    opts: &SolveOptions,
    init: PrimalDualState,
) -> Result<(PrimalDualState, Vec<IterationRecord>)> {
    solve_with(problem, schedule.triples(), opts, init)
}

/// Runs the method with an arbitrary sequence of step triples.
///
/// The sequence must yield at least `opts.max_iters` triples.
pub fn solve_with<P, I>(
    problem: &P,
    triples: I,
    opts: &SolveOptions,
    init: PrimalDualState,
) -> Result<(PrimalDualState, Vec<IterationRecord>)>
where
    P: SaddleProblem + ?Sized,
    I: IntoIterator<Item = StepTriple>,
{
    opts.validate()?;
    init.check_dims(problem)?;
    if let Some(r) = &opts.reference {
        r.check_dims(problem)?;
    }

    let weight = problem.inner_weight();
    let mut state = init;
    let mut ws = Workspace::new(problem.primal_dim(), problem.dual_dim());
    let mut log = Vec::with_capacity(opts.max_iters / opts.log_stride + 1);
    let mut triples = triples.into_iter();

    for i in 0..opts.max_iters {
        let triple =
            triples.next().ok_or_else(|| Error::config(format!("step sequence exhausted after {i} iterations")))?;
        triple.validate()?;
        let step_norm = (weight * advance(problem, triple, &mut state, &mut ws)?).sqrt();

        let last = i + 1 == opts.max_iters;
        let converged = opts.step_tol > 0.0 && step_norm <= opts.step_tol;
        if (i + 1) % opts.log_stride == 0 || last || converged {
            log.push(IterationRecord {
                iter: state.iter,
                tau: triple.tau,
                sigma: triple.sigma,
                omega: triple.omega,
                step_norm,
                dist_to_ref: opts.reference.as_ref().map(|r| state.distance(r, weight)),
                objective: if opts.record_objective { problem.primal_objective(&state.x) } else { None },
            });
        }
        if converged {
            break;
        }
    }
    Ok((state, log))
}
