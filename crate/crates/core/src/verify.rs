//! Independent numerical oracles.
//!
//! * finite-difference checks of `K_x`, `K_y` against the coupling value;
//! * equivalence of the engine with a hand-written classical primal-dual loop
//!   when the coupling is bilinear;
//! * a randomized sampler for the three-point conditions of the scalar
//!   coupling `κ(x, y) = ρ(⟨x, y⟩)` with `ρ(t) = 2t − t²`, and constants
//!   computed for it;
//! * log-linear fitting of convergence rates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::engine::{step, PrimalDualState, SaddleProblem};
use crate::error::{Error, Result};
use crate::potts::{self, Image};
use crate::schedules::{ProblemConstants, StepTriple};

fn weighted_dot(w: f64, a: &[f64], b: &[f64]) -> f64 {
    w * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

/// Neumaier summation.
fn compensated_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for t in terms {
        let next = sum + t;
        comp += if sum.abs() >= t.abs() { (sum - next) + t } else { (t - next) + sum };
        sum = next;
    }
    sum + comp
}

fn unit_direction(rng: &mut ChaCha8Rng, len: usize, w: f64) -> Vec<f64> {
    let mut d: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    let nrm = weighted_dot(w, &d, &d).sqrt();
    d.iter_mut().for_each(|v| *v /= nrm);
    d
}

/// Largest relative mismatch between `⟨K_x, d⟩`, `⟨K_y, d⟩` and central
/// differences of the coupling value over `n_dirs` seeded unit directions.
///
/// Directions have unit norm, so each error is measured against the gradient
/// norm `‖g‖ ≥ |⟨g, d⟩|` (or the difference quotient, if larger).
pub fn fd_grad_check<P: SaddleProblem + ?Sized>(
    problem: &P,
    point: &PrimalDualState,
    h: f64,
    n_dirs: usize,
    seed: u64,
) -> Result<f64> {
    point.check_dims(problem)?;
    if !(h > 0.0) {
        return Err(Error::precondition(format!("difference step must be positive, got {h}")));
    }
    let (x, y) = (&point.x, &point.y);
    if problem.value(x, y).is_none() {
        return Err(Error::Unsupported("problem does not expose its coupling value"));
    }
    let value = |a: &[f64], b: &[f64]| problem.value(a, b).expect("checked above");
    let w = problem.inner_weight();
    let mut gx = vec![0.0; x.len()];
    let mut gy = vec![0.0; y.len()];
    problem.grad_x(x, y, &mut gx);
    problem.grad_y(x, y, &mut gy);
    let gx_norm = weighted_dot(w, &gx, &gx).sqrt();
    let gy_norm = weighted_dot(w, &gy, &gy).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifted =
        |base: &[f64], d: &[f64], s: f64| -> Vec<f64> { base.iter().zip(d).map(|(a, b)| a + s * b).collect() };
    let rel = |an: f64, fd: f64, g: f64| {
        let scale = an.abs().max(fd.abs()).max(g);
        if scale == 0.0 {
            0.0
        } else {
            (an - fd).abs() / scale
        }
    };
    // The analytic side uses the perturbation actually represented in floating point.
    let realized = |p: &[f64], m: &[f64]| -> Vec<f64> { p.iter().zip(m).map(|(a, b)| (a - b) / (2.0 * h)).collect() };
    let mut worst: f64 = 0.0;
    for _ in 0..n_dirs {
        let d = unit_direction(&mut rng, x.len(), w);
        let (xp, xm) = (shifted(x, &d, h), shifted(x, &d, -h));
        let fd = (value(&xp, y) - value(&xm, y)) / (2.0 * h);
        worst = worst.max(rel(weighted_dot(w, &gx, &realized(&xp, &xm)), fd, gx_norm));

        let d = unit_direction(&mut rng, y.len(), w);
        let (yp, ym) = (shifted(y, &d, h), shifted(y, &d, -h));
        let fd = (value(x, &yp) - value(x, &ym)) / (2.0 * h);
        worst = worst.max(rel(weighted_dot(w, &gy, &realized(&yp, &ym)), fd, gy_norm));
    }
    Ok(worst)
}

type LinearMap = Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type Prox = Box<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// `min_x max_y G(x) + ⟨Ax, y⟩ − F*(y)` with user-supplied `A`, `Aᵀ` and proxes.
pub struct Bilinear {
    pub primal_dim: usize,
    pub dual_dim: usize,
    pub apply: LinearMap,
    pub apply_t: LinearMap,
    pub prox_g: Prox,
    pub prox_fstar: Prox,
}

impl Bilinear {
    /// Huber-TV denoising: `A = D_h`, `G = ½‖x − f‖²`,
    /// `F* = (γ/2)‖y‖² + ι_{[−1,1]}(y)` componentwise.
    pub fn tv_huber(f: Image, gamma: f64, h: f64) -> Self {
        let (n1, n2) = (f.n1, f.n2);
        let data = f.values.clone();
        Bilinear {
            primal_dim: n1 * n2,
            dual_dim: 2 * n1 * n2,
            apply: Box::new(move |x, out| {
                let g = potts::dh(&Image { n1, n2, values: x.to_vec() }, h);
                out.copy_from_slice(&g.values);
            }),
            apply_t: Box::new(move |y, out| {
                let g = potts::dht(&potts::GradField { n1, n2, values: y.to_vec() }, h);
                out.copy_from_slice(&g.values);
            }),
            prox_g: Box::new(move |tau, x| {
                for (v, f) in x.iter_mut().zip(&data) {
                    *v = (*v + tau * f) / (1.0 + tau);
                }
            }),
            prox_fstar: Box::new(move |sigma, y| {
                for v in y.iter_mut() {
                    *v = (*v / (1.0 + sigma * gamma)).clamp(-1.0, 1.0);
                }
            }),
        }
    }
}

impl SaddleProblem for Bilinear {
    fn primal_dim(&self) -> usize {
        self.primal_dim
    }
    fn dual_dim(&self) -> usize {
        self.dual_dim
    }
    fn prox_primal(&self, tau: f64, x: &mut [f64]) {
        (self.prox_g)(tau, x)
    }
    fn prox_dual(&self, sigma: f64, y: &mut [f64]) {
        (self.prox_fstar)(sigma, y)
    }
    fn grad_x(&self, _x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.apply_t)(y, out)
    }
    fn grad_y(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        (self.apply)(x, out)
    }
    fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        let mut ax = vec![0.0; self.dual_dim];
        (self.apply)(x, &mut ax);
        Some(compensated_sum(ax.iter().zip(y).map(|(a, b)| a * b)))
    }
}

/// Classical primal-dual loop for a bilinear coupling, written out directly.
pub fn classical_pdps(
    problem: &Bilinear,
    triple: StepTriple,
    n_iters: usize,
    x0: &[f64],
    y0: &[f64],
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let StepTriple { tau, sigma, omega } = triple;
    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut aty = vec![0.0; x.len()];
    let mut ax = vec![0.0; y.len()];
    let mut out = Vec::with_capacity(n_iters);
    for _ in 0..n_iters {
        (problem.apply_t)(&y, &mut aty);
        let mut x_new: Vec<f64> = x.iter().zip(&aty).map(|(a, b)| a - tau * b).collect();
        (problem.prox_g)(tau, &mut x_new);
        let x_bar: Vec<f64> = x_new.iter().zip(&x).map(|(n, o)| n + omega * (n - o)).collect();
        (problem.apply)(&x_bar, &mut ax);
        let mut y_new: Vec<f64> = y.iter().zip(&ax).map(|(a, b)| a + sigma * b).collect();
        (problem.prox_fstar)(sigma, &mut y_new);
        x = x_new;
        y = y_new;
        out.push((x.clone(), y.clone()));
    }
    out
}

/// Largest relative difference between engine iterates and [`classical_pdps`].
pub fn bilinear_reduction_check(
    problem: &Bilinear,
    triple: StepTriple,
    n_iters: usize,
    init: &PrimalDualState,
) -> Result<f64> {
    let reference = classical_pdps(problem, triple, n_iters, &init.x, &init.y);
    let mut state = init.clone();
    let mut worst: f64 = 0.0;
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    for (rx, ry) in &reference {
        state = step(problem, triple, &state)?;
        for (a, b) in [(&state.x, rx), (&state.y, ry)] {
            let diff = a.iter().zip(b.iter()).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            let scale = max_abs(b);
            worst = worst.max(if scale == 0.0 { diff } else { diff / scale });
        }
    }
    Ok(worst)
}

/// Value and derivatives of `κ(x, y) = ρ(⟨x, y⟩)` on small vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaSmall {
    pub val: f64,
    pub gx: DVector<f64>,
    pub gy: DVector<f64>,
    /// `κ_yx = 2((1 − ⟨x, y⟩)I − x ⊗ y)`.
    pub gyx: DMatrix<f64>,
}

pub fn kappa_small(x: &DVector<f64>, y: &DVector<f64>) -> KappaSmall {
    let s = x.dot(y);
    let m = x.len();
    KappaSmall {
        val: 2.0 * s - s * s,
        gx: y * (2.0 * (1.0 - s)),
        gy: x * (2.0 * (1.0 - s)),
        gyx: (DMatrix::identity(m, m) * (1.0 - s) - x * y.transpose()) * 2.0,
    }
}

/// `κ_xy(x, y) = 2((1 − ⟨x, y⟩)I − y ⊗ x)`.
pub fn kappa_small_xy(x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
    let m = x.len();
    (DMatrix::identity(m, m) * (1.0 - x.dot(y)) - y * x.transpose()) * 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C2Check {
    pub ok: bool,
    pub eig_min: f64,
    pub eig_max: f64,
}

/// Eigenvalue range of the symmetric part of `⟨x̂, ŷ⟩I + x̂ ⊗ ŷ`, and whether
/// it lies in `[0, 2]`.
pub fn c2_check(x_hat: &DVector<f64>, y_hat: &DVector<f64>) -> C2Check {
    let m = x_hat.len();
    let mat = DMatrix::identity(m, m) * x_hat.dot(y_hat) + x_hat * y_hat.transpose();
    let sym = (&mat + mat.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let eig_min = eig.min();
    let eig_max = eig.max();
    let tol = 1e-12;
    C2Check { ok: eig_min >= -tol && eig_max <= 2.0 + tol, eig_min, eig_max }
}

/// Base point and neighbourhood radii for the three-point sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaPoint {
    pub x_hat: DVector<f64>,
    pub y_hat: DVector<f64>,
    pub rho_x: f64,
    pub rho_y: f64,
}

/// Three-point constants for the scalar coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaConstants {
    pub xi_x: f64,
    pub xi_y: f64,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub theta_x: f64,
    pub theta_y: f64,
    pub l_yx: f64,
}

impl KappaConstants {
    /// `L_x(y) = 2|y|²`.
    pub fn l_x_of(y: &DVector<f64>) -> f64 {
        2.0 * y.norm_squared()
    }

    /// `L_y(x) = 2|x|²`.
    pub fn l_y_of(x: &DVector<f64>) -> f64 {
        2.0 * x.norm_squared()
    }

    /// Smallest admissible `λ_x`, `λ_y` inflated by `1 + margin`, and the
    /// largest `θ_x`, `θ_y` those leave on the radii of `point`.
    ///
    /// `θ` may come out non-positive when the radii are too large.
    pub fn minimal(point: &KappaPoint, xi_x: f64, xi_y: f64, margin: f64) -> Result<Self> {
        let ny2 = point.y_hat.norm_squared();
        let nx = point.x_hat.norm();
        if !(xi_x > 2.0 * ny2) {
            return Err(Error::Infeasible {
                inequality: "lambda_x xi_x > 2 (lambda_x + |y_hat|^2) |y_hat|^2",
                detail: format!("no lambda_x works: xi_x = {xi_x} <= 2|y_hat|^2 = {}", 2.0 * ny2),
            });
        }
        if !(xi_y > 0.0) {
            return Err(Error::Infeasible { inequality: "xi_y > 0", detail: format!("xi_y = {xi_y}") });
        }
        if !(margin > 0.0) {
            return Err(Error::precondition(format!("margin must be positive, got {margin}")));
        }
        let lambda_x = if ny2 > 0.0 { 2.0 * ny2 * ny2 / (xi_x - 2.0 * ny2) * (1.0 + margin) } else { margin };
        let lambda_y = if nx > 0.0 { nx * nx * (1.0 + margin) } else { margin };
        let mut c = KappaConstants {
            xi_x,
            xi_y,
            lambda_x,
            lambda_y,
            theta_x: 0.0,
            theta_y: 0.0,
            l_yx: 4.0 * (ny2.sqrt() + point.rho_y),
        };
        c.fit_thetas(point);
        Ok(c)
    }

    /// Recomputes `θ_x`, `θ_y` for the radii of `point`.
    pub fn fit_thetas(&mut self, point: &KappaPoint) {
        let ny = point.y_hat.norm();
        let ny2 = ny * ny;
        let curvature = if ny2 == 0.0 { 0.0 } else { 2.0 * (1.0 + ny2 / self.lambda_x) * ny2 };
        self.theta_x = (self.xi_x - curvature) / (2.0 * (ny + point.rho_y));
        let r = point.x_hat.norm() + point.rho_x;
        let from_lambda = (self.lambda_y - r * r) / (12.0 * r);
        let from_xi = (self.xi_y - 2.0 * point.rho_x * (2.0 * point.x_hat.norm() + point.rho_x)) / (3.0 * r);
        self.theta_y = from_lambda.min(from_xi);
        self.l_yx = 4.0 * (ny + point.rho_y);
    }

    fn validate(&self, point: &KappaPoint) -> Result<()> {
        let ny2 = point.y_hat.norm_squared();
        let nx2 = point.x_hat.norm_squared();
        if !(self.lambda_x * self.xi_x > 2.0 * (self.lambda_x + ny2) * ny2) {
            return Err(Error::Infeasible {
                inequality: "lambda_x xi_x > 2 (lambda_x + |y_hat|^2) |y_hat|^2",
                detail: format!("lambda_x = {}, xi_x = {}, |y_hat|^2 = {ny2}", self.lambda_x, self.xi_x),
            });
        }
        if !(self.xi_y > 0.0) {
            return Err(Error::Infeasible { inequality: "xi_y > 0", detail: format!("xi_y = {}", self.xi_y) });
        }
        if !(self.lambda_y > nx2) {
            return Err(Error::Infeasible {
                inequality: "lambda_y > |x_hat|^2",
                detail: format!("lambda_y = {}, |x_hat|^2 = {nx2}", self.lambda_y),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreePointReport {
    pub samples: usize,
    /// Violations of the primal inequality.
    pub violations_x: usize,
    /// Violations of the dual inequality.
    pub violations_y: usize,
    /// Smallest `lhs − rhs`, relative to the magnitudes of the unreduced operands.
    pub worst_margin: f64,
}

impl ThreePointReport {
    pub fn violations(&self) -> usize {
        self.violations_x + self.violations_y
    }
}

fn sample_ball(rng: &mut ChaCha8Rng, center: &DVector<f64>, radius: f64) -> DVector<f64> {
    let m = center.len();
    loop {
        let v = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        if v.norm_squared() <= 1.0 {
            return center + v * radius;
        }
    }
}

/// Evaluates both three-point inequalities at `n_samples` tuples
/// `(x, x′, y, y′)` drawn uniformly from `B(x̂, ρ_x)² × B(ŷ, ρ_y)²`.
pub fn three_point_sample(
    point: &KappaPoint,
    consts: &KappaConstants,
    n_samples: usize,
    seed: u64,
) -> Result<ThreePointReport> {
    let c2 = c2_check(&point.x_hat, &point.y_hat);
    if !c2.ok {
        return Err(Error::precondition(format!(
            "base point fails the curvature bound: eigenvalues in [{}, {}] not within [0, 2]",
            c2.eig_min, c2.eig_max
        )));
    }
    if point.x_hat.len() != point.y_hat.len() {
        return Err(Error::config("x_hat and y_hat must have the same length"));
    }
    consts.validate(point)?;
    let (xh, yh) = (&point.x_hat, &point.y_hat);
    let base = kappa_small(xh, yh);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report =
        ThreePointReport { samples: n_samples, violations_x: 0, violations_y: 0, worst_margin: f64::INFINITY };
    let tol = 1e-12;
    for _ in 0..n_samples {
        let x = sample_ball(&mut rng, xh, point.rho_x);
        let xp = sample_ball(&mut rng, xh, point.rho_x);
        let y = sample_ball(&mut rng, yh, point.rho_y);
        let yp = sample_ball(&mut rng, yh, point.rho_y);

        // Primal: ⟨κ_x(x′,ŷ) − κ_x(x̂,ŷ), x − x̂⟩ + ξ_x|x − x̂|²
        //   ≥ θ_x|κ_y(x̂,y) − κ_y(x,y) − κ_yx(x,y)(x̂ − x)| − (λ_x/2)|x − x′|².
        let at_xp = kappa_small(&xp, yh);
        let at_xy = kappa_small(&x, &y);
        let at_xhy = kappa_small(xh, &y);
        let e = &x - xh;
        let lin = (&at_xp.gx - &base.gx).dot(&e);
        let quad = consts.xi_x * e.norm_squared();
        let rem = (&at_xhy.gy - &at_xy.gy - &at_xy.gyx * (xh - &x)).norm();
        let prox = 0.5 * consts.lambda_x * (&x - &xp).norm_squared();
        let lhs = lin + quad + prox;
        let rhs = consts.theta_x * rem;
        let lin_scale = (at_xp.gx.norm() + base.gx.norm()) * e.norm();
        let rem_scale = at_xhy.gy.norm() + at_xy.gy.norm() + at_xy.gyx.norm() * e.norm();
        let scale = lin_scale + quad + prox + consts.theta_x.abs() * rem_scale;
        let margin = if scale == 0.0 { 0.0 } else { (lhs - rhs) / scale };
        report.worst_margin = report.worst_margin.min(margin);
        if margin < -tol {
            report.violations_x += 1;
        }

        // Dual: ⟨κ_y(x,y) − κ_y(x,y′) + κ_y(x̂,ŷ) − κ_y(x̂,y), y − ŷ⟩ + ξ_y|y − ŷ|²
        //   ≥ θ_y|κ_x(x′,ŷ) − κ_x(x′,y′) − κ_xy(x′,y′)(ŷ − y′)| − (λ_y/2)|y − y′|².
        let at_xyp = kappa_small(&x, &yp);
        let at_xpyp = kappa_small(&xp, &yp);
        let d = &y - yh;
        let lin = (&at_xy.gy - &at_xyp.gy + &base.gy - &at_xhy.gy).dot(&d);
        let quad = consts.xi_y * d.norm_squared();
        let rem = (&at_xp.gx - &at_xpyp.gx - kappa_small_xy(&xp, &yp) * (yh - &yp)).norm();
        let prox = 0.5 * consts.lambda_y * (&y - &yp).norm_squared();
        let lhs = lin + quad + prox;
        let rhs = consts.theta_y * rem;
        let lin_scale = (at_xy.gy.norm() + at_xyp.gy.norm() + base.gy.norm() + at_xhy.gy.norm()) * d.norm();
        let rem_scale = at_xp.gx.norm() + at_xpyp.gx.norm() + kappa_small_xy(&xp, &yp).norm() * (yh - &yp).norm();
        let scale = lin_scale + quad + prox + consts.theta_y.abs() * rem_scale;
        let margin = if scale == 0.0 { 0.0 } else { (lhs - rhs) / scale };
        report.worst_margin = report.worst_margin.min(margin);
        if margin < -tol {
            report.violations_y += 1;
        }
    }
    Ok(report)
}

/// Halves the radii from `1` until both `θ` are positive and `10⁴` samples pass.
pub fn shrink_rho(
    x_hat: DVector<f64>,
    y_hat: DVector<f64>,
    xi_x: f64,
    xi_y: f64,
    margin: f64,
    seed: u64,
) -> Result<(KappaPoint, KappaConstants)> {
    let mut point = KappaPoint { x_hat, y_hat, rho_x: 1.0, rho_y: 1.0 };
    let mut consts = KappaConstants::minimal(&point, xi_x, xi_y, margin)?;
    for _ in 0..80 {
        consts.fit_thetas(&point);
        if consts.theta_x > 0.0 && consts.theta_y > 0.0 {
            let report = three_point_sample(&point, &consts, 10_000, seed)?;
            if report.violations() == 0 {
                return Ok((point, consts));
            }
        }
        point.rho_x *= 0.5;
        point.rho_y *= 0.5;
    }
    Err(Error::precondition("no radius down to 2^-80 satisfies the three-point conditions"))
}

/// Transfers constants of `K̃` to `K(x, y) = K̃(Ax, y)` for `‖A‖ = a_norm`.
pub fn lift_through_operator(tilde: &ProblemConstants, a_norm: f64) -> ProblemConstants {
    let a2 = a_norm * a_norm;
    ProblemConstants {
        r_k: tilde.r_k * a_norm,
        l_x_at_yhat: tilde.l_x_at_yhat * a2,
        l_yx: tilde.l_yx * a2,
        xi_x: tilde.xi_x * a_norm,
        lambda_x: tilde.lambda_x * a_norm,
        theta_y: tilde.theta_y / a_norm,
        rho_x: tilde.rho_x / a_norm,
        ..tilde.clone()
    }
}

/// Least-squares fit of `log(error)` against iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub window: (usize, usize),
    /// Per-iteration factor `exp(slope)`.
    pub rate: f64,
    pub r_squared: f64,
}

/// Fits `errors[i]` for `i` in the inclusive `window`.
pub fn rate_fit(errors: &[f64], window: (usize, usize)) -> Result<RateFit> {
    let (start, end) = window;
    if start >= end || end >= errors.len() {
        return Err(Error::precondition(format!(
            "window ({start}, {end}) must be increasing and within {} samples",
            errors.len()
        )));
    }
    let pts = &errors[start..=end];
    if let Some(bad) = pts.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::precondition(format!("errors must be positive on the window, found {bad}")));
    }
    let n = pts.len() as f64;
    let xs = (start..=end).map(|i| i as f64);
    let ys: Vec<f64> = pts.iter().map(|e| e.ln()).collect();
    let mx = xs.clone().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let ss_res = syy - slope * sxy;
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(RateFit { window, rate: slope.exp(), r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nash::{manufacture, Grid, NashConfig, Profile};
    use crate::potts::{PottsConfig, PottsNorm, PottsProblem};
    use proptest::prelude::*;
    use rand::Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn random_image(seed: u64, n1: usize, n2: usize) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image { n1, n2, values: (0..n1 * n2).map(|_| rng.random_range(0.0..1.0)).collect() }
    }

    #[test]
    fn fd_check_bilinear_is_near_exact() {
        let p = Bilinear::tv_huber(random_image(1, 6, 5), 0.1, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let st = PrimalDualState::new((0..30).map(|_| rng.random()).collect(), (0..60).map(|_| rng.random()).collect());
        assert!(fd_grad_check(&p, &st, 1e-6, 50, 3).unwrap() <= 1e-9);
    }

    #[test]
    fn fd_check_potts() {
        for norm in [PottsNorm::Anisotropic, PottsNorm::Isotropic] {
            let f = random_image(4, 8, 8);
            let p = PottsProblem::new(PottsConfig::new(f.clone(), 1.0, 1e-3, norm)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let y: Vec<f64> = (0..128).map(|_| rng.random_range(-1.0..1.0)).collect();
            let st = PrimalDualState::new(f.values, y);
            assert!(fd_grad_check(&p, &st, 1e-5, 100, 6).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn fd_check_nash() {
        let m = manufacture(NashConfig::new(Grid::new(15).unwrap()), &Profile::smooth()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut r = || (0..450).map(|_| rng.random_range(-0.5..0.5)).collect::<Vec<f64>>();
        let st = PrimalDualState::new(r(), r());
        assert!(fd_grad_check(&m.problem, &st, 1e-5, 30, 8).unwrap() <= 1e-6);
    }

    #[test]
    fn fd_check_needs_value() {
        struct NoValue;
        impl SaddleProblem for NoValue {
            fn primal_dim(&self) -> usize {
                1
            }
            fn dual_dim(&self) -> usize {
                1
            }
            fn prox_primal(&self, _: f64, _: &mut [f64]) {}
            fn prox_dual(&self, _: f64, _: &mut [f64]) {}
            fn grad_x(&self, _: &[f64], _: &[f64], o: &mut [f64]) {
                o[0] = 0.0;
            }
            fn grad_y(&self, _: &[f64], _: &[f64], o: &mut [f64]) {
                o[0] = 0.0;
            }
        }
        let st = PrimalDualState::new(vec![0.0], vec![0.0]);
        assert!(matches!(fd_grad_check(&NoValue, &st, 1e-5, 1, 0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn bilinear_reduction_matches() {
        let f = random_image(9, 16, 16);
        let p = Bilinear::tv_huber(f.clone(), 0.05, 1.0);
        let init = PrimalDualState::new(f.values.clone(), vec![0.0; 512]);
        // τσ‖D_h‖² < 1 with ‖D_h‖² ≤ 8.
        for omega in [1.0, 0.5] {
            let t = StepTriple::new(0.3, 0.4, omega).unwrap();
            assert!(bilinear_reduction_check(&p, t, 100, &init).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn kappa_small_examples() {
        let k = kappa_small(&v(&[0.0, 0.0]), &v(&[0.0, 0.0]));
        assert_eq!(k.val, 0.0);
        assert_eq!(k.gyx, DMatrix::identity(2, 2) * 2.0);
        let k = kappa_small(&v(&[1.0]), &v(&[1.0]));
        assert_eq!((k.val, k.gx[0], k.gyx[(0, 0)]), (1.0, 0.0, -2.0));
        let (x, y) = (v(&[0.3, -1.2, 0.5]), v(&[0.7, 0.1, -0.4]));
        assert_eq!(kappa_small(&x, &y).gyx.transpose(), kappa_small_xy(&x, &y));
    }

    #[test]
    fn kappa_small_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = 1e-6;
        for _ in 0..50 {
            let x = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let y = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let k = kappa_small(&x, &y);
            for i in 0..3 {
                let mut e = DVector::zeros(3);
                e[i] = h;
                let dx = (kappa_small(&(&x + &e), &y).val - kappa_small(&(&x - &e), &y).val) / (2.0 * h);
                let dy = (kappa_small(&x, &(&y + &e)).val - kappa_small(&x, &(&y - &e)).val) / (2.0 * h);
                assert!((dx - k.gx[i]).abs() <= 1e-9);
                assert!((dy - k.gy[i]).abs() <= 1e-9);
                let col = (kappa_small(&(&x + &e), &y).gy - kappa_small(&(&x - &e), &y).gy) / (2.0 * h);
                for r in 0..3 {
                    assert!((col[r] - k.gyx[(r, i)]).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn c2_examples() {
        let c = c2_check(&v(&[0.0, 0.0]), &v(&[0.0, 0.0]));
        assert!(c.ok && c.eig_min == 0.0 && c.eig_max == 0.0);
        let c = c2_check(&v(&[2.0]), &v(&[0.5]));
        assert!(c.ok);
        assert!((c.eig_max - 2.0).abs() < 1e-15);
        assert!(!c2_check(&v(&[3.0]), &v(&[0.5])).ok);
    }

    #[test]
    fn sampler_zero_point_boundary_case() {
        let point = KappaPoint { x_hat: v(&[0.0]), y_hat: v(&[0.0]), rho_x: 0.5, rho_y: 0.5 };
        let theta_x = 0.4;
        let mut c = KappaConstants::minimal(&point, 2.0 * theta_x * point.rho_y, 1.0, 1e-3).unwrap();
        c.theta_x = theta_x;
        c.lambda_y = 1.0;
        c.theta_y = (c.lambda_y - 0.25) / (12.0 * 0.5);
        let r = three_point_sample(&point, &c, 20_000, 1).unwrap();
        assert_eq!(r.violations(), 0, "{r:?}");
    }

    #[test]
    fn sampler_flags_inflated_theta() {
        let (point, c) = shrink_rho(v(&[0.8]), v(&[0.6]), 1.5, 0.5, 1.0, 2).unwrap();
        let mut bad = c;
        bad.theta_x *= 10.0;
        bad.theta_y *= 10.0;
        let r = three_point_sample(&point, &bad, 100_000, 3).unwrap();
        assert!(r.violations() > 0);
        assert!(r.worst_margin < 0.0);
    }

    #[test]
    fn sampler_rejects_infeasible_constants() {
        let point = KappaPoint { x_hat: v(&[0.5]), y_hat: v(&[1.0]), rho_x: 0.1, rho_y: 0.1 };
        let err = KappaConstants::minimal(&point, 1.0, 1.0, 1e-3).unwrap_err();
        assert!(matches!(err, Error::Infeasible { inequality, .. } if inequality.contains("lambda_x xi_x")));
        let (p, mut c) = shrink_rho(v(&[0.5]), v(&[0.5]), 1.0, 1.0, 1e-3, 0).unwrap();
        c.lambda_y = 0.1;
        assert!(matches!(three_point_sample(&p, &c, 10, 0), Err(Error::Infeasible { .. })));
        let p = KappaPoint { x_hat: v(&[3.0]), y_hat: v(&[0.5]), rho_x: 0.1, rho_y: 0.1 };
        assert!(matches!(three_point_sample(&p, &c, 10, 0), Err(Error::Precondition(_))));
    }

    #[test]
    fn shrink_rho_terminates_for_dual_stationary_points() {
        for (m, seed) in [(1usize, 11u64), (2, 12)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gamma = 0.5;
            let x_hat = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let y_hat = &x_hat * (2.0 / (gamma + 2.0 * x_hat.norm_squared()));
            assert!(c2_check(&x_hat, &y_hat).ok);
            let xi_x = 2.0 * y_hat.norm_squared() + 0.5;
            let (point, c) = shrink_rho(x_hat, y_hat, xi_x, gamma, 1e-6, seed).unwrap();
            assert!(point.rho_x > 0.0 && c.theta_x > 0.0 && c.theta_y > 0.0);
            assert_eq!(three_point_sample(&point, &c, 20_000, seed + 100).unwrap().violations(), 0);
        }
    }

    #[test]
    fn lift_by_gradient_norm() {
        let tilde = ProblemConstants {
            r_k: 2.5,
            l_x_at_yhat: 0.3,
            l_y_at_xhat: 0.7,
            l_yx: 1.1,
            xi_x: 0.9,
            xi_y: 0.4,
            lambda_x: 0.6,
            lambda_y: 1.3,
            theta_x: 0.2,
            theta_y: 0.8,
            rho_x: 0.05,
            rho_y: 0.07,
            ..Default::default()
        };
        let l = 8f64.sqrt();
        let c = lift_through_operator(&tilde, l);
        assert_eq!(c.r_k, tilde.r_k * l);
        assert_eq!(c.xi_x, l * tilde.xi_x);
        assert_eq!(c.lambda_x, l * tilde.lambda_x);
        assert_eq!(c.theta_y, tilde.theta_y / l);
        assert_eq!(c.rho_x, tilde.rho_x / l);
        assert!((c.l_x_at_yhat - 8.0 * tilde.l_x_at_yhat).abs() <= 1e-15 * c.l_x_at_yhat);
        assert!((c.l_yx - 8.0 * tilde.l_yx).abs() <= 1e-15 * c.l_yx);
        for (a, b) in [
            (c.xi_y, tilde.xi_y),
            (c.lambda_y, tilde.lambda_y),
            (c.theta_x, tilde.theta_x),
            (c.rho_y, tilde.rho_y),
            (c.l_y_at_xhat, tilde.l_y_at_xhat),
        ] {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rate_fit_examples() {
        let geo: Vec<f64> = (0..100).map(|i| 3.0 * 0.9f64.powi(i)).collect();
        let f = rate_fit(&geo, (10, 90)).unwrap();
        assert!((f.rate - 0.9).abs() <= 1e-10);
        assert!((f.r_squared - 1.0).abs() <= 1e-12);

        let harmonic: Vec<f64> = (0..100_001).map(|i| 1.0 / (i.max(1) as f64)).collect();
        let short = rate_fit(&harmonic, (10, 100)).unwrap().rate;
        let long = rate_fit(&harmonic, (1000, 100_000)).unwrap().rate;
        assert!(short < long && long < 1.0 && long > 0.9999);

        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let noisy: Vec<f64> = (0..400).map(|i| 0.95f64.powi(i) * (1.0 + rng.random_range(-0.01..0.01))).collect();
        let f = rate_fit(&noisy, (0, 399)).unwrap();
        assert!((f.rate - 0.95).abs() <= 0.005 * 0.95);

        assert!(rate_fit(&[1.0, 0.0, 1.0], (0, 2)).is_err());
        assert!(rate_fit(&geo, (50, 100)).is_err());
    }

    proptest! {
        #[test]
        fn c2_is_scale_consistent(
            xs in proptest::collection::vec(-1.5f64..1.5, 3),
            ys in proptest::collection::vec(-1.5f64..1.5, 3),
            c in 0.1f64..10.0,
        ) {
            let (x, y) = (v(&xs), v(&ys));
            let a = c2_check(&x, &y);
            let b = c2_check(&(&x * c), &(&y / c));
            // Only compare away from the boundary, where rounding can flip the verdict.
            let near = |r: &C2Check| r.eig_min.abs() < 1e-9 || (r.eig_max - 2.0).abs() < 1e-9;
            prop_assume!(!near(&a) && !near(&b));
            prop_assert_eq!(a.ok, b.ok);
        }
    }
}
