//! Two-player elliptic Nash equilibrium problem written as a saddle point of
//! the Nikaido–Isoda function.
//!
//! Each player `k` controls `u_k` on a subdomain `ω_k ⊂ (0,1)²`, the shared
//! state solves `−Δy = B₁u₁ + B₂u₂ + f` with homogeneous Dirichlet data, and
//! pays `φ_k = ½‖y − z_k‖² + (α_k/2)‖B_k u_k‖²`. The primal variable is
//! `u = (u₁, u₂)`, the dual variable `v = (v₁, v₂)` is the unilateral deviation,
//! and `K(u, v) = Ψ(u, v) = φ₁(u) − φ₁(v₁, u₂) + φ₂(u) − φ₂(u₁, v₂)`.
//!
//! Fields live on the `n × n` interior nodes, row-major with rows indexed by
//! the second coordinate. Inner products carry the weight `h²`.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::engine::{PrimalDualState, SaddleProblem};
use crate::error::{Error, Result};

/// Uniform grid on the unit square with `n` interior nodes per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::config(format!("grid needs at least 2 interior nodes, got {n}")));
        }
        Ok(Grid { n })
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n + 1) as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates `(x, y)` of flat index `idx`.
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let h = self.h();
        let (r, c) = (idx / self.n, idx % self.n);
        ((c + 1) as f64 * h, (r + 1) as f64 * h)
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let (x, y) = self.coords(i);
                f(x, y)
            })
            .collect()
    }

    /// `ω₁ = {y < 1/2}` and `ω₂ = {y > 1/2}`; a node row at exactly `y = 1/2`
    /// belongs to neither.
    pub fn half_masks(&self) -> (Vec<bool>, Vec<bool>) {
        let n = self.n;
        let row = |idx: usize| 2 * (idx / n + 1);
        let lower = (0..self.len()).map(|i| row(i) < n + 1).collect();
        let upper = (0..self.len()).map(|i| row(i) > n + 1).collect();
        (lower, upper)
    }

    /// `A_h w` for the 5-point negative Laplacian.
    pub fn apply_laplacian(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n;
        let inv = 1.0 / (self.h() * self.h());
        let mut out = vec![0.0; self.len()];
        for r in 0..n {
            for c in 0..n {
                let i = r * n + c;
                let mut s = 4.0 * w[i];
                if c > 0 {
                    s -= w[i - 1];
                }
                if c + 1 < n {
                    s -= w[i + 1];
                }
                if r > 0 {
                    s -= w[i - n];
                }
                if r + 1 < n {
                    s -= w[i + n];
                }
                out[i] = s * inv;
            }
        }
        out
    }
}

/// Dirichlet Poisson solver diagonalized by the 2-D type-I sine transform.
///
/// The transform plan and eigenvalues are computed once per grid.
pub struct PoissonSolver {
    grid: Grid,
    fft: Arc<dyn Fft<f64>>,
    eig: Vec<f64>,
    solves: AtomicUsize,
}

impl std::fmt::Debug for PoissonSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonSolver").field("grid", &self.grid).field("solves", &self.solve_count()).finish()
    }
}

impl Clone for PoissonSolver {
    fn clone(&self) -> Self {
        PoissonSolver {
            grid: self.grid,
            fft: Arc::clone(&self.fft),
            eig: self.eig.clone(),
            solves: AtomicUsize::new(self.solve_count()),
        }
    }
}

impl PoissonSolver {
    pub fn new(grid: Grid) -> Self {
        let n = grid.n;
        let fft = FftPlanner::new().plan_fft_forward(2 * (n + 1));
        let h = grid.h();
        let one_d: Vec<f64> = (1..=n)
            .map(|j| {
                let s = (j as f64 * PI * h / 2.0).sin();
                4.0 * s * s / (h * h)
            })
            .collect();
        let eig = (0..n * n).map(|i| one_d[i / n] + one_d[i % n]).collect();
        PoissonSolver { grid, fft, eig, solves: AtomicUsize::new(0) }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Eigenvalue of `A_h` for the sine mode `(j, k)`, 1-based.
    pub fn eigenvalue(&self, j: usize, k: usize) -> f64 {
        self.eig[(k - 1) * self.grid.n + (j - 1)]
    }

    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    pub fn reset_count(&self) {
        self.solves.store(0, Ordering::Relaxed);
    }

    /// Sine transform `X_k = Σ_j x_j sin(π jk/(n+1))` along every row.
    fn dst_rows(&self, data: &mut [f64], buf: &mut [Complex<f64>]) {
        let n = self.grid.n;
        let m = 2 * (n + 1);
        for (row, chunk) in data.chunks_exact(n).zip(buf.chunks_exact_mut(m)) {
            chunk[0] = Complex::new(0.0, 0.0);
            chunk[n + 1] = Complex::new(0.0, 0.0);
            for (j, &v) in row.iter().enumerate() {
                chunk[j + 1] = Complex::new(v, 0.0);
                chunk[m - 1 - j] = Complex::new(-v, 0.0);
            }
        }
        self.fft.process(buf);
        for (row, chunk) in data.chunks_exact_mut(n).zip(buf.chunks_exact(m)) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = -0.5 * chunk[j + 1].im;
            }
        }
    }

    fn dst_2d(&self, data: &mut [f64], buf: &mut [Complex<f64>]) {
        let n = self.grid.n;
        self.dst_rows(data, buf);
        transpose(data, n);
        self.dst_rows(data, buf);
        transpose(data, n);
    }

    /// Solves `A_h w = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.n;
        if rhs.len() != n * n {
            return Err(Error::config(format!("rhs has {} entries, grid needs {}", rhs.len(), n * n)));
        }
        self.solves.fetch_add(1, Ordering::Relaxed);
        let mut w = rhs.to_vec();
        let mut buf = vec![Complex::new(0.0, 0.0); n * 2 * (n + 1)];
        self.dst_2d(&mut w, &mut buf);
        // The inverse transform is the forward one scaled by (2/(n+1))².
        let scale = 4.0 / ((n + 1) * (n + 1)) as f64;
        for (v, e) in w.iter_mut().zip(&self.eig) {
            *v *= scale / e;
        }
        self.dst_2d(&mut w, &mut buf);
        Ok(w)
    }
}

fn transpose(a: &mut [f64], n: usize) {
    for r in 0..n {
        for c in r + 1..n {
            a.swap(r * n + c, c * n + r);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashConfig {
    pub grid: Grid,
    pub mask1: Vec<bool>,
    pub mask2: Vec<bool>,
    pub a: f64,
    pub b: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub f: Vec<f64>,
}

impl NashConfig {
    /// Half-plane masks, box `[−0.5, 0.5]`, unit costs, zero data.
    pub fn new(grid: Grid) -> Self {
        let (mask1, mask2) = grid.half_masks();
        let zero = vec![0.0; grid.len()];
        NashConfig {
            grid,
            mask1,
            mask2,
            a: -0.5,
            b: 0.5,
            alpha1: 1.0,
            alpha2: 1.0,
            z1: zero.clone(),
            z2: zero.clone(),
            f: zero,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.grid.len();
        if !(self.a < self.b) {
            return Err(Error::config(format!("need a < b, got a={} b={}", self.a, self.b)));
        }
        if !(self.alpha1 > 0.0 && self.alpha2 > 0.0) {
            return Err(Error::config("control costs alpha1, alpha2 must be positive"));
        }
        for (name, l) in [
            ("mask1", self.mask1.len()),
            ("mask2", self.mask2.len()),
            ("z1", self.z1.len()),
            ("z2", self.z2.len()),
            ("f", self.f.len()),
        ] {
            if l != len {
                return Err(Error::config(format!("{name} has {l} entries, grid needs {len}")));
            }
        }
        if self.z1.iter().chain(&self.z2).chain(&self.f).any(|v| !v.is_finite()) {
            return Err(Error::config("data fields must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NashProblem {
    cfg: NashConfig,
    solver: PoissonSolver,
}

impl NashProblem {
    pub fn new(cfg: NashConfig) -> Result<Self> {
        cfg.validate()?;
        let solver = PoissonSolver::new(cfg.grid);
        Ok(NashProblem { cfg, solver })
    }

    pub fn config(&self) -> &NashConfig {
        &self.cfg
    }

    pub fn solver(&self) -> &PoissonSolver {
        &self.solver
    }

    fn len(&self) -> usize {
        self.cfg.grid.len()
    }

    fn weight(&self) -> f64 {
        let h = self.cfg.grid.h();
        h * h
    }

    fn masked<'a>(mask: &'a [bool], w: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        mask.iter().zip(w).map(|(&m, &v)| if m { v } else { 0.0 })
    }

    /// State `S(u₁, u₂)`.
    pub fn forward(&self, u1: &[f64], u2: &[f64]) -> Vec<f64> {
        let c = &self.cfg;
        let rhs: Vec<f64> =
            Self::masked(&c.mask1, u1).zip(Self::masked(&c.mask2, u2)).zip(&c.f).map(|((a, b), f)| a + b + f).collect();
        self.solver.solve(&rhs).expect("shapes fixed at construction")
    }

    fn norm_sq(&self, w: impl Iterator<Item = f64>) -> f64 {
        self.weight() * w.map(|v| v * v).sum::<f64>()
    }

    fn payout_with_state(&self, k: usize, state: &[f64], u_k: &[f64]) -> f64 {
        let (z, mask, alpha) = match k {
            1 => (&self.cfg.z1, &self.cfg.mask1, self.cfg.alpha1),
            _ => (&self.cfg.z2, &self.cfg.mask2, self.cfg.alpha2),
        };
        0.5 * self.norm_sq(state.iter().zip(z).map(|(s, z)| s - z))
            + 0.5 * alpha * self.norm_sq(Self::masked(mask, u_k))
    }

    /// `φ_k(u₁, u₂)` for `k ∈ {1, 2}`.
    pub fn payout(&self, k: usize, u1: &[f64], u2: &[f64]) -> Result<f64> {
        if k != 1 && k != 2 {
            return Err(Error::config(format!("player index must be 1 or 2, got {k}")));
        }
        let s = self.forward(u1, u2);
        Ok(self.payout_with_state(k, &s, if k == 1 { u1 } else { u2 }))
    }

    /// Nikaido–Isoda value `Ψ(u, v)` on stacked controls.
    ///
    /// Each payout difference is evaluated as
    /// `½⟨ΔS, 2S − ΔS − 2z_k⟩ + (α_k/2)⟨B_k(u_k − v_k), B_k(u_k + v_k)⟩`
    /// with `ΔS = A⁻¹B_k(u_k − v_k)`.
    pub fn psi(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.len();
        let c = &self.cfg;
        let (u1, u2) = u.split_at(n);
        let (v1, v2) = v.split_at(n);
        let s = self.forward(u1, u2);
        let w = self.weight();
        let mut total = 0.0;
        for (uk, vk, mask, z, alpha) in [(u1, v1, &c.mask1, &c.z1, c.alpha1), (u2, v2, &c.mask2, &c.z2, c.alpha2)] {
            let du: Vec<f64> = uk.iter().zip(vk).map(|(a, b)| a - b).collect();
            let su: Vec<f64> = uk.iter().zip(vk).map(|(a, b)| a + b).collect();
            let rhs: Vec<f64> = Self::masked(mask, &du).collect();
            let ds = self.solver.solve(&rhs).expect("shapes fixed at construction");
            let state: f64 = ds.iter().zip(&s).zip(z).map(|((d, s), z)| d * (2.0 * s - d - 2.0 * z)).sum();
            let control: f64 = Self::masked(mask, &du).zip(Self::masked(mask, &su)).map(|(a, b)| a * b).sum();
            total += 0.5 * w * (state + alpha * control);
        }
        total
    }

    fn project(&self, w: &mut [f64]) {
        let n = self.len();
        let (a, b) = (self.cfg.a, self.cfg.b);
        let (w1, w2) = w.split_at_mut(n);
        for (half, mask) in [(w1, &self.cfg.mask1), (w2, &self.cfg.mask2)] {
            for (v, &m) in half.iter_mut().zip(mask.iter()) {
                *v = if m { v.clamp(a, b) } else { 0.0 };
            }
        }
    }

    /// Stacked starting point with both controls zero.
    pub fn zero_state(&self) -> PrimalDualState {
        PrimalDualState::new(vec![0.0; 2 * self.len()], vec![0.0; 2 * self.len()])
    }
}

impl SaddleProblem for NashProblem {
    fn primal_dim(&self) -> usize {
        2 * self.len()
    }

    fn dual_dim(&self) -> usize {
        2 * self.len()
    }

    fn prox_primal(&self, _tau: f64, x: &mut [f64]) {
        self.project(x);
    }

    fn prox_dual(&self, _sigma: f64, y: &mut [f64]) {
        self.project(y);
    }

    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let n = self.len();
        let c = &self.cfg;
        let (u1, u2) = x.split_at(n);
        let (v1, v2) = y.split_at(n);
        let s_uu = self.forward(u1, u2);
        let s_uv = self.forward(u1, v2);
        let s_vu = self.forward(v1, u2);
        let rhs1: Vec<f64> = (0..n).map(|i| 2.0 * s_uu[i] - s_uv[i] - c.z1[i]).collect();
        let rhs2: Vec<f64> = (0..n).map(|i| 2.0 * s_uu[i] - s_vu[i] - c.z2[i]).collect();
        let p1 = self.solver.solve(&rhs1).expect("shapes fixed at construction");
        let p2 = self.solver.solve(&rhs2).expect("shapes fixed at construction");
        let (o1, o2) = out.split_at_mut(n);
        for (((o, p), &u), m) in o1.iter_mut().zip(Self::masked(&c.mask1, &p1)).zip(u1).zip(&c.mask1) {
            *o = p + if *m { c.alpha1 * u } else { 0.0 };
        }
        for (((o, p), &u), m) in o2.iter_mut().zip(Self::masked(&c.mask2, &p2)).zip(u2).zip(&c.mask2) {
            *o = p + if *m { c.alpha2 * u } else { 0.0 };
        }
    }

    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let n = self.len();
        let c = &self.cfg;
        let (u1, u2) = x.split_at(n);
        let (v1, v2) = y.split_at(n);
        let s_vu = self.forward(v1, u2);
        let s_uv = self.forward(u1, v2);
        let rhs1: Vec<f64> = (0..n).map(|i| c.z1[i] - s_vu[i]).collect();
        let rhs2: Vec<f64> = (0..n).map(|i| c.z2[i] - s_uv[i]).collect();
        let q1 = self.solver.solve(&rhs1).expect("shapes fixed at construction");
        let q2 = self.solver.solve(&rhs2).expect("shapes fixed at construction");
        let (o1, o2) = out.split_at_mut(n);
        for (((o, q), &v), m) in o1.iter_mut().zip(Self::masked(&c.mask1, &q1)).zip(v1).zip(&c.mask1) {
            *o = q - if *m { c.alpha1 * v } else { 0.0 };
        }
        for (((o, q), &v), m) in o2.iter_mut().zip(Self::masked(&c.mask2, &q2)).zip(v2).zip(&c.mask2) {
            *o = q - if *m { c.alpha2 * v } else { 0.0 };
        }
    }

    fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        Some(self.psi(x, y))
    }

    fn inner_weight(&self) -> f64 {
        self.weight()
    }
}

/// Shape functions for a manufactured equilibrium: control profiles `w₁`,
/// `w₂` and state `y_s`, all vanishing on the boundary.
#[derive(Debug, Clone, Copy)]
pub struct Profile {
    pub w1: fn(f64, f64) -> f64,
    pub w2: fn(f64, f64) -> f64,
    pub y_s: fn(f64, f64) -> f64,
}

impl Profile {
    pub fn smooth() -> Self {
        Profile {
            w1: |x, y| 0.4 * (PI * x).sin() * (2.0 * PI * y).sin(),
            w2: |x, y| 0.4 * (2.0 * PI * x).sin() * (PI * y).sin(),
            y_s: |x, y| (PI * x).sin() * (PI * y).sin(),
        }
    }

    pub fn zero() -> Self {
        Profile { w1: |_, _| 0.0, w2: |_, _| 0.0, y_s: |_, _| 0.0 }
    }
}

impl Default for Profile {
    fn default() -> Self {
        Profile::smooth()
    }
}

/// A problem together with its exact discrete equilibrium.
#[derive(Debug, Clone)]
pub struct Manufactured {
    pub problem: NashProblem,
    /// Stacked `(u₁*, u₂*)`.
    pub u_star: Vec<f64>,
    pub y_star: Vec<f64>,
}

impl Manufactured {
    /// The saddle point `(u*, u*)`.
    pub fn solution(&self) -> PrimalDualState {
        PrimalDualState::new(self.u_star.clone(), self.u_star.clone())
    }
}

/// Builds `f`, `z₁`, `z₂` so that `u_k* = B_k w_k` is an equilibrium with
/// state `y_s` and adjoints `p_k = −α_k w_k`.
///
/// `base` supplies grid, masks, box and costs; its data fields are replaced.
pub fn manufacture(base: NashConfig, profile: &Profile) -> Result<Manufactured> {
    base.validate()?;
    let grid = base.grid;
    let w1 = grid.sample(profile.w1);
    let w2 = grid.sample(profile.w2);
    let y_s = grid.sample(profile.y_s);
    let limit = 0.8 * base.a.abs().min(base.b);
    let peak = w1.iter().chain(&w2).fold(0.0f64, |m, v| m.max(v.abs()));
    if !(peak <= limit) || base.a >= 0.0 || base.b <= 0.0 {
        return Err(Error::config(format!(
            "profile amplitude {peak} exceeds 0.8·min(|a|, b) = {limit}; the equilibrium would touch the box"
        )));
    }
    let mask =
        |m: &[bool], w: &[f64]| -> Vec<f64> { m.iter().zip(w).map(|(&b, &v)| if b { v } else { 0.0 }).collect() };
    let u1 = mask(&base.mask1, &w1);
    let u2 = mask(&base.mask2, &w2);
    let a_ys = grid.apply_laplacian(&y_s);
    let f = (0..grid.len()).map(|i| a_ys[i] - u1[i] - u2[i]).collect();
    let z_of = |w: &[f64], alpha: f64| -> Vec<f64> {
        let p: Vec<f64> = w.iter().map(|v| -alpha * v).collect();
        let ap = grid.apply_laplacian(&p);
        (0..grid.len()).map(|i| y_s[i] - ap[i]).collect()
    };
    let z1 = z_of(&w1, base.alpha1);
    let z2 = z_of(&w2, base.alpha2);
    let cfg = NashConfig { z1, z2, f, ..base };
    let problem = NashProblem::new(cfg)?;
    let mut u_star = u1;
    u_star.extend(u2);
    Ok(Manufactured { problem, u_star, y_star: y_s })
}
