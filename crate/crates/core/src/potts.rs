//! Huber-regularized Potts (ℓ⁰-TV) denoising as a saddle-point problem.
//!
//! The jump penalty `|t|_γ = 2t²/(2t² + γ)` is written as
//! `sup_y κ_p(D_h x, y) − (γ/2)‖y‖²` with `ρ(t) = 2t − t²` and
//!
//! * `κ₁(z, y) = Σ_{ijk} ρ(z_{ijk} y_{ijk})` (anisotropic),
//! * `κ_∞(z, y) = Σ_{ij} ρ(z_{ij1} y_{ij1} + z_{ij2} y_{ij2})` (isotropic).
//!
//! Gradient fields are stored pixel-major: entry `(i, j, k)` lives at
//! `2(i·n2 + j) + k`, with `k = 0` horizontal and `k = 1` vertical.

use std::fmt;
use std::str::FromStr;

use crate::engine::SaddleProblem;
use crate::error::{Error, Result};

/// Which jumps are counted: every nonzero difference, or every pixel with any jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PottsNorm {
    /// `p = 1`.
    Anisotropic,
    /// `p = ∞`.
    Isotropic,
}

impl FromStr for PottsNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Ok(PottsNorm::Anisotropic),
            "inf" | "infinity" | "∞" => Ok(PottsNorm::Isotropic),
            other => Err(Error::config(format!(
                "p must be 1 or inf; intermediate exponents are not supported (got {other:?})"
            ))),
        }
    }
}

impl fmt::Display for PottsNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PottsNorm::Anisotropic => "1",
            PottsNorm::Isotropic => "inf",
        })
    }
}

/// Row-major `n1 × n2` scalar image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub n1: usize,
    pub n2: usize,
    pub values: Vec<f64>,
}

impl Image {
    pub fn new(n1: usize, n2: usize, values: Vec<f64>) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::config(format!("image dimensions must be positive, got {n1}x{n2}")));
        }
        if values.len() != n1 * n2 {
            return Err(Error::config(format!("expected {} pixels, got {}", n1 * n2, values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("image contains non-finite values"));
        }
        Ok(Image { n1, n2, values })
    }

    pub fn constant(n1: usize, n2: usize, v: f64) -> Self {
        Image { n1, n2, values: vec![v; n1 * n2] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n2 + j]
    }
}

/// `n1 × n2 × 2` field of forward differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradField {
    pub n1: usize,
    pub n2: usize,
    pub values: Vec<f64>,
}

impl GradField {
    pub fn zeros(n1: usize, n2: usize) -> Self {
        GradField { n1, n2, values: vec![0.0; 2 * n1 * n2] }
    }

    pub fn new(n1: usize, n2: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != 2 * n1 * n2 {
            return Err(Error::config(format!("expected {} field entries, got {}", 2 * n1 * n2, values.len())));
        }
        Ok(GradField { n1, n2, values })
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[2 * (i * self.n2 + j) + k]
    }
}

fn dh_into(n1: usize, n2: usize, h: f64, x: &[f64], out: &mut [f64]) {
    let inv = 1.0 / h;
    for i in 0..n1 {
        for j in 0..n2 {
            let p = i * n2 + j;
            out[2 * p] = if j + 1 < n2 { (x[p + 1] - x[p]) * inv } else { 0.0 };
            out[2 * p + 1] = if i + 1 < n1 { (x[p + n2] - x[p]) * inv } else { 0.0 };
        }
    }
}

fn dht_into(n1: usize, n2: usize, h: f64, y: &[f64], out: &mut [f64]) {
    let inv = 1.0 / h;
    out.fill(0.0);
    for i in 0..n1 {
        for j in 0..n2 {
            let p = i * n2 + j;
            if j + 1 < n2 {
                let v = y[2 * p] * inv;
                out[p] -= v;
                out[p + 1] += v;
            }
            if i + 1 < n1 {
                let v = y[2 * p + 1] * inv;
                out[p] -= v;
                out[p + n2] += v;
            }
        }
    }
}

/// Forward-difference gradient with zero rows/columns at the far boundary.
pub fn dh(x: &Image, h: f64) -> GradField {
    let mut out = GradField::zeros(x.n1, x.n2);
    dh_into(x.n1, x.n2, h, &x.values, &mut out.values);
    out
}

/// Exact adjoint of [`dh`] (the negative discrete divergence).
pub fn dht(y: &GradField, h: f64) -> Image {
    let mut out = Image::constant(y.n1, y.n2, 0.0);
    dht_into(y.n1, y.n2, h, &y.values, &mut out.values);
    out
}

fn rho(t: f64) -> f64 {
    2.0 * t - t * t
}

fn check_shapes(z: &GradField, y: &GradField) -> Result<()> {
    if (z.n1, z.n2) != (y.n1, y.n2) || z.values.len() != y.values.len() {
        return Err(Error::config(format!("field shapes differ: {}x{} vs {}x{}", z.n1, z.n2, y.n1, y.n2)));
    }
    Ok(())
}

fn kappa_val_raw(norm: PottsNorm, z: &[f64], y: &[f64]) -> f64 {
    match norm {
        PottsNorm::Anisotropic => z.iter().zip(y).map(|(a, b)| rho(a * b)).sum(),
        PottsNorm::Isotropic => {
            z.chunks_exact(2).zip(y.chunks_exact(2)).map(|(a, b)| rho(a[0] * b[0] + a[1] * b[1])).sum()
        }
    }
}

/// `out = 2(1 − s) · w` where `s` is the componentwise (p = 1) or per-pixel
/// (p = ∞) product of `z` and `y`. `w = y` gives `κ_z`, `w = z` gives `κ_y`.
fn kappa_deriv_raw(norm: PottsNorm, z: &[f64], y: &[f64], wrt_z: bool, out: &mut [f64]) {
    match norm {
        PottsNorm::Anisotropic => {
            for ((o, &a), &b) in out.iter_mut().zip(z).zip(y) {
                *o = 2.0 * (1.0 - a * b) * if wrt_z { b } else { a };
            }
        }
        PottsNorm::Isotropic => {
            for ((o, a), b) in out.chunks_exact_mut(2).zip(z.chunks_exact(2)).zip(y.chunks_exact(2)) {
                let f = 2.0 * (1.0 - a[0] * b[0] - a[1] * b[1]);
                let w = if wrt_z { b } else { a };
                o[0] = f * w[0];
                o[1] = f * w[1];
            }
        }
    }
}

pub fn kappa_val(norm: PottsNorm, z: &GradField, y: &GradField) -> Result<f64> {
    check_shapes(z, y)?;
    Ok(kappa_val_raw(norm, &z.values, &y.values))
}

pub fn kappa_z(norm: PottsNorm, z: &GradField, y: &GradField) -> Result<GradField> {
    check_shapes(z, y)?;
    let mut out = GradField::zeros(z.n1, z.n2);
    kappa_deriv_raw(norm, &z.values, &y.values, true, &mut out.values);
    Ok(out)
}

pub fn kappa_y(norm: PottsNorm, z: &GradField, y: &GradField) -> Result<GradField> {
    check_shapes(z, y)?;
    let mut out = GradField::zeros(z.n1, z.n2);
    kappa_deriv_raw(norm, &z.values, &y.values, false, &mut out.values);
    Ok(out)
}

fn huber(t_sq: f64, gamma: f64) -> f64 {
    let d = 2.0 * t_sq + gamma;
    if d == 0.0 {
        0.0
    } else {
        2.0 * t_sq / d
    }
}

/// `Σ |t|_γ` over components (p = 1) or pixel magnitudes (p = ∞).
/// At `γ = 0` this is the jump count.
pub fn huber_value(norm: PottsNorm, z: &GradField, gamma: f64) -> f64 {
    match norm {
        PottsNorm::Anisotropic => z.values.iter().map(|t| huber(t * t, gamma)).sum(),
        PottsNorm::Isotropic => z.values.chunks_exact(2).map(|c| huber(c[0] * c[0] + c[1] * c[1], gamma)).sum(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PottsConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub norm: PottsNorm,
    pub f: Image,
    pub h: f64,
}

impl PottsConfig {
    pub fn new(f: Image, alpha: f64, gamma: f64, norm: PottsNorm) -> Self {
        PottsConfig { alpha, gamma, norm, f, h: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct PottsProblem {
    cfg: PottsConfig,
}

impl PottsProblem {
    pub fn new(cfg: PottsConfig) -> Result<Self> {
        if !(cfg.alpha > 0.0 && cfg.alpha.is_finite()) {
            return Err(Error::config(format!("alpha must be positive, got {}", cfg.alpha)));
        }
        if !(cfg.gamma >= 0.0 && cfg.gamma.is_finite()) {
            return Err(Error::config(format!("gamma must be non-negative, got {}", cfg.gamma)));
        }
        if !(cfg.h > 0.0 && cfg.h.is_finite()) {
            return Err(Error::config(format!("h must be positive, got {}", cfg.h)));
        }
        Image::new(cfg.f.n1, cfg.f.n2, cfg.f.values.clone())?;
        Ok(PottsProblem { cfg })
    }

    pub fn config(&self) -> &PottsConfig {
        &self.cfg
    }

    fn shape(&self) -> (usize, usize) {
        (self.cfg.f.n1, self.cfg.f.n2)
    }

    fn dh_raw(&self, x: &[f64]) -> Vec<f64> {
        let (n1, n2) = self.shape();
        let mut z = vec![0.0; 2 * n1 * n2];
        dh_into(n1, n2, self.cfg.h, x, &mut z);
        z
    }

    /// `(1/(2α))‖x − f‖² + Σ |[D_h x]|_γ`.
    pub fn objective(&self, x: &Image) -> f64 {
        self.objective_raw(&x.values)
    }

    fn objective_raw(&self, x: &[f64]) -> f64 {
        let data: f64 = x.iter().zip(&self.cfg.f.values).map(|(a, b)| (a - b) * (a - b)).sum();
        let (n1, n2) = self.shape();
        let z = GradField { n1, n2, values: self.dh_raw(x) };
        data / (2.0 * self.cfg.alpha) + huber_value(self.cfg.norm, &z, self.cfg.gamma)
    }

    /// The dual point `ŷ = 2z/(2|z|² + γ)` with `z = D_h x`, per component
    /// (p = 1) or per pixel (p = ∞).
    pub fn dual_from_primal(&self, x: &Image) -> GradField {
        let (n1, n2) = self.shape();
        let mut y = self.dh_raw(&x.values);
        let g = self.cfg.gamma;
        let scale = |sq: f64| {
            let d = 2.0 * sq + g;
            if d == 0.0 {
                0.0
            } else {
                2.0 / d
            }
        };
        match self.cfg.norm {
            PottsNorm::Anisotropic => y.iter_mut().for_each(|t| *t *= scale(*t * *t)),
            PottsNorm::Isotropic => y.chunks_exact_mut(2).for_each(|c| {
                let s = scale(c[0] * c[0] + c[1] * c[1]);
                c[0] *= s;
                c[1] *= s;
            }),
        }
        GradField { n1, n2, values: y }
    }

    /// Starting point `x⁰ = f`, `y⁰ = 0`.
    pub fn initial_state(&self) -> crate::engine::PrimalDualState {
        crate::engine::PrimalDualState::new(self.cfg.f.values.clone(), vec![0.0; self.dual_dim()])
    }
}

impl SaddleProblem for PottsProblem {
    fn primal_dim(&self) -> usize {
        self.cfg.f.values.len()
    }

    fn dual_dim(&self) -> usize {
        2 * self.cfg.f.values.len()
    }

    fn prox_primal(&self, tau: f64, x: &mut [f64]) {
        let r = tau / self.cfg.alpha;
        let s = 1.0 / (1.0 + r);
        for (v, f) in x.iter_mut().zip(&self.cfg.f.values) {
            *v = s * (*v + r * f);
        }
    }

    fn prox_dual(&self, sigma: f64, y: &mut [f64]) {
        let s = 1.0 / (1.0 + self.cfg.gamma * sigma);
        y.iter_mut().for_each(|v| *v *= s);
    }

    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let (n1, n2) = self.shape();
        let z = self.dh_raw(x);
        let mut kz = vec![0.0; z.len()];
        kappa_deriv_raw(self.cfg.norm, &z, y, true, &mut kz);
        dht_into(n1, n2, self.cfg.h, &kz, out);
    }

    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let z = self.dh_raw(x);
        kappa_deriv_raw(self.cfg.norm, &z, y, false, out);
    }

    fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        Some(kappa_val_raw(self.cfg.norm, &self.dh_raw(x), y))
    }

    fn primal_objective(&self, x: &[f64]) -> Option<f64> {
        Some(self.objective_raw(x))
    }
}
