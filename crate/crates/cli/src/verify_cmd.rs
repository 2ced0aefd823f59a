use std::f64::consts::PI;
use std::fs;

use anyhow::{bail, Context, Result};
use gpdps::nash::{manufacture, Grid, NashConfig, PoissonSolver, Profile};
use gpdps::potts::{dh, dht, GradField, Image, PottsConfig, PottsNorm, PottsProblem};
use gpdps::schedules::CheckItem;
use gpdps::verify::{bilinear_reduction_check, c2_check, fd_grad_check, shrink_rho, three_point_sample, Bilinear};
use gpdps::{PrimalDualState, StepTriple};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::args::VerifyArgs;

pub const CHECKS: &[&str] = &[
    "fd-potts-p1",
    "fd-potts-pinf",
    "fd-nash",
    "adjoint",
    "dh-norm",
    "bilinear-reduction",
    "three-point-m1",
    "three-point-m2",
    "poisson-eigenpair",
    "poisson-roundtrip",
];

/// Dual curvature `γ` of the scalar three-point base points; `ξ_y = γ`.
const TP_GAMMA: f64 = 0.5;
const TP_MARGIN: f64 = 1e-6;

fn bounded(name: &str, err: f64, tol: f64, detail: String) -> CheckItem {
    CheckItem { name: name.into(), passed: err <= tol, margin: (tol - err) / tol, detail }
}

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b)
}

pub fn fd_potts(norm: PottsNorm, seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed, 1);
    let f = Image::new(8, 8, uniform(&mut rng, 64, 0.0, 1.0))?;
    let y = uniform(&mut rng, 128, -1.0, 1.0);
    let p = PottsProblem::new(PottsConfig::new(f.clone(), 1.0, 1e-3, norm))?;
    let x = uniform(&mut rng, 64, 0.0, 1.0);
    Ok(fd_grad_check(&p, &PrimalDualState::new(x, y), 1e-5, 100, rng.random())?)
}

pub fn fd_nash(seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed, 2);
    let m = manufacture(NashConfig::new(Grid::new(31)?), &Profile::smooth())?;
    let len = 2 * 31 * 31;
    let st = PrimalDualState::new(uniform(&mut rng, len, -0.5, 0.5), uniform(&mut rng, len, -0.5, 0.5));
    Ok(fd_grad_check(&m.problem, &st, 1e-5, 100, rng.random())?)
}

/// Worst relative adjointness defect of `D_h`/`D_hᵀ` and symmetry defect of the Laplacian.
pub fn adjoint(seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed, 3);
    let mut worst: f64 = 0.0;
    for (n1, n2, h) in [(13, 17, 1.0), (8, 8, 0.5), (1, 9, 1.0)] {
        let x = Image::new(n1, n2, uniform(&mut rng, n1 * n2, -1.0, 1.0))?;
        let y = GradField::new(n1, n2, uniform(&mut rng, 2 * n1 * n2, -1.0, 1.0))?;
        let dx = dh(&x, h);
        let dty = dht(&y, h);
        let (lhs, rhs) = (dot(&dx.values, &y.values), dot(&x.values, &dty.values));
        let scale = norm(&dx.values) * norm(&y.values) + norm(&x.values) * norm(&dty.values);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    let g = Grid::new(20)?;
    let (u, v) = (uniform(&mut rng, g.len(), -1.0, 1.0), uniform(&mut rng, g.len(), -1.0, 1.0));
    let (au, av) = (g.apply_laplacian(&u), g.apply_laplacian(&v));
    let scale = norm(&au) * norm(&v) + norm(&u) * norm(&av);
    worst = worst.max((dot(&au, &v) - dot(&u, &av)).abs() / scale);
    Ok(worst)
}

/// Power-iteration estimate of `‖D_h‖²` on a 32×32 grid with `h = 1`.
pub fn dh_norm_sq(seed: u64) -> f64 {
    let mut rng = rng_for(seed, 4);
    let (n1, n2) = (32, 32);
    let mut x = Image { n1, n2, values: uniform(&mut rng, n1 * n2, -1.0, 1.0) };
    let mut est = 0.0;
    for _ in 0..500 {
        let y = dht(&dh(&x, 1.0), 1.0);
        let ny = norm(&y.values);
        est = ny / norm(&x.values);
        x = Image { n1, n2, values: y.values.iter().map(|v| v / ny).collect() };
    }
    est
}

/// Engine versus a direct primal-dual loop on 16×16 TV-Huber denoising.
pub fn bilinear_reduction(seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed, 5);
    let f = Image::new(16, 16, uniform(&mut rng, 256, 0.0, 1.0))?;
    let problem = Bilinear::tv_huber(f.clone(), 0.05, 1.0);
    let init = PrimalDualState::new(f.values, uniform(&mut rng, 512, -1.0, 1.0));
    Ok(bilinear_reduction_check(&problem, StepTriple::new(0.3, 0.3, 1.0)?, 100, &init)?)
}

/// A seeded base point with `ŷ = 2x̂/(γ + 2|x̂|²)` passing the curvature bound.
pub fn base_point(m: usize, seed: u64) -> (DVector<f64>, DVector<f64>) {
    let mut rng = rng_for(seed, 6 + m as u64);
    loop {
        let x = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let y = &x * (2.0 / (TP_GAMMA + 2.0 * x.norm_squared()));
        if c2_check(&x, &y).ok {
            return (x, y);
        }
    }
}

pub fn three_point(name: &str, x_hat: DVector<f64>, y_hat: DVector<f64>, samples: usize, seed: u64) -> CheckItem {
    let fail = |detail: String| CheckItem { name: name.into(), passed: false, margin: -1.0, detail };
    if x_hat.len() != y_hat.len() || x_hat.is_empty() {
        return fail("x_hat and y_hat need the same positive length".into());
    }
    let c2 = c2_check(&x_hat, &y_hat);
    if !c2.ok {
        return fail(format!("curvature bound fails: eigenvalues in [{:e} {:e}]", c2.eig_min, c2.eig_max));
    }
    let xi_x = 2.0 * y_hat.norm_squared() + 0.5;
    let (point, consts) = match shrink_rho(x_hat, y_hat, xi_x, TP_GAMMA, TP_MARGIN, seed) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    match three_point_sample(&point, &consts, samples, seed.wrapping_add(1)) {
        Ok(r) => CheckItem {
            name: name.into(),
            passed: r.violations() == 0,
            margin: r.worst_margin,
            detail: format!(
                "{} samples; {} + {} violations; rho = {:e}",
                r.samples, r.violations_x, r.violations_y, point.rho_x
            ),
        },
        Err(e) => fail(e.to_string()),
    }
}

fn parse_vec(s: &str) -> Result<DVector<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number {t:?}")))
        .collect::<Result<_>>()?;
    Ok(DVector::from_vec(v))
}

pub fn parse_point(s: &str) -> Result<(DVector<f64>, DVector<f64>)> {
    let Some((x, y)) = s.split_once(':') else {
        bail!("point must look like x1,x2:y1,y2, got {s:?}");
    };
    Ok((parse_vec(x)?, parse_vec(y)?))
}

/// `sin(jπx) sin(kπy)` on the grid, with the arguments reduced exactly in
/// integers so the samples are accurate to rounding.
fn sine_mode(n: usize, j: usize, k: usize) -> Vec<f64> {
    let period = 2 * (n + 1);
    let s = |freq: usize, m: usize| (PI * ((freq * m) % period) as f64 / (n + 1) as f64).sin();
    (0..n * n).map(|idx| s(j, idx % n + 1) * s(k, idx / n + 1)).collect()
}

/// Worst relative error of `A_h v = λv` and `A_h⁻¹(λv) = v` over a few sine modes.
pub fn poisson_eigenpair(n: usize) -> Result<f64> {
    let g = Grid::new(n)?;
    let s = PoissonSolver::new(g);
    let mut worst: f64 = 0.0;
    for (j, k) in [(1, 1), (2, 5), (n / 3, n / 2), (n, 1), (n, n)] {
        let mode = sine_mode(n, j, k);
        let lam = s.eigenvalue(j, k);
        let scaled: Vec<f64> = mode.iter().map(|v| lam * v).collect();
        worst = worst.max(rel_err(&g.apply_laplacian(&mode), &scaled));
        worst = worst.max(rel_err(&s.solve(&scaled)?, &mode));
    }
    Ok(worst)
}

/// Worst relative error of `A_h⁻¹A_h w = w` and `A_h A_h⁻¹ w = w` for random `w`.
pub fn poisson_roundtrip(n: usize, seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed, 9 + n as u64);
    let g = Grid::new(n)?;
    let s = PoissonSolver::new(g);
    let w = uniform(&mut rng, g.len(), -1.0, 1.0);
    let a = rel_err(&s.solve(&g.apply_laplacian(&w))?, &w);
    let b = rel_err(&g.apply_laplacian(&s.solve(&w)?), &w);
    Ok(a.max(b))
}

fn run_check(name: &str, a: &VerifyArgs) -> Result<CheckItem> {
    let seed = a.seed;
    Ok(match name {
        "fd-potts-p1" => {
            bounded(name, fd_potts(PottsNorm::Anisotropic, seed)?, 1e-6, "8x8 h=1e-5 100 directions".into())
        }
        "fd-potts-pinf" => {
            bounded(name, fd_potts(PottsNorm::Isotropic, seed)?, 1e-6, "8x8 h=1e-5 100 directions".into())
        }
        "fd-nash" => bounded(name, fd_nash(seed)?, 1e-6, "n=31 h=1e-5 100 directions".into()),
        "adjoint" => bounded(name, adjoint(seed)?, 1e-12, "dh/dht and laplacian symmetry".into()),
        "dh-norm" => {
            let est = dh_norm_sq(seed);
            let limit = 8.0 + 1e-9;
            CheckItem {
                name: name.into(),
                passed: est <= limit,
                margin: (limit - est) / limit,
                detail: format!("|D_h|^2 ~ {est:.12}"),
            }
        }
        "bilinear-reduction" => bounded(name, bilinear_reduction(seed)?, 1e-12, "16x16 tv-huber 100 iterations".into()),
        "three-point-m1" | "three-point-m2" => {
            let m = if name.ends_with('1') { 1 } else { 2 };
            let (x, y) = base_point(m, seed);
            three_point(name, x, y, a.samples as usize, seed)
        }
        "poisson-eigenpair" => {
            let err = poisson_eigenpair(63)?.max(poisson_eigenpair(127)?);
            bounded(name, err, 1e-12, "n=63 and n=127".into())
        }
        "poisson-roundtrip" => {
            let err = poisson_roundtrip(63, seed)?.max(poisson_roundtrip(127, seed)?);
            bounded(name, err, 1e-12, "n=63 and n=127".into())
        }
        other => bail!("unknown check {other:?}"),
    })
}

pub fn run(a: &VerifyArgs, header: Vec<String>) -> Result<bool> {
    let names: Vec<&str> = if a.only.is_empty() {
        CHECKS.to_vec()
    } else {
        CHECKS.iter().copied().filter(|c| a.only.iter().any(|o| o == c)).collect()
    };
    let mut items = Vec::new();
    for name in names {
        let item = run_check(name, a)?;
        println!("{item}");
        items.push(item);
    }
    for (i, p) in a.points.iter().enumerate() {
        let (x, y) = parse_point(p)?;
        let item = three_point(&format!("three-point-point{}", i + 1), x, y, a.samples as usize, a.seed);
        println!("{item}");
        items.push(item);
    }
    if let Some(path) = &a.report {
        let mut text: String = header.iter().map(|l| format!("# {l}\n")).collect();
        text.push_str("name,status,margin,detail\n");
        for item in &items {
            text.push_str(&format!("{item}\n"));
        }
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(items.iter().all(|i| i.passed))
}
