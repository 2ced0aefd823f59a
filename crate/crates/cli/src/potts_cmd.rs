use anyhow::{Context, Result};
use gpdps::engine::solve_with;
use gpdps::io::{read_pgm, write_pgm, PgmFormat, Table};
use gpdps::potts::{Image, PottsConfig, PottsNorm, PottsProblem};
use gpdps::schedules::{potts_steps, published_potts_preset, PottsStepParams, StepTriple};
use gpdps::synthetic::{gen_piecewise_constant, gen_synthetic};
use gpdps::SolveOptions;

use crate::args::{GenImageArgs, PottsArgs, PottsCalcArgs, Preset};

pub fn calc_params(alpha: f64, gamma: f64, norm: PottsNorm, c: &PottsCalcArgs) -> PottsStepParams {
    let mut p = PottsStepParams::new(alpha, gamma, norm);
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut p.dynamic_range, c.dynamic_range);
    set(&mut p.gamma_bar, c.gamma_bar);
    set(&mut p.delta, c.delta);
    set(&mut p.mu, c.mu);
    set(&mut p.gamma_tilde_g, c.gtilde_g);
    set(&mut p.gamma_tilde_fstar, c.gtilde_f);
    set(&mut p.l, c.l);
    p
}

pub fn triple_lines(t: &StepTriple) -> Vec<String> {
    vec![format!("tau = {:e}", t.tau), format!("sigma = {}", t.sigma), format!("omega = {}", t.omega)]
}

fn load_image(a: &PottsArgs) -> Result<Image> {
    if let Some(path) = &a.input {
        let (img, _) = read_pgm(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(img);
    }
    let s = a.synthetic.as_deref().context("need --input or --synthetic")?;
    Ok(gen_synthetic(s[0] as usize, s[1] as usize, s[2], a.gen.shapes, a.gen.noise)?)
}

fn steps_for(a: &PottsArgs) -> Result<StepTriple> {
    match a.preset {
        Some(preset) => {
            let (norm, name) = match preset {
                Preset::PaperP1 => (PottsNorm::Anisotropic, "paper-p1"),
                Preset::PaperPinf => (PottsNorm::Isotropic, "paper-pinf"),
            };
            if norm != a.p {
                eprintln!("warning: preset {name} was computed for p = {norm}, running with p = {}", a.p);
            }
            Ok(published_potts_preset(norm))
        }
        None => {
            let mut params = calc_params(a.alpha, a.gamma, a.p, &a.calc);
            if a.calc.l.is_none() {
                params.l = 8f64.sqrt() / a.h;
            }
            Ok(potts_steps(&params)?.0)
        }
    }
}

pub fn run(a: &PottsArgs, mut header: Vec<String>) -> Result<bool> {
    let f = load_image(a)?;
    let triple = steps_for(a)?;
    header.extend(triple_lines(&triple));
    println!("{}", triple_lines(&triple).join(", "));

    let mut cfg = PottsConfig::new(f.clone(), a.alpha, a.gamma, a.p);
    cfg.h = a.h;
    let problem = PottsProblem::new(cfg)?;
    let steps = std::iter::repeat(triple);

    let reference = match a.reference_iters {
        Some(n) => {
            let (r, _) =
                solve_with(&problem, steps.clone(), &SolveOptions::fixed(n as usize), problem.initial_state())?;
            let img = Image { n1: f.n1, n2: f.n2, values: r.x.clone() };
            write_pgm(&a.reference_out, &img, PgmFormat::default(), &header)?;
            Some(r)
        }
        None => None,
    };

    let mut opts = SolveOptions::fixed(a.iters as usize).with_stride(a.log_every as usize).with_objective();
    if let Some(r) = reference {
        opts = opts.with_reference(r);
    }
    let (state, log) = solve_with(&problem, steps, &opts, problem.initial_state())?;

    let mut table = Table::new(header.clone(), &["iter", "objective", "step_norm", "err_sq_vs_reference"]);
    for r in &log {
        table.push(vec![Some(r.iter as f64), r.objective, Some(r.step_norm), r.dist_to_ref.map(|d| d * d)]);
    }
    table.write(&a.csv)?;
    let out = Image { n1: f.n1, n2: f.n2, values: state.x };
    write_pgm(&a.out, &out, PgmFormat::default(), &header)?;
    if let Some(last) = log.last() {
        println!(
            "iter {}: objective {:e}, step {:e}{}",
            last.iter,
            last.objective.unwrap_or(f64::NAN),
            last.step_norm,
            last.dist_to_ref.map(|d| format!(", err_sq {:e}", d * d)).unwrap_or_default()
        );
    }
    Ok(true)
}

pub fn gen_image(a: &GenImageArgs, header: Vec<String>) -> Result<bool> {
    let (n1, n2) = (a.size[0], a.size[1]);
    let img = if a.clean {
        gen_piecewise_constant(n1, n2, a.seed, a.gen.shapes)?
    } else {
        gen_synthetic(n1, n2, a.seed, a.gen.shapes, a.gen.noise)?
    };
    let format = PgmFormat { ascii: a.ascii, maxval: if a.depth == 8 { 255 } else { 65535 } };
    write_pgm(&a.out, &img, format, &header)?;
    Ok(true)
}
