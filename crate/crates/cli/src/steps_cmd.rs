use anyhow::{bail, Result};
use gpdps::schedules::{
    bound_accelerated, bound_constant, bound_linear, check_48, potts_steps, ProblemConstants, StepSchedule, StepTriple,
};

use crate::args::{Regime, StepsArgs};
use crate::potts_cmd::{calc_params, triple_lines};

fn constants(a: &StepsArgs) -> ProblemConstants {
    let delta = a.calc.delta.unwrap_or(0.5);
    ProblemConstants {
        r_k: a.rk,
        l_x_at_yhat: a.lx,
        l_y_at_xhat: a.ly,
        l_yx: a.lyx,
        lambda_x: a.lambda_x,
        lambda_y: a.lambda_y,
        xi_x: a.xi_x,
        xi_y: a.xi_y,
        theta_x: a.theta_x,
        theta_y: a.theta_y,
        gamma_g: a.gamma_g,
        gamma_fstar: a.gamma_f,
        gamma_tilde_g: a.calc.gtilde_g.unwrap_or(0.0),
        gamma_tilde_fstar: a.calc.gtilde_f.unwrap_or(0.0),
        rho_x: a.rho_x,
        rho_y: a.rho_y,
        delta,
        mu: a.calc.mu.unwrap_or(delta),
    }
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if !v.is_finite() {
        bail!("{name} is unbounded for these constants; pass --tau");
    }
    Ok(v)
}

/// Prints bounds and constants; returns the schedule to check.
fn plan(a: &StepsArgs) -> Result<(StepSchedule, ProblemConstants)> {
    match a.regime {
        Regime::Constant => {
            let c = constants(a);
            let b = bound_constant(&c);
            println!("tau_sup = {:e}", b.tau_sup);
            let tau = match a.tau {
                Some(t) => t,
                None => finite("tau_sup", b.tau_sup)? * (1.0 - gpdps::schedules::POTTS_MARGIN),
            };
            println!("sigma_max(tau) = {:e}", b.sigma_max(tau));
            let sigma = a.sigma.unwrap_or_else(|| b.sigma_max(tau));
            Ok((StepSchedule::constant(tau, sigma)?, c))
        }
        Regime::Accelerated => {
            let c = constants(a);
            let b = bound_accelerated(&c)?;
            println!("tau0_sup = {:e}", b.tau0_sup);
            println!("sigma_tau0_max = {:e}", b.sigma_tau0_max);
            let tau0 = match a.tau {
                Some(t) => t,
                None => finite("tau0_sup", b.tau0_sup)?,
            };
            // The product bound alone ignores λ_y; the dual step inequality does not.
            let full = 1.0 / (c.r_k * c.r_k * tau0 / (1.0 - c.mu) + c.lambda_y);
            let sigma = a.sigma.unwrap_or((b.sigma_tau0_max / tau0).min(full));
            Ok((StepSchedule::accelerated(tau0, sigma, c.gamma_tilde_g)?, c))
        }
        Regime::Linear => {
            let c = constants(a);
            let tau_max = bound_linear(&c)?;
            println!("tau_max = {tau_max:e}");
            let tau = a.tau.unwrap_or(tau_max);
            Ok((StepSchedule::linear_rate(tau, c.gamma_tilde_g, c.gamma_tilde_fstar)?, c))
        }
        Regime::Potts => {
            let alpha = a.alpha.expect("required by the parser");
            let gamma = a.gamma.expect("required by the parser");
            let params = calc_params(alpha, gamma, a.p, &a.calc);
            let (t, c, d) = potts_steps(&params)?;
            println!("m_x = {:e}", d.m_x);
            println!("m_y = {:e}", d.m_y);
            println!("tau_locality = {:e}", d.tau_locality);
            println!("tau_dual = {:e}", d.tau_dual);
            Ok((StepSchedule::linear_rate(t.tau, c.gamma_tilde_g, c.gamma_tilde_fstar)?, c))
        }
    }
}

pub fn run(a: &StepsArgs) -> Result<bool> {
    let (schedule, c) = plan(a)?;
    if let Err(e) = c.validate() {
        eprintln!("warning: {e}");
    }
    let first: StepTriple = schedule.next(0);
    println!("{}", triple_lines(&first).join(", "));
    for (name, v) in c.ledger() {
        println!("{name} = {v:e}");
    }
    if !a.check_48 {
        return Ok(true);
    }
    let triples: Vec<StepTriple> = schedule.triples().take(a.check_n as usize).collect();
    let lo = triples.iter().map(|t| t.omega).fold(f64::INFINITY, f64::min);
    let hi = triples.iter().map(|t| t.omega).fold(0.0, f64::max);
    let report = check_48(&c, &triples, (lo, hi));
    print!("{report}");
    Ok(report.passed())
}
