use anyhow::Result;
use gpdps::engine::solve_with;
use gpdps::io::Table;
use gpdps::nash::{manufacture, Grid, NashConfig, Profile};
use gpdps::{SolveOptions, StepTriple};

use crate::args::NashArgs;

/// Distances `‖(u^i, v^i) − (u*, u*)‖` for iterations `1..=iters`.
pub fn distances(a: &NashArgs, n: usize) -> Result<Vec<f64>> {
    let mut base = NashConfig::new(Grid::new(n)?);
    base.a = a.a;
    base.b = a.b;
    base.alpha1 = a.alpha;
    base.alpha2 = a.alpha;
    let m = manufacture(base, &Profile::smooth())?;
    let triple = StepTriple::new(a.tau, a.sigma, a.omega)?;
    let opts = SolveOptions::fixed(a.iters as usize).with_reference(m.solution());
    let (_, log) = solve_with(&m.problem, std::iter::repeat(triple), &opts, m.problem.zero_state())?;
    Ok(log.iter().map(|r| r.dist_to_ref.expect("reference is set")).collect())
}

pub fn run(a: &NashArgs, header: Vec<String>) -> Result<bool> {
    let columns: Vec<Vec<f64>> = a.sizes.iter().map(|&n| distances(a, n as usize)).collect::<Result<_>>()?;
    let names: Vec<String> =
        std::iter::once("iter".to_string()).chain(a.sizes.iter().map(|n| format!("n{n}"))).collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut table = Table::new(header, &name_refs);
    println!("{}", names.join("\t"));
    for i in 0..a.iters as usize {
        let row: Vec<f64> = columns.iter().map(|c| c[i]).collect();
        println!("{}\t{}", i + 1, row.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join("\t"));
        table.push(std::iter::once(Some((i + 1) as f64)).chain(row.into_iter().map(Some)).collect());
    }
    table.write(&a.csv)?;
    Ok(true)
}
