use gpdps::engine::{solve_with, step};
use gpdps::io::{encode_pgm, parse_pgm, PgmFormat};
use gpdps::nash::{manufacture, Grid, NashConfig, Profile};
use gpdps::potts::{PottsConfig, PottsNorm, PottsProblem};
use gpdps::schedules::{potts_steps, PottsStepParams, StepTriple};
use gpdps::synthetic::gen_synthetic;
use gpdps::SolveOptions;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn manufactured_equilibrium_is_a_fixed_point(n in 3usize..24, tau in 0.1f64..1.5, sigma in 0.1f64..2.0, omega in 0.5f64..1.5) {
        let m = manufacture(NashConfig::new(Grid::new(n).unwrap()), &Profile::smooth()).unwrap();
        let sol = m.solution();
        let next = step(&m.problem, StepTriple::new(tau, sigma, omega).unwrap(), &sol).unwrap();
        let scale = sol.x.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(next.distance(&sol, 1.0) <= 1e-12 * scale.max(1.0));
    }
}

#[test]
fn pgm_round_trip_then_denoise_lowers_objective() {
    let f = gen_synthetic(24, 20, 5, 4, 0.05).unwrap();
    let bytes = encode_pgm(&f, PgmFormat::BINARY16, &["synthetic".into()]);
    let (g, maxval) = parse_pgm(&bytes).unwrap();
    assert_eq!((g.n1, g.n2, maxval), (24, 20, 65535));
    let worst = f.values.iter().zip(&g.values).map(|(a, b)| (a.clamp(0.0, 1.0) - b).abs()).fold(0.0, f64::max);
    assert!(worst <= 0.5 / 65535.0 + 1e-12, "{worst}");

    for norm in [PottsNorm::Anisotropic, PottsNorm::Isotropic] {
        let problem = PottsProblem::new(PottsConfig::new(g.clone(), 1.0, 1e-2, norm)).unwrap();
        let (triple, _, _) = potts_steps(&PottsStepParams::new(1.0, 1e-2, norm)).unwrap();
        let opts = SolveOptions::fixed(2_000).with_stride(500).with_objective();
        let (_, log) = solve_with(&problem, std::iter::repeat(triple), &opts, problem.initial_state()).unwrap();
        let start = problem.objective(&g);
        let end = log.last().unwrap().objective.unwrap();
        assert!(end < start, "{norm}: {start} -> {end}");
    }
}
