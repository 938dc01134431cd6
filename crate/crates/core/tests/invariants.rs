use std::sync::Arc;

use lakevortex::elliptic::{assemble_operator, BoundaryFlux};
use lakevortex::exec::Exec;
use lakevortex::field::Field;
use lakevortex::geometry::{build_lake, Lake};
use lakevortex::nonlinearity::VorticityFunction;
use lakevortex::oracle::brute_force_oracle;
use lakevortex::variational::{bathtub, energy, mass, solve_vortex, AdmissibleParams, Init, Problem, SolveOptions};
use proptest::prelude::*;

fn small_lake() -> Arc<Lake> {
    Arc::new(build_lake("disk_interior_max_b", 20).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bathtub_meets_mass_and_bounds(
        a in -1.0f64..1.0, b in -1.0f64..1.0, c in 0.0f64..2.0, eps in 0.2f64..0.6, delta in 0.2f64..1.0,
    ) {
        let lake = small_lake();
        let vf = VorticityFunction::JumpLinear { c: 0.5 };
        let params = AdmissibleParams { eps, delta, kappa0: 1.0, lambda: 50.0 };
        let psi = Field::from_fn(&lake, |p| a * p[0] + b * p[1] - c * (p[0] * p[0] + p[1] * p[1]));
        let bt = bathtub(&lake, &params, &vf, &psi).unwrap();
        let cap = params.cap();
        for &k in &lake.interior {
            prop_assert!(bt.zeta[k] >= 0.0 && bt.zeta[k] <= cap * (1.0 + 1e-12));
        }
        let m = mass(&lake, &bt.zeta);
        prop_assert!((m - params.target_mass()).abs() <= 1e-8 * params.target_mass());
    }

    #[test]
    fn k_is_positive_and_symmetric(cx in -0.5f64..0.5, cy in -0.5f64..0.5, r in 0.1f64..0.4, s in 0.5f64..3.0) {
        let lake = small_lake();
        let op = assemble_operator(Arc::clone(&lake)).unwrap();
        let z1 = Field::from_fn(&lake, |p| if (p[0] - cx).hypot(p[1] - cy) < r { 1.0 } else { 0.0 });
        let z2 = Field::from_fn(&lake, |p| (s * p[0]).cos() + 1.0);
        let k1 = op.apply_k(&z1).unwrap();
        let k2 = op.apply_k(&z2).unwrap();
        for &k in &lake.interior {
            prop_assert!(k1[k] >= -1e-14 && k2[k] >= -1e-14);
        }
        let u = z1.dot_nu(&k2, &lake);
        let v = z2.dot_nu(&k1, &lake);
        prop_assert!((u - v).abs() <= 1e-10 * u.abs().max(v.abs()).max(1e-300));
    }

    #[test]
    fn solver_dominates_quantized_oracle(d0 in 0.5f64..1.5, d1 in 0.5f64..1.5, lambda in 3.0f64..6.0) {
        let lake = Arc::new(Lake::tiny_rect(2, 1, 0.5, Some(vec![d0, d1])).unwrap());
        let op = assemble_operator(lake).unwrap();
        let q = op.solve_background(&BoundaryFlux::Zero).unwrap();
        let vf = VorticityFunction::Power { p: 2.0 };
        let params = AdmissibleParams { eps: 1.0, delta: 1.0, kappa0: 1.0, lambda };
        let pr = Problem::new(&op, &q, params, &vf).unwrap();
        let oracle = brute_force_oracle(&pr, 8, Exec::Sequential).unwrap();
        let st = solve_vortex(&pr, &Init::default(), &SolveOptions::default()).unwrap();
        prop_assert!(st.energy.total >= oracle.energy - oracle.gap);
        prop_assert!((energy(&pr, &oracle.zeta).unwrap().total - oracle.energy).abs() < 1e-10);
        prop_assert_eq!(st.ascent_violations, 0);
    }
}

#[test]
fn execution_modes_agree() {
    let lake = Arc::new(build_lake("disk_interior_max_b", 40).unwrap());
    let op = assemble_operator(lake).unwrap();
    let q = op.solve_background(&BoundaryFlux::Cosine { amplitude: 0.015 }).unwrap();
    let vf = VorticityFunction::JumpLinear { c: 0.5 };
    let params = AdmissibleParams { eps: 0.3, delta: 1.0 / (1.0f64 / 0.3).ln(), kappa0: 1.0, lambda: 50.0 };
    let pr = Problem::new(&op, &q, params, &vf).unwrap();
    let seq = solve_vortex(&pr, &Init::default(), &SolveOptions { exec: Exec::Sequential, ..Default::default() }).unwrap();
    let par = solve_vortex(&pr, &Init::default(), &SolveOptions { exec: Exec::Parallel, ..Default::default() }).unwrap();
    assert_eq!(seq.zeta, par.zeta);
    assert_eq!(seq.energy_trace, par.energy_trace);
}
