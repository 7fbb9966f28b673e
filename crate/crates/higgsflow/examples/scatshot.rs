use higgsflow::flow::FlowOptions;
use higgsflow::hecke::{datum_at, kernel_map};
use higgsflow::linalg;
use higgsflow::scatter::{
    cosine_similarity, recover_slice_coords, reverse_trajectory_check, scatter, ScatterSchedule,
};
use higgsflow::slice::{build_critical, harmonic_h1};
use higgsflow::grid::TorusGrid;
use num_complex::Complex64 as C;
use std::time::Instant;

fn main() {
    linalg::set_threads(1);
    let grid = TorusGrid::new(32, C::i()).unwrap();
    let x = build_critical(&[1, -1], &[C::new(0.25, 0.0); 2], None, grid).unwrap();
    let basis = harmonic_h1(&x, (1, 0)).unwrap();
    let d = datum_at(&x, [0.25, 0.25]).unwrap();
    let img = kernel_map(&x, &basis, &[d], &[C::ONE], 4.0).unwrap();
    let nrm: f64 = img.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let coords: Vec<C> = img.iter().map(|c| c / nrm).collect();

    for eps in [1e-2f64, 5e-3, 2.5e-3] {
        let dx = basis.combination(&coords).unwrap().scaled(C::new(eps, 0.0));
        let t0 = Instant::now();
        let sched = ScatterSchedule::default();
        let res = scatter(&x, &dx, &sched).unwrap();
        println!("=== eps {eps}: converged {} in {} stages [{:.1?}] ===", res.converged, res.stages.len(), t0.elapsed());
        for st in &res.stages {
            println!(
                "  t={:.1} t'={:.3} s(t)={:?} supσ={:.3e} σ_step={:?} E(z)={:.8} zdist={:.3e} updist={:.3e}",
                st.t, st.t_prime, st.s_of_t.map(|v| format!("{v:.3}")), st.sup_sigma,
                st.sigma_step.map(|v| format!("{v:.3e}")), st.energy_at_z, st.z_dist, st.up_dist
            );
        }
        println!("  rate_fit: {:?} (expect ~ -4)", res.rate_fit);
        println!("  supσ/eps²: {:?}", res.stages.iter().map(|s| s.sup_sigma / (res.dx_sup * res.dx_sup)).map(|v| format!("{v:.2}")).collect::<Vec<_>>());

        if res.converged && eps == 1e-2 {
            let t0 = Instant::now();
            let report = reverse_trajectory_check(&x, &res).unwrap();
            println!(
                "  reverse: slope {:?} (expect {:.1}) monotone {} replay {:.2e} invariants {:.2e} pass {}  [{:.1?}]",
                report.slope, report.expected_slope, report.monotone_ok, report.replay_defect,
                report.invariant_defect, report.pass, t0.elapsed()
            );
            for (s, dist) in &report.distances {
                println!("    s={s:.2} dist={dist:.3e}");
            }
            let rec = recover_slice_coords(&x, &res, &basis).unwrap();
            let cos = cosine_similarity(&rec, &coords);
            println!("  recover cosine similarity: {cos:.6}");
        }
    }
}
