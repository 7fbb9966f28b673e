use higgsflow::flow::{energy_dissipation_defect, energy_monotone, flow, FlowOptions, FlowStatus};
use higgsflow::hecke::{datum_at, kernel_map};
use higgsflow::higgs::ymh_energy;
use higgsflow::linalg;
use higgsflow::slice::{build_critical, classify_limit, harmonic_h1};
use higgsflow::grid::TorusGrid;
use num_complex::Complex64 as C;
use std::time::Instant;

fn main() {
    linalg::set_threads(1);
    let grid = TorusGrid::new(32, C::i()).unwrap();
    let x = build_critical(&[1, -1], &[C::new(0.25, 0.0); 2], None, grid).unwrap();
    let basis = harmonic_h1(&x, (1, 0)).unwrap();
    println!("dim H1 = {}", basis.dim);

    // one-point kernel class
    let d = datum_at(&x, [0.25, 0.25]).unwrap();
    let img = kernel_map(&x, &basis, &[d], &[C::ONE], 4.0).unwrap();
    println!("class coords: {:?}", img);
    let nrm: f64 = img.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let coords: Vec<C> = img.iter().map(|c| c / nrm).collect();
    let dx = basis.combination(&coords).unwrap().scaled(C::new(1e-2, 0.0));

    let y0 = x.pair.offset(&dx, 1.0);
    println!("E(y0) = {:.6}, E(x) = {:.6}", ymh_energy(&y0).unwrap(), ymh_energy(&x.pair).unwrap());

    let opts = FlowOptions { t_max: 80.0, record_every: 20, ..Default::default() };
    let t0 = Instant::now();
    let trace = flow(&y0, &opts).unwrap();
    println!(
        "flow: status {:?} t_final {:.2} steps {} E_final {:.3e} grad {:.3e}  [{:.1?}]",
        trace.status,
        trace.final_time(),
        trace.steps,
        trace.final_energy(),
        trace.grad_norms.last().unwrap(),
        t0.elapsed()
    );
    println!("monotone: {}", energy_monotone(&trace, 1e-9));
    println!("dissipation defect: {:.3e}", energy_dissipation_defect(&trace));
    println!("final spectrum: {:?}", trace.spectra.last().unwrap());
    println!("hol residuals: first {:.2e} last {:.2e}",
        trace.hol_residuals.first().unwrap(), trace.hol_residuals.last().unwrap());
    match classify_limit(&trace.final_pair) {
        Ok(t) => println!("HN type: {:?} (rounding {:.2e})", t.degrees, t.rounding_error),
        Err(e) => println!("classify error: {e}"),
    }
}
