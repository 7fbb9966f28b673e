use higgsflow::flow::FlowOptions;
use higgsflow::hecke::{flowline_experiment, ClassRule, ExperimentConfig};
use higgsflow::linalg;
use higgsflow::scatter::ScatterSchedule;
use higgsflow::grid::TorusGrid;
use num_complex::Complex64 as C;
use std::time::Instant;

fn main() {
    linalg::set_threads(1);
    let grid = TorusGrid::new(32, C::i()).unwrap();
    let cfg = ExperimentConfig {
        grid,
        degrees: vec![2, -2],
        higgs_consts: vec![C::new(0.25, 0.0); 2],
        holonomies: vec![[0.0, 0.0]; 2],
        points: vec![[0.25, 0.25]],
        class_rule: ClassRule::Secant { level: 1 },
        epsilon: 1e-2,
        schedule: ScatterSchedule {
            t_values: (1..=12).map(|i| 0.5 * i as f64).collect(),
            sigma_cauchy_tol: 1e-12,
            max_stage: 12,
            flow_dt: None,
            n_reverse_samples: 9,
        },
        flow: FlowOptions { t_max: 120.0, record_every: 25, ..Default::default() },
        bump_width: 4.0,
        check_shifted: true,
    };
    let t0 = Instant::now();
    match flowline_experiment(&cfg) {
        Ok(v) => {
            println!("pass: {}  [{:.1?}]", v.pass, t0.elapsed());
            for (name, ok, detail) in &v.criteria {
                println!("  [{}] {name}: {detail}", if *ok { "ok" } else { "FAIL" });
            }
            if let Some(m) = &v.measured {
                println!("measured spectrum {:?}", m.spectrum);
            }
        }
        Err(e) => println!("ERROR: {e}  [{:.1?}]", t0.elapsed()),
    }
}
