use higgsflow::bundle::{dbar_kernel_report, LineBundle};
use higgsflow::grid::TorusGrid;
use higgsflow::linalg;
use higgsflow::slice::{build_critical, harmonic_h1, slice_residual};
use num_complex::Complex64 as C;
use std::time::Instant;

fn main() {
    linalg::set_threads(1);
    let n = 32usize;
    let grid = TorusGrid::new(n, C::i()).unwrap();

    println!("=== dbar kernel reports (n = {n}, order {}) ===", grid.stencil_order);
    let t0 = Instant::now();
    for m in -3i64..=3 {
        let rep = dbar_kernel_report(&grid, LineBundle::trivial(m), 1e-6).unwrap();
        let expected = if m > 0 { m as usize } else if m == 0 { 1 } else { 0 };
        println!(
            "m={m:+}: resolved={} (want {expected}) tiny={} σ_low={:?} rough={:?}",
            rep.resolved,
            rep.tiny,
            rep.svals_low.iter().map(|s| format!("{s:.1e}")).collect::<Vec<_>>(),
            rep.roughness.iter().map(|s| format!("{s:.1e}")).collect::<Vec<_>>()
        );
    }
    println!("kernel table time: {:.1?}", t0.elapsed());

    println!("=== harmonic H1 ===");
    for (degs, n_grid) in [
        (vec![1i64, -1], 32usize),
        (vec![2, -2], 32),
        (vec![3, -1], 32),
        (vec![3, -1], 48),
    ] {
        let t0 = Instant::now();
        let g = TorusGrid::new(n_grid, C::i()).unwrap();
        let x = build_critical(&degs, &[C::new(0.25, 0.0); 2], None, g).unwrap();
        match harmonic_h1(&x, (1, 0)) {
            Ok(basis) => {
                // measured slice-equation residuals of the basis
                let mut worst = (0.0f64, 0.0f64);
                for b in &basis.basis {
                    let (h, o) = slice_residual(&x, b).unwrap();
                    worst.0 = worst.0.max(h);
                    worst.1 = worst.1.max(o);
                }
                println!(
                    "degs {degs:?} n={n_grid}: dim={} cluster σ: {:?} residuals (hol={:.1e}, orth={:.1e})  [{:.1?}]",
                    basis.dim,
                    basis.kernel_sigmas.iter().map(|s| format!("{s:.1e}")).collect::<Vec<_>>(),
                    worst.0, worst.1,
                    t0.elapsed()
                );
            }
            Err(e) => println!("degs {degs:?} n={n_grid}: ERROR {e}"),
        }
    }

    let g = TorusGrid::new(32, C::i()).unwrap();
    let x = build_critical(&[1, -1], &[C::new(0.3, 0.0), C::new(-0.2, 0.1)], None, g).unwrap();
    match harmonic_h1(&x, (1, 0)) {
        Ok(b) => println!("distinct consts: dim={}", b.dim),
        Err(e) => println!("distinct consts: ERROR {e}"),
    }
}
