// scratch calibration harness (not part of the deliverable)
use std::io::Write;
use std::time::Instant;
use symnash::*;

fn main() {
    let g = generate(&GenSpec::new(2, 2009)).unwrap();
    println!("C = {:?}", g.c().entries());
    let mut cfg = RunConfig::default();
    cfg.tol_eq = 1e-3;
    cfg.max_steps = 100_000;
    let x0 = Strategy::uniform(2);
    let mut out = std::io::stdout().lock();
    let t0 = Instant::now();
    let mut k = 0usize;
    let res = integrate_with(&g, &x0, &cfg, |r| {
        if k % 400 == 0 {
            writeln!(
                out,
                "k={k} t={:9.3} x0={:.6} z={:?} gapz={:.4e} th={:.3e} lyap={:.8}",
                r.t, r.x.get(0), r.z.coords(), r.gap_z, r.theta, r.lyapunov
            )
            .unwrap();
            out.flush().unwrap();
        }
        k += 1;
        Ok(())
    })
    .unwrap();
    println!(
        "conv={} steps={} gap={:.3e} fail={} dt={:.2}s final_z={:?}",
        res.converged, res.steps, res.final_gap, res.solver_failures,
        t0.elapsed().as_secs_f64(), res.final_z.coords()
    );
}
