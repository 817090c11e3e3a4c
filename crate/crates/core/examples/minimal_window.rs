//! Minimal sustainability windows for three agent sensitivities.
//!
//!     cargo run --release --example minimal_window

use commons_dyn::scenarios::Society;
use commons_dyn::sustainability::equality_residual;
use commons_dyn::{box_invariance, equilibrium, integrate, minimal_window, Preset, ShiftedSystem};

fn main() -> commons_dyn::Result<()> {
    let society = Society::standard_sized(11)?;
    let start = society.initial_state(0.1);
    let w0: Vec<f64> = start.w.iter().copied().collect();

    println!("{:>6} {:>5} {:>9} {:>9} {:>9} {:>9} {:>10} {:>10}", "b", "t_max", "v_min", "v_max", "d_min", "d_max", "area", "residual");
    for (b, t_max) in [(0.025, 1.0), (0.005, 2.0), (0.001, 3.0)] {
        let cfg = society.config(Preset::Equal)?.with_uniform_b(b);
        let params = cfg.params()?;
        let eq = equilibrium(&params, &cfg.network)?;
        let bx = minimal_window(&params, &cfg.network, &eq, t_max, start.v, &w0)?;
        let resid = equality_residual(&params, &cfg.network, &eq, &bx, start.v, &w0)?;
        println!(
            "{b:>6} {t_max:>5} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>10.4} {resid:>10.1e}",
            bx.v_min, bx.v_max, bx.d_min, bx.d_max, bx.area()
        );

        let system = ShiftedSystem::new(&params, &cfg.network, &eq)?;
        let traj = integrate(&system, &start, t_max, 0.001)?;
        let verdict = box_invariance(&traj, &bx)?;
        let (lo, hi) = traj
            .states
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.v), hi.max(s.v)));
        println!("       trajectory v in [{lo:.4}, {hi:.4}], inside window: {}", verdict.sustainable);
    }
    Ok(())
}
