//! Pro-social, equal and pro-ecological societies on one seeded random graph.
//!
//!     cargo run --release --example preset_suite [seed] [b]
//!
//! Without `b` the sensitivities are the seeded uniform draws and the run
//! reports how long consumption takes to settle. With a small uniform `b`
//! (try 0.005) the resource swings are the interesting part.

use commons_dyn::integrator::{Component, ConvergenceTracker};
use commons_dyn::scenarios::{Society, DEFAULT_EXCESS};
use commons_dyn::{equilibrium, integrate_with, Preset, ShiftedSystem};

fn main() -> commons_dyn::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let b: Option<f64> = args.next().map(|s| s.parse().expect("b"));

    let society = Society::standard_sized(seed)?;
    let start = society.initial_state(DEFAULT_EXCESS);
    let t_end = if b.is_some() { 2000.0 } else { 4000.0 };

    for kind in Preset::STANDARD {
        let mut cfg = society.config(kind)?;
        if let Some(b) = b {
            cfg = cfg.with_uniform_b(b);
        }
        let params = cfg.params()?;
        let eq = equilibrium(&params, &cfg.network)?;
        let system = ShiftedSystem::new(&params, &cfg.network, &eq)?;

        let mut settle = ConvergenceTracker::new(1e-3, Component::Consumption);
        let mut peak = 0.0f64;
        integrate_with(&system, &start, t_end, 0.01, |t, s, _| {
            settle.push(t, s);
            peak = peak.max(s.v.abs());
        })?;
        let mean_alpha = params.alpha().mean();
        println!(
            "{kind:>15}: delta {:>8.4}  mean alpha {mean_alpha:.4}  x0 {:.3}  settles at {:>9}  peak |v| {peak:.2}",
            cfg.delta,
            eq.x0,
            settle.finish().map_or("never".into(), |t| format!("{t:.0}")),
        );
    }
    Ok(())
}
