//! Spectral certificate for TᵀΘ + ΘT and Lyapunov descent along a run.
//!
//!     cargo run --example stability_certificate

use commons_dyn::scenarios::Society;
use commons_dyn::{
    descent_check, equilibrium, gram_matrix, integrate, spectral_certificate, Preset,
    ShiftedSystem,
};

fn main() -> commons_dyn::Result<()> {
    let society = Society::random(10, 30, 3)?;
    for kind in Preset::STANDARD {
        let cfg = society.config(kind)?;
        let params = cfg.params()?;
        let spec = spectral_certificate(&gram_matrix(&cfg.network, &params)?)?;
        println!(
            "{kind:>15}: psd {} | 1 in nullspace {} | rank deficiency {} | gershgorin {}",
            spec.psd, spec.one_in_nullspace, spec.rank_deficiency, spec.diagonally_dominant
        );
        let low: Vec<String> = spec.eigenvalues[..3].iter().map(|l| format!("{l:.3e}")).collect();
        println!("{:>15}  smallest eigenvalues {}", "", low.join(", "));

        let eq = equilibrium(&params, &cfg.network)?;
        let system = ShiftedSystem::new(&params, &cfg.network, &eq)?;
        let traj = integrate(&system, &society.initial_state(0.5), 100.0, 0.01)?;
        let descent = descent_check(&traj, &params, &eq);
        println!(
            "{:>15}  V: {:.3e} -> {:.3e}, monotone {}",
            "", descent.initial, descent.last, descent.monotone
        );
    }
    Ok(())
}
