//! Integrate the shifted dynamics with RK4 and watch the Lyapunov function.
//!
//!     cargo run --example simulate

use commons_dyn::integrator::Component;
use commons_dyn::network::build_network;
use commons_dyn::stability::LyapunovFunction;
use commons_dyn::{integrate, AgentParams, ShiftedState, ShiftedSystem, DEFAULT_STEP};

fn main() -> commons_dyn::Result<()> {
    let net = build_network(&[vec![0.0, 1.0], vec![1.0, 0.0]], false)?;
    let params = AgentParams::new(vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0, 1.0], vec![0.2, 0.4])?;
    let (system, eq) = ShiftedSystem::checked(&params, &net)?;
    let lyap = LyapunovFunction::new(&params, &eq);

    let start = ShiftedState::new(0.5, vec![0.3, -0.2]);
    let traj = integrate(&system, &start, 60.0, DEFAULT_STEP)?;

    println!("{:>6} {:>12} {:>12} {:>12}", "t", "v", "|w|max", "V");
    for (t, s, _) in traj.samples().step_by(1000) {
        println!("{t:>6.1} {:>12.3e} {:>12.3e} {:>12.3e}", s.v, s.w.amax(), lyap.value(s));
    }
    for tol in [1e-2, 1e-3, 1e-4] {
        println!(
            "consumption within {tol:e} from t = {:?}",
            traj.convergence_time_of(tol, Component::Consumption)
        );
    }
    Ok(())
}
