//! Finite-horizon sustainability: constants, certificate, and a simulated check.
//!
//!     cargo run --example sustainability_certificate

use commons_dyn::network::build_network;
use commons_dyn::{
    box_invariance, certify, equilibrium, integrate, AgentParams, ShiftedState, ShiftedSystem,
    SustainabilityBox,
};

fn main() -> commons_dyn::Result<()> {
    let two = std::f64::consts::LN_2;
    let net = build_network(&[vec![0.0, 1.0], vec![1.0, 0.0]], false)?;
    let params = AgentParams::new(vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0, 1.0], vec![0.2, 0.4])?;
    let eq = equilibrium(&params, &net)?;

    for t_max in [0.5, 1.0] {
        let bx = SustainabilityBox::new(-two, two, -0.5, 0.5, t_max)?;
        let cert = certify(&params, &net, &eq, &bx, 0.0, &[0.0, 0.0])?;
        let c = &cert.constants;
        println!("t_max = {t_max}");
        println!("  beta {:.4}  C1 {:.4}  C2 {:.4}  xi {:.4?}", c.beta, c.c1, c.c2, c.xi);
        println!(
            "  feasible {}  |T|_1 = {}  bound {:?}  certified {}  binding xi_{}",
            cert.feasible, cert.t_norm, cert.t_norm_bound, cert.certified, cert.binding_index
        );
    }

    // not certified, but the condition is only sufficient: check by simulation
    let bx = SustainabilityBox::new(-two, two, -0.5, 0.5, 0.5)?;
    let system = ShiftedSystem::new(&params, &net, &eq)?;
    let start = ShiftedState::new(0.1, vec![0.05, 0.0]);
    let traj = integrate(&system, &start, bx.t_max, 0.001)?;
    println!("simulated from v=0.1: {:?}", box_invariance(&traj, &bx)?);
    Ok(())
}
