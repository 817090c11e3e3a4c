//! Equilibrium of a two-agent commons and the change to shifted coordinates.
//!
//!     cargo run --example equilibrium

use commons_dyn::network::build_network;
use commons_dyn::{equilibrium, from_shifted, to_shifted, AgentParams, OriginalState};

fn main() -> commons_dyn::Result<()> {
    let net = build_network(&[vec![0.0, 1.0], vec![1.0, 0.0]], false)?;
    let params = AgentParams::new(vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0, 1.0], vec![0.2, 0.4])?;

    let eq = equilibrium(&params, &net)?;
    println!("x0 = {:.6}, gamma0 = {:.6}", eq.x0, eq.gamma0);
    println!("y0 = {:.6?}", eq.y0.as_slice());
    println!("field residual at equilibrium = {:e}", eq.residual(&params, &net)?);

    // a depleted resource with one agent over-consuming
    let state = OriginalState {
        x: 0.15,
        y: nalgebra::DVector::from_vec(vec![0.6, 0.3]),
    };
    let shifted = to_shifted(&state, &eq)?;
    println!("v = ln(x/x0) = {:.6}, w = {:.6?}", shifted.v, shifted.w.as_slice());
    let back = from_shifted(&shifted, &eq)?;
    println!("round trip x = {:.6}", back.x);
    Ok(())
}
