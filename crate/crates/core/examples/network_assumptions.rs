//! Build influence networks and check the structural assumptions.
//!
//!     cargo run --example network_assumptions

use commons_dyn::network::build_network;
use commons_dyn::scenarios::{balanced_theta, delta_parameterization, random_network};
use commons_dyn::{check_assumptions, AgentParams};

fn main() -> commons_dyn::Result<()> {
    // raw adjacency, normalised row by row on load
    let net = build_network(
        &[vec![0.0, 2.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]],
        true,
    )?;
    println!("W =\n{}", net.weights());

    // θ_i = ν_i/α_i must dominate the influence flowing into agent i
    let theta = balanced_theta(&net, 1.0)?;
    let (alpha, nu) = delta_parameterization(&theta, 1.0)?;
    let params = AgentParams::new(alpha, nu, vec![1.0; 3], vec![0.6, 0.5, 0.4])?;
    let report = check_assumptions(&net, &params)?;
    println!("balanced theta {theta:.4?}: all pass = {}", report.all_pass());

    // same network, uniform θ: agent 0 receives more influence than it can absorb
    let params = AgentParams::new(vec![0.5; 3], vec![0.5; 3], vec![1.0; 3], vec![0.5; 3])?;
    let report = check_assumptions(&net, &params)?;
    println!(
        "uniform theta: dominance {:?}, slack {:.4?}",
        report.social_dominance, report.details.dominance_slack
    );

    let big = random_network(25, 114, 7)?;
    println!(
        "random 25/114 graph: {} edges, strongly connected = {}",
        big.edge_count(),
        big.is_strongly_connected()
    );
    println!("{}", serde_json::to_string(&net).unwrap());
    Ok(())
}
