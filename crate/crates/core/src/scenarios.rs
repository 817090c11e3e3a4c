//! Experimental configurations: δ-scaled societies built from one
//! sociability vector, the reference 25-agent θ, seeded random networks and
//! the pro-social / pro-ecological / equal presets.
//!
//! All randomness comes from ChaCha8 seeded with a 64-bit integer. Each
//! purpose (graph, parameters, initial state) draws from its own ChaCha
//! stream so changing one never shifts another. This generator choice is
//! part of the reproducibility contract and does not change.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{equilibrium, ShiftedState};
use crate::error::{Error, Result};
use crate::network::{build_network, check_assumptions, AgentParams, Network};

/// Sociability vector of the reference 25-agent experiment.
pub const REFERENCE_THETA: [f64; 25] = [
    0.1826, 0.3296, 0.2313, 0.3454, 0.1987, 0.1923, 0.1642, 0.1989, 0.1182, 0.2198, 0.1124,
    0.0734, 0.1592, 0.3608, 0.1913, 0.1810, 0.2098, 0.1206, 0.3210, 0.0606, 0.0597, 0.1302,
    0.0808, 0.1336, 0.1638,
];

/// Agents and edges of the reference random graph.
pub const STANDARD_AGENTS: usize = 25;
pub const STANDARD_EDGES: usize = 114;

/// Scale of the pro-social preset. With the reference θ it gives
/// `ᾱ = 0.0644`, `ν̄ = 0.9356`.
pub const PRO_SOCIAL_DELTA: f64 = 100.0;
/// Scale of the pro-ecological preset, `ᾱ ≈ 0.982` on the reference θ.
pub const PRO_ECOLOGICAL_DELTA: f64 = 0.1;
/// Maximum initial consumption excess used by the preset suite.
pub const DEFAULT_EXCESS: f64 = 0.1;

/// Draws before giving up on a strongly connected random graph.
pub const MAX_GRAPH_DRAWS: usize = 10_000;
/// Draws of `ρ` before giving up on a feasible equilibrium.
pub const MAX_RHO_DRAWS: usize = 100;

const GRAPH_STREAM: u64 = 0;
const PARAM_STREAM: u64 = 1;
const INITIAL_STREAM: u64 = 2;

/// A ChaCha8 generator for `seed` on a purpose-specific stream.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn reference_theta() -> Vec<f64> {
    REFERENCE_THETA.to_vec()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `α_i = 1/(1+δθ_i)`, `ν_i = δθ_i/(1+δθ_i)`, so `ν_i/α_i = δθ_i`.
pub fn delta_parameterization(theta: &[f64], delta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::NonPositiveDelta(delta));
    }
    if let Some((index, &value)) = theta
        .iter()
        .enumerate()
        .find(|(_, &t)| !(t > 0.0 && t.is_finite()))
    {
        return Err(Error::NonPositiveTheta { index, value });
    }
    Ok(theta
        .iter()
        .map(|&t| {
            let s = delta * t;
            (1.0 / (1.0 + s), s / (1.0 + s))
        })
        .unzip())
}

/// Seeded directed graph with `m` edges drawn uniformly without
/// replacement, redrawn until strongly connected. Each agent spreads unit
/// weight evenly over the neighbours it listens to.
pub fn random_network(n: usize, m: usize, seed: u64) -> Result<Network> {
    if n < 2 {
        return Err(Error::TooFewAgents(n));
    }
    if m < n {
        return Err(Error::TooFewEdges { n, m });
    }
    let max = n * (n - 1);
    if m > max {
        return Err(Error::TooManyEdges { m, max });
    }
    let mut rng = rng_for(seed, GRAPH_STREAM);
    for _ in 0..MAX_GRAPH_DRAWS {
        let mut adj = vec![vec![0.0; n]; n];
        for k in index::sample(&mut rng, max, m) {
            let i = k / (n - 1);
            let mut j = k % (n - 1);
            if j >= i {
                j += 1;
            }
            adj[i][j] = 1.0;
        }
        if adj.iter().any(|row| row.iter().all(|&w| w == 0.0)) {
            continue;
        }
        let net = build_network(&adj, true)?;
        if net.is_strongly_connected() {
            return Ok(net);
        }
    }
    Err(Error::ConnectivityResampleExhausted(MAX_GRAPH_DRAWS))
}

/// Sociabilities satisfying social dominance on `net`, scaled to the given
/// mean.
///
/// Summed over agents, the dominance inequalities `θ_i ≥ ∑_k ω_ki θ_k` add
/// up to an identity because each row of `W` sums to one. So they can only
/// all hold with equality: `θ` must be proportional to the stationary
/// distribution of `W`.
pub fn balanced_theta(net: &Network, target_mean: f64) -> Result<Vec<f64>> {
    if !(target_mean > 0.0) {
        return Err(Error::NonPositiveTheta {
            index: 0,
            value: target_mean,
        });
    }
    let pi = net.stationary_distribution()?;
    let scale = target_mean * net.n() as f64;
    let theta: Vec<f64> = pi.iter().map(|p| p * scale).collect();
    if let Some((index, &value)) = theta.iter().enumerate().find(|(_, &t)| !(t > 0.0)) {
        return Err(Error::NonPositiveTheta { index, value });
    }
    Ok(theta)
}

/// `n` draws from `(0, 1]`.
pub fn unit_draws(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| 1.0 - rng.random::<f64>()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    ProSocial,
    ProEcological,
    Equal,
    Custom,
}

impl Preset {
    pub const STANDARD: [Preset; 3] = [Preset::ProSocial, Preset::Equal, Preset::ProEcological];

    /// Scaling factor for this preset. `Equal` uses `1/θ̄`, which puts the
    /// typical agent at `δθ_i ≈ 1`, i.e. `α_i ≈ ν_i`. `Custom` has no fixed
    /// value.
    pub fn delta(self, theta: &[f64]) -> Option<f64> {
        match self {
            Preset::ProSocial => Some(PRO_SOCIAL_DELTA),
            Preset::ProEcological => Some(PRO_ECOLOGICAL_DELTA),
            Preset::Equal => Some(1.0 / mean(theta)),
            Preset::Custom => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::ProSocial => "pro_social",
            Preset::ProEcological => "pro_ecological",
            Preset::Equal => "equal",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "pro_social" => Ok(Preset::ProSocial),
            "pro_ecological" => Ok(Preset::ProEcological),
            "equal" => Ok(Preset::Equal),
            "custom" => Ok(Preset::Custom),
            other => Err(Error::InvalidArgument(format!("unknown preset {other:?}"))),
        }
    }
}

/// A complete model instance described by sociabilities and a scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub label: Preset,
    pub delta: f64,
    pub seed: u64,
    pub theta: Vec<f64>,
    pub b: Vec<f64>,
    pub rho: Vec<f64>,
    pub network: Network,
}

impl ScenarioConfig {
    pub fn params(&self) -> Result<AgentParams> {
        let (alpha, nu) = delta_parameterization(&self.theta, self.delta)?;
        AgentParams::new(alpha, nu, self.b.clone(), self.rho.clone())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Same scenario with every sensitivity set to `b`.
    pub fn with_uniform_b(mut self, b: f64) -> Self {
        self.b.iter_mut().for_each(|x| *x = b);
        self
    }
}

fn scenario(
    label: Preset,
    delta: f64,
    theta: &[f64],
    net: &Network,
    b: &[f64],
    rho: &[f64],
) -> Result<ScenarioConfig> {
    let cfg = ScenarioConfig {
        label,
        delta,
        seed: 0,
        theta: theta.to_vec(),
        b: b.to_vec(),
        rho: rho.to_vec(),
        network: net.clone(),
    };
    let params = cfg.params()?;
    let report = check_assumptions(net, &params)?;
    if !report.social_dominance_all {
        return Err(Error::AssumptionThreeViolated(report.details.violating_agents));
    }
    Ok(cfg)
}

/// Build a named preset; `theta` must satisfy social dominance on `net`.
pub fn preset(
    kind: Preset,
    theta: &[f64],
    net: &Network,
    b: &[f64],
    rho: &[f64],
) -> Result<ScenarioConfig> {
    let delta = kind.delta(theta).ok_or_else(|| {
        Error::InvalidArgument("custom scenarios need an explicit delta".into())
    })?;
    scenario(kind, delta, theta, net, b, rho)
}

/// A custom scenario with an explicit scale.
pub fn custom(
    delta: f64,
    theta: &[f64],
    net: &Network,
    b: &[f64],
    rho: &[f64],
) -> Result<ScenarioConfig> {
    scenario(Preset::Custom, delta, theta, net, b, rho)
}

/// One seeded society shared by the three standard presets.
#[derive(Debug, Clone, PartialEq)]
pub struct Society {
    pub seed: u64,
    pub network: Network,
    pub theta: Vec<f64>,
    pub b: Vec<f64>,
    pub rho: Vec<f64>,
}

impl Society {
    /// Random `n`-agent, `m`-edge society: balanced `θ` with the reference
    /// mean, `b` and `ρ` uniform on `(0, 1]`, `ρ` redrawn until every standard
    /// preset has a feasible equilibrium.
    pub fn random(n: usize, m: usize, seed: u64) -> Result<Self> {
        let network = random_network(n, m, seed)?;
        let theta = balanced_theta(&network, mean(&REFERENCE_THETA))?;
        let mut rng = rng_for(seed, PARAM_STREAM);
        let b = unit_draws(&mut rng, n);
        for _ in 0..MAX_RHO_DRAWS {
            let rho = unit_draws(&mut rng, n);
            let society = Society {
                seed,
                network: network.clone(),
                theta: theta.clone(),
                b: b.clone(),
                rho,
            };
            if society.all_feasible() {
                return Ok(society);
            }
        }
        Err(Error::SamplingExhausted {
            what: "scarcity thresholds with a feasible equilibrium",
            attempts: MAX_RHO_DRAWS,
        })
    }

    /// The 25-agent, 114-edge setting of the reference experiments.
    pub fn standard_sized(seed: u64) -> Result<Self> {
        Self::random(STANDARD_AGENTS, STANDARD_EDGES, seed)
    }

    fn all_feasible(&self) -> bool {
        Preset::STANDARD.iter().all(|&k| {
            self.config(k)
                .and_then(|c| equilibrium(&c.params()?, &c.network))
                .is_ok()
        })
    }

    pub fn config(&self, kind: Preset) -> Result<ScenarioConfig> {
        Ok(preset(kind, &self.theta, &self.network, &self.b, &self.rho)?.with_seed(self.seed))
    }

    pub fn n(&self) -> usize {
        self.network.n()
    }

    /// Seeded starting point: `v(0) = 0` and every agent consuming above its
    /// equilibrium level by a draw from `[0, max_excess)`.
    pub fn initial_state(&self, max_excess: f64) -> ShiftedState {
        initial_excess(self.seed, self.n(), max_excess)
    }
}

/// `v(0) = 0` and `w_i(0)` drawn from `[0, max_excess)` on the seed's
/// initial-state stream.
pub fn initial_excess(seed: u64, n: usize, max_excess: f64) -> ShiftedState {
    let mut rng = rng_for(seed, INITIAL_STREAM);
    let w: Vec<f64> = (0..n).map(|_| max_excess * rng.random::<f64>()).collect();
    ShiftedState::new(0.0, w)
}
