//! Agent networks, per-agent parameters and the structural checks that the
//! stability and sustainability results rely on.
//!
//! Influence weights `ω_ij` form a row-stochastic matrix with zero diagonal:
//! row `i` says how strongly agent `i` listens to each neighbour `j`. The
//! interaction matrix `T = I - W` has rows summing to zero.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on each row sum of the weight matrix.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Tolerance on `α_i + ν_i = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Slack allowed in the social-dominance inequality.
pub const DOMINANCE_SLACK: f64 = 1e-12;
/// Condition numbers at or above this are treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Margin by which `1ᵀy₀` must stay below 1.
pub const EQUILIBRIUM_MARGIN: f64 = 1e-12;

/// A directed, weighted influence network with row-stochastic weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    weights: DMatrix<f64>,
}

impl Network {
    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    /// `ω_ij`: influence of agent `j` on agent `i`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Row-major copy of the weights.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.weights
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.weights.row(i).iter().filter(|&&w| w > 0.0).count()
    }

    pub fn edge_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }

    /// Whether every column also sums to one.
    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        self.weights
            .column_iter()
            .all(|c| (c.sum() - 1.0).abs() <= tol)
    }

    /// Strong connectivity of the influence digraph (edge `j -> i` whenever
    /// `ω_ij > 0`), checked by forward and reverse reachability from agent 0.
    pub fn is_strongly_connected(&self) -> bool {
        let (fwd, rev) = self.reachability_from_first();
        fwd.iter().chain(rev.iter()).all(|&r| r)
    }

    fn reachability_from_first(&self) -> (Vec<bool>, Vec<bool>) {
        let n = self.n();
        let w = &self.weights;
        // influenced-by: j reaches i when ω_ij > 0
        let forward = reach(n, |j, i| w[(i, j)] > 0.0);
        let reverse = reach(n, |i, j| w[(i, j)] > 0.0);
        (forward, reverse)
    }

    /// Stationary distribution `π` of the weight matrix (`πᵀW = πᵀ`,
    /// `∑π = 1`). For a strongly connected network it is unique and positive.
    pub fn stationary_distribution(&self) -> Result<DVector<f64>> {
        let n = self.n();
        // (Wᵀ - I) π = 0 with the last equation replaced by ∑π = 1
        let mut m: DMatrix<f64> = self.weights.transpose() - DMatrix::identity(n, n);
        for j in 0..n {
            m[(n - 1, j)] = 1.0;
        }
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        let lu = m.clone().lu();
        let pi = lu.solve(&rhs).ok_or_else(|| {
            Error::InvalidArgument("stationary distribution is not unique".into())
        })?;
        // one step of iterative refinement keeps the residual at round-off
        let resid = self.weights.transpose() * &pi - &pi;
        let mut r = -resid;
        r[n - 1] = 1.0 - pi.sum();
        let correction = lu.solve(&r).unwrap_or_else(|| DVector::zeros(n));
        Ok(pi + correction)
    }
}

fn reach(n: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if !seen[v] && edge(u, v) {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// On-disk form of a network.
///
/// `normalized: true` declares the weights already row-stochastic; `false`
/// asks for each row to be divided by its sum on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub n: usize,
    pub weights: Vec<Vec<f64>>,
    pub normalized: bool,
}

impl From<&Network> for NetworkFile {
    fn from(net: &Network) -> Self {
        NetworkFile {
            n: net.n(),
            weights: net.to_rows(),
            normalized: true,
        }
    }
}

impl TryFrom<NetworkFile> for Network {
    type Error = Error;

    fn try_from(file: NetworkFile) -> Result<Self> {
        if file.weights.len() != file.n {
            return Err(Error::DimensionMismatch {
                what: "network rows",
                expected: file.n,
                found: file.weights.len(),
            });
        }
        build_network(&file.weights, !file.normalized)
    }
}

impl Serialize for Network {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NetworkFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Network {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = NetworkFile::deserialize(d)?;
        Network::try_from(file).map_err(serde::de::Error::custom)
    }
}

/// Validate raw weights and build a [`Network`], optionally normalising rows.
pub fn build_network(raw: &[Vec<f64>], normalize: bool) -> Result<Network> {
    let n = raw.len();
    for row in raw {
        if row.len() != n {
            return Err(Error::NonSquare {
                rows: n,
                cols: row.len(),
            });
        }
    }
    if n < 2 {
        return Err(Error::TooFewAgents(n));
    }
    for (i, row) in raw.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFiniteWeight { row: i, col: j });
            }
            if w < 0.0 {
                return Err(Error::NegativeWeight {
                    row: i,
                    col: j,
                    value: w,
                });
            }
        }
        if row[i] != 0.0 {
            return Err(Error::NonzeroDiagonal {
                index: i,
                value: row[i],
            });
        }
    }
    let mut weights = DMatrix::from_fn(n, n, |i, j| raw[i][j]);
    for i in 0..n {
        let sum: f64 = weights.row(i).sum();
        if sum <= 0.0 {
            return Err(Error::ZeroOutDegreeRow { row: i });
        }
        if normalize {
            weights.row_mut(i).unscale_mut(sum);
        } else if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::RowSumMismatch { row: i, sum });
        }
    }
    Ok(Network { weights })
}

/// `T = I - W`: unit diagonal, `-ω_ij` off the diagonal.
pub fn interaction_matrix(net: &Network) -> DMatrix<f64> {
    let n = net.n();
    DMatrix::identity(n, n) - net.weights()
}

/// Induced 1-norm: the largest absolute column sum.
pub fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Per-agent model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct AgentParams {
    alpha: DVector<f64>,
    nu: DVector<f64>,
    b: DVector<f64>,
    rho: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    alpha: Vec<f64>,
    nu: Vec<f64>,
    b: Vec<f64>,
    rho: Vec<f64>,
}

impl TryFrom<RawParams> for AgentParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        AgentParams::new(raw.alpha, raw.nu, raw.b, raw.rho)
    }
}

impl From<AgentParams> for RawParams {
    fn from(p: AgentParams) -> Self {
        RawParams {
            alpha: p.alpha.iter().copied().collect(),
            nu: p.nu.iter().copied().collect(),
            b: p.b.iter().copied().collect(),
            rho: p.rho.iter().copied().collect(),
        }
    }
}

impl AgentParams {
    /// Ecological weights `alpha`, social weights `nu`, sensitivities `b` and
    /// scarcity thresholds `rho`, one entry per agent.
    pub fn new(alpha: Vec<f64>, nu: Vec<f64>, b: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        let n = alpha.len();
        for (what, len) in [("nu", nu.len()), ("b", b.len()), ("rho", rho.len())] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: len,
                });
            }
        }
        let bad = |name, index, value, reason| {
            Err(Error::InvalidParameter {
                name,
                index,
                value,
                reason,
            })
        };
        for i in 0..n {
            if !(alpha[i] > 0.0 && alpha[i] <= 1.0) {
                return bad("alpha", i, alpha[i], "must lie in (0, 1]");
            }
            if !(nu[i] >= 0.0 && nu[i] < 1.0) {
                return bad("nu", i, nu[i], "must lie in [0, 1)");
            }
            if (alpha[i] + nu[i] - 1.0).abs() > WEIGHT_SUM_TOL {
                return bad("nu", i, nu[i], "alpha + nu must equal 1");
            }
            if !(b[i] > 0.0 && b[i].is_finite()) {
                return bad("b", i, b[i], "must be positive");
            }
            if !(rho[i] > 0.0 && rho[i].is_finite()) {
                return bad("rho", i, rho[i], "must be positive");
            }
        }
        Ok(AgentParams {
            alpha: DVector::from_vec(alpha),
            nu: DVector::from_vec(nu),
            b: DVector::from_vec(b),
            rho: DVector::from_vec(rho),
        })
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn nu(&self) -> &DVector<f64> {
        &self.nu
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn rho(&self) -> &DVector<f64> {
        &self.rho
    }

    /// Sociability `θ_i = ν_i / α_i`.
    pub fn theta(&self) -> DVector<f64> {
        self.nu.component_div(&self.alpha)
    }

    /// Same agents with every sensitivity replaced by `b`.
    pub fn with_uniform_b(&self, b: f64) -> Result<Self> {
        let mut p = self.clone();
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "b",
                index: 0,
                value: b,
                reason: "must be positive",
            });
        }
        p.b.fill(b);
        Ok(p)
    }

    pub(crate) fn check_dim(&self, net: &Network) -> Result<()> {
        if self.n() != net.n() {
            return Err(Error::DimensionMismatch {
                what: "agent parameters",
                expected: net.n(),
                found: self.n(),
            });
        }
        Ok(())
    }
}

/// Diagnostic values behind an [`AssumptionReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionDetails {
    /// Largest `|∑_j ω_ij - 1|` over rows.
    pub max_row_sum_error: f64,
    /// Agents not reachable from agent 0 along influence edges.
    pub unreachable_forward: Vec<usize>,
    /// Agents that cannot reach agent 0 along influence edges.
    pub unreachable_reverse: Vec<usize>,
    /// `θ_i - ∑_{k≠i} ω_ki θ_k` per agent.
    pub dominance_slack: Vec<f64>,
    /// Agents whose social-dominance inequality fails (0-based).
    pub violating_agents: Vec<usize>,
    /// 2-norm condition number of `A11ᵀ + VT`.
    pub condition_number: f64,
    /// `1ᵀy₀` when the equilibrium system is solvable.
    pub total_consumption: Option<f64>,
}

/// Outcome of the three structural checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub row_stochastic: bool,
    pub strongly_connected: bool,
    pub social_dominance: Vec<bool>,
    pub social_dominance_all: bool,
    pub equilibrium_feasible: bool,
    pub details: AssumptionDetails,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.row_stochastic
            && self.strongly_connected
            && self.social_dominance_all
            && self.equilibrium_feasible
    }
}

/// `A11ᵀ + VT`, the matrix whose inverse defines the equilibrium consumption.
pub(crate) fn equilibrium_matrix(net: &Network, params: &AgentParams) -> DMatrix<f64> {
    let n = net.n();
    let t = interaction_matrix(net);
    DMatrix::from_fn(n, n, |i, j| params.alpha[i] + params.nu[i] * t[(i, j)])
}

pub(crate) fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Solve for `y₀` if `A11ᵀ + VT` is well conditioned. Returns the condition
/// number alongside.
pub(crate) fn solve_equilibrium_consumption(
    net: &Network,
    params: &AgentParams,
) -> (f64, Option<DVector<f64>>) {
    let m = equilibrium_matrix(net, params);
    let cond = condition_number(&m);
    if !(cond < CONDITION_LIMIT) {
        return (cond, None);
    }
    let rhs = params
        .alpha
        .component_mul(&params.rho.map(|r| 1.0 - r));
    (cond, m.lu().solve(&rhs))
}

/// Evaluate row-stochasticity, strong connectivity, social dominance and
/// equilibrium feasibility for a network and parameter set.
pub fn check_assumptions(net: &Network, params: &AgentParams) -> Result<AssumptionReport> {
    params.check_dim(net)?;
    let n = net.n();
    let w = net.weights();

    let max_row_sum_error = w
        .row_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max);
    let row_stochastic = max_row_sum_error <= ROW_SUM_TOL;

    let (fwd, rev) = net.reachability_from_first();
    let unreachable = |r: &[bool]| r.iter().enumerate().filter(|(_, &s)| !s).map(|(i, _)| i).collect::<Vec<_>>();
    let unreachable_forward = unreachable(&fwd);
    let unreachable_reverse = unreachable(&rev);
    let strongly_connected = unreachable_forward.is_empty() && unreachable_reverse.is_empty();

    let theta = params.theta();
    let dominance_slack: Vec<f64> = (0..n)
        .map(|i| {
            let incoming: f64 = (0..n).filter(|&k| k != i).map(|k| w[(k, i)] * theta[k]).sum();
            theta[i] - incoming
        })
        .collect();
    let social_dominance: Vec<bool> = dominance_slack.iter().map(|&s| s >= -DOMINANCE_SLACK).collect();
    let violating_agents: Vec<usize> = social_dominance
        .iter()
        .enumerate()
        .filter(|(_, &ok)| !ok)
        .map(|(i, _)| i)
        .collect();
    let social_dominance_all = violating_agents.is_empty();

    let (condition_number, y0) = solve_equilibrium_consumption(net, params);
    let total_consumption = y0.map(|y| y.sum());
    let equilibrium_feasible = total_consumption.is_some_and(|s| s < 1.0 - EQUILIBRIUM_MARGIN);

    Ok(AssumptionReport {
        row_stochastic,
        strongly_connected,
        social_dominance,
        social_dominance_all,
        equilibrium_feasible,
        details: AssumptionDetails {
            max_row_sum_error,
            unreachable_forward,
            unreachable_reverse,
            dominance_slack,
            violating_agents,
            condition_number,
            total_consumption,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pair() -> Network {
        build_network(&[vec![0.0, 1.0], vec![1.0, 0.0]], false).unwrap()
    }

    fn uniform(n: usize) -> Network {
        let raw: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        build_network(&raw, true).unwrap()
    }

    fn params_from_theta(theta: &[f64]) -> AgentParams {
        let alpha: Vec<f64> = theta.iter().map(|t| 1.0 / (1.0 + t)).collect();
        let nu: Vec<f64> = theta.iter().map(|t| t / (1.0 + t)).collect();
        let n = theta.len();
        AgentParams::new(alpha, nu, vec![1.0; n], vec![0.5; n]).unwrap()
    }

    #[test]
    fn builds_already_stochastic_pair() {
        let net = pair();
        assert_eq!(net.weight(0, 1), 1.0);
        assert_eq!(net.weight(1, 0), 1.0);
    }

    #[test]
    fn normalizes_rows() {
        let net = build_network(
            &[vec![0.0, 2.0, 2.0], vec![1.0, 0.0, 3.0], vec![5.0, 0.0, 0.0]],
            true,
        )
        .unwrap();
        let expected = [[0.0, 0.5, 0.5], [0.25, 0.0, 0.75], [1.0, 0.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(net.weight(i, j), expected[i][j]);
            }
        }
    }

    #[test]
    fn rejects_bad_weights() {
        for normalize in [false, true] {
            assert!(matches!(
                build_network(&[vec![0.0, 1.0], vec![0.0, 0.0]], normalize),
                Err(Error::ZeroOutDegreeRow { row: 1 })
            ));
        }
        assert!(matches!(
            build_network(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0]], true),
            Err(Error::NonSquare { .. })
        ));
        assert!(matches!(
            build_network(&[vec![0.0, -1.0], vec![1.0, 0.0]], true),
            Err(Error::NegativeWeight { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            build_network(&[vec![0.5, 0.5], vec![1.0, 0.0]], true),
            Err(Error::NonzeroDiagonal { index: 0, .. })
        ));
        assert!(matches!(
            build_network(&[vec![0.0, 0.9], vec![1.0, 0.0]], false),
            Err(Error::RowSumMismatch { row: 0, .. })
        ));
        assert!(matches!(build_network(&[vec![0.0]], true), Err(Error::TooFewAgents(1))));
    }

    #[test]
    fn interaction_matrix_examples() {
        let t = interaction_matrix(&pair());
        assert_eq!(t, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let t3 = interaction_matrix(&uniform(3));
        let expected =
            DMatrix::from_row_slice(3, 3, &[1.0, -0.5, -0.5, -0.5, 1.0, -0.5, -0.5, -0.5, 1.0]);
        assert_eq!(t3, expected);
        let ones = DVector::from_element(3, 1.0);
        assert!((t3 * ones).amax() < 1e-12);
    }

    #[test]
    fn one_norm_examples() {
        assert_eq!(one_norm(&interaction_matrix(&pair())), 2.0);
        assert_eq!(one_norm(&DMatrix::identity(5, 5)), 1.0);
        assert_eq!(one_norm(&interaction_matrix(&uniform(3))), 2.0);
    }

    #[test]
    fn social_dominance_equality_and_violation() {
        let net = pair();
        let ok = check_assumptions(&net, &params_from_theta(&[1.0, 1.0])).unwrap();
        assert!(ok.social_dominance_all);
        let bad = check_assumptions(&net, &params_from_theta(&[1.0, 3.0])).unwrap();
        assert_eq!(bad.social_dominance, vec![false, true]);
        assert_eq!(bad.details.violating_agents, vec![0]);
        assert!(!bad.social_dominance_all);
    }

    #[test]
    fn two_agent_equilibrium_is_feasible() {
        let params =
            AgentParams::new(vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0, 1.0], vec![0.2, 0.4]).unwrap();
        let net = pair();
        // A11ᵀ + VT is the identity for this instance
        let m = equilibrium_matrix(&net, &params);
        assert_eq!(m, DMatrix::identity(2, 2));
        let report = check_assumptions(&net, &params).unwrap();
        assert!(report.equilibrium_feasible);
        assert_abs_diff_eq!(report.details.total_consumption.unwrap(), 0.7, epsilon = 1e-14);
        assert!(report.all_pass());
    }

    #[test]
    fn infeasible_when_equilibrium_matrix_is_singular() {
        // two purely ecological agents: A11ᵀ + VT = 11ᵀ has rank one
        let params =
            AgentParams::new(vec![1.0, 1.0], vec![0.0, 0.0], vec![1.0, 1.0], vec![0.2, 0.4]).unwrap();
        let report = check_assumptions(&pair(), &params).unwrap();
        assert!(!report.equilibrium_feasible);
        assert!(report.details.total_consumption.is_none());
        assert!(report.details.condition_number >= CONDITION_LIMIT);
    }

    #[test]
    fn detects_disconnected_network() {
        // agents 0,1 form a cycle, agent 2 listens to 0 but nobody listens to 2
        let net = build_network(
            &[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]],
            false,
        )
        .unwrap();
        assert!(!net.is_strongly_connected());
        let report = check_assumptions(&net, &params_from_theta(&[1.0, 1.0, 1.0])).unwrap();
        assert!(!report.strongly_connected);
        assert_eq!(report.details.unreachable_reverse, vec![2]);
        assert!(report.details.unreachable_forward.is_empty());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = check_assumptions(&uniform(3), &params_from_theta(&[1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn params_validation() {
        assert!(AgentParams::new(vec![0.0], vec![1.0], vec![1.0], vec![1.0]).is_err());
        assert!(AgentParams::new(vec![0.6], vec![0.5], vec![1.0], vec![1.0]).is_err());
        assert!(AgentParams::new(vec![0.5], vec![0.5], vec![0.0], vec![1.0]).is_err());
        assert!(AgentParams::new(vec![0.5], vec![0.5], vec![1.0], vec![-1.0]).is_err());
        assert!(AgentParams::new(vec![1.0], vec![0.0], vec![1.0], vec![1.0]).is_ok());
    }

    #[test]
    fn stationary_distribution_satisfies_dominance_with_equality() {
        let net = build_network(
            &[vec![0.0, 2.0, 2.0], vec![1.0, 0.0, 3.0], vec![5.0, 0.0, 0.0]],
            true,
        )
        .unwrap();
        let pi = net.stationary_distribution().unwrap();
        assert_abs_diff_eq!(pi.sum(), 1.0, epsilon = 1e-15);
        let resid = net.weights().transpose() * &pi - &pi;
        assert!(resid.amax() < 1e-15);
    }

    #[test]
    fn network_json_round_trip() {
        let net = uniform(4);
        let json = serde_json::to_string(&net).unwrap();
        let back: Network = serde_json::from_str(&json).unwrap();
        assert_eq!(net, back);
        let raw = r#"{"n": 2, "weights": [[0, 3], [2, 0]], "normalized": false}"#;
        let net: Network = serde_json::from_str(raw).unwrap();
        assert_eq!(net, pair());
    }
}
