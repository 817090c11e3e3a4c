//! Numerical checks behind global asymptotic stability of the shifted
//! dynamics: the Lyapunov function, its closed-form derivative along the
//! flow, and the spectral structure of `TᵀΘ + ΘT`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dynamics::{Equilibrium, ShiftedState};
use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::network::{interaction_matrix, AgentParams, Network};

/// Relative tolerance on the smallest eigenvalue for semidefiniteness.
pub const PSD_TOL: f64 = 1e-8;
/// Relative threshold below which an eigenvalue counts as zero.
pub const RANK_TOL: f64 = 1e-8;
/// Relative tolerance on `‖M1‖∞` for the all-ones nullspace check.
pub const NULLSPACE_TOL: f64 = 1e-9;
/// Absolute asymmetry tolerated by [`spectral_certificate`].
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative slack on successive Lyapunov differences.
pub const DESCENT_SLACK: f64 = 1e-8;

fn check_state(state: &ShiftedState, params: &AgentParams) -> Result<()> {
    if state.w.len() != params.n() {
        return Err(Error::DimensionMismatch {
            what: "consumption deviation",
            expected: params.n(),
            found: state.w.len(),
        });
    }
    Ok(())
}

/// `V = e^v - v - 1 + ½ e^{-γ₀} wᵀ(AB)⁻¹w`
pub fn lyapunov(state: &ShiftedState, params: &AgentParams, eq: &Equilibrium) -> Result<f64> {
    check_state(state, params)?;
    Ok(LyapunovFunction::new(params, eq).value(state))
}

/// Closed-form `dV/dt` along the shifted flow:
/// `-e^{γ₀}(e^v - 1)² - e^{-γ₀} wᵀΘTw` with `Θ = diag(ν/α)`.
pub fn lyapunov_rate(
    state: &ShiftedState,
    params: &AgentParams,
    net: &Network,
    eq: &Equilibrium,
) -> Result<f64> {
    check_state(state, params)?;
    params.check_dim(net)?;
    let theta_t = theta_times_t(net, params);
    let e = state.v.exp_m1();
    let quad = state.w.dot(&(&theta_t * &state.w));
    Ok(-eq.x0 * e * e - quad / eq.x0)
}

fn theta_times_t(net: &Network, params: &AgentParams) -> DMatrix<f64> {
    let theta = params.theta();
    let mut m = interaction_matrix(net);
    for (i, mut row) in m.row_iter_mut().enumerate() {
        row *= theta[i];
    }
    m
}

/// Precomputed Lyapunov function for repeated evaluation.
#[derive(Debug, Clone)]
pub struct LyapunovFunction {
    /// `e^{-γ₀} / (α_i b_i)`
    weights: DVector<f64>,
}

impl LyapunovFunction {
    pub fn new(params: &AgentParams, eq: &Equilibrium) -> Self {
        let inv_x0 = 1.0 / eq.x0;
        LyapunovFunction {
            weights: params
                .alpha()
                .zip_map(params.b(), |a, b| inv_x0 / (a * b)),
        }
    }

    pub fn value(&self, s: &ShiftedState) -> f64 {
        // e^v - v - 1 loses everything to cancellation for small v
        let scalar = if s.v.abs() < 1e-3 {
            let v = s.v;
            v * v * (0.5 + v * (1.0 / 6.0 + v * (1.0 / 24.0 + v / 120.0)))
        } else {
            s.v.exp_m1() - s.v
        };
        let quad: f64 = s
            .w
            .iter()
            .zip(self.weights.iter())
            .map(|(w, k)| k * w * w)
            .sum();
        scalar + 0.5 * quad
    }
}

/// `TᵀΘ + ΘT`, the symmetric part (doubled) of `ΘT`.
pub fn gram_matrix(net: &Network, params: &AgentParams) -> Result<DMatrix<f64>> {
    params.check_dim(net)?;
    let theta_t = theta_times_t(net, params);
    Ok(theta_t.transpose() + theta_t)
}

/// Spectrum-based certificate for a symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    pub psd: bool,
    pub one_in_nullspace: bool,
    /// Number of eigenvalues with `|λ| < 1e-8·max|λ|`.
    pub rank_deficiency: usize,
    /// Gershgorin route: every diagonal entry dominates its off-diagonal
    /// absolute row sum (within the same relative tolerance). Sufficient
    /// for semidefiniteness, independent of the eigen-solver.
    pub diagonally_dominant: bool,
}

/// Eigen-decompose `m` and report semidefiniteness, whether `1` lies in the
/// nullspace, and the rank deficiency.
pub fn spectral_certificate(m: &DMatrix<f64>) -> Result<SpectralReport> {
    if !m.is_square() {
        return Err(Error::NonSymmetric(f64::INFINITY));
    }
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * (1.0 + m.amax()) {
        return Err(Error::NonSymmetric(asym));
    }
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(sym.clone()).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);

    let max_abs = eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let psd = eigenvalues.first().is_none_or(|&l| l >= -PSD_TOL * (1.0 + max_abs));
    let rank_deficiency = eigenvalues
        .iter()
        .filter(|l| l.abs() < RANK_TOL * max_abs || max_abs == 0.0)
        .count();
    let ones = DVector::from_element(n, 1.0);
    let one_in_nullspace = (&sym * ones).amax() < NULLSPACE_TOL * sym.amax().max(f64::MIN_POSITIVE);

    let diagonally_dominant = (0..n).all(|i| {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| sym[(i, j)].abs()).sum();
        sym[(i, i)] >= off - PSD_TOL * (1.0 + max_abs)
    });

    Ok(SpectralReport {
        eigenvalues,
        psd,
        one_in_nullspace,
        rank_deficiency,
        diagonally_dominant,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentReport {
    pub monotone: bool,
    /// Largest positive jump `V(t_{k+1}) - V(t_k)`, zero if none.
    pub max_increase: f64,
    pub initial: f64,
    pub last: f64,
}

/// Evaluate `V` on every stored sample and check it never increases beyond
/// `1e-8·(1 + V)`.
pub fn descent_check(
    traj: &Trajectory,
    params: &AgentParams,
    eq: &Equilibrium,
) -> DescentReport {
    let lyap = LyapunovFunction::new(params, eq);
    let mut tracker = DescentTracker::default();
    for s in &traj.states {
        tracker.push(lyap.value(s));
    }
    tracker.report()
}

/// Streaming form of [`descent_check`] over Lyapunov values.
#[derive(Debug, Clone, Default)]
pub struct DescentTracker {
    prev: Option<f64>,
    initial: f64,
    monotone: bool,
    max_increase: f64,
    started: bool,
}

impl DescentTracker {
    pub fn push(&mut self, value: f64) {
        if !self.started {
            self.started = true;
            self.monotone = true;
            self.initial = value;
        }
        if let Some(prev) = self.prev {
            let jump = value - prev;
            if jump > 0.0 {
                self.max_increase = self.max_increase.max(jump);
            }
            if jump > DESCENT_SLACK * (1.0 + prev.abs()) {
                self.monotone = false;
            }
        }
        self.prev = Some(value);
    }

    pub fn report(&self) -> DescentReport {
        DescentReport {
            monotone: self.monotone || !self.started,
            max_increase: self.max_increase,
            initial: self.initial,
            last: self.prev.unwrap_or(0.0),
        }
    }
}
