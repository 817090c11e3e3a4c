//! Resource and consumption vector fields.
//!
//! Two charts are used. The original chart holds the resource stock `x`
//! (relative to carrying capacity) and the consumption efforts `y`. The
//! shifted chart holds `v = ln x - γ₀` and `w = y - y₀`, which puts the
//! equilibrium at the origin and keeps `x = e^{v+γ₀}` positive by
//! construction. All simulation happens in the shifted chart.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{
    check_assumptions, interaction_matrix, solve_equilibrium_consumption, AgentParams, Network,
    EQUILIBRIUM_MARGIN,
};

/// Largest acceptable field residual at a computed equilibrium.
pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OriginalState {
    pub x: f64,
    pub y: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OriginalRate {
    pub dx: f64,
    pub dy: DVector<f64>,
}

/// Deviation from equilibrium: log-resource `v` and consumption `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedState {
    pub v: f64,
    pub w: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedRate {
    pub dv: f64,
    pub dw: DVector<f64>,
}

impl ShiftedState {
    pub fn new(v: f64, w: impl Into<Vec<f64>>) -> Self {
        ShiftedState {
            v,
            w: DVector::from_vec(w.into()),
        }
    }

    pub fn origin(n: usize) -> Self {
        ShiftedState {
            v: 0.0,
            w: DVector::zeros(n),
        }
    }

    /// `max(|v|, ‖w‖∞)`
    pub fn sup_norm(&self) -> f64 {
        self.v.abs().max(self.w.amax())
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.w.iter().all(|x| x.is_finite())
    }

    /// `self + h * rate`
    pub fn advanced(&self, rate: &ShiftedRate, h: f64) -> ShiftedState {
        ShiftedState {
            v: self.v + h * rate.dv,
            w: &self.w + &rate.dw * h,
        }
    }
}

impl ShiftedRate {
    pub fn zeros(n: usize) -> Self {
        ShiftedRate {
            dv: 0.0,
            dw: DVector::zeros(n),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.dv.is_finite() && self.dw.iter().all(|x| x.is_finite())
    }
}

/// Equilibrium of the aggregate system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub y0: DVector<f64>,
    pub gamma0: f64,
    pub x0: f64,
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

/// Right-hand side in the original `(x, y)` chart.
pub fn original_field(
    state: &OriginalState,
    params: &AgentParams,
    net: &Network,
) -> Result<OriginalRate> {
    params.check_dim(net)?;
    check_len("consumption vector", net.n(), state.y.len())?;
    if !(state.x > 0.0) {
        return Err(Error::NonPositiveResource(state.x));
    }
    let x = state.x;
    let dx = (1.0 - x) * x - x * state.y.sum();
    let ty = interaction_matrix(net) * &state.y;
    let dy = DVector::from_fn(net.n(), |i, _| {
        params.b()[i] * (params.alpha()[i] * (x - params.rho()[i]) - params.nu()[i] * ty[i])
    });
    Ok(OriginalRate { dx, dy })
}

/// Solve `y₀ = (A11ᵀ + VT)⁻¹ A(1 - ρ)`, `γ₀ = ln(1 - 1ᵀy₀)`.
pub fn equilibrium(params: &AgentParams, net: &Network) -> Result<Equilibrium> {
    params.check_dim(net)?;
    let (cond, y0) = solve_equilibrium_consumption(net, params);
    let Some(y0) = y0 else {
        return Err(Error::InfeasibleEquilibrium(format!(
            "A11ᵀ + VT is numerically singular (condition number {cond:e})"
        )));
    };
    let total = y0.sum();
    if !(total < 1.0 - EQUILIBRIUM_MARGIN) {
        return Err(Error::InfeasibleEquilibrium(format!(
            "total equilibrium consumption {total} is not below 1"
        )));
    }
    let x0 = 1.0 - total;
    let eq = Equilibrium {
        y0,
        gamma0: x0.ln(),
        x0,
    };
    let resid = eq.residual(params, net)?;
    if resid > EQUILIBRIUM_RESIDUAL_TOL {
        return Err(Error::InfeasibleEquilibrium(format!(
            "field residual {resid:e} at the computed equilibrium"
        )));
    }
    Ok(eq)
}

impl Equilibrium {
    /// Sup-norm of the original field evaluated at `(x₀, y₀)`.
    pub fn residual(&self, params: &AgentParams, net: &Network) -> Result<f64> {
        let rate = original_field(&self.original_state(), params, net)?;
        Ok(rate.dx.abs().max(rate.dy.amax()))
    }

    pub fn original_state(&self) -> OriginalState {
        OriginalState {
            x: self.x0,
            y: self.y0.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.y0.len()
    }
}

/// Map an original-chart state to deviations from equilibrium.
pub fn to_shifted(state: &OriginalState, eq: &Equilibrium) -> Result<ShiftedState> {
    if !(state.x > 0.0) {
        return Err(Error::NonPositiveResource(state.x));
    }
    check_len("consumption vector", eq.n(), state.y.len())?;
    Ok(ShiftedState {
        v: state.x.ln() - eq.gamma0,
        w: &state.y - &eq.y0,
    })
}

/// Inverse of [`to_shifted`].
pub fn from_shifted(state: &ShiftedState, eq: &Equilibrium) -> Result<OriginalState> {
    check_len("consumption deviation", eq.n(), state.w.len())?;
    Ok(OriginalState {
        x: (state.v + eq.gamma0).exp(),
        y: &state.w + &eq.y0,
    })
}

/// Anything that yields a rate for a shifted state.
pub trait VectorField {
    fn rate(&self, state: &ShiftedState) -> ShiftedRate;
}

impl<F: Fn(&ShiftedState) -> ShiftedRate> VectorField for F {
    fn rate(&self, state: &ShiftedState) -> ShiftedRate {
        self(state)
    }
}

/// The shifted dynamics with their constant coefficients precomputed:
///
/// ```text
/// v̇ = -x₀(e^v - 1) - 1ᵀw
/// ẇ = x₀ BA1 (e^v - 1) - BVT w
/// ```
#[derive(Debug, Clone)]
pub struct ShiftedSystem {
    x0: f64,
    ba: DVector<f64>,
    bvt: DMatrix<f64>,
}

impl ShiftedSystem {
    pub fn new(params: &AgentParams, net: &Network, eq: &Equilibrium) -> Result<Self> {
        params.check_dim(net)?;
        check_len("equilibrium", net.n(), eq.n())?;
        let t = interaction_matrix(net);
        let bv = params.b().component_mul(params.nu());
        let mut bvt = t;
        for (i, mut row) in bvt.row_iter_mut().enumerate() {
            row *= bv[i];
        }
        Ok(ShiftedSystem {
            x0: eq.x0,
            ba: params.b().component_mul(params.alpha()),
            bvt,
        })
    }

    /// Check `params`, `net` and `eq` are consistent and the structural
    /// assumptions that make the equilibrium meaningful hold.
    pub fn checked(params: &AgentParams, net: &Network) -> Result<(Self, Equilibrium)> {
        let report = check_assumptions(net, params)?;
        if !report.equilibrium_feasible {
            return Err(Error::InfeasibleEquilibrium(
                "equilibrium assumption fails".into(),
            ));
        }
        let eq = equilibrium(params, net)?;
        Ok((Self::new(params, net, &eq)?, eq))
    }

    pub fn n(&self) -> usize {
        self.ba.len()
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }
}

impl VectorField for ShiftedSystem {
    fn rate(&self, s: &ShiftedState) -> ShiftedRate {
        let e = s.v.exp_m1();
        let dv = -self.x0 * e - s.w.sum();
        let mut dw = &self.bvt * &s.w;
        dw.neg_mut();
        dw.axpy(self.x0 * e, &self.ba, 1.0);
        ShiftedRate { dv, dw }
    }
}

/// Right-hand side in the shifted chart.
pub fn shifted_field(
    state: &ShiftedState,
    params: &AgentParams,
    net: &Network,
    eq: &Equilibrium,
) -> Result<ShiftedRate> {
    check_len("consumption deviation", net.n(), state.w.len())?;
    Ok(ShiftedSystem::new(params, net, eq)?.rate(state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_network;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pair() -> Network {
        build_network(&[vec![0.0, 1.0], vec![1.0, 0.0]], false).unwrap()
    }

    fn two_agent() -> (AgentParams, Network) {
        let p = AgentParams::new(vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0, 1.0], vec![0.2, 0.4])
            .unwrap();
        (p, pair())
    }

    fn ring(n: usize) -> Network {
        let raw: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if j == (i + 1) % n || (j + 1) % n == i { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        build_network(&raw, true).unwrap()
    }

    #[test]
    fn logistic_term_vanishes_at_capacity() {
        let (p, net) = two_agent();
        let r = original_field(
            &OriginalState {
                x: 1.0,
                y: DVector::zeros(2),
            },
            &p,
            &net,
        )
        .unwrap();
        assert_eq!(r.dx, 0.0);
        assert_abs_diff_eq!(r.dy[0], 0.5 * 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(r.dy[1], 0.5 * 0.6, epsilon = 1e-15);
    }

    #[test]
    fn two_agent_equilibrium_by_substitution() {
        let (p, net) = two_agent();
        let s = OriginalState {
            x: 0.3,
            y: DVector::from_vec(vec![0.4, 0.3]),
        };
        let r = original_field(&s, &p, &net).unwrap();
        assert!(r.dx.abs() < 1e-15);
        assert!(r.dy.amax() < 1e-15);

        let eq = equilibrium(&p, &net).unwrap();
        assert_abs_diff_eq!(eq.y0[0], 0.4, epsilon = 1e-14);
        assert_abs_diff_eq!(eq.y0[1], 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(eq.x0, 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(eq.gamma0, -1.2039728043259361, epsilon = 1e-12);
    }

    #[test]
    fn threshold_at_resource_level_kills_ecological_factor() {
        let p = AgentParams::new(vec![1.0, 1.0], vec![0.0, 0.0], vec![1.0, 1.0], vec![0.5, 0.5])
            .unwrap();
        let s = OriginalState {
            x: 0.5,
            y: DVector::from_vec(vec![1.0, 1.0]),
        };
        let r = original_field(&s, &p, &pair()).unwrap();
        assert_abs_diff_eq!(r.dx, -0.75, epsilon = 1e-15);
        assert_eq!(r.dy, DVector::zeros(2));
    }

    #[test]
    fn rejects_non_positive_resource() {
        let (p, net) = two_agent();
        let s = OriginalState {
            x: 0.0,
            y: DVector::zeros(2),
        };
        assert!(matches!(
            original_field(&s, &p, &net),
            Err(Error::NonPositiveResource(_))
        ));
    }

    #[test]
    fn thresholds_at_capacity_give_trivial_equilibrium() {
        let p = AgentParams::new(vec![0.3, 0.7], vec![0.7, 0.3], vec![1.0, 2.0], vec![1.0, 1.0])
            .unwrap();
        let eq = equilibrium(&p, &pair()).unwrap();
        assert!(eq.y0.amax() < 1e-15);
        assert!(eq.gamma0.abs() < 1e-15);
        assert_abs_diff_eq!(eq.x0, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn homogeneous_agents_settle_at_threshold() {
        for n in [3, 5, 8] {
            let net = ring(n);
            let rho = 0.37;
            let p = AgentParams::new(vec![0.4; n], vec![0.6; n], vec![0.9; n], vec![rho; n]).unwrap();
            let eq = equilibrium(&p, &net).unwrap();
            assert_abs_diff_eq!(eq.x0, rho, epsilon = 1e-12);
            for i in 0..n {
                assert_abs_diff_eq!(eq.y0[i], (1.0 - rho) / n as f64, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn singular_equilibrium_is_rejected() {
        let p = AgentParams::new(vec![1.0, 1.0], vec![0.0, 0.0], vec![1.0, 1.0], vec![0.2, 0.4])
            .unwrap();
        assert!(matches!(
            equilibrium(&p, &pair()),
            Err(Error::InfeasibleEquilibrium(_))
        ));
    }

    #[test]
    fn shifted_field_examples() {
        let (p, net) = two_agent();
        let eq = equilibrium(&p, &net).unwrap();
        let r = shifted_field(&ShiftedState::origin(2), &p, &net, &eq).unwrap();
        assert_eq!(r, ShiftedRate::zeros(2));

        let w = DVector::from_vec(vec![0.3, -1.2]);
        let r = shifted_field(&ShiftedState { v: 0.0, w: w.clone() }, &p, &net, &eq).unwrap();
        assert_abs_diff_eq!(r.dv, -w.sum(), epsilon = 1e-15);
        // BVT w with B = I, V = I/2, T = [[1,-1],[-1,1]]
        let expected = DVector::from_vec(vec![-0.5 * (0.3 + 1.2), -0.5 * (-1.2 - 0.3)]);
        assert!((r.dw - expected).amax() < 1e-15);
    }

    #[test]
    fn coordinate_transform_examples() {
        let (p, net) = two_agent();
        let eq = equilibrium(&p, &net).unwrap();
        let s = to_shifted(&eq.original_state(), &eq).unwrap();
        assert!(s.sup_norm() < 1e-15);
        let o = from_shifted(&ShiftedState::origin(2), &eq).unwrap();
        assert_abs_diff_eq!(o.x, eq.x0, epsilon = 1e-15);
        assert_eq!(o.y, eq.y0);
        let s = to_shifted(
            &OriginalState {
                x: eq.x0 * std::f64::consts::E,
                y: eq.y0.clone(),
            },
            &eq,
        )
        .unwrap();
        assert_abs_diff_eq!(s.v, 1.0, epsilon = 1e-14);
        assert_eq!(s.w, DVector::zeros(2));
        assert!(to_shifted(
            &OriginalState {
                x: -1.0,
                y: eq.y0.clone()
            },
            &eq
        )
        .is_err());
    }

    fn random_instance() -> impl Strategy<Value = (AgentParams, Network, Vec<f64>, f64)> {
        (2usize..6).prop_flat_map(|n| {
            (
                prop::collection::vec(prop::collection::vec(0.05f64..1.0, n), n),
                prop::collection::vec(0.05f64..0.95, n),
                prop::collection::vec(0.05f64..1.0, n),
                prop::collection::vec(0.1f64..0.9, n),
                prop::collection::vec(-1.0f64..1.0, n),
                -1.5f64..1.5,
            )
                .prop_map(move |(mut raw, alpha, b, rho, w, v)| {
                    for (i, row) in raw.iter_mut().enumerate() {
                        row[i] = 0.0;
                    }
                    let net = build_network(&raw, true).unwrap();
                    let nu = alpha.iter().map(|a| 1.0 - a).collect();
                    let p = AgentParams::new(alpha, nu, b, rho).unwrap();
                    (p, net, w, v)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn shifted_field_matches_original_chart((p, net, w, v) in random_instance()) {
            let eq = equilibrium(&p, &net).unwrap();
            let s = ShiftedState::new(v, w);
            let shifted = shifted_field(&s, &p, &net, &eq).unwrap();
            let o = from_shifted(&s, &eq).unwrap();
            let orig = original_field(&o, &p, &net).unwrap();
            prop_assert!((shifted.dv - orig.dx / o.x).abs() < 1e-9);
            prop_assert!((shifted.dw - orig.dy).amax() < 1e-9);
        }

        #[test]
        fn equilibrium_residual_is_small((p, net, _w, _v) in random_instance()) {
            let eq = equilibrium(&p, &net).unwrap();
            let r = shifted_field(&ShiftedState::origin(net.n()), &p, &net, &eq).unwrap();
            prop_assert!(r.dv.abs().max(r.dw.amax()) < 1e-10);
            prop_assert!(eq.residual(&p, &net).unwrap() < 1e-10);
        }

        #[test]
        fn coordinate_round_trip(
            (p, net, w, v) in random_instance(),
        ) {
            let eq = equilibrium(&p, &net).unwrap();
            let s = ShiftedState::new(v, w);
            let back = to_shifted(&from_shifted(&s, &eq).unwrap(), &eq).unwrap();
            prop_assert!((back.v - s.v).abs() < 1e-12);
            prop_assert!((back.w - s.w).amax() < 1e-12);
        }
    }
}
