//! Finite-horizon sustainability: a box in the `(v, v̇)` plane that the
//! resource must stay inside over `[0, t_max]`, a sufficient condition on
//! `‖T‖₁` that guarantees it, the tightest box for which that condition holds
//! with equality, and a sample-wise check of trajectories against a box.
//!
//! The guarantee rests on a Grönwall bound `‖w(t)‖₁ ≤ C₁ e^{C₂}` with
//!
//! ```text
//! β  = max_i b_i ν_i
//! C₁ = ‖w(0)‖₁ + t_max e^{γ₀}(e^{v_max} - 1) ∑ b_i α_i
//! C₂ = β ‖T‖₁ t_max
//! ```
//!
//! and four margins `ξ₁..ξ₄`, one per side of the box. The box is certified
//! when every `ξ_i > C₁` and `‖T‖₁ ≤ ln(min ξ / C₁) / (β t_max)`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Equilibrium, ShiftedRate, ShiftedState};
use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::network::{interaction_matrix, one_norm, AgentParams, Network};

/// Bounds on `v` and `v̇` over a horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SustainabilityBox {
    pub v_min: f64,
    pub v_max: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub t_max: f64,
}

impl SustainabilityBox {
    pub fn new(v_min: f64, v_max: f64, d_min: f64, d_max: f64, t_max: f64) -> Result<Self> {
        let b = SustainabilityBox {
            v_min,
            v_max,
            d_min,
            d_max,
            t_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.v_min, self.v_max, self.d_min, self.d_max, self.t_max];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidBox("all bounds must be finite"));
        }
        if !(self.v_min < self.v_max) {
            return Err(Error::InvalidBox("v_min < v_max is required"));
        }
        if !(self.v_max > 0.0) {
            return Err(Error::InvalidBox("v_max > 0 is required"));
        }
        if !(self.d_min < 0.0 && 0.0 < self.d_max) {
            return Err(Error::InvalidBox("d_min < 0 < d_max is required"));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::InvalidBox("t_max > 0 is required"));
        }
        Ok(())
    }

    /// Area of the box in the `(v, v̇)` plane.
    pub fn area(&self) -> f64 {
        (self.v_max - self.v_min) * (self.d_max - self.d_min)
    }

    pub fn contains(&self, v: f64, dv: f64) -> Option<BoxSide> {
        if v < self.v_min {
            Some(BoxSide::LowerV)
        } else if v > self.v_max {
            Some(BoxSide::UpperV)
        } else if dv < self.d_min {
            Some(BoxSide::LowerRate)
        } else if dv > self.d_max {
            Some(BoxSide::UpperRate)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxSide {
    LowerV,
    UpperV,
    LowerRate,
    UpperRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SustainabilityConstants {
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
    /// `ξ₁..ξ₄`
    pub xi: [f64; 4],
}

impl SustainabilityConstants {
    pub fn min_xi(&self) -> f64 {
        self.xi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// 1-based index of the smallest `ξ`; ties go to the lowest index.
    pub fn binding_index(&self) -> usize {
        let min = self.min_xi();
        self.xi.iter().position(|&x| x == min).map_or(1, |i| i + 1)
    }
}

/// Shared inputs of the sustainability formulas.
struct Setup {
    x0: f64,
    beta: f64,
    /// `∑ b_i α_i`
    sens: f64,
    t_norm: f64,
    w0_norm: f64,
}

fn setup(
    params: &AgentParams,
    net: &Network,
    eq: &Equilibrium,
    w0: &[f64],
) -> Result<Setup> {
    params.check_dim(net)?;
    if w0.len() != params.n() {
        return Err(Error::DimensionMismatch {
            what: "initial consumption deviation",
            expected: params.n(),
            found: w0.len(),
        });
    }
    let beta = params
        .b()
        .iter()
        .zip(params.nu().iter())
        .map(|(b, nu)| b * nu)
        .fold(0.0, f64::max);
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(
            "sustainability bound needs some agent with b_i ν_i > 0".into(),
        ));
    }
    Ok(Setup {
        x0: eq.x0,
        beta,
        sens: params.b().dot(params.alpha()),
        t_norm: one_norm(&interaction_matrix(net)),
        w0_norm: w0.iter().map(|w| w.abs()).sum(),
    })
}

fn constants_from(s: &Setup, bx: &SustainabilityBox, v0: f64) -> SustainabilityConstants {
    let t = bx.t_max;
    // e^{γ₀}(e^{v_max} - 1)
    let upper = s.x0 * bx.v_max.exp_m1();
    let c1 = s.w0_norm + t * upper * s.sens;
    SustainabilityConstants {
        beta: s.beta,
        c1,
        c2: s.beta * s.t_norm * t,
        xi: [
            upper,
            (v0 - t * upper - bx.v_min) / t,
            bx.d_max + s.x0 * bx.v_min.exp_m1(),
            -bx.d_min - upper,
        ],
    }
}

fn check_initial(bx: &SustainabilityBox, v0: f64) -> Result<()> {
    bx.validate()?;
    if !(bx.v_min < v0 && v0 < bx.v_max) {
        return Err(Error::InitialStateOutsideBox {
            v0,
            v_min: bx.v_min,
            v_max: bx.v_max,
        });
    }
    Ok(())
}

/// Compute `β`, `C₁`, `C₂` and `ξ₁..ξ₄` for a box and initial state.
pub fn constants(
    params: &AgentParams,
    net: &Network,
    eq: &Equilibrium,
    bx: &SustainabilityBox,
    v0: f64,
    w0: &[f64],
) -> Result<SustainabilityConstants> {
    check_initial(bx, v0)?;
    let s = setup(params, net, eq, w0)?;
    Ok(constants_from(&s, bx, v0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SustainabilityCertificate {
    pub constants: SustainabilityConstants,
    /// Every `ξ_i > C₁`.
    pub feasible: bool,
    /// `‖T‖₁` of the network.
    pub t_norm: f64,
    /// `ln(min ξ / C₁) / (β t_max)`, present only when feasible.
    pub t_norm_bound: Option<f64>,
    pub certified: bool,
    /// 1-based index of the `ξ` attaining the minimum.
    pub binding_index: usize,
}

/// Decide whether the network's `‖T‖₁` meets the sustainability bound for
/// this box and initial state.
pub fn certify(
    params: &AgentParams,
    net: &Network,
    eq: &Equilibrium,
    bx: &SustainabilityBox,
    v0: f64,
    w0: &[f64],
) -> Result<SustainabilityCertificate> {
    check_initial(bx, v0)?;
    let s = setup(params, net, eq, w0)?;
    let c = constants_from(&s, bx, v0);
    let min_xi = c.min_xi();
    let feasible = c.xi.iter().all(|&x| x > c.c1);
    let t_norm_bound = feasible.then(|| (min_xi / c.c1).ln() / (s.beta * bx.t_max));
    let certified = t_norm_bound.is_some_and(|bound| s.t_norm <= bound);
    Ok(SustainabilityCertificate {
        constants: c,
        feasible,
        t_norm: s.t_norm,
        t_norm_bound,
        certified,
        binding_index: c.binding_index(),
    })
}

/// The box on which every `ξ_i` equals `e^{β‖T‖₁t_max} C₁`.
///
/// `ξ₁ = e^{γ₀}(e^{v_max} - 1)` also appears inside `C₁`, so the `v_max`
/// equation is a linear fixed point `E = k(‖w₀‖₁ + t_max E ∑b_iα_i)` with
/// `k = e^{β‖T‖₁t_max}`. The remaining bounds follow in the order `v_min`,
/// `d_min`, `d_max` since `ξ₃` involves `v_min`.
pub fn minimal_window(
    params: &AgentParams,
    net: &Network,
    eq: &Equilibrium,
    t_max: f64,
    v0: f64,
    w0: &[f64],
) -> Result<SustainabilityBox> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidBox("t_max > 0 is required"));
    }
    let s = setup(params, net, eq, w0)?;
    let k = (s.beta * s.t_norm * t_max).exp();
    let denom = 1.0 - k * t_max * s.sens;
    if !(denom > 0.0) {
        return Err(Error::WindowInfeasible(format!(
            "k·t_max·∑bα = {} is not below 1",
            k * t_max * s.sens
        )));
    }
    let upper = k * s.w0_norm / denom;
    if !(upper > 0.0) {
        return Err(Error::WindowInfeasible(
            "zero initial consumption deviation collapses v_max to 0".into(),
        ));
    }
    let v_max = (upper / s.x0).ln_1p();
    if !(v0 < v_max) {
        return Err(Error::WindowInfeasible(format!(
            "initial v0 = {v0} is not below the window's v_max = {v_max}"
        )));
    }
    let c1 = s.w0_norm + t_max * upper * s.sens;
    let target = k * c1;
    let v_min = v0 - t_max * upper - t_max * target;
    let d_min = -target - upper;
    let d_max = target - s.x0 * v_min.exp_m1();
    SustainabilityBox::new(v_min, v_max, d_min, d_max, t_max).map_err(|e| match e {
        Error::InvalidBox(why) => Error::WindowInfeasible(why.into()),
        other => other,
    })
}

/// Largest `|ξ_i - e^{β‖T‖₁t_max}C₁| / ξ_i` over the four margins.
pub fn equality_residual(
    params: &AgentParams,
    net: &Network,
    eq: &Equilibrium,
    bx: &SustainabilityBox,
    v0: f64,
    w0: &[f64],
) -> Result<f64> {
    let c = constants(params, net, eq, bx, v0, w0)?;
    let t_norm = one_norm(&interaction_matrix(net));
    let target = (c.beta * t_norm * bx.t_max).exp() * c.c1;
    Ok(c
        .xi
        .iter()
        .map(|&x| (x - target).abs() / x.abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub time: f64,
    pub side: BoxSide,
    pub v: f64,
    pub dv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxVerdict {
    pub sustainable: bool,
    pub first_violation: Option<Violation>,
}

/// Streaming box check over samples with `t ≤ t_max`.
#[derive(Debug, Clone)]
pub struct BoxMonitor {
    bx: SustainabilityBox,
    first_violation: Option<Violation>,
    last_time: f64,
}

impl BoxMonitor {
    pub fn new(bx: SustainabilityBox) -> Self {
        BoxMonitor {
            bx,
            first_violation: None,
            last_time: f64::NEG_INFINITY,
        }
    }

    pub fn push(&mut self, t: f64, s: &ShiftedState, r: &ShiftedRate) {
        self.last_time = self.last_time.max(t);
        if t > self.bx.t_max || self.first_violation.is_some() {
            return;
        }
        if let Some(side) = self.bx.contains(s.v, r.dv) {
            self.first_violation = Some(Violation {
                time: t,
                side,
                v: s.v,
                dv: r.dv,
            });
        }
    }

    pub fn finish(&self) -> Result<BoxVerdict> {
        if self.last_time < self.bx.t_max * (1.0 - 1e-12) {
            return Err(Error::HorizonNotCovered {
                end: self.last_time,
                t_max: self.bx.t_max,
            });
        }
        Ok(BoxVerdict {
            sustainable: self.first_violation.is_none(),
            first_violation: self.first_violation,
        })
    }
}

/// Check every stored sample up to `t_max` lies in the box, using the
/// stored `v̇`. Samples only; nothing is interpolated between them.
pub fn box_invariance(traj: &Trajectory, bx: &SustainabilityBox) -> Result<BoxVerdict> {
    let mut monitor = BoxMonitor::new(*bx);
    for (t, s, r) in traj.samples() {
        monitor.push(t, s, r);
    }
    monitor.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::equilibrium;
    use crate::network::build_network;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    fn two_agent() -> (AgentParams, Network, Equilibrium) {
        let p = AgentParams::new(vec![0.5, 0.5], vec![0.5, 0.5], vec![1.0, 1.0], vec![0.2, 0.4])
            .unwrap();
        let net = build_network(&[vec![0.0, 1.0], vec![1.0, 0.0]], false).unwrap();
        let eq = equilibrium(&p, &net).unwrap();
        (p, net, eq)
    }

    fn worked_box(t_max: f64) -> SustainabilityBox {
        SustainabilityBox::new(-LN_2, LN_2, -0.5, 0.5, t_max).unwrap()
    }

    #[test]
    fn constants_by_hand() {
        let (p, net, eq) = two_agent();
        let c = constants(&p, &net, &eq, &worked_box(0.5), 0.0, &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(c.beta, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c.c1, 0.15, epsilon = 1e-14);
        assert_abs_diff_eq!(c.c2, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c.xi[0], 0.3, epsilon = 1e-14);
        // (0 - 0.15 + ln 2) / 0.5
        assert_abs_diff_eq!(c.xi[1], 2.0 * (LN_2 - 0.15), epsilon = 1e-13);
        assert_abs_diff_eq!(c.xi[1], 1.0863, epsilon = 1e-4);
        assert_abs_diff_eq!(c.xi[2], 0.35, epsilon = 1e-14);
        assert_abs_diff_eq!(c.xi[3], 0.2, epsilon = 1e-14);
    }

    #[test]
    fn degenerate_box_limit() {
        let (p, net, eq) = two_agent();
        let mut last = f64::INFINITY;
        for v_max in [1e-2, 1e-4, 1e-6, 1e-8] {
            let bx = SustainabilityBox::new(-1.0, v_max, -1.0, 1.0, 0.5).unwrap();
            let c = constants(&p, &net, &eq, &bx, 0.0, &[0.0, 0.0]).unwrap();
            assert!(c.c1 < last && c.xi[0] < 1.0 * v_max);
            last = c.c1;
        }
        assert!(last < 1e-8);
    }

    #[test]
    fn certify_worked_instance() {
        let (p, net, eq) = two_agent();
        let cert = certify(&p, &net, &eq, &worked_box(0.5), 0.0, &[0.0, 0.0]).unwrap();
        assert!(cert.feasible);
        assert_eq!(cert.binding_index, 4);
        let bound = cert.t_norm_bound.unwrap();
        assert_abs_diff_eq!(bound, 4.0 * (4.0f64 / 3.0).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(bound, 1.1507, epsilon = 1e-4);
        assert_eq!(cert.t_norm, 2.0);
        assert!(!cert.certified);
    }

    #[test]
    fn strict_feasibility_fails_at_equality() {
        let (p, net, eq) = two_agent();
        let cert = certify(&p, &net, &eq, &worked_box(1.0), 0.0, &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(cert.constants.c1, 0.3, epsilon = 1e-14);
        assert!(!cert.feasible);
        assert!(cert.t_norm_bound.is_none());
        assert!(!cert.certified);
    }

    #[test]
    fn invalid_boxes() {
        assert!(matches!(
            SustainabilityBox::new(1.0, 0.5, -1.0, 1.0, 1.0),
            Err(Error::InvalidBox(_))
        ));
        assert!(SustainabilityBox::new(-1.0, -0.5, -1.0, 1.0, 1.0).is_err());
        assert!(SustainabilityBox::new(-1.0, 0.5, 0.1, 1.0, 1.0).is_err());
        assert!(SustainabilityBox::new(-1.0, 0.5, -1.0, 1.0, 0.0).is_err());
        let (p, net, eq) = two_agent();
        assert!(matches!(
            constants(&p, &net, &eq, &worked_box(0.5), 0.9, &[0.0, 0.0]),
            Err(Error::InitialStateOutsideBox { .. })
        ));
    }

    #[test]
    fn minimal_window_back_substitution() {
        let (p, net, eq) = two_agent();
        let p = p.with_uniform_b(0.05).unwrap();
        let w0 = [0.05, -0.02];
        let bx = minimal_window(&p, &net, &eq, 1.0, 0.0, &w0).unwrap();
        let resid = equality_residual(&p, &net, &eq, &bx, 0.0, &w0).unwrap();
        assert!(resid < 1e-9, "residual {resid}");
    }

    #[test]
    fn minimal_window_shrinks_with_horizon_and_deviation() {
        let (p, net, eq) = two_agent();
        let p = p.with_uniform_b(0.05).unwrap();
        let mut prev = f64::INFINITY;
        for scale in [1e-1, 1e-2, 1e-3, 1e-4] {
            let bx = minimal_window(&p, &net, &eq, scale, 0.0, &[scale, 0.0]).unwrap();
            assert!(bx.v_max > 0.0 && bx.v_max < prev);
            prev = bx.v_max;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn minimal_window_errors() {
        let (p, net, eq) = two_agent();
        // ∑bα = 1, so t_max = 1 is never solvable
        assert!(matches!(
            minimal_window(&p, &net, &eq, 1.0, 0.0, &[0.1, 0.0]),
            Err(Error::WindowInfeasible(_))
        ));
        assert!(matches!(
            minimal_window(&p, &net, &eq, 0.1, 0.0, &[0.0, 0.0]),
            Err(Error::WindowInfeasible(_))
        ));
    }

    fn trajectory(vs: &[f64], dvs: &[f64], h: f64) -> Trajectory {
        Trajectory {
            times: (0..vs.len()).map(|k| k as f64 * h).collect(),
            states: vs.iter().map(|&v| ShiftedState::new(v, vec![0.0])).collect(),
            rates: dvs
                .iter()
                .map(|&dv| ShiftedRate {
                    dv,
                    dw: nalgebra::DVector::zeros(1),
                })
                .collect(),
            step: h,
        }
    }

    #[test]
    fn box_invariance_examples() {
        let bx = worked_box(1.0);
        let still = trajectory(&[0.0; 11], &[0.0; 11], 0.1);
        assert!(box_invariance(&still, &bx).unwrap().sustainable);

        let mut vs = [0.0; 11];
        vs[4] = LN_2 + 0.1;
        let verdict = box_invariance(&trajectory(&vs, &[0.0; 11], 0.1), &bx).unwrap();
        assert!(!verdict.sustainable);
        let v = verdict.first_violation.unwrap();
        assert_eq!(v.side, BoxSide::UpperV);
        assert_abs_diff_eq!(v.time, 0.4);

        let mut dvs = [0.0; 11];
        dvs[7] = -0.6;
        let verdict = box_invariance(&trajectory(&[0.0; 11], &dvs, 0.1), &bx).unwrap();
        assert_eq!(verdict.first_violation.unwrap().side, BoxSide::LowerRate);

        // excursions past the horizon do not count
        let mut vs = [0.0; 15];
        vs[14] = 5.0;
        assert!(box_invariance(&trajectory(&vs, &[0.0; 15], 0.1), &bx).unwrap().sustainable);

        assert!(matches!(
            box_invariance(&trajectory(&[0.0; 5], &[0.0; 5], 0.1), &bx),
            Err(Error::HorizonNotCovered { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn wider_rate_bounds_never_tighten(
                b in 0.01f64..0.2,
                t_max in 0.05f64..1.0,
                w in -0.2f64..0.2,
                v_half in 0.1f64..2.0,
                d_half in 0.5f64..5.0,
                widen in 0.0f64..3.0,
            ) {
                let (p, net, eq) = two_agent();
                let p = p.with_uniform_b(b).unwrap();
                let w0 = [w, 0.05];
                let narrow = SustainabilityBox::new(-v_half, v_half, -d_half, d_half, t_max).unwrap();
                let wide = SustainabilityBox::new(-v_half, v_half, -d_half - widen, d_half + widen, t_max)
                    .unwrap();
                let a = certify(&p, &net, &eq, &narrow, 0.0, &w0).unwrap();
                let c = certify(&p, &net, &eq, &wide, 0.0, &w0).unwrap();
                prop_assert_eq!(a.constants.c1, c.constants.c1);
                prop_assert!(c.constants.min_xi() >= a.constants.min_xi());
                if let Some(bound) = a.t_norm_bound {
                    prop_assert!(c.t_norm_bound.unwrap() >= bound);
                    prop_assert!(c.certified || !a.certified);
                }
            }

            #[test]
            fn minimal_window_sits_on_the_bound(
                b in 0.005f64..0.1,
                t_max in 0.05f64..2.0,
                w in 0.001f64..0.3,
                v0 in -0.05f64..0.0,
            ) {
                let (p, net, eq) = two_agent();
                let p = p.with_uniform_b(b).unwrap();
                let w0 = [w, -w / 2.0];
                match minimal_window(&p, &net, &eq, t_max, v0, &w0) {
                    Ok(bx) => {
                        prop_assert!(equality_residual(&p, &net, &eq, &bx, v0, &w0).unwrap() < 1e-9);
                        let cert = certify(&p, &net, &eq, &bx, v0, &w0).unwrap();
                        let bound = cert.t_norm_bound.unwrap();
                        prop_assert!((cert.t_norm - bound).abs() <= 1e-9 * bound);
                    }
                    Err(Error::WindowInfeasible(_)) => {}
                    Err(e) => prop_assert!(false, "{e}"),
                }
            }
        }
    }
}
