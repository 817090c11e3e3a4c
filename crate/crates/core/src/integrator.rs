//! Fixed-step classical Runge–Kutta integration of the shifted dynamics.
//!
//! Samples are stored at every step (no decimation) so downstream checks see
//! every computed state. Sample `k` sits at `t = k·h`; when `h` does not
//! divide the horizon a final shorter step lands exactly on `t_end`.

use crate::dynamics::{ShiftedRate, ShiftedState, VectorField};
use crate::error::{Error, Result};

/// Default step size in non-dimensional time.
pub const DEFAULT_STEP: f64 = 0.01;

/// Stored samples of an integration run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ShiftedState>,
    /// Field evaluated at the matching stored state.
    pub rates: Vec<ShiftedRate>,
    pub step: f64,
}

/// Which part of the state a norm is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    /// `max(|v|, ‖w‖∞)`
    All,
    /// `|v|`
    Resource,
    /// `‖w‖∞`
    Consumption,
}

impl Component {
    pub fn norm(self, s: &ShiftedState) -> f64 {
        match self {
            Component::All => s.sup_norm(),
            Component::Resource => s.v.abs(),
            Component::Consumption => s.w.amax(),
        }
    }
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn final_state(&self) -> Option<&ShiftedState> {
        self.states.last()
    }

    /// Iterate `(t, state, rate)` triples.
    pub fn samples(&self) -> impl Iterator<Item = (f64, &ShiftedState, &ShiftedRate)> {
        self.times
            .iter()
            .zip(&self.states)
            .zip(&self.rates)
            .map(|((&t, s), r)| (t, s, r))
    }

    /// Earliest stored time after which `max(|v|, ‖w‖∞)` stays below `tol`
    /// to the end of the trajectory.
    pub fn convergence_time(&self, tol: f64) -> Option<f64> {
        self.convergence_time_of(tol, Component::All)
    }

    pub fn convergence_time_of(&self, tol: f64, component: Component) -> Option<f64> {
        let mut tracker = ConvergenceTracker::new(tol, component);
        for (t, s, _) in self.samples() {
            tracker.push(t, s);
        }
        tracker.finish()
    }
}

/// Free-function form of [`Trajectory::convergence_time`].
pub fn convergence_time(traj: &Trajectory, tol: f64) -> Option<f64> {
    traj.convergence_time(tol)
}

/// Streaming version of [`Trajectory::convergence_time_of`].
#[derive(Debug, Clone)]
pub struct ConvergenceTracker {
    tol: f64,
    component: Component,
    candidate: Option<f64>,
}

impl ConvergenceTracker {
    pub fn new(tol: f64, component: Component) -> Self {
        ConvergenceTracker {
            tol,
            component,
            candidate: None,
        }
    }

    pub fn push(&mut self, t: f64, s: &ShiftedState) {
        if self.component.norm(s) < self.tol {
            self.candidate.get_or_insert(t);
        } else {
            self.candidate = None;
        }
    }

    pub fn finish(&self) -> Option<f64> {
        self.candidate
    }
}

fn validate(t_end: f64, h: f64) -> Result<()> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon {t_end} must be positive")));
    }
    if !(h > 0.0 && h <= t_end) {
        return Err(Error::InvalidArgument(format!(
            "step {h} must lie in (0, {t_end}]"
        )));
    }
    Ok(())
}

/// Step sizes covering `[0, t_end]`: full steps, plus a final partial one if
/// the remainder is not round-off.
fn step_schedule(t_end: f64, h: f64) -> (usize, Option<f64>) {
    let ratio = t_end / h;
    let mut full = ratio.round();
    if (ratio - full).abs() > 1e-9 * ratio.max(1.0) {
        full = ratio.floor();
    }
    let full = full as usize;
    let rest = t_end - full as f64 * h;
    if rest > 1e-12 * t_end {
        (full, Some(rest))
    } else {
        (full, None)
    }
}

fn rk4_step<F: VectorField>(field: &F, s: &ShiftedState, k1: &ShiftedRate, h: f64) -> ShiftedState {
    let k2 = field.rate(&s.advanced(k1, 0.5 * h));
    let k3 = field.rate(&s.advanced(&k2, 0.5 * h));
    let k4 = field.rate(&s.advanced(&k3, h));
    let dv = (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv) / 6.0;
    let mut dw = k1.dw.clone();
    dw.axpy(2.0, &k2.dw, 1.0);
    dw.axpy(2.0, &k3.dw, 1.0);
    dw += &k4.dw;
    dw /= 6.0;
    s.advanced(&ShiftedRate { dv, dw }, h)
}

/// Integrate with RK4 and hand every stored sample to `observe` instead of
/// collecting them. Returns the number of samples.
pub fn integrate_with<F, O>(
    field: &F,
    state0: &ShiftedState,
    t_end: f64,
    h: f64,
    mut observe: O,
) -> Result<usize>
where
    F: VectorField,
    O: FnMut(f64, &ShiftedState, &ShiftedRate),
{
    validate(t_end, h)?;
    let (full, rest) = step_schedule(t_end, h);
    let non_finite = |time| Error::NonFiniteState {
        time,
        partial: None,
    };

    let mut state = state0.clone();
    let mut rate = field.rate(&state);
    if !state.is_finite() || !rate.is_finite() {
        return Err(non_finite(0.0));
    }
    observe(0.0, &state, &rate);
    let mut count = 1;

    let steps = (1..=full)
        .map(|k| (k as f64 * h, h))
        .chain(rest.map(|r| (t_end, r)));
    for (t, dt) in steps {
        state = rk4_step(field, &state, &rate, dt);
        rate = field.rate(&state);
        if !state.is_finite() || !rate.is_finite() {
            return Err(non_finite(t));
        }
        observe(t, &state, &rate);
        count += 1;
    }
    Ok(count)
}

/// Integrate with RK4 from `state0` over `[0, t_end]` with step `h`.
///
/// On overflow or NaN the error carries every sample stored before it.
pub fn integrate<F: VectorField>(
    field: &F,
    state0: &ShiftedState,
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        rates: Vec::new(),
        step: h,
    };
    let outcome = integrate_with(field, state0, t_end, h, |t, s, r| {
        traj.times.push(t);
        traj.states.push(s.clone());
        traj.rates.push(r.clone());
    });
    match outcome {
        Ok(_) => Ok(traj),
        Err(Error::NonFiniteState { time, .. }) => Err(Error::NonFiniteState {
            time,
            partial: Some(Box::new(traj)),
        }),
        Err(e) => Err(e),
    }
}
