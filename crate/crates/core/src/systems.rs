//! Dynamical systems: double-integrator drones, the 12-state two-drone racing
//! system with an embedded LQR opponent, and small linear test systems.
//!
//! All dynamics are discrete-time with a forward-Euler double-integrator
//! update: `p' = p + v*dt`, `v' = v + u*dt`.

use crate::error::{Error, Result};
use nalgebra::{DVector, Matrix2, RowVector2, Vector2};
use serde::{Deserialize, Serialize};

pub type State = DVector<f64>;
pub type Control = DVector<f64>;

/// Per-drone state layout inside a 6- or 12-dimensional vector.
pub mod racing_idx {
    /// Offset of the ego block in the joint state.
    pub const EGO: usize = 0;
    /// Offset of the opponent block in the joint state.
    pub const OPP: usize = 6;
    pub const PX: usize = 0;
    pub const VX: usize = 1;
    pub const PY: usize = 2;
    pub const VY: usize = 3;
    pub const PZ: usize = 4;
    pub const VZ: usize = 5;
}

/// Deterministic control policy: a map from state to (already clamped) control.
pub trait Policy: Send + Sync {
    /// Stable identifier used to bind certificates to the policy they certify.
    fn id(&self) -> &str;
    fn control(&self, x: &State) -> Control;
}

/// A state/control sequence produced by [`rollout`] or [`rollout_open`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub controls: Vec<Control>,
    pub dt: f64,
}

impl Trajectory {
    /// Number of steps T (states has length T+1).
    pub fn steps(&self) -> usize {
        self.controls.len()
    }
}

/// Infinite-horizon discrete LQR gains for one `(position, velocity)` axis.
///
/// Solved by fixed-point iteration of the discrete Riccati equation with
/// `A = [[1, dt], [0, 1]]`, `B = [0, dt]^T`, `Q = diag(q_pos, q_vel)`, `R = r`.
pub fn dlqr_gain_axis(dt: f64, q_pos: f64, q_vel: f64, r: f64) -> (f64, f64) {
    let a = Matrix2::new(1.0, dt, 0.0, 1.0);
    let b = Vector2::new(0.0, dt);
    let q = Matrix2::new(q_pos, 0.0, 0.0, q_vel);
    let mut p = q;
    for _ in 0..200_000 {
        let s = r + (b.transpose() * p * b)[(0, 0)];
        let k: RowVector2<f64> = (b.transpose() * p * a) / s;
        let p_next = q + a.transpose() * p * a - (a.transpose() * p * b) * k;
        let delta = (p_next - p).abs().max();
        p = p_next;
        if delta < 1e-13 {
            break;
        }
    }
    let s = r + (b.transpose() * p * b)[(0, 0)];
    let k = (b.transpose() * p * a) / s;
    (k[(0, 0)], k[(0, 1)])
}

/// Opponent controller: per-axis LQR regulation to a goal point, clamped.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpponentPolicyConfig {
    /// Goal position the opponent regulates to (zero goal velocity).
    pub goal: [f64; 3],
    pub q_pos: f64,
    pub q_vel: f64,
    pub r: f64,
    /// Per-axis control clamp; must not exceed the system control bound.
    pub clamp: f64,
}

impl Default for OpponentPolicyConfig {
    fn default() -> Self {
        Self {
            goal: [0.0, 1.0, 0.35],
            q_pos: 1.0,
            q_vel: 0.1,
            r: 0.01,
            clamp: 1.0,
        }
    }
}

/// LQR control for the 6-dimensional opponent sub-state.
pub fn opponent_lqr(cfg: &OpponentPolicyConfig, dt: f64, x_o: &State) -> Result<Control> {
    if x_o.len() != 6 {
        return Err(Error::Contract(format!(
            "opponent state must be 6-dimensional, got {}",
            x_o.len()
        )));
    }
    let (k1, k2) = dlqr_gain_axis(dt, cfg.q_pos, cfg.q_vel, cfg.r);
    let mut u = DVector::zeros(3);
    for axis in 0..3 {
        let p = x_o[2 * axis];
        let v = x_o[2 * axis + 1];
        let raw = -k1 * (p - cfg.goal[axis]) - k2 * v;
        u[axis] = raw.clamp(-cfg.clamp, cfg.clamp);
    }
    Ok(u)
}

/// Behaviour of the opponent block inside the joint racing system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OpponentMode {
    /// LQR regulation toward the configured goal.
    Lqr,
    /// Opponent applies zero control (static if its velocity is zero).
    Frozen,
}

/// A concrete dynamical system with its discretization and control bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum System {
    /// `axes` independent (position, velocity) chains; state dim `2*axes`,
    /// control dim `axes`.
    DoubleIntegrator {
        axes: usize,
        dt: f64,
        control_bound: f64,
    },
    /// 12-state ego/opponent pair; the ego is controlled, the opponent runs
    /// its own policy inside the step.
    JointRacing {
        dt: f64,
        control_bound: f64,
        opponent: OpponentPolicyConfig,
        opponent_mode: OpponentMode,
    },
    /// `x' = A x + B u` with per-axis control clamp; used by calibration tests.
    Linear {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        dt: f64,
        control_bound: f64,
    },
}

impl System {
    pub fn state_dim(&self) -> usize {
        match self {
            System::DoubleIntegrator { axes, .. } => 2 * axes,
            System::JointRacing { .. } => 12,
            System::Linear { a, .. } => a.len(),
        }
    }

    pub fn control_dim(&self) -> usize {
        match self {
            System::DoubleIntegrator { axes, .. } => *axes,
            System::JointRacing { .. } => 3,
            System::Linear { b, .. } => b.first().map_or(0, |row| row.len()),
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            System::DoubleIntegrator { dt, .. }
            | System::JointRacing { dt, .. }
            | System::Linear { dt, .. } => *dt,
        }
    }

    pub fn control_bound(&self) -> f64 {
        match self {
            System::DoubleIntegrator { control_bound, .. }
            | System::JointRacing { control_bound, .. }
            | System::Linear { control_bound, .. } => *control_bound,
        }
    }

    /// Per-coordinate unit labels for log headers.
    pub fn units(&self) -> Vec<&'static str> {
        match self {
            System::DoubleIntegrator { axes, .. } => {
                let mut out = Vec::with_capacity(2 * axes);
                for _ in 0..*axes {
                    out.push("m");
                    out.push("m/s");
                }
                out
            }
            System::JointRacing { .. } => vec![
                "m", "m/s", "m", "m/s", "m", "m/s", "m", "m/s", "m", "m/s", "m", "m/s",
            ],
            System::Linear { a, .. } => vec![""; a.len()],
        }
    }

    pub fn clamp_control(&self, u: &Control) -> Control {
        let b = self.control_bound();
        u.map(|v| v.clamp(-b, b))
    }

    fn check_dims(&self, x: &State, u: &Control) -> Result<()> {
        if x.len() != self.state_dim() {
            return Err(Error::Contract(format!(
                "state dimension {} does not match system dimension {}",
                x.len(),
                self.state_dim()
            )));
        }
        if u.len() != self.control_dim() {
            return Err(Error::Contract(format!(
                "control dimension {} does not match system dimension {}",
                u.len(),
                self.control_dim()
            )));
        }
        Ok(())
    }

    /// One forward step. `u` must already be clamped to the control set.
    pub fn step(&self, x: &State, u: &Control) -> Result<State> {
        self.check_dims(x, u)?;
        match self {
            System::DoubleIntegrator { axes, dt, .. } => {
                let mut next = x.clone();
                for axis in 0..*axes {
                    next[2 * axis] = x[2 * axis] + x[2 * axis + 1] * dt;
                    next[2 * axis + 1] = x[2 * axis + 1] + u[axis] * dt;
                }
                Ok(next)
            }
            System::JointRacing {
                dt,
                opponent,
                opponent_mode,
                ..
            } => {
                let mut next = x.clone();
                for axis in 0..3 {
                    let i = racing_idx::EGO + 2 * axis;
                    next[i] = x[i] + x[i + 1] * dt;
                    next[i + 1] = x[i + 1] + u[axis] * dt;
                }
                let x_o = x.rows(racing_idx::OPP, 6).into_owned();
                let u_o = match opponent_mode {
                    OpponentMode::Lqr => opponent_lqr(opponent, *dt, &x_o)?,
                    OpponentMode::Frozen => DVector::zeros(3),
                };
                for axis in 0..3 {
                    let i = racing_idx::OPP + 2 * axis;
                    next[i] = x[i] + x[i + 1] * dt;
                    next[i + 1] = x[i + 1] + u_o[axis] * dt;
                }
                Ok(next)
            }
            System::Linear { a, b, .. } => {
                let n = self.state_dim();
                let m = self.control_dim();
                let mut next = DVector::zeros(n);
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += a[i][j] * x[j];
                    }
                    for j in 0..m {
                        acc += b[i][j] * u[j];
                    }
                    next[i] = acc;
                }
                Ok(next)
            }
        }
    }
}

/// Closed-loop rollout: the policy is queried (and clamped) at every visited state.
pub fn rollout(system: &System, x0: &State, policy: &dyn Policy, steps: usize) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::Contract("rollout requires at least one step".into()));
    }
    let mut states = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps);
    states.push(x0.clone());
    let mut x = x0.clone();
    for _ in 0..steps {
        let u = system.clamp_control(&policy.control(&x));
        x = system.step(&x, &u)?;
        controls.push(u);
        states.push(x.clone());
    }
    Ok(Trajectory {
        states,
        controls,
        dt: system.dt(),
    })
}

/// Open-loop rollout: replays the supplied control sequence (clamped).
pub fn rollout_open(system: &System, x0: &State, controls: &[Control]) -> Result<Trajectory> {
    if controls.is_empty() {
        return Err(Error::Contract("rollout requires at least one step".into()));
    }
    let mut states = Vec::with_capacity(controls.len() + 1);
    let mut used = Vec::with_capacity(controls.len());
    states.push(x0.clone());
    let mut x = x0.clone();
    for u in controls {
        let u = system.clamp_control(u);
        x = system.step(&x, &u)?;
        used.push(u);
        states.push(x.clone());
    }
    Ok(Trajectory {
        states,
        controls: used,
        dt: system.dt(),
    })
}
