//! Minimal-deviation barrier-function safety filter for the racing system.
//!
//! Solves `min ||u - u_nom||^2` subject to the discrete-time barrier decrease
//! condition `h(x+) >= (1 - alpha*dt) * h(x)` for the downwash margin and the
//! four gate-wall margins, box-constrained per axis.
//!
//! The filter predicts one step ahead with the exact zero-order-hold
//! double-integrator update (`p+ = p + v dt + u dt^2/2`) and a
//! constant-velocity opponent: under the plain Euler step the next position
//! is independent of the control and the program would be degenerate.
//!
//! Geometry of the feasible set, per vertical control `u_z`: the wall
//! conditions are linear in `(u_x, u_y)` and the downwash condition excludes
//! a disk, so the minimizer is found by projecting onto the clipped polygon
//! and scanning the disk boundary where it is active. Infeasibility falls
//! back to the control maximizing the worst barrier slack.

use crate::measure::{downwash_margin, wall_margins, RacingSpec};
use crate::systems::{racing_idx, Control, State};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CbfConfig {
    /// Class-K slope of the barrier decrease condition (1/s).
    pub alpha: f64,
    /// Search resolution along the vertical control axis.
    pub uz_grid: usize,
    /// Points scanned on the active disk boundary (within the box window).
    pub circle_grid: usize,
    /// Per-axis grid of the infeasibility fallback search.
    pub fallback_grid: usize,
    pub racing: RacingSpec,
}

impl Default for CbfConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            uz_grid: 41,
            circle_grid: 128,
            fallback_grid: 21,
            racing: RacingSpec::default(),
        }
    }
}

/// Quantities of the one-step prediction that depend on the state only.
struct Prediction {
    /// dt^2 / 2: control-to-position coupling.
    s: f64,
    /// Ego drift positions at t+1 (zero control).
    ex: f64,
    ey: f64,
    ez: f64,
    /// Planar relative drift position at t+1 (ego minus opponent).
    qx: f64,
    qy: f64,
    /// Opponent-above-ego height at t+1 before vertical control.
    dz0: f64,
    /// Required barrier levels at t+1 (downwash, then the four walls).
    rhs: [f64; 5],
    bound: f64,
}

fn predict(cfg: &CbfConfig, dt: f64, bound: f64, x: &State) -> Prediction {
    let e = racing_idx::EGO;
    let o = racing_idx::OPP;
    let s = 0.5 * dt * dt;
    let ex = x[e + racing_idx::PX] + x[e + racing_idx::VX] * dt;
    let ey = x[e + racing_idx::PY] + x[e + racing_idx::VY] * dt;
    let ez = x[e + racing_idx::PZ] + x[e + racing_idx::VZ] * dt;
    let ox = x[o + racing_idx::PX] + x[o + racing_idx::VX] * dt;
    let oy = x[o + racing_idx::PY] + x[o + racing_idx::VY] * dt;
    let oz = x[o + racing_idx::PZ] + x[o + racing_idx::VZ] * dt;

    let kappa = (1.0 - cfg.alpha * dt).max(0.0);
    let h_dw = downwash_margin(&cfg.racing, x).expect("12-D joint state");
    let walls = wall_margins(&cfg.racing, x).expect("12-D joint state");
    let rhs = [
        kappa * h_dw,
        kappa * walls[0],
        kappa * walls[1],
        kappa * walls[2],
        kappa * walls[3],
    ];
    Prediction {
        s,
        ex,
        ey,
        ez,
        qx: ex - ox,
        qy: ey - oy,
        dz0: oz - ez,
        rhs,
        bound,
    }
}

impl Prediction {
    /// Barrier slacks `h_i(x+(u)) - rhs_i`; all nonnegative means feasible.
    fn slacks(&self, cfg: &CbfConfig, u: &[f64; 3]) -> [f64; 5] {
        let s = self.s;
        let m = cfg.racing.wall_margin;
        let px = self.ex + s * u[0];
        let py = self.ey + s * u[1];
        let pz = self.ez + s * u[2];
        let rx = self.qx + s * u[0];
        let ry = self.qy + s * u[1];
        let dz = (self.dz0 - s * u[2]).max(0.0);
        let h_dw = rx * rx + ry * ry - (1.0 + dz) * cfg.racing.downwash_scale;
        [
            h_dw - self.rhs[0],
            (px - py + m) - self.rhs[1],
            (-px - py + m) - self.rhs[2],
            (pz - py + m) - self.rhs[3],
            (-pz - py + m) - self.rhs[4],
        ]
    }

    fn feasible(&self, cfg: &CbfConfig, u: &[f64; 3]) -> bool {
        self.slacks(cfg, u).iter().all(|&v| v >= -1e-10)
    }
}

/// Clip a convex polygon by the half-plane `a . u <= c` (Sutherland-Hodgman).
fn clip(poly: &[(f64, f64)], a: (f64, f64), c: f64) -> Vec<(f64, f64)> {
    let inside = |p: &(f64, f64)| a.0 * p.0 + a.1 * p.1 <= c + 1e-12;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let pi = inside(&p);
        let qi = inside(&q);
        if pi {
            out.push(p);
        }
        if pi != qi {
            let fp = a.0 * p.0 + a.1 * p.1 - c;
            let fq = a.0 * q.0 + a.1 * q.1 - c;
            let t = fp / (fp - fq);
            out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
        }
    }
    out
}

fn project_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return a;
    }
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    (a.0 + t * dx, a.1 + t * dy)
}

/// Project a point onto a convex polygon: the point itself when inside,
/// otherwise the nearest edge projection.
fn project_to_polygon(p: (f64, f64), poly: &[(f64, f64)]) -> Option<(f64, f64)> {
    if poly.is_empty() {
        return None;
    }
    if poly.len() == 1 {
        return Some(poly[0]);
    }
    // Inside test via the winding of consecutive edges (polygon is convex and
    // produced counter-clockwise from the box).
    let mut inside = true;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        if cross < -1e-12 {
            inside = false;
            break;
        }
    }
    if inside {
        return Some(p);
    }
    let mut best = None;
    let mut best_d = f64::INFINITY;
    for i in 0..poly.len() {
        let proj = project_to_segment(p, poly[i], poly[(i + 1) % poly.len()]);
        let d = (proj.0 - p.0).powi(2) + (proj.1 - p.1).powi(2);
        if d < best_d {
            best_d = d;
            best = Some(proj);
        }
    }
    best
}

/// Solve the planar subproblem for a fixed `u_z`: minimize the squared
/// distance to `n` over the clipped polygon, outside the excluded disk.
fn solve_planar(
    pred: &Prediction,
    cfg: &CbfConfig,
    u_z: f64,
    n: (f64, f64),
) -> Option<((f64, f64), f64)> {
    let s = pred.s;
    let m = cfg.racing.wall_margin;
    let b = pred.bound;
    // Wall constraints in (u_x, u_y) for this u_z.
    let d1 = (pred.rhs[1] - m - pred.ex + pred.ey) / s;
    let d2 = (pred.rhs[2] - m + pred.ex + pred.ey) / s;
    let y3 = (m + pred.ez + s * u_z - pred.ey - pred.rhs[3]) / s;
    let y4 = (m - pred.ez - s * u_z - pred.ey - pred.rhs[4]) / s;
    let ymax = y3.min(y4);

    let mut poly = vec![(-b, -b), (b, -b), (b, b), (-b, b)];
    poly = clip(&poly, (0.0, 1.0), ymax);
    poly = clip(&poly, (-1.0, 1.0), -d1);
    poly = clip(&poly, (1.0, 1.0), -d2);
    if poly.is_empty() {
        return None;
    }

    // Downwash disk in control coordinates.
    let dz = (pred.dz0 - s * u_z).max(0.0);
    let r2 = pred.rhs[0] + (1.0 + dz) * cfg.racing.downwash_scale;
    let center = (-pred.qx / s, -pred.qy / s);
    let radius = if r2 > 0.0 { r2.sqrt() / s } else { 0.0 };

    let dist2 = |p: (f64, f64)| (p.0 - n.0).powi(2) + (p.1 - n.1).powi(2);
    let outside_disk = |p: (f64, f64)| {
        radius == 0.0
            || ((p.0 - center.0).powi(2) + (p.1 - center.1).powi(2)) >= radius * radius * (1.0 - 1e-12)
    };

    let mut best: Option<((f64, f64), f64)> = None;
    let mut consider = |p: (f64, f64)| {
        if outside_disk(p) {
            let d = dist2(p);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((p, d));
            }
        }
    };

    // Unconstrained-by-disk optimum over the polygon.
    if let Some(proj) = project_to_polygon(n, &poly) {
        if outside_disk(proj) {
            // Global optimum for this u_z: nothing on the disk can be closer.
            return Some((proj, dist2(proj)));
        }
    }
    for &v in &poly {
        consider(v);
    }

    // Scan the disk boundary inside the box window. The disk is usually much
    // larger than the box, so restrict the angular window subtending it.
    if radius > 0.0 {
        let in_poly = |p: (f64, f64)| {
            p.0.abs() <= b + 1e-9
                && p.1 <= ymax + 1e-9
                && p.1.abs() <= b + 1e-9
                && (-p.0 + p.1) <= -d1 + 1e-9
                && (p.0 + p.1) <= -d2 + 1e-9
        };
        let dist_c = ((center.0) * (center.0) + (center.1) * (center.1)).sqrt();
        let box_radius = 1.5 * b * 2.0_f64.sqrt();
        let (theta0, half_window) = if dist_c <= box_radius {
            (0.0, std::f64::consts::PI)
        } else {
            let t0 = (-center.1).atan2(-center.0);
            let w = (box_radius / dist_c).asin().min(std::f64::consts::PI);
            (t0, w)
        };
        let grid = cfg.circle_grid.max(8);
        let mut best_theta = None;
        for k in 0..=grid {
            let theta = theta0 - half_window + 2.0 * half_window * (k as f64) / (grid as f64);
            let p = (
                center.0 + radius * theta.cos(),
                center.1 + radius * theta.sin(),
            );
            if in_poly(p) {
                let d = dist2(p);
                if best_theta.is_none_or(|(_, bd)| d < bd) {
                    best_theta = Some((theta, d));
                }
            }
        }
        if let Some((theta_star, _)) = best_theta {
            // Local refinement around the best scanned angle.
            let step = 2.0 * half_window / (grid as f64);
            let fine = 64;
            for k in 0..=fine {
                let theta = theta_star - step + 2.0 * step * (k as f64) / (fine as f64);
                let p = (
                    center.0 + radius * theta.cos(),
                    center.1 + radius * theta.sin(),
                );
                if in_poly(p) {
                    consider(p);
                }
            }
        }
    }

    best
}

/// Filter a nominal control through the barrier conditions. Always returns a
/// box-feasible control; when no control satisfies the barrier conditions the
/// safest control (maximal worst slack) is returned instead.
pub fn cbf_filter(cfg: &CbfConfig, dt: f64, bound: f64, x: &State, u_nom: &Control) -> Control {
    assert_eq!(x.len(), 12, "CBF filter needs the 12-D joint state");
    assert_eq!(u_nom.len(), 3);
    let pred = predict(cfg, dt, bound, x);
    let n: Vec<f64> = u_nom.iter().map(|v| v.clamp(-bound, bound)).collect();

    if pred.feasible(cfg, &[n[0], n[1], n[2]]) {
        return DVector::from_vec(n);
    }

    let nz = cfg.uz_grid.max(2);
    let mut best: Option<([f64; 3], f64)> = None;
    for k in 0..nz {
        let u_z = -bound + 2.0 * bound * (k as f64) / ((nz - 1) as f64);
        if let Some(((ux, uy), _)) = solve_planar(&pred, cfg, u_z, (n[0], n[1])) {
            let u = [ux, uy, u_z];
            if !pred.feasible(cfg, &u) {
                continue;
            }
            let cost = (ux - n[0]).powi(2) + (uy - n[1]).powi(2) + (u_z - n[2]).powi(2);
            if best.is_none_or(|(_, bc)| cost < bc) {
                best = Some((u, cost));
            }
        }
    }
    if let Some((u, _)) = best {
        return DVector::from_vec(u.to_vec());
    }

    // Infeasible: maximize the worst barrier slack over the box.
    let ng = cfg.fallback_grid.max(2);
    let level = |k: usize| -bound + 2.0 * bound * (k as f64) / ((ng - 1) as f64);
    let mut safest = ([0.0; 3], f64::NEG_INFINITY);
    for i in 0..ng {
        for j in 0..ng {
            for k in 0..ng {
                let u = [level(i), level(j), level(k)];
                let worst = pred
                    .slacks(cfg, &u)
                    .into_iter()
                    .fold(f64::INFINITY, f64::min);
                if worst > safest.1 {
                    safest = (u, worst);
                }
            }
        }
    }
    DVector::from_vec(safest.0.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn joint(ego: [f64; 6], opp: [f64; 6]) -> State {
        let mut x = DVector::zeros(12);
        for i in 0..6 {
            x[i] = ego[i];
            x[6 + i] = opp[i];
        }
        x
    }

    #[test]
    fn inactive_constraint_passes_the_nominal_through() {
        let cfg = CbfConfig::default();
        // Far from the opponent, far below the gate plane: all margins large.
        let x = joint(
            [0.0, 0.0, -3.0, 1.0, 0.0, 0.0],
            [2.0, 0.0, -6.0, 1.0, 0.5, 0.0],
        );
        let u_nom = DVector::from_vec(vec![0.3, 0.8, -0.2]);
        let u = cbf_filter(&cfg, 0.1, 1.0, &x, &u_nom);
        assert_eq!(u, u_nom);
    }

    #[test]
    fn output_always_respects_the_box() {
        let cfg = CbfConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..300 {
            let x = DVector::from_fn(12, |_, _| rng.random_range(-1.5f64..1.5));
            let u_nom = DVector::from_fn(3, |_, _| rng.random_range(-3.0f64..3.0));
            let u = cbf_filter(&cfg, 0.1, 1.0, &x, &u_nom);
            assert!(u.amax() <= 1.0 + 1e-9, "control {u} outside the box");
            assert!(u.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn filter_is_deterministic() {
        let cfg = CbfConfig::default();
        let x = joint(
            [0.05, 0.1, -0.6, 1.2, 0.0, 0.0],
            [0.1, 0.0, -0.4, 1.0, 0.3, 0.0],
        );
        let u_nom = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let a = cbf_filter(&cfg, 0.1, 1.0, &x, &u_nom);
        let b = cbf_filter(&cfg, 0.1, 1.0, &x, &u_nom);
        assert_eq!(a, b);
    }

    /// States near a barrier boundary with slow drift, where the one-step
    /// control authority decides feasibility.
    fn boundary_state(rng: &mut ChaCha8Rng) -> State {
        let sep = rng.random_range(0.48f64..0.75);
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let (ox, oy) = (sep * angle.cos(), sep * angle.sin());
        let ego_py = rng.random_range(-0.6..-0.2);
        joint(
            [
                rng.random_range(-0.25..0.25),
                rng.random_range(-0.15..0.15),
                ego_py,
                rng.random_range(-0.1..0.3),
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.1..0.1),
            ],
            [
                ox,
                rng.random_range(-0.15..0.15),
                ego_py + oy,
                rng.random_range(-0.1..0.3),
                rng.random_range(0.0..0.4),
                rng.random_range(-0.1..0.1),
            ],
        )
    }

    #[test]
    fn active_filter_output_is_feasible_when_a_feasible_control_exists() {
        let cfg = CbfConfig::default();
        let dt = 0.1;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut active_cases = 0;
        for _ in 0..3000 {
            let x = boundary_state(&mut rng);
            let u_nom = DVector::from_fn(3, |_, _| rng.random_range(-1.0f64..1.0));
            let pred = predict(&cfg, dt, 1.0, &x);
            if pred.feasible(&cfg, &[u_nom[0], u_nom[1], u_nom[2]]) {
                continue;
            }
            // Does any feasible control exist? Probe a coarse grid.
            let mut any = false;
            'outer: for i in 0..21 {
                for j in 0..21 {
                    for k in 0..21 {
                        let u = [
                            -1.0 + 0.1 * i as f64,
                            -1.0 + 0.1 * j as f64,
                            -1.0 + 0.1 * k as f64,
                        ];
                        if pred.feasible(&cfg, &u) {
                            any = true;
                            break 'outer;
                        }
                    }
                }
            }
            if !any {
                continue;
            }
            active_cases += 1;
            let u = cbf_filter(&cfg, dt, 1.0, &x, &u_nom);
            assert!(
                pred.feasible(&cfg, &[u[0], u[1], u[2]]),
                "filter returned an infeasible control for a feasible program"
            );
        }
        assert!(active_cases > 20, "only {active_cases} active cases sampled");
    }

    #[test]
    fn infeasible_case_returns_the_safest_control() {
        let cfg = CbfConfig::default();
        // Deep inside the downwash cylinder closing fast: no one-step
        // control can satisfy the decrease condition.
        let x = joint(
            [0.0, 0.0, -0.5, 2.0, 0.0, 0.0],
            [0.05, 0.0, -0.45, -2.0, 0.5, 0.0],
        );
        let pred = predict(&cfg, 0.1, 1.0, &x);
        let u_nom = DVector::from_vec(vec![0.0, 0.0, 0.0]);
        let u = cbf_filter(&cfg, 0.1, 1.0, &x, &u_nom);
        assert!(u.amax() <= 1.0 + 1e-9);
        // The returned control should do no worse on the worst slack than
        // the nominal.
        let worst = |u: &Control| {
            pred.slacks(&cfg, &[u[0], u[1], u[2]])
                .into_iter()
                .fold(f64::INFINITY, f64::min)
        };
        assert!(worst(&u) >= worst(&u_nom) - 1e-9);
    }
}
