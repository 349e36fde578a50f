//! Deterministic Mountain Car and Acrobot with states normalized into the
//! unit box the bases are defined on.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};

/// An episodic control task with a discrete action set. States handed to the
/// learner are normalized into `[0, 1]^d`; raw states stay in native units.
pub trait Environment: Send {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Starts a new episode and returns the normalized initial state.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    /// Advances one step. Returns the normalized next state, the reward and
    /// the terminal flag. Stepping a terminal state is an error.
    fn step(&mut self, action: usize) -> Result<(Vec<f64>, f64, bool)>;
    /// Current raw state in native units.
    fn raw_state(&self) -> Vec<f64>;
    /// Affine map from native bounds to the unit box.
    fn normalize(&self, raw: &[f64]) -> Vec<f64>;
}

/// Environment selector used by the harness and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum EnvKind {
    #[serde(rename = "mountain-car")]
    MountainCar,
    #[serde(rename = "acrobot")]
    Acrobot,
}

impl EnvKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "mountain-car" => Ok(EnvKind::MountainCar),
            "acrobot" => Ok(EnvKind::Acrobot),
            other => Err(Error::UnknownEnvironment(other.to_string())),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            EnvKind::MountainCar => "mountain-car",
            EnvKind::Acrobot => "acrobot",
        }
    }

    pub fn build(&self, acrobot_dt: f64) -> Box<dyn Environment> {
        match self {
            EnvKind::MountainCar => Box::new(MountainCar::new()),
            EnvKind::Acrobot => Box::new(Acrobot::new(acrobot_dt)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            EnvKind::MountainCar => 2,
            EnvKind::Acrobot => 4,
        }
    }
}

impl std::fmt::Display for EnvKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

// ---------------------------------------------------------------------------
// Mountain Car

pub const MC_POSITION_MIN: f64 = -1.2;
pub const MC_POSITION_MAX: f64 = 0.6;
pub const MC_VELOCITY_MAX: f64 = 0.07;
pub const MC_GOAL: f64 = 0.5;

/// The classic underpowered car: positions in [-1.2, 0.6], velocities in
/// [-0.07, 0.07], actions {reverse, coast, forward}, reward -1 per step,
/// terminal at position >= 0.5.
#[derive(Debug, Clone)]
pub struct MountainCar {
    position: f64,
    velocity: f64,
    terminal: bool,
}

impl MountainCar {
    pub fn new() -> Self {
        MountainCar { position: -0.5, velocity: 0.0, terminal: false }
    }
}

impl Default for MountainCar {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for MountainCar {
    fn name(&self) -> &'static str {
        "mountain-car"
    }

    fn dim(&self) -> usize {
        2
    }

    fn n_actions(&self) -> usize {
        3
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.position = rng.random_range(-0.6..-0.4);
        self.velocity = 0.0;
        self.terminal = false;
        self.normalize(&[self.position, self.velocity])
    }

    fn step(&mut self, action: usize) -> Result<(Vec<f64>, f64, bool)> {
        if self.terminal {
            return Err(Error::TerminalStep);
        }
        if action >= 3 {
            return Err(Error::InvalidAction { action, n_actions: 3 });
        }
        let force = action as f64 - 1.0;
        let mut v = self.velocity + 0.001 * force - 0.0025 * (3.0 * self.position).cos();
        v = v.clamp(-MC_VELOCITY_MAX, MC_VELOCITY_MAX);
        let mut p = self.position + v;
        if p <= MC_POSITION_MIN {
            p = MC_POSITION_MIN;
            v = 0.0;
        } else if p > MC_POSITION_MAX {
            p = MC_POSITION_MAX;
        }
        self.position = p;
        self.velocity = v;
        self.terminal = p >= MC_GOAL;
        Ok((self.normalize(&[p, v]), -1.0, self.terminal))
    }

    fn raw_state(&self) -> Vec<f64> {
        vec![self.position, self.velocity]
    }

    fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        vec![
            (raw[0] - MC_POSITION_MIN) / (MC_POSITION_MAX - MC_POSITION_MIN),
            (raw[1] + MC_VELOCITY_MAX) / (2.0 * MC_VELOCITY_MAX),
        ]
    }
}

// ---------------------------------------------------------------------------
// Acrobot

pub const ACROBOT_MAX_VEL_1: f64 = 4.0 * std::f64::consts::PI;
pub const ACROBOT_MAX_VEL_2: f64 = 9.0 * std::f64::consts::PI;
pub const ACROBOT_DEFAULT_DT: f64 = 0.2;

/// Two-link underactuated pendulum in the 4-dimensional representation
/// (theta1, theta2, dtheta1, dtheta2), torque in {-1, 0, +1} on the second
/// joint, integrated with one fixed-step RK4 step of `dt` seconds per action.
/// Terminal when the tip rises above one link length:
/// `-cos(theta1) - cos(theta1 + theta2) > 1`.
#[derive(Debug, Clone)]
pub struct Acrobot {
    state: [f64; 4],
    terminal: bool,
    dt: f64,
}

const LINK_MASS: f64 = 1.0;
const LINK_LENGTH: f64 = 1.0;
const LINK_COM: f64 = 0.5;
const LINK_INERTIA: f64 = 1.0;
const GRAVITY: f64 = 9.8;

impl Acrobot {
    pub fn new(dt: f64) -> Self {
        Acrobot { state: [0.0; 4], terminal: false, dt }
    }

    fn dynamics(state: &[f64; 4], torque: f64) -> [f64; 4] {
        let (m1, m2) = (LINK_MASS, LINK_MASS);
        let l1 = LINK_LENGTH;
        let (lc1, lc2) = (LINK_COM, LINK_COM);
        let (i1, i2) = (LINK_INERTIA, LINK_INERTIA);
        let g = GRAVITY;
        let [theta1, theta2, dtheta1, dtheta2] = *state;

        let d1 = m1 * lc1 * lc1
            + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos())
            + i1
            + i2;
        let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
        let phi2 = m2 * lc2 * g * (theta1 + theta2 - std::f64::consts::FRAC_PI_2).cos();
        let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
            - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
            + (m1 * lc1 + m2 * l1) * g * (theta1 - std::f64::consts::FRAC_PI_2).cos()
            + phi2;
        let ddtheta2 = (torque + (d2 / d1) * phi1
            - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin()
            - phi2)
            / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
        let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
        [dtheta1, dtheta2, ddtheta1, ddtheta2]
    }

    fn rk4_step(&self, torque: f64) -> [f64; 4] {
        let h = self.dt;
        let y = self.state;
        let k1 = Self::dynamics(&y, torque);
        let k2 = Self::dynamics(&add_scaled(&y, &k1, h / 2.0), torque);
        let k3 = Self::dynamics(&add_scaled(&y, &k2, h / 2.0), torque);
        let k4 = Self::dynamics(&add_scaled(&y, &k3, h), torque);
        let mut out = y;
        for i in 0..4 {
            out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }
}

fn add_scaled(y: &[f64; 4], k: &[f64; 4], h: f64) -> [f64; 4] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2], y[3] + h * k[3]]
}

/// Wraps an angle into [-pi, pi).
fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    (theta + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI
}

impl Environment for Acrobot {
    fn name(&self) -> &'static str {
        "acrobot"
    }

    fn dim(&self) -> usize {
        4
    }

    fn n_actions(&self) -> usize {
        3
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        for v in &mut self.state {
            *v = rng.random_range(-0.1..0.1);
        }
        self.terminal = false;
        self.normalize(&self.state.to_vec())
    }

    fn step(&mut self, action: usize) -> Result<(Vec<f64>, f64, bool)> {
        if self.terminal {
            return Err(Error::TerminalStep);
        }
        if action >= 3 {
            return Err(Error::InvalidAction { action, n_actions: 3 });
        }
        let torque = action as f64 - 1.0;
        let mut next = self.rk4_step(torque);
        next[0] = wrap_angle(next[0]);
        next[1] = wrap_angle(next[1]);
        next[2] = next[2].clamp(-ACROBOT_MAX_VEL_1, ACROBOT_MAX_VEL_1);
        next[3] = next[3].clamp(-ACROBOT_MAX_VEL_2, ACROBOT_MAX_VEL_2);
        self.state = next;
        self.terminal = -next[0].cos() - (next[0] + next[1]).cos() > 1.0;
        Ok((self.normalize(&next.to_vec()), -1.0, self.terminal))
    }

    fn raw_state(&self) -> Vec<f64> {
        self.state.to_vec()
    }

    fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        let pi = std::f64::consts::PI;
        vec![
            (wrap_angle(raw[0]) + pi) / (2.0 * pi),
            (wrap_angle(raw[1]) + pi) / (2.0 * pi),
            (raw[2] + ACROBOT_MAX_VEL_1) / (2.0 * ACROBOT_MAX_VEL_1),
            (raw[3] + ACROBOT_MAX_VEL_2) / (2.0 * ACROBOT_MAX_VEL_2),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mountain_car_reset_distribution() {
        let mut env = MountainCar::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            env.reset(&mut rng);
            let raw = env.raw_state();
            assert!((-0.6..-0.4).contains(&raw[0]));
            assert_eq!(raw[1], 0.0);
        }
    }

    #[test]
    fn mountain_car_coast_step_matches_scalar_formula() {
        let mut env = MountainCar::new();
        env.position = -0.5;
        env.velocity = 0.0;
        env.terminal = false;
        let (_, reward, terminal) = env.step(1).unwrap();
        let v_expected = -0.0025 * (-1.5f64).cos();
        assert_abs_diff_eq!(env.raw_state()[1], v_expected, epsilon = 1e-18);
        assert_abs_diff_eq!(env.raw_state()[0], -0.5 + v_expected, epsilon = 1e-18);
        assert_eq!(reward, -1.0);
        assert!(!terminal);
    }

    #[test]
    fn mountain_car_terminates_at_goal() {
        let mut env = MountainCar::new();
        env.position = 0.499;
        env.velocity = 0.07;
        env.terminal = false;
        let (_, _, terminal) = env.step(2).unwrap();
        assert!(terminal);
        assert!(env.raw_state()[0] >= 0.5);
        assert!(matches!(env.step(0), Err(Error::TerminalStep)));
    }

    #[test]
    fn mountain_car_normalization_bounds() {
        let env = MountainCar::new();
        assert_eq!(env.normalize(&[-1.2, -0.07]), vec![0.0, 0.0]);
        assert_eq!(env.normalize(&[0.6, 0.07]), vec![1.0, 1.0]);
        let mid = env.normalize(&[-0.3, 0.0]);
        assert_abs_diff_eq!(mid[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(mid[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn mountain_car_left_wall_zeroes_velocity() {
        let mut env = MountainCar::new();
        env.position = -1.19;
        env.velocity = -0.07;
        env.terminal = false;
        env.step(0).unwrap();
        assert_eq!(env.raw_state()[0], -1.2);
        assert_eq!(env.raw_state()[1], 0.0);
    }

    #[test]
    fn mountain_car_coasting_never_reaches_goal() {
        // from rest near the valley bottom the coast action cannot build the
        // momentum the hill requires; catches sign errors in the dynamics
        let mut env = MountainCar::new();
        env.position = -0.5;
        env.velocity = 0.0;
        env.terminal = false;
        for _ in 0..10_000 {
            let (_, _, terminal) = env.step(1).unwrap();
            assert!(!terminal);
        }
        assert!(env.raw_state()[0] < MC_GOAL);
    }

    #[test]
    fn trajectories_are_deterministic() {
        for kind in [EnvKind::MountainCar, EnvKind::Acrobot] {
            let run = |seed: u64| {
                let mut env = kind.build(ACROBOT_DEFAULT_DT);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut states = vec![env.reset(&mut rng)];
                for i in 0..200 {
                    let (s, _, t) = env.step(i % 3).unwrap();
                    states.push(s);
                    if t {
                        break;
                    }
                }
                states
            };
            let a = run(42);
            let b = run(42);
            assert_eq!(a, b, "{} not deterministic", kind);
            let c = run(43);
            assert_ne!(a[0], c[0]);
        }
    }

    #[test]
    fn normalized_states_stay_in_unit_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [EnvKind::MountainCar, EnvKind::Acrobot] {
            let mut env = kind.build(ACROBOT_DEFAULT_DT);
            for ep in 0..5 {
                let mut s = env.reset(&mut rng);
                for i in 0..500 {
                    assert!(s.iter().all(|&x| (0.0..=1.0).contains(&x)), "{kind} state {s:?}");
                    let action = (i + ep) % 3;
                    let (sn, _, t) = env.step(action).unwrap();
                    s = sn;
                    if t {
                        break;
                    }
                }
            }
        }
    }

    #[test]
    fn acrobot_reset_distribution() {
        let mut env = Acrobot::new(ACROBOT_DEFAULT_DT);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            env.reset(&mut rng);
            assert!(env.raw_state().iter().all(|&v| (-0.1..0.1).contains(&v)));
        }
    }

    #[test]
    fn acrobot_hanging_start_is_not_terminal() {
        let mut env = Acrobot::new(ACROBOT_DEFAULT_DT);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        env.reset(&mut rng);
        // torque-free swing from near-rest stays below the line for a while
        for _ in 0..50 {
            let (_, _, terminal) = env.step(1).unwrap();
            assert!(!terminal);
        }
    }

    #[test]
    fn acrobot_is_solvable_by_energy_pumping() {
        // torque in the direction of the second joint's velocity pumps
        // energy into the system; a liveness sanity check on the dynamics
        let mut env = Acrobot::new(ACROBOT_DEFAULT_DT);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        env.reset(&mut rng);
        let mut reached = false;
        for _ in 0..3000 {
            let action = if env.raw_state()[3] >= 0.0 { 2 } else { 0 };
            let (_, _, terminal) = env.step(action).unwrap();
            if terminal {
                reached = true;
                break;
            }
        }
        assert!(reached, "dynamics too stiff: energy pumping never terminates");
    }

    #[test]
    fn angle_wrap_is_half_open() {
        assert_abs_diff_eq!(wrap_angle(std::f64::consts::PI), -std::f64::consts::PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-std::f64::consts::PI), -std::f64::consts::PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(3.0 * std::f64::consts::PI), -std::f64::consts::PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(0.5), 0.5, epsilon = 1e-15);
    }
}
