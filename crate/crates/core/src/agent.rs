//! Sarsa(λ) with linear action values over a (possibly growing) basis:
//! one weight and one eligibility-trace vector per action over a shared
//! feature set.

use rand::{Rng, RngCore};

use crate::adaptive::{AdaptiveController, EditRecord};
use crate::basis::BasisSet;
use crate::envs::Environment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AgentConfig {
    /// Learning rate.
    pub alpha: f64,
    /// Discount factor.
    pub gamma: f64,
    /// Trace decay.
    pub lambda: f64,
    /// Exploration rate of the epsilon-greedy policy.
    pub epsilon_greedy: f64,
    /// Replacing instead of accumulating traces.
    pub replacing_traces: bool,
    /// Scale each Fourier term's learning rate by `1/||c||`; without it the
    /// baseline diverges at any useful alpha.
    pub fourier_alpha_scaling: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            alpha: 0.01,
            gamma: 1.0,
            lambda: 0.9,
            epsilon_greedy: 0.0,
            replacing_traces: false,
            fourier_alpha_scaling: true,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.epsilon_greedy) {
            return Err(Error::InvalidConfig(format!(
                "epsilon_greedy must lie in [0, 1], got {}",
                self.epsilon_greedy
            )));
        }
        Ok(())
    }
}

/// One transition with its TD error
/// `delta = r + gamma * Q(s', a') - Q(s, a)`; the bootstrap term is dropped
/// at terminal transitions.
#[derive(Debug, Clone)]
pub struct TDSample {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// `None` when the transition is terminal.
    pub next_action: Option<usize>,
    pub delta: f64,
}

impl TDSample {
    /// Builds a sample, computing the TD error from the basis's current
    /// weights.
    pub fn compute(
        basis: &BasisSet,
        config: &AgentConfig,
        state: Vec<f64>,
        action: usize,
        reward: f64,
        next_state: Vec<f64>,
        next_action: Option<usize>,
    ) -> Result<Self> {
        let q_sa = q_value(basis, &state, action)?;
        let bootstrap = match next_action {
            Some(a_next) => config.gamma * q_value(basis, &next_state, a_next)?,
            None => 0.0,
        };
        Ok(TDSample {
            state,
            action,
            reward,
            next_state,
            next_action,
            delta: reward + bootstrap - q_sa,
        })
    }
}

#[inline]
fn q_from_activations(basis: &BasisSet, active: &[(usize, f64)], action: usize) -> f64 {
    let w = basis.weights(action);
    active.iter().map(|&(i, v)| w[i] * v).sum()
}

/// Action value `Q(s, a)` under the basis's current weights.
pub fn q_value(basis: &BasisSet, s: &[f64], action: usize) -> Result<f64> {
    if action >= basis.n_actions() {
        return Err(Error::InvalidAction { action, n_actions: basis.n_actions() });
    }
    let active = basis.activations(s)?;
    Ok(q_from_activations(basis, &active, action))
}

fn greedy_from_activations(
    basis: &BasisSet,
    active: &[(usize, f64)],
    epsilon: f64,
    rng: &mut dyn RngCore,
) -> usize {
    let n = basis.n_actions();
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return rng.random_range(0..n);
    }
    let mut best = vec![0usize];
    let mut best_q = q_from_activations(basis, active, 0);
    for a in 1..n {
        let q = q_from_activations(basis, active, a);
        match q.total_cmp(&best_q) {
            std::cmp::Ordering::Greater => {
                best_q = q;
                best.clear();
                best.push(a);
            }
            std::cmp::Ordering::Equal => best.push(a),
            std::cmp::Ordering::Less => {}
        }
    }
    if best.len() == 1 {
        best[0]
    } else {
        best[rng.random_range(0..best.len())]
    }
}

/// Epsilon-greedy action selection; greedy ties break uniformly at random.
pub fn select_action(
    basis: &BasisSet,
    s: &[f64],
    epsilon: f64,
    rng: &mut dyn RngCore,
) -> Result<usize> {
    let active = basis.activations(s)?;
    Ok(greedy_from_activations(basis, &active, epsilon, rng))
}

fn apply_update(basis: &mut BasisSet, active: &[(usize, f64)], sample_action: usize, delta: f64, config: &AgentConfig) {
    // bump the taken action's traces at the active features
    {
        let traces = basis.traces_mut(sample_action);
        for &(i, v) in active {
            if config.replacing_traces {
                traces[i] = v;
            } else {
                traces[i] += v;
            }
        }
    }
    // weight update for every action through its own traces
    let n = basis.len();
    let n_actions = basis.n_actions();
    let step = config.alpha * delta;
    for a in 0..n_actions {
        for i in 0..n {
            let scale = if config.fourier_alpha_scaling { basis.lr_scales()[i] } else { 1.0 };
            let t = basis.traces(a)[i];
            basis.weights_mut(a)[i] += step * scale * t;
        }
    }
    basis.decay_traces(config.gamma * config.lambda);
}

/// One Sarsa(λ) update: accumulate the taken action's traces at the sample's
/// active features, move every weight along its trace by `alpha * delta`,
/// then decay all traces by `gamma * lambda`.
pub fn sarsa_step(basis: &mut BasisSet, sample: &TDSample, config: &AgentConfig) -> Result<()> {
    let active = basis.activations(&sample.state)?;
    apply_update(basis, &active, sample.action, sample.delta, config);
    Ok(())
}

/// Outcome of one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub episode_return: f64,
    pub steps: u64,
    /// Structural edits made during this episode.
    pub edits: usize,
    /// Basis size at episode end.
    pub basis_size: usize,
}

/// Runs one episode of Sarsa(λ) with the adaptive controller invoked once
/// per step, recording the TD error into the relevance statistics of the
/// active features. Episodes end at a terminal state or after `step_cap`
/// steps.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    env: &mut dyn Environment,
    basis: &mut BasisSet,
    controller: &mut AdaptiveController,
    config: &AgentConfig,
    rng: &mut dyn RngCore,
    step_cap: u64,
    episode: u64,
    global_step: &mut u64,
    edits_out: &mut Vec<EditRecord>,
) -> Result<EpisodeRecord> {
    basis.reset_traces();
    let edits_before = edits_out.len();
    let mut state = env.reset(rng);
    let mut active = basis.activations(&state)?;
    let mut action = greedy_from_activations(basis, &active, config.epsilon_greedy, rng);
    let mut episode_return = 0.0;
    let mut steps = 0u64;
    loop {
        let (next_state, reward, terminal) = env.step(action)?;
        episode_return += reward;
        steps += 1;
        *global_step += 1;

        let (delta, next_pair) = if terminal {
            (reward - q_from_activations(basis, &active, action), None)
        } else {
            let next_active = basis.activations(&next_state)?;
            let next_action =
                greedy_from_activations(basis, &next_active, config.epsilon_greedy, rng);
            let q_next = q_from_activations(basis, &next_active, next_action);
            let q_sa = q_from_activations(basis, &active, action);
            (reward + config.gamma * q_next - q_sa, Some((next_active, next_action)))
        };

        apply_update(basis, &active, action, delta, config);
        let edit = controller.on_step(basis, &active, delta, *global_step, episode);
        let edited = edit.is_some();
        if let Some(e) = edit {
            edits_out.push(e);
        }

        match next_pair {
            None => break,
            Some((next_active, next_action)) => {
                state = next_state;
                action = next_action;
                // a structural edit invalidates cached activation indices
                active = if edited { basis.activations(&state)? } else { next_active };
            }
        }
        if steps >= step_cap {
            break;
        }
    }
    Ok(EpisodeRecord {
        episode_return,
        steps,
        edits: edits_out.len() - edits_before,
        basis_size: basis.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptive::{AdaptiveConfig, AdaptiveMode};
    use crate::envs::MountainCar;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn q_value_zero_weights_and_single_indicator() {
        let mut basis = BasisSet::fixed_coupled(1, 0, 0, 2).unwrap();
        assert_eq!(q_value(&basis, &[0.4], 0).unwrap(), 0.0);
        assert_eq!(q_value(&basis, &[0.4], 1).unwrap(), 0.0);
        basis.weights_mut(1)[0] = 5.0;
        assert_eq!(q_value(&basis, &[0.4], 1).unwrap(), 5.0);
        assert!(q_value(&basis, &[0.4], 2).is_err());
    }

    #[test]
    fn q_value_sparse_matches_dense() {
        let mut basis = BasisSet::fixed_coupled(2, 2, 2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for a in 0..3 {
            for i in 0..basis.len() {
                basis.weights_mut(a)[i] = rng.random_range(-1.0..1.0);
            }
        }
        for _ in 0..200 {
            let s = [rng.random::<f64>(), rng.random::<f64>()];
            for a in 0..3 {
                let dense: f64 = basis
                    .functions()
                    .iter()
                    .enumerate()
                    .map(|(i, f)| basis.weights(a)[i] * f.value(&s))
                    .sum();
                assert_abs_diff_eq!(q_value(&basis, &s, a).unwrap(), dense, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn greedy_selection_picks_argmax() {
        let mut basis = BasisSet::fixed_coupled(1, 0, 0, 3).unwrap();
        basis.weights_mut(0)[0] = 1.0;
        basis.weights_mut(1)[0] = 3.0;
        basis.weights_mut(2)[0] = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            assert_eq!(select_action(&basis, &[0.5], 0.0, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn equal_values_tie_break_uniformly() {
        let basis = BasisSet::fixed_coupled(1, 0, 0, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0usize; 4];
        let draws = 10_000;
        for _ in 0..draws {
            counts[select_action(&basis, &[0.5], 0.0, &mut rng).unwrap()] += 1;
        }
        // binomial(10^4, 1/4): sigma ~ 43, allow 3 sigma
        let expected = draws / 4;
        for &c in &counts {
            assert!((c as f64 - expected as f64).abs() < 3.0 * 43.3, "counts {counts:?}");
        }
    }

    #[test]
    fn epsilon_one_ignores_values() {
        let mut basis = BasisSet::fixed_coupled(1, 0, 0, 2).unwrap();
        basis.weights_mut(0)[0] = 100.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut second = 0usize;
        for _ in 0..10_000 {
            if select_action(&basis, &[0.5], 1.0, &mut rng).unwrap() == 1 {
                second += 1;
            }
        }
        assert!(second > 4700 && second < 5300, "{second}");
    }

    #[test]
    fn zero_delta_leaves_weights_unchanged() {
        let mut basis = BasisSet::fixed_coupled(1, 1, 1, 2).unwrap();
        let before: Vec<f64> = basis.weights(0).to_vec();
        let sample = TDSample {
            state: vec![0.4],
            action: 0,
            reward: 0.0,
            next_state: vec![0.5],
            next_action: Some(0),
            delta: 0.0,
        };
        sarsa_step(&mut basis, &sample, &AgentConfig::default()).unwrap();
        assert_eq!(basis.weights(0), before.as_slice());
    }

    #[test]
    fn lambda_zero_touches_only_active_features() {
        let mut basis = BasisSet::fixed_coupled(1, 0, 2, 1).unwrap();
        let config = AgentConfig { alpha: 0.5, lambda: 0.0, ..AgentConfig::default() };
        // first update in tile containing 0.1
        let s1 = TDSample {
            state: vec![0.1],
            action: 0,
            reward: -1.0,
            next_state: vec![0.6],
            next_action: Some(0),
            delta: -1.0,
        };
        sarsa_step(&mut basis, &s1, &config).unwrap();
        // second update elsewhere must not move the first tile again
        let w_after_first: Vec<f64> = basis.weights(0).to_vec();
        let s2 = TDSample {
            state: vec![0.6],
            action: 0,
            reward: -1.0,
            next_state: vec![0.9],
            next_action: Some(0),
            delta: -1.0,
        };
        sarsa_step(&mut basis, &s2, &config).unwrap();
        let active1 = basis.activations(&[0.1]).unwrap()[0].0;
        assert_eq!(basis.weights(0)[active1], w_after_first[active1]);
    }

    #[test]
    fn two_step_chain_matches_hand_computation() {
        // single always-on indicator, one action, alpha=0.5, gamma=1,
        // lambda=0.5, accumulating traces:
        //   step 1: delta = -1, trace 1,   w = -0.5
        //   step 2 (terminal): delta = -1 - (-0.5) = -0.5, trace 1.5,
        //                      w = -0.5 + 0.5 * (-0.5) * 1.5 = -0.875
        let mut basis = BasisSet::fixed_coupled(1, 0, 0, 1).unwrap();
        let config = AgentConfig { alpha: 0.5, gamma: 1.0, lambda: 0.5, ..AgentConfig::default() };

        let s1 = TDSample::compute(&basis, &config, vec![0.3], 0, -1.0, vec![0.6], Some(0)).unwrap();
        assert_eq!(s1.delta, -1.0);
        sarsa_step(&mut basis, &s1, &config).unwrap();
        assert_abs_diff_eq!(basis.weights(0)[0], -0.5, epsilon = 1e-12);

        let s2 = TDSample::compute(&basis, &config, vec![0.6], 0, -1.0, vec![0.9], None).unwrap();
        assert_abs_diff_eq!(s2.delta, -0.5, epsilon = 1e-12);
        sarsa_step(&mut basis, &s2, &config).unwrap();
        assert_abs_diff_eq!(basis.weights(0)[0], -0.875, epsilon = 1e-12);
    }

    #[test]
    fn untaken_actions_move_only_through_their_traces() {
        let mut basis = BasisSet::fixed_coupled(1, 0, 1, 2).unwrap();
        let config = AgentConfig { alpha: 0.1, ..AgentConfig::default() };
        // action 1 has zero traces: its weights must not move
        let sample = TDSample {
            state: vec![0.2],
            action: 0,
            reward: -1.0,
            next_state: vec![0.8],
            next_action: Some(0),
            delta: -1.0,
        };
        sarsa_step(&mut basis, &sample, &config).unwrap();
        assert!(basis.weights(1).iter().all(|&w| w == 0.0));
        assert!(basis.weights(0).iter().any(|&w| w != 0.0));
        // once action 1 owns a trace it does move
        let sample2 = TDSample { action: 1, ..sample };
        sarsa_step(&mut basis, &sample2, &config).unwrap();
        assert!(basis.weights(1).iter().any(|&w| w != 0.0));
    }

    fn fixed_controller(basis: &BasisSet) -> AdaptiveController {
        AdaptiveController::new(AdaptiveMode::Fixed, AdaptiveConfig::default(), basis).unwrap()
    }

    #[test]
    fn episode_hits_step_cap_with_cap_floor_return() {
        let mut env = MountainCar::new();
        let mut basis = BasisSet::fixed_coupled(2, 0, 1, 3).unwrap();
        let mut ctrl = fixed_controller(&basis);
        let config = AgentConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut global = 0;
        let mut edits = Vec::new();
        let rec = run_episode(
            &mut env, &mut basis, &mut ctrl, &config, &mut rng, 50, 0, &mut global, &mut edits,
        )
        .unwrap();
        // 50 coasting-ish steps cannot solve Mountain Car
        assert_eq!(rec.steps, 50);
        assert_eq!(rec.episode_return, -50.0);
        assert_eq!(rec.edits, 0);
        assert_eq!(rec.basis_size, basis.len());
        assert_eq!(global, 50);
    }

    #[test]
    fn fixed_basis_learns_on_mountain_car() {
        // return over late episodes improves on early episodes
        let seeds = [0u64, 1, 2];
        let mut improved = 0;
        for seed in seeds {
            let mut env = MountainCar::new();
            let mut basis = BasisSet::fixed_coupled(2, 2, 2, 3).unwrap();
            let mut ctrl = fixed_controller(&basis);
            let config = AgentConfig { alpha: 0.05, ..AgentConfig::default() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut global = 0;
            let mut edits = Vec::new();
            let mut returns = Vec::new();
            for ep in 0..120 {
                let rec = run_episode(
                    &mut env, &mut basis, &mut ctrl, &config, &mut rng, 2000, ep, &mut global,
                    &mut edits,
                )
                .unwrap();
                returns.push(rec.episode_return);
            }
            let first: f64 = returns[..20].iter().sum::<f64>() / 20.0;
            let last: f64 = returns[100..].iter().sum::<f64>() / 20.0;
            if last > first {
                improved += 1;
            }
        }
        assert!(improved >= 2, "learning failed on {}/3 seeds", 3 - improved);
    }
}
