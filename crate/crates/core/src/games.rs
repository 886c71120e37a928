//! Small reference games used by the acceptance suite, tests, benches and
//! the CLI `--example` switch.

use rand::Rng;

use crate::game::GameSpec;
use crate::joint::JointIndex;

/// Build a spec from closures. `reward(t, i, x, a)` receives unflattened
/// joint types and actions; `kernel(t, i, x_i, a)` returns the next-type
/// distribution of player `i`.
pub fn build(
    type_space_sizes: &[usize],
    action_space_sizes: &[usize],
    horizon: usize,
    initial_dists: Vec<Vec<f64>>,
    mut kernel: impl FnMut(usize, usize, usize, &[usize]) -> Vec<f64>,
    mut reward: impl FnMut(usize, usize, &[usize], &[usize]) -> f64,
) -> GameSpec {
    let n = type_space_sizes.len();
    let jx = JointIndex::new(type_space_sizes);
    let ja = JointIndex::new(action_space_sizes);
    let kernels = (0..horizon.saturating_sub(1))
        .map(|t| {
            (0..n)
                .map(|i| {
                    (0..type_space_sizes[i])
                        .map(|x| {
                            (0..ja.len())
                                .map(|a| kernel(t, i, x, &ja.unflatten(a).unwrap()))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let rewards = (0..horizon)
        .map(|t| {
            (0..n)
                .map(|i| {
                    (0..jx.len())
                        .map(|x| {
                            let xs = jx.unflatten(x).unwrap();
                            (0..ja.len())
                                .map(|a| reward(t, i, &xs, &ja.unflatten(a).unwrap()))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    GameSpec {
        num_players: n,
        horizon,
        type_space_sizes: type_space_sizes.to_vec(),
        action_space_sizes: action_space_sizes.to_vec(),
        initial_dists,
        kernels,
        rewards,
    }
}

fn static_kernel(size: usize, x: usize) -> Vec<f64> {
    let mut row = vec![0.0; size];
    row[x] = 1.0;
    row
}

/// Repeated matching pennies with single types. Player 0 wins +1 on a match.
pub fn matching_pennies(horizon: usize) -> GameSpec {
    build(&[1, 1], &[2, 2], horizon, vec![vec![1.0], vec![1.0]], |_, _, _, _| vec![1.0], |_, i, _, a| {
        let r = if a[0] == a[1] { 1.0 } else { -1.0 };
        if i == 0 {
            r
        } else {
            -r
        }
    })
}

/// Two-period sender/receiver game. The sender (player 0) has a static
/// binary type and earns a 0.1 bonus for announcing it truthfully; in the
/// second period both players earn 1 when the receiver's action matches the
/// sender's type.
pub fn signaling_game() -> GameSpec {
    build(
        &[2, 1],
        &[2, 2],
        2,
        vec![vec![0.3, 0.7], vec![1.0]],
        |_, i, x, _| static_kernel(if i == 0 { 2 } else { 1 }, x),
        |t, i, x, a| match (t, i) {
            (0, 0) => 0.1 * f64::from(u8::from(a[0] == x[0])),
            (0, _) => 0.0,
            _ => f64::from(u8::from(a[1] == x[0])),
        },
    )
}

/// 2x2 coordination game with single types: (0,0) pays 1, (1,1) pays 2.
pub fn coordination_game(horizon: usize) -> GameSpec {
    build(&[1, 1], &[2, 2], horizon, vec![vec![1.0], vec![1.0]], |_, _, _, _| vec![1.0], |_, _, _, a| {
        match (a[0], a[1]) {
            (0, 0) => 1.0,
            (1, 1) => 2.0,
            _ => 0.0,
        }
    })
}

/// Zero-sum game with single types solvable by strict dominance; the row
/// player's payoff matrix is `[[3, 1], [4, 2], [0, -1]]`.
pub fn zero_sum_dominance(horizon: usize) -> GameSpec {
    const M: [[f64; 2]; 3] = [[3.0, 1.0], [4.0, 2.0], [0.0, -1.0]];
    build(&[1, 1], &[3, 2], horizon, vec![vec![1.0], vec![1.0]], |_, _, _, _| vec![1.0], |_, i, _, a| {
        let r = M[a[0]][a[1]];
        if i == 0 {
            r
        } else {
            -r
        }
    })
}

/// Single-player three-state, two-action controlled chain over three periods.
pub fn single_agent_mdp() -> GameSpec {
    const Q: [[[f64; 3]; 2]; 3] = [
        [[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]],
        [[0.5, 0.5, 0.0], [0.0, 0.2, 0.8]],
        [[0.3, 0.3, 0.4], [0.6, 0.1, 0.3]],
    ];
    const R: [[[f64; 2]; 3]; 3] = [
        [[1.0, 0.0], [0.5, 0.2], [0.0, 1.5]],
        [[0.2, 0.8], [1.0, 0.1], [0.3, 0.4]],
        [[2.0, 1.0], [0.0, 0.7], [0.9, 1.2]],
    ];
    build(
        &[3],
        &[2],
        3,
        vec![vec![0.2, 0.3, 0.5]],
        |_, _, x, a| Q[x][a[0]].to_vec(),
        |t, _, x, a| R[t][x[0]][a[0]],
    )
}

/// Each player's reward depends only on its own action, with action 0
/// strictly best.
pub fn dominant_action_game() -> GameSpec {
    build(&[1, 1], &[2, 2], 1, vec![vec![1.0], vec![1.0]], |_, _, _, _| vec![1.0], |_, i, _, a| {
        if a[i] == 0 {
            1.0
        } else {
            0.0
        }
    })
}

/// The four acceptance-suite games with display names.
pub fn acceptance_suite() -> Vec<(&'static str, GameSpec)> {
    vec![
        ("matching_pennies", matching_pennies(2)),
        ("signaling", signaling_game()),
        ("coordination", coordination_game(2)),
        ("single_agent_mdp", single_agent_mdp()),
    ]
}

/// Look up a reference game by name.
pub fn by_name(name: &str) -> Option<GameSpec> {
    Some(match name {
        "matching_pennies" => matching_pennies(2),
        "signaling" => signaling_game(),
        "coordination" => coordination_game(2),
        "single_agent_mdp" => single_agent_mdp(),
        "zero_sum_dominance" => zero_sum_dominance(2),
        "dominant_action" => dominant_action_game(),
        _ => return None,
    })
}

pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + 0.05).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / sum).collect()
}

/// A random game with strictly positive kernels and rewards in [-1, 1].
pub fn random_game<R: Rng + ?Sized>(
    rng: &mut R,
    type_space_sizes: &[usize],
    action_space_sizes: &[usize],
    horizon: usize,
) -> GameSpec {
    let initial = type_space_sizes.iter().map(|&s| random_distribution(rng, s)).collect();
    let sizes = type_space_sizes.to_vec();
    // The closures cannot both borrow `rng` mutably, so draw kernels first.
    let ja: usize = action_space_sizes.iter().product();
    let kernel_table: Vec<Vec<Vec<Vec<Vec<f64>>>>> = (0..horizon.saturating_sub(1))
        .map(|_| {
            sizes
                .iter()
                .map(|&s| (0..s).map(|_| (0..ja).map(|_| random_distribution(rng, s)).collect()).collect())
                .collect()
        })
        .collect();
    let ja_index = JointIndex::new(action_space_sizes);
    let mut spec = build(type_space_sizes, action_space_sizes, horizon, initial, |t, i, x, a| {
        kernel_table[t][i][x][ja_index.flatten(a).unwrap()].clone()
    }, |_, _, _, _| 0.0);
    for r in spec.rewards.iter_mut().flatten().flatten().flatten() {
        *r = rng.random_range(-1.0..=1.0);
    }
    spec
}
