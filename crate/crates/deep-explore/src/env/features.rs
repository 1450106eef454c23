//! Feature representations offered to agents: one-hot action features, the
//! life-cycle interaction vector, and spawned user representations whose
//! preferred action is linearly decodable.

use rand::Rng;

use super::seqrec::Action;

/// Width of the action feature vector.
pub const ACTION_FEATURE_DIM: usize = 2;

/// Width of the preference-encoding block inside a spawned user vector.
pub const PREFERENCE_ENCODING_DIM: usize = 4;

/// One-hot features over the two content genres; the forced no-op carries no
/// content and maps to the zero vector.
pub fn action_features(action: Action) -> [f64; ACTION_FEATURE_DIM] {
    match action {
        Action::A1 => [1.0, 0.0],
        Action::A2 => [0.0, 1.0],
        Action::NoOp => [0.0, 0.0],
    }
}

/// Interaction features for the current life-cycle, sized by the user's
/// engagement budget: entry `i` is `-1` for steps not yet taken, `1` where
/// the i-th action of the life-cycle was `a1`, and `0` where it was `a2`.
pub fn extract_interact_features(lifecycle_actions: &[Action], budget: usize) -> Vec<f64> {
    let mut xi = vec![-1.0; budget];
    for (i, action) in lifecycle_actions.iter().take(budget).enumerate() {
        xi[i] = match action {
            Action::A1 => 1.0,
            Action::A2 => 0.0,
            Action::NoOp => 0.0,
        };
    }
    xi
}

/// Encodes a preferred action into a 4-dimensional vector with bounded noise.
/// The fixed linear rule `sign(enc[0] - enc[1])` recovers the preference with
/// margin, so a linear probe can separate spawned users perfectly.
pub fn preference_encoding<R: Rng + ?Sized>(preferred: Action, rng: &mut R) -> Vec<f64> {
    let e = match preferred {
        Action::A1 => 1.0,
        Action::A2 => -1.0,
        Action::NoOp => 0.0,
    };
    let mut noise = || rng.random_range(-0.2..0.2);
    vec![0.5 * e + noise(), -0.5 * e + noise(), noise(), noise()]
}

/// Full user representation: a one-hot identity block of width `onehot_dim`
/// (all zeros for out-of-dictionary users, e.g. a held-out evaluation roster)
/// followed by the preference encoding.
pub fn user_representation<R: Rng + ?Sized>(
    id_index: Option<usize>,
    onehot_dim: usize,
    preferred: Action,
    rng: &mut R,
) -> Vec<f64> {
    let mut psi = vec![0.0; onehot_dim];
    if let Some(i) = id_index {
        if i < onehot_dim {
            psi[i] = 1.0;
        }
    }
    psi.extend(preference_encoding(preferred, rng));
    psi
}
