use crate::env::Transition;
use crate::error::{invalid, Result};
use crate::ot::RewardVector;

/// Overwrite each step's reward with its credit times `scale`.
pub fn relabel_amortized(episode: &mut [Transition], credits: &RewardVector, scale: f64) -> Result<()> {
    if episode.len() != credits.len() {
        return Err(invalid(format!(
            "episode has {} steps but {} credits",
            episode.len(),
            credits.len()
        )));
    }
    for (t, c) in episode.iter_mut().zip(credits.values()) {
        t.reward = c * scale;
    }
    Ok(())
}

/// Zero every reward except the last, which becomes `value`.
pub fn relabel_final(episode: &mut [Transition], value: f64) -> Result<()> {
    let Some((last, rest)) = episode.split_last_mut() else {
        return Err(invalid("cannot relabel an empty episode"));
    };
    for t in rest {
        t.reward = 0.0;
    }
    last.reward = value;
    Ok(())
}
