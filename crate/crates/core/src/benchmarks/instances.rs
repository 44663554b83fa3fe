//! Small fixed instances with known answers.

use crate::cdp::{ModelClass, RewardDist, SparseDist, TabularCdp};
use crate::error::Result;

/// Bonuses the wrong models add to the second action's reward.
pub const SAMPLING_BONUSES: [f64; 3] = [0.5, 0.4, 0.3];

/// A two-level contextual problem used for sampling experiments.
///
/// Level 0 has two equally likely contexts and zero reward; level-1 state
/// `2·x₀ + a₀` remembers both. In the true model the level-1 reward is
/// `0.5 / 0.7` for action 0 and `0.3 / 0.5` for action 1 (context 0 / 1), so
/// `v* = 0.6`. Three wrong models add a bonus of 0.5, 0.4 and 0.3 to action 1,
/// valuing themselves at 0.9, 0.8 and 0.7. Every conditional is deterministic.
/// Returns the class and the index of the truth (the last member).
pub fn sampling_benchmark() -> Result<(ModelClass, usize)> {
    let mut models: Vec<TabularCdp> = SAMPLING_BONUSES.iter().map(|&b| contextual(b)).collect::<Result<_>>()?;
    models.push(contextual(0.0)?);
    let truth = models.len() - 1;
    Ok((ModelClass::new(models)?, truth))
}

fn contextual(bonus: f64) -> Result<TabularCdp> {
    let zero = RewardDist::deterministic(0.0);
    let level0 = (0..2)
        .map(|x| (0..2).map(|a| SparseDist::point(2 * x + a)).collect())
        .collect();
    let rewards1 = (0..4)
        .map(|s| {
            let base = if s / 2 == 0 { 0.5 } else { 0.7 };
            vec![RewardDist::deterministic(base), RewardDist::deterministic(base - 0.2 + bonus)]
        })
        .collect();
    TabularCdp::new(
        2,
        vec![2, 4, 1],
        SparseDist::uniform(2),
        vec![level0, vec![vec![SparseDist::point(0); 2]; 4]],
        vec![vec![vec![zero; 2]; 2], rewards1],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        let (c, truth) = sampling_benchmark().unwrap();
        let v: Vec<f64> = c.members().iter().map(|m| m.value()).collect();
        for (got, want) in v.iter().zip([0.9, 0.8, 0.7, 0.6]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(truth, 3);
    }
}
