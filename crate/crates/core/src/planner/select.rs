//! Policy evaluation and selection.

use super::{feature, PlannerConfig, PlanningContext, PolicySet, RewardWeights};
use crate::error::{Error, Result};
use crate::world::{Footprint, VehicleState};

/// Fills `value = -theta . f` for every policy and returns the index of the
/// best one (lowest index on ties).
pub fn evaluate(set: &mut PolicySet, weights: &RewardWeights) -> Result<usize> {
    if set.is_empty() {
        return Err(Error::Empty("policy set"));
    }
    for p in &mut set.policies {
        if p.features.len() != weights.theta.len() {
            return Err(Error::dims(weights.theta.len(), p.features.len()));
        }
        p.value = weights.value(&p.features);
    }
    Ok(optimal_index(set.policies.iter().map(|p| p.value)))
}

/// Index of the maximum value; the first one wins ties.
pub fn optimal_index(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Smallest center distance between the policy states and any predicted
/// object, or `None` when the footprints (inflated by `margin`) overlap.
pub fn min_predicted_gap(
    ctx: &PlanningContext,
    states: &[VehicleState],
    ego_size: (f64, f64),
    margin: f64,
) -> Option<f64> {
    let mut gap = f64::INFINITY;
    for (k, s) in states.iter().enumerate() {
        let ego = Footprint {
            x: s.x,
            y: s.y,
            yaw: s.yaw,
            length: ego_size.0,
            width: ego_size.1,
        }
        .inflated(margin);
        for (veh, pred) in ctx.vehicles.iter().zip(&ctx.predictions) {
            let p = &pred[k.min(pred.len() - 1)];
            let other = Footprint {
                x: p.x,
                y: p.y,
                yaw: p.yaw,
                length: veh.length,
                width: veh.width,
            };
            if ego.overlaps(&other) {
                return None;
            }
            gap = gap.min((ego.x - other.x).hypot(ego.y - other.y));
        }
    }
    Some(gap)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpertChoice {
    pub index: usize,
    /// True when every policy collided and the least-proximate one was taken.
    pub fallback: bool,
}

/// Expert rule: maximise `-theta_expert . f` plus a progress bonus over the
/// collision-free policies.
pub fn expert_select(
    set: &mut PolicySet,
    ctx: &PlanningContext,
    config: &PlannerConfig,
    ego_size: (f64, f64),
) -> Result<ExpertChoice> {
    let weights = RewardWeights::new(config.expert_theta.clone())?;
    evaluate(set, &weights)?;
    let scale = (ctx.target_speed * config.horizon).max(1.0);
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in set.policies.iter().enumerate() {
        if !p.states.is_empty()
            && min_predicted_gap(ctx, &p.states, ego_size, config.safety_margin).is_none()
        {
            continue;
        }
        let score = p.value + config.progress_bonus * p.final_progress() / scale;
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((i, score));
        }
    }
    Ok(match best {
        Some((index, _)) => ExpertChoice {
            index,
            fallback: false,
        },
        None => {
            log::warn!(
                "all {} policies collide; falling back to the least-proximate policy",
                set.len()
            );
            let index = optimal_index(set.policies.iter().map(|p| -p.features[feature::PROXIMITY]));
            ExpertChoice {
                index,
                fallback: true,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{Policy, K};

    fn set(features: Vec<Vec<f64>>) -> PolicySet {
        PolicySet {
            policies: features
                .into_iter()
                .map(|features| Policy {
                    features,
                    ..Default::default()
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        assert_eq!(optimal_index([1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(optimal_index([0.0, 0.0]), 0);
    }

    #[test]
    fn evaluate_picks_lowest_cost() {
        let mut f = vec![vec![1.0; K], vec![0.5; K], vec![2.0; K]];
        f[2][0] = 0.0;
        let mut s = set(f);
        let w = RewardWeights::new(vec![1.0; K]).unwrap();
        assert_eq!(evaluate(&mut s, &w).unwrap(), 1);
        assert!((s.policies[1].value + 0.5 * K as f64).abs() < 1e-12);
    }

    #[test]
    fn evaluate_rejects_dimension_mismatch() {
        let mut s = set(vec![vec![1.0; 3]]);
        let w = RewardWeights::zeros();
        assert!(matches!(evaluate(&mut s, &w), Err(Error::Dimension { .. })));
        let mut empty = PolicySet::default();
        assert!(matches!(evaluate(&mut empty, &w), Err(Error::Empty(_))));
    }
}
