//! Maximum-entropy path-integral IRL.
//!
//! The policy distribution `p(pi | theta) = exp(-theta . f^pi) / Z` is
//! normalised over the sampled policy set. Training ascends the demonstration
//! log-likelihood, whose gradient is `E_p[f] - f^D`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::CycleRecord;
use crate::demos::{trajectory_distance, DistanceWeights, OdometryRecord};
use crate::error::{Error, Result};
use crate::planner::{optimal_index, PolicySet, RewardWeights, K};

/// Normalisation floor of the expected value difference.
pub const EVD_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDistribution {
    pub probabilities: Vec<f64>,
    pub log_partition: f64,
}

fn check(set: &PolicySet, theta: &[f64]) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Empty("policy set"));
    }
    for p in &set.policies {
        if p.features.len() != theta.len() {
            return Err(Error::dims(theta.len(), p.features.len()));
        }
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable `ln sum exp(x)`.
pub fn logsumexp(x: &[f64]) -> f64 {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Policy values `-theta . f^pi`.
pub fn values(set: &PolicySet, theta: &[f64]) -> Result<Vec<f64>> {
    check(set, theta)?;
    Ok(set
        .policies
        .iter()
        .map(|p| -dot(theta, &p.features))
        .collect())
}

pub fn policy_distribution(set: &PolicySet, theta: &[f64]) -> Result<PolicyDistribution> {
    let v = values(set, theta)?;
    let log_partition = logsumexp(&v);
    let probabilities = v.iter().map(|x| (x - log_partition).exp()).collect();
    Ok(PolicyDistribution {
        probabilities,
        log_partition,
    })
}

fn demo_index(set: &PolicySet, demo: usize) -> Result<()> {
    if demo >= set.len() {
        return Err(Error::invalid(
            "demonstration",
            format!("index {demo} outside set of {}", set.len()),
        ));
    }
    Ok(())
}

/// `ln p(pi^D | theta)`.
pub fn log_likelihood(set: &PolicySet, demo: usize, theta: &[f64]) -> Result<f64> {
    check(set, theta)?;
    demo_index(set, demo)?;
    // Values relative to the demonstration, so that p(demo) near 1 keeps
    // full precision.
    let fd = &set.policies[demo].features;
    let d: Vec<f64> = set
        .policies
        .iter()
        .map(|p| {
            p.features
                .iter()
                .zip(fd)
                .zip(theta)
                .map(|((f, g), t)| t * (g - f))
                .sum()
        })
        .collect();
    let m = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Ok(-m);
    }
    if m == 0.0 {
        let rest: f64 = d
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != demo)
            .map(|(_, x)| x.exp())
            .sum();
        return Ok(-rest.ln_1p());
    }
    Ok(-(m + d.iter().map(|x| (x - m).exp()).sum::<f64>().ln()))
}

/// `dL/dtheta = E_p[f] - f^D`.
pub fn maxent_gradient(set: &PolicySet, demo: usize, theta: &[f64]) -> Result<Vec<f64>> {
    let dist = policy_distribution(set, theta)?;
    demo_index(set, demo)?;
    let fd = &set.policies[demo].features;
    let mut g = vec![0.0; fd.len()];
    for (p, pi) in dist.probabilities.iter().zip(&set.policies) {
        for ((gi, fi), di) in g.iter_mut().zip(&pi.features).zip(fd) {
            *gi += p * (fi - di);
        }
    }
    Ok(g)
}

/// Expected value difference, or `None` when `|V(pi^D)| <= EVD_EPSILON`.
pub fn evd(set: &PolicySet, demo: usize, theta: &[f64]) -> Result<Option<f64>> {
    let v = values(set, theta)?;
    demo_index(set, demo)?;
    let dist = policy_distribution(set, theta)?;
    let vd = v[demo];
    if vd.abs() <= EVD_EPSILON {
        return Ok(None);
    }
    let expected: f64 = dist.probabilities.iter().zip(&v).map(|(p, x)| p * x).sum();
    Ok(Some((vd - expected).abs() / vd.abs()))
}

/// Distances of every policy to the demonstration, divided by the largest one
/// (all zero when the set is geometrically degenerate).
pub fn normalized_distances(set: &PolicySet, demo: usize, w: &DistanceWeights) -> Result<Vec<f64>> {
    demo_index(set, demo)?;
    let reference = &set.policies[demo].waypoints;
    let d = set
        .policies
        .iter()
        .map(|p| trajectory_distance(&p.waypoints, reference, w))
        .collect::<Result<Vec<_>>>()?;
    let max = d.iter().cloned().fold(0.0, f64::max);
    Ok(if max > 0.0 {
        d.iter().map(|x| x / max).collect()
    } else {
        vec![0.0; d.len()]
    })
}

/// Expected normalised distance to the demonstration.
pub fn ed(set: &PolicySet, demo: usize, theta: &[f64], w: &DistanceWeights) -> Result<f64> {
    let dist = policy_distribution(set, theta)?;
    let d = normalized_distances(set, demo, w)?;
    Ok(dist.probabilities.iter().zip(&d).map(|(p, x)| p * x).sum())
}

/// Normalised distance of the optimal policy to the demonstration.
pub fn opd(set: &PolicySet, demo: usize, theta: &[f64], w: &DistanceWeights) -> Result<f64> {
    let v = values(set, theta)?;
    let d = normalized_distances(set, demo, w)?;
    Ok(d[optimal_index(v)])
}

/// Distance of the optimal policy to the expert odometry, in the same units as
/// the demonstration's own re-projection distance.
pub fn odometry_opd(
    set: &PolicySet,
    odometry: &OdometryRecord,
    theta: &[f64],
    w: &DistanceWeights,
) -> Result<f64> {
    let v = values(set, theta)?;
    crate::demos::policy_distance(&set.policies[optimal_index(v)], odometry, w)
}

/// Mean metrics over a group of records.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Evaluation {
    pub cycles: usize,
    pub log_likelihood: f64,
    /// Mean `p(pi^D)`.
    pub demo_probability: f64,
    pub evd: f64,
    /// Records excluded from the EVD mean.
    pub evd_degenerate: usize,
    pub ed: f64,
    pub opd: f64,
}

/// Evaluates per-record reward weights (`theta_of(i)`) on every record.
pub fn evaluate_records<F>(
    records: &[CycleRecord],
    theta_of: F,
    w: &DistanceWeights,
) -> Result<Evaluation>
where
    F: Fn(usize) -> Vec<f64>,
{
    if records.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let mut e = Evaluation {
        cycles: records.len(),
        ..Default::default()
    };
    let mut evd_n = 0usize;
    for (i, r) in records.iter().enumerate() {
        let theta = theta_of(i);
        let ll = log_likelihood(&r.set, r.demo.index, &theta)?;
        e.log_likelihood += ll;
        e.demo_probability += ll.exp();
        match evd(&r.set, r.demo.index, &theta)? {
            Some(x) => {
                e.evd += x;
                evd_n += 1;
            }
            None => e.evd_degenerate += 1,
        }
        e.ed += ed(&r.set, r.demo.index, &theta, w)?;
        e.opd += opd(&r.set, r.demo.index, &theta, w)?;
    }
    let n = records.len() as f64;
    e.log_likelihood /= n;
    e.demo_probability /= n;
    e.ed /= n;
    e.opd /= n;
    e.evd = if evd_n > 0 {
        e.evd / evd_n as f64
    } else {
        f64::NAN
    };
    Ok(e)
}

/// Mean gradient over a batch; summed in record order for reproducibility.
pub fn batch_gradient(records: &[&CycleRecord], theta: &[f64]) -> Result<(Vec<f64>, f64)> {
    let per = |r: &&CycleRecord| -> Result<(Vec<f64>, f64)> {
        Ok((
            maxent_gradient(&r.set, r.demo.index, theta)?,
            log_likelihood(&r.set, r.demo.index, theta)?,
        ))
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<(Vec<f64>, f64)> = {
        use rayon::prelude::*;
        records.par_iter().map(per).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<(Vec<f64>, f64)> = records.iter().map(per).collect::<Result<_>>()?;
    let n = records.len().max(1) as f64;
    let mut g = vec![0.0; theta.len()];
    let mut ll = 0.0;
    for (pg, pl) in parts {
        for (a, b) in g.iter_mut().zip(pg) {
            *a += b / n;
        }
        ll += pl / n;
    }
    Ok((g, ll))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LirlConfig {
    pub epochs: usize,
    pub step: f64,
    pub batch_size: usize,
    pub initial_theta: Vec<f64>,
    /// Validation metrics are computed every this many epochs.
    pub validate_every: usize,
}

impl Default for LirlConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            step: 0.05,
            batch_size: 32,
            initial_theta: vec![0.1; K],
            validate_every: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training log-likelihood after the epoch.
    pub log_likelihood: f64,
    pub evd: f64,
    pub validation: Option<Evaluation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LirlRun {
    pub theta: RewardWeights,
    /// Weights before training followed by the weights after each epoch.
    pub trajectory: Vec<Vec<f64>>,
    pub metrics: Vec<EpochMetrics>,
}

/// Mini-batch gradient ascent on the demonstration log-likelihood with
/// projection onto `theta >= 0`.
pub fn train_lirl(
    train: &[CycleRecord],
    validation: &[CycleRecord],
    config: &LirlConfig,
    seed: u64,
    w: &DistanceWeights,
) -> Result<LirlRun> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut theta = RewardWeights::new(config.initial_theta.clone())?.theta;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut trajectory = vec![theta.clone()];
    let mut metrics = Vec::with_capacity(config.epochs);
    let batch = config.batch_size.max(1);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let refs: Vec<&CycleRecord> = chunk.iter().map(|&i| &train[i]).collect();
            let (g, _) = batch_gradient(&refs, &theta)?;
            for (t, gi) in theta.iter_mut().zip(g) {
                *t = (*t + config.step * gi).max(0.0);
                if !gi.is_finite() || !t.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
            }
        }
        let all: Vec<&CycleRecord> = train.iter().collect();
        let (_, ll) = batch_gradient(&all, &theta)?;
        if !ll.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let (mut evd_sum, mut evd_n) = (0.0, 0usize);
        for r in train {
            if let Some(x) = evd(&r.set, r.demo.index, &theta)? {
                evd_sum += x;
                evd_n += 1;
            }
        }
        let validation = if !validation.is_empty()
            && config.validate_every > 0
            && epoch % config.validate_every == 0
        {
            Some(evaluate_records(validation, |_| theta.clone(), w)?)
        } else {
            None
        };
        let evd = if evd_n > 0 {
            evd_sum / evd_n as f64
        } else {
            f64::NAN
        };
        metrics.push(EpochMetrics {
            epoch,
            log_likelihood: ll,
            evd,
            validation,
        });
        trajectory.push(theta.clone());
    }
    Ok(LirlRun {
        theta: RewardWeights::new(theta)?,
        trajectory,
        metrics,
    })
}
