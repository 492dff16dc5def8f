//! Expert odometry and demonstration selection.
//!
//! Odometry is resampled to the control-point times of each sampled policy
//! and compared with a weighted Euclidean distance; the closest policy is the
//! demonstration, so the demonstration is always a member of the policy set.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{Policy, PolicySet, Waypoint};
use crate::world::{wrap_angle, VehicleState};

/// Weights of the position, yaw and speed terms of the policy distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistanceWeights {
    pub pos: f64,
    pub yaw: f64,
    pub v: f64,
}

impl Default for DistanceWeights {
    fn default() -> Self {
        Self {
            pos: 1.0,
            yaw: 2.0,
            v: 0.5,
        }
    }
}

/// Time-stamped expert poses `(t, x, y, yaw, v)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OdometryRecord {
    samples: Vec<Waypoint>,
}

impl OdometryRecord {
    pub fn new(samples: Vec<Waypoint>) -> Result<Self> {
        if samples
            .iter()
            .any(|s| ![s.t, s.x, s.y, s.yaw, s.v].iter().all(|v| v.is_finite()))
        {
            return Err(Error::invalid("odometry", "non-finite sample"));
        }
        if samples.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::invalid(
                "odometry",
                "time stamps must be strictly increasing",
            ));
        }
        Ok(Self { samples })
    }

    pub fn from_states(states: &[VehicleState]) -> Result<Self> {
        Self::new(states.iter().map(Waypoint::from).collect())
    }

    pub fn samples(&self) -> &[Waypoint] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Appends samples, skipping any not strictly after the current end.
    pub fn extend_from_states(&mut self, states: &[VehicleState]) {
        for s in states {
            if self.samples.last().is_none_or(|l| s.t > l.t) {
                self.samples.push(Waypoint::from(s));
            }
        }
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(f64::NEG_INFINITY, |s| s.t)
    }

    /// Linear interpolation at time `t`; yaw follows the shorter arc.
    pub fn at(&self, t: f64) -> Result<Waypoint> {
        const SLACK: f64 = 1e-9;
        let (first, last) = match (self.samples.first(), self.samples.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => {
                return Err(Error::InsufficientOdometry {
                    needed: t,
                    available: f64::NEG_INFINITY,
                })
            }
        };
        if t < first.t - SLACK || t > last.t + SLACK {
            return Err(Error::InsufficientOdometry {
                needed: t,
                available: last.t,
            });
        }
        let i = self.samples.partition_point(|s| s.t <= t);
        if i == 0 {
            return Ok(Waypoint { t, ..*first });
        }
        if i == self.samples.len() {
            return Ok(Waypoint { t, ..*last });
        }
        let (a, b) = (&self.samples[i - 1], &self.samples[i]);
        let u = (t - a.t) / (b.t - a.t);
        Ok(Waypoint {
            t,
            x: a.x + u * (b.x - a.x),
            y: a.y + u * (b.y - a.y),
            yaw: wrap_angle(a.yaw + u * wrap_angle(b.yaw - a.yaw)),
            v: a.v + u * (b.v - a.v),
        })
    }

    pub fn resample(&self, times: impl IntoIterator<Item = f64>) -> Result<Vec<Waypoint>> {
        times.into_iter().map(|t| self.at(t)).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for s in &self.samples {
            w.serialize(s).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let samples = r
            .deserialize()
            .collect::<std::result::Result<Vec<Waypoint>, _>>()
            .map_err(csv_error)?;
        Self::new(samples)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::format("odometry csv", e.to_string())
}

/// Weighted Euclidean distance between two equally long waypoint sequences:
/// the square root of the weighted squared errors summed over points, divided
/// by the number of points.
pub fn trajectory_distance(a: &[Waypoint], b: &[Waypoint], w: &DistanceWeights) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dims(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::Empty("waypoint sequence"));
    }
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| {
            let dyaw = wrap_angle(p.yaw - q.yaw);
            w.pos * ((p.x - q.x).powi(2) + (p.y - q.y).powi(2))
                + w.yaw * dyaw * dyaw
                + w.v * (p.v - q.v).powi(2)
        })
        .sum();
    Ok(sum.sqrt() / a.len() as f64)
}

/// Distance between a policy and the odometry resampled at its control-point times.
pub fn policy_distance(
    policy: &Policy,
    odometry: &OdometryRecord,
    w: &DistanceWeights,
) -> Result<f64> {
    let reference = odometry.resample(policy.waypoints.iter().map(|p| p.t))?;
    trajectory_distance(&policy.waypoints, &reference, w)
}

/// Demonstration policy of one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Demonstration {
    pub index: usize,
    pub distance: f64,
}

impl Demonstration {
    pub fn policy<'a>(&self, set: &'a PolicySet) -> &'a Policy {
        &set.policies[self.index]
    }
}

/// Closest policy to the odometry; ties go to the lowest index.
pub fn select_demonstration(
    set: &PolicySet,
    odometry: &OdometryRecord,
    w: &DistanceWeights,
) -> Result<Demonstration> {
    let first = set.policies.first().ok_or(Error::Empty("policy set"))?;
    let times: Vec<f64> = first.waypoints.iter().map(|p| p.t).collect();
    let shared = odometry.resample(times.iter().copied())?;
    let mut best = Demonstration {
        index: 0,
        distance: f64::INFINITY,
    };
    for (i, p) in set.policies.iter().enumerate() {
        let same_times = p.waypoints.len() == times.len()
            && p.waypoints.iter().zip(&times).all(|(w, t)| w.t == *t);
        let d = if same_times {
            trajectory_distance(&p.waypoints, &shared, w)?
        } else {
            policy_distance(p, odometry, w)?
        };
        if d < best.distance {
            best = Demonstration {
                index: i,
                distance: d,
            };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wp(t: f64, x: f64, y: f64, yaw: f64, v: f64) -> Waypoint {
        Waypoint { t, x, y, yaw, v }
    }

    #[test]
    fn three_four_five() {
        let d = trajectory_distance(
            &[wp(0.0, 3.0, 4.0, 0.0, 1.0)],
            &[wp(0.0, 0.0, 0.0, 0.0, 1.0)],
            &DistanceWeights::default(),
        );
        assert!((d.unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn yaw_interpolates_on_the_short_arc() {
        let odo = OdometryRecord::new(vec![
            wp(0.0, 0.0, 0.0, 3.0, 0.0),
            wp(1.0, 0.0, 0.0, -3.0, 0.0),
        ])
        .unwrap();
        let mid = odo.at(0.5).unwrap();
        assert!((mid.yaw.abs() - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_short_or_unordered_odometry() {
        let odo = OdometryRecord::new(vec![
            wp(0.0, 0.0, 0.0, 0.0, 0.0),
            wp(1.0, 1.0, 0.0, 0.0, 1.0),
        ])
        .unwrap();
        assert!(matches!(
            odo.at(1.5),
            Err(Error::InsufficientOdometry { .. })
        ));
        assert!(OdometryRecord::new(vec![
            wp(1.0, 0.0, 0.0, 0.0, 0.0),
            wp(1.0, 0.0, 0.0, 0.0, 0.0)
        ])
        .is_err());
    }

    #[test]
    fn csv_round_trip() {
        let odo = OdometryRecord::new(vec![
            wp(0.0, 1.5, -2.0, 0.1, 3.0),
            wp(0.1, 1.8, -2.0, 0.1 + 1e-17, 3.1),
        ])
        .unwrap();
        let mut buf = Vec::new();
        odo.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("t,x,y,yaw,v\n"));
        assert_eq!(OdometryRecord::read_csv(buf.as_slice()).unwrap(), odo);
    }
}
