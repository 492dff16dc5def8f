//! Binary encoding of cycle records.
//!
//! A record is a sequence of tagged sections, each `tag: [u8; 4]`,
//! `len: u64` and `len` payload bytes. All integers are little-endian `u64`
//! and all reals little-endian `f64`.

use serde::{Deserialize, Serialize};

use crate::demos::Demonstration;
use crate::error::{Error, Result};
use crate::planner::{ControlAction, ControlPoint, Policy, PolicySet, Waypoint};
use crate::world::VehicleState;

/// One planning cycle: the sampled policies (values only), its demonstration
/// and the reward weights active during collection.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: u64,
    pub scenario_id: u64,
    pub ego: VehicleState,
    pub theta: Vec<f64>,
    #[serde(skip)]
    pub set: PolicySet,
    pub demo: Demonstration,
}

impl CycleRecord {
    /// Checks the demonstration index and that every policy has the same
    /// feature, action and control-point counts.
    pub fn validate(&self) -> Result<()> {
        let first = self
            .set
            .policies
            .first()
            .ok_or(Error::Empty("cycle record policy set"))?;
        if self.demo.index >= self.set.len() {
            return Err(Error::invalid(
                "cycle record",
                "demonstration index out of range",
            ));
        }
        let shape = |p: &Policy| {
            (
                p.features.len(),
                p.actions.len(),
                p.control_points.len(),
                p.waypoints.len(),
            )
        };
        let s0 = shape(first);
        if self.set.policies.iter().any(|p| shape(p) != s0) || s0.2 != s0.3 {
            return Err(Error::invalid("cycle record", "ragged policy set"));
        }
        if self.theta.len() != s0.0 {
            return Err(Error::dims(s0.0, self.theta.len()));
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let p0 = &self.set.policies[0];
        let (n, k, a, m) = (
            self.set.len(),
            p0.features.len(),
            p0.actions.len(),
            p0.control_points.len(),
        );
        let mut out = Vec::new();

        let mut head = Writer::default();
        head.u64(self.cycle);
        head.u64(self.scenario_id);
        head.u64(self.set.cycle);
        head.u64(self.set.sorted as u64);
        for v in state_fields(&self.ego) {
            head.f64(v);
        }
        for v in state_fields(&self.set.ego) {
            head.f64(v);
        }
        for d in [n, k, a, m] {
            head.u64(d as u64);
        }
        section(&mut out, b"HEAD", head.0);

        let mut w = Writer::default();
        self.theta.iter().for_each(|&v| w.f64(v));
        section(&mut out, b"THET", w.0);

        let mut w = Writer::default();
        for p in &self.set.policies {
            p.features.iter().for_each(|&v| w.f64(v));
        }
        section(&mut out, b"FEAT", w.0);

        let mut w = Writer::default();
        for p in &self.set.policies {
            for act in &p.actions {
                w.f64(act.accel);
                w.f64(act.curvature_rate);
                w.f64(act.duration);
            }
        }
        section(&mut out, b"ACTN", w.0);

        let mut w = Writer::default();
        for p in &self.set.policies {
            for c in &p.control_points {
                w.f64(c.lateral);
                w.f64(c.yaw);
                w.f64(c.progress);
            }
        }
        section(&mut out, b"CTRL", w.0);

        let mut w = Writer::default();
        for p in &self.set.policies {
            for q in &p.waypoints {
                [q.t, q.x, q.y, q.yaw, q.v].iter().for_each(|&v| w.f64(v));
            }
        }
        section(&mut out, b"WAYP", w.0);

        let mut w = Writer::default();
        self.set.policies.iter().for_each(|p| w.f64(p.value));
        section(&mut out, b"VALU", w.0);

        let mut w = Writer::default();
        w.u64(self.demo.index as u64);
        w.f64(self.demo.distance);
        section(&mut out, b"DEMO", w.0);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut sections = Reader::new(bytes);
        let mut head = Reader::new(sections.section(b"HEAD")?);
        let cycle = head.u64()?;
        let scenario_id = head.u64()?;
        let set_cycle = head.u64()?;
        let sorted = head.u64()? != 0;
        let ego = head.state()?;
        let set_ego = head.state()?;
        let n = head.u64()? as usize;
        let k = head.u64()? as usize;
        let a = head.u64()? as usize;
        let m = head.u64()? as usize;

        let mut r = Reader::new(sections.section(b"THET")?);
        let theta = r.f64s(k)?;
        let mut feat = Reader::new(sections.section(b"FEAT")?);
        let mut actn = Reader::new(sections.section(b"ACTN")?);
        let mut ctrl = Reader::new(sections.section(b"CTRL")?);
        let mut wayp = Reader::new(sections.section(b"WAYP")?);
        let mut valu = Reader::new(sections.section(b"VALU")?);
        let mut policies = Vec::with_capacity(n);
        for _ in 0..n {
            let features = feat.f64s(k)?;
            let actions = (0..a)
                .map(|_| {
                    Ok(ControlAction {
                        accel: actn.f64()?,
                        curvature_rate: actn.f64()?,
                        duration: actn.f64()?,
                    })
                })
                .collect::<Result<_>>()?;
            let control_points = (0..m)
                .map(|_| {
                    Ok(ControlPoint {
                        lateral: ctrl.f64()?,
                        yaw: ctrl.f64()?,
                        progress: ctrl.f64()?,
                    })
                })
                .collect::<Result<_>>()?;
            let waypoints = (0..m)
                .map(|_| {
                    Ok(Waypoint {
                        t: wayp.f64()?,
                        x: wayp.f64()?,
                        y: wayp.f64()?,
                        yaw: wayp.f64()?,
                        v: wayp.f64()?,
                    })
                })
                .collect::<Result<_>>()?;
            policies.push(Policy {
                actions,
                states: Vec::new(),
                features,
                control_points,
                waypoints,
                value: valu.f64()?,
            });
        }
        for rd in [&feat, &actn, &ctrl, &wayp, &valu] {
            rd.finished()?;
        }
        let mut d = Reader::new(sections.section(b"DEMO")?);
        let demo = Demonstration {
            index: d.u64()? as usize,
            distance: d.f64()?,
        };
        sections.finished()?;
        let record = Self {
            cycle,
            scenario_id,
            ego,
            theta,
            set: PolicySet {
                cycle: set_cycle,
                ego: set_ego,
                policies,
                sorted,
            },
            demo,
        };
        record.validate()?;
        Ok(record)
    }
}

fn state_fields(s: &VehicleState) -> [f64; 7] {
    [s.t, s.x, s.y, s.yaw, s.v, s.curvature, s.accel]
}

fn section(out: &mut Vec<u8>, tag: &[u8; 4], payload: Vec<u8>) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self::named(bytes, "cycle record")
    }

    pub(crate) fn named(bytes: &'a [u8], what: &'static str) -> Self {
        Self {
            bytes,
            pos: 0,
            what,
        }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format(self.what, "truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn state(&mut self) -> Result<VehicleState> {
        Ok(VehicleState {
            t: self.f64()?,
            x: self.f64()?,
            y: self.f64()?,
            yaw: self.f64()?,
            v: self.f64()?,
            curvature: self.f64()?,
            accel: self.f64()?,
        })
    }

    fn section(&mut self, tag: &[u8; 4]) -> Result<&'a [u8]> {
        let found = self.take(4)?;
        if found != tag {
            return Err(Error::format(
                self.what,
                format!(
                    "expected section {}, found {}",
                    String::from_utf8_lossy(tag),
                    String::from_utf8_lossy(found)
                ),
            ));
        }
        let len = self.u64()? as usize;
        self.take(len)
    }

    pub(crate) fn finished(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(self.what, "trailing bytes"));
        }
        Ok(())
    }
}
