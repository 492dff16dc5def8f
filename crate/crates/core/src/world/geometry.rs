//! Analytic lane centerlines built from straight and circular pieces.
//!
//! Arc length is exact for every piece, so positions, headings and
//! projections are closed-form instead of interpolated from samples.

use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub enum Piece {
    Line {
        start: Point,
        heading: f64,
        length: f64,
    },
    /// `sweep` is signed: positive turns left (counter-clockwise).
    Arc {
        center: Point,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl Piece {
    pub fn length(&self) -> f64 {
        match *self {
            Piece::Line { length, .. } => length,
            Piece::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    fn pose_at(&self, s: f64) -> (Point, f64, f64) {
        match *self {
            Piece::Line { start, heading, .. } => {
                let p = Point::new(start.x + s * heading.cos(), start.y + s * heading.sin());
                (p, heading, 0.0)
            }
            Piece::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let sign = sweep.signum();
                let ang = start_angle + sign * s / radius;
                let p = Point::new(center.x + radius * ang.cos(), center.y + radius * ang.sin());
                (p, wrap_angle(ang + sign * PI / 2.0), sign / radius)
            }
        }
    }

    /// Nearest point on the piece: (local arc length, distance).
    fn project(&self, p: Point) -> (f64, f64) {
        match *self {
            Piece::Line {
                start,
                heading,
                length,
            } => {
                let (c, s) = (heading.cos(), heading.sin());
                let t = ((p.x - start.x) * c + (p.y - start.y) * s).clamp(0.0, length);
                let q = Point::new(start.x + t * c, start.y + t * s);
                (t, p.dist(q))
            }
            Piece::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let sign = sweep.signum();
                let phi = (p.y - center.y).atan2(p.x - center.x);
                let delta = (sign * (phi - start_angle)).rem_euclid(TAU);
                let r = p.dist(center);
                if delta <= sweep.abs() {
                    (delta * radius, (r - radius).abs())
                } else {
                    let len = self.length();
                    let d0 = p.dist(self.pose_at(0.0).0);
                    let d1 = p.dist(self.pose_at(len).0);
                    if d0 <= d1 {
                        (0.0, d0)
                    } else {
                        (len, d1)
                    }
                }
            }
        }
    }
}

/// Result of projecting a point onto a centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub arc: f64,
    /// Signed, left of travel direction positive.
    pub lateral: f64,
    pub distance: f64,
    pub heading: f64,
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Centerline {
    pieces: Vec<Piece>,
    offsets: Vec<f64>,
    length: f64,
    closed: bool,
}

impl Centerline {
    pub fn new(pieces: Vec<Piece>, closed: bool) -> Self {
        let mut offsets = Vec::with_capacity(pieces.len());
        let mut acc = 0.0;
        for p in &pieces {
            offsets.push(acc);
            acc += p.length();
        }
        Self {
            pieces,
            offsets,
            length: acc,
            closed,
        }
    }

    pub fn straight(start: Point, heading: f64, length: f64) -> Self {
        Self::new(
            vec![Piece::Line {
                start,
                heading,
                length,
            }],
            false,
        )
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Maps an arc length into the valid range (wrapping when closed).
    pub fn normalize_arc(&self, s: f64) -> f64 {
        if self.closed {
            s.rem_euclid(self.length)
        } else {
            s.clamp(0.0, self.length)
        }
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let s = self.normalize_arc(s);
        let idx = match self
            .offsets
            .binary_search_by(|o| o.partial_cmp(&s).unwrap())
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        (idx, s - self.offsets[idx])
    }

    /// Position, heading and signed curvature at arc length `s`.
    pub fn pose_at(&self, s: f64) -> (Point, f64, f64) {
        let (i, local) = self.locate(s);
        self.pieces[i].pose_at(local.min(self.pieces[i].length()))
    }

    pub fn point_at(&self, s: f64) -> Point {
        self.pose_at(s).0
    }

    pub fn project(&self, p: Point) -> Projection {
        let mut best = (0usize, 0.0, f64::INFINITY);
        for (i, piece) in self.pieces.iter().enumerate() {
            let (t, d) = piece.project(p);
            if d < best.2 {
                best = (i, t, d);
            }
        }
        let (i, t, d) = best;
        let (foot, heading, curvature) = self.pieces[i].pose_at(t);
        let cross = heading.cos() * (p.y - foot.y) - heading.sin() * (p.x - foot.x);
        let arc = self.normalize_arc(self.offsets[i] + t);
        Projection {
            arc,
            lateral: cross,
            distance: d,
            heading,
            curvature,
        }
    }

    /// Forward distance from `from` to `to` along the line; `None` when `to`
    /// lies behind on an open line.
    pub fn ahead(&self, from: f64, to: f64) -> Option<f64> {
        if self.closed {
            Some((to - from).rem_euclid(self.length))
        } else if to >= from {
            Some(to - from)
        } else {
            None
        }
    }

    /// Evenly spaced points for drawing or polyline export.
    pub fn sample_points(&self, spacing: f64) -> Vec<Point> {
        let n = (self.length / spacing).ceil().max(1.0) as usize;
        let last = if self.closed { n - 1 } else { n };
        (0..=last)
            .map(|i| self.point_at(self.length * i as f64 / n as f64))
            .collect()
    }
}
