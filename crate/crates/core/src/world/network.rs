//! Road network: lanes, the lane-segment graph and shortest-route queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use super::geometry::{wrap_angle, Centerline, Piece, Point, Projection};
use crate::error::{Error, Result};

pub type LaneId = usize;
pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneKind {
    Main,
    Exit,
}

#[derive(Debug, Clone)]
pub struct Lane {
    pub id: LaneId,
    pub kind: LaneKind,
    pub width: f64,
    pub centerline: Centerline,
    /// Graph nodes on this lane, ascending by arc length.
    pub nodes: Vec<(NodeId, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub to: NodeId,
    pub cost: f64,
}

/// Directed graph over lane-segment boundaries with non-negative costs in m.
#[derive(Debug, Clone, Default)]
pub struct RoadGraph {
    adjacency: Vec<Vec<Edge>>,
}

#[derive(PartialEq)]
struct QueueItem {
    cost: f64,
    node: NodeId,
}

impl Eq for QueueItem {}

impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl RoadGraph {
    pub fn with_nodes(n: usize) -> Self {
        Self {
            adjacency: vec![Vec::new(); n],
        }
    }

    pub fn add_node(&mut self) -> NodeId {
        self.adjacency.push(Vec::new());
        self.adjacency.len() - 1
    }

    pub fn add_edge(&mut self, from: NodeId, to: NodeId, cost: f64) {
        assert!(
            cost >= 0.0 && cost.is_finite(),
            "edge cost must be finite and non-negative"
        );
        self.adjacency[from].push(Edge { to, cost });
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edges(&self, from: NodeId) -> &[Edge] {
        &self.adjacency[from]
    }

    fn dijkstra(adjacency: &[Vec<Edge>], source: NodeId) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; adjacency.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(QueueItem {
            cost: 0.0,
            node: source,
        });
        while let Some(QueueItem { cost, node }) = heap.pop() {
            if cost > dist[node] {
                continue;
            }
            for e in &adjacency[node] {
                let next = cost + e.cost;
                if next < dist[e.to] {
                    dist[e.to] = next;
                    heap.push(QueueItem {
                        cost: next,
                        node: e.to,
                    });
                }
            }
        }
        dist
    }

    /// Shortest distances from `source` to every node.
    pub fn distances_from(&self, source: NodeId) -> Vec<f64> {
        Self::dijkstra(&self.adjacency, source)
    }

    /// Shortest distances from every node to `target` (Dijkstra on the reversed graph).
    pub fn distances_to(&self, target: NodeId) -> Vec<f64> {
        let mut reversed = vec![Vec::new(); self.adjacency.len()];
        for (from, edges) in self.adjacency.iter().enumerate() {
            for e in edges {
                reversed[e.to].push(Edge {
                    to: from,
                    cost: e.cost,
                });
            }
        }
        Self::dijkstra(&reversed, target)
    }

    pub fn shortest_distance(&self, from: NodeId, to: NodeId) -> Option<f64> {
        let d = self.distances_from(from)[to];
        d.is_finite().then_some(d)
    }
}

/// A position on the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanePosition {
    pub lane: LaneId,
    pub arc: f64,
}

/// Result of matching a state against the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneMatch {
    pub lane: LaneId,
    pub lateral: f64,
    pub heading_deviation: f64,
    pub arc: f64,
    pub curvature: f64,
    /// False when the state lies outside every lane corridor.
    pub on_network: bool,
}

#[derive(Debug, Clone)]
pub struct RoadNetwork {
    pub lanes: Vec<Lane>,
    pub graph: RoadGraph,
    /// Main lanes ordered left (inner) to right (outer).
    pub main_lanes: Vec<LaneId>,
    /// Lane used as the station/lateral reference frame.
    pub reference_lane: LaneId,
    /// Nodes where an exit edge leaves the main loop.
    pub exits: Vec<(NodeId, NodeId)>,
    /// Reference-frame lateral coordinate of every lane's start point.
    center_offsets: Vec<f64>,
    bounds: (f64, f64),
}

/// Remaining route distance from every graph node to a fixed goal.
#[derive(Debug, Clone)]
pub struct RouteField {
    pub goal: LanePosition,
    to_goal: Vec<f64>,
}

impl RoadNetwork {
    /// Builds a network from lanes and explicit graph edges. Lane node lists
    /// must reference node ids below `node_count`.
    pub fn from_parts(
        lanes: Vec<Lane>,
        node_count: usize,
        edges: &[(NodeId, NodeId, f64)],
        main_lanes: Vec<LaneId>,
        reference_lane: LaneId,
    ) -> Result<Self> {
        let mut graph = RoadGraph::with_nodes(node_count);
        for &(a, b, c) in edges {
            if a >= node_count || b >= node_count {
                return Err(Error::invalid(
                    "road network",
                    format!("edge {a}->{b} out of range"),
                ));
            }
            graph.add_edge(a, b, c);
        }
        for (i, lane) in lanes.iter().enumerate() {
            if lane.id != i {
                return Err(Error::invalid(
                    "road network",
                    "lane ids must match their index",
                ));
            }
            if !(lane.width > 0.0) {
                return Err(Error::invalid(
                    "road network",
                    format!("lane {i} width must be positive"),
                ));
            }
            if lane.nodes.windows(2).any(|w| w[1].1 <= w[0].1) {
                return Err(Error::invalid(
                    "road network",
                    format!("lane {i} nodes not ascending"),
                ));
            }
        }
        if main_lanes.is_empty()
            || main_lanes
                .iter()
                .chain([&reference_lane])
                .any(|&l| l >= lanes.len())
        {
            return Err(Error::invalid(
                "road network",
                "main/reference lanes out of range",
            ));
        }
        let reference = &lanes[reference_lane].centerline;
        let center_offsets: Vec<f64> = lanes
            .iter()
            .map(|l| reference.project(l.centerline.point_at(0.0)).lateral)
            .collect();
        let mut bounds = (f64::INFINITY, f64::NEG_INFINITY);
        for &id in &main_lanes {
            let d = center_offsets[id];
            bounds.0 = bounds.0.min(d - lanes[id].width / 2.0);
            bounds.1 = bounds.1.max(d + lanes[id].width / 2.0);
        }
        Ok(Self {
            lanes,
            graph,
            main_lanes,
            reference_lane,
            exits: Vec::new(),
            center_offsets,
            bounds,
        })
    }

    pub fn lane(&self, id: LaneId) -> &Lane {
        &self.lanes[id]
    }

    /// Nearest lane by Euclidean distance to its centerline; ties go to the lower id.
    pub fn lane_query(&self, x: f64, y: f64, yaw: f64) -> LaneMatch {
        let p = Point::new(x, y);
        let mut best: Option<(LaneId, Projection)> = None;
        for lane in &self.lanes {
            let pr = lane.centerline.project(p);
            if best.as_ref().is_none_or(|(_, b)| pr.distance < b.distance) {
                best = Some((lane.id, pr));
            }
        }
        let (lane, pr) = best.expect("network has lanes");
        let half = self.lanes[lane].width / 2.0;
        let on_network = if self.lanes[lane].kind == LaneKind::Main {
            // Corridor of the whole carriageway, not just the matched lane.
            let reference = if lane == self.reference_lane {
                pr.lateral
            } else {
                self.lanes[self.reference_lane]
                    .centerline
                    .project(p)
                    .lateral
            };
            let (lo, hi) = self.bounds;
            reference >= lo && reference <= hi
        } else {
            pr.lateral.abs() <= half
        };
        LaneMatch {
            lane,
            lateral: pr.lateral,
            heading_deviation: wrap_angle(yaw - pr.heading),
            arc: pr.arc,
            curvature: pr.curvature,
            on_network,
        }
    }

    /// Lateral bounds of the main carriageway in the reference frame.
    pub fn carriageway_bounds(&self) -> (f64, f64) {
        self.bounds
    }

    /// Builds the remaining-distance field for a goal position.
    pub fn route_field(&self, goal: LanePosition) -> Result<RouteField> {
        let lane = &self.lanes[goal.lane];
        let arc = lane.centerline.normalize_arc(goal.arc);
        // Last node at or before the goal on its lane (wrapping on closed lanes).
        let anchor = lane
            .nodes
            .iter()
            .rev()
            .find(|(_, s)| *s <= arc)
            .or_else(|| {
                if lane.centerline.is_closed() {
                    lane.nodes.last()
                } else {
                    None
                }
            })
            .copied();
        let mut to_goal = vec![f64::INFINITY; self.graph.node_count()];
        if let Some((node, s_node)) = anchor {
            let tail = lane.centerline.ahead(s_node, arc).unwrap_or(f64::INFINITY);
            for (n, d) in self.graph.distances_to(node).into_iter().enumerate() {
                to_goal[n] = d + tail;
            }
        }
        Ok(RouteField {
            goal: LanePosition {
                lane: goal.lane,
                arc,
            },
            to_goal,
        })
    }

    /// Remaining shortest-route distance from `position` to the field's goal.
    pub fn remaining(&self, field: &RouteField, position: LanePosition) -> Result<f64> {
        let lane = &self.lanes[position.lane];
        let line = &lane.centerline;
        let s = line.normalize_arc(position.arc);
        let mut best = f64::INFINITY;
        // Next node strictly ahead, or the node we stand on.
        let next = lane.nodes.iter().find(|(_, sn)| *sn >= s).or_else(|| {
            if line.is_closed() {
                lane.nodes.first()
            } else {
                None
            }
        });
        let gap_to_next = next.and_then(|&(_, sn)| line.ahead(s, sn));
        if let (Some(&(node, _)), Some(gap)) = (next, gap_to_next) {
            best = best.min(gap + field.to_goal[node]);
        }
        if position.lane == field.goal.lane {
            if let Some(direct) = line.ahead(s, field.goal.arc) {
                if gap_to_next.is_none_or(|g| direct <= g) {
                    best = best.min(direct);
                }
            }
        }
        if best.is_finite() {
            Ok(best)
        } else {
            Err(Error::NoRoute {
                from: format!("lane {} arc {:.3}", position.lane, s),
            })
        }
    }

    pub fn route_progress(&self, position: LanePosition, goal: LanePosition) -> Result<f64> {
        let field = self.route_field(goal)?;
        self.remaining(&field, position)
    }

    /// Station (arc length on the reference lane) and reference-frame lateral coordinate.
    pub fn road_frame(&self, x: f64, y: f64) -> (f64, f64) {
        let pr = self.lanes[self.reference_lane]
            .centerline
            .project(Point::new(x, y));
        (pr.arc, pr.lateral)
    }

    /// Reference-frame lateral coordinate of a main lane's center.
    pub fn lane_center_offset(&self, lane: LaneId) -> f64 {
        self.center_offsets[lane]
    }

    /// Main lane whose center is closest to the reference-frame lateral coordinate.
    pub fn main_lane_at(&self, lateral: f64) -> LaneId {
        let mut best = (self.main_lanes[0], f64::INFINITY);
        for &id in &self.main_lanes {
            let d = (self.lane_center_offset(id) - lateral).abs();
            if d < best.1 {
                best = (id, d);
            }
        }
        best.0
    }

    /// Arc length on `lane` at the given station of the reference lane.
    pub fn arc_at_station(&self, lane: LaneId, station: f64) -> f64 {
        let reference = &self.lanes[self.reference_lane].centerline;
        let p = reference.point_at(station);
        self.lanes[lane].centerline.project(p).arc
    }

    pub fn station_length(&self) -> f64 {
        self.lanes[self.reference_lane].centerline.length()
    }
}

/// Parameters of the oval course.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct OvalGeometry {
    pub straight_length: f64,
    /// Radius of the reference (middle) lane's half circles.
    pub radius: f64,
    pub lane_count: usize,
    pub lane_width: f64,
    pub straight_segments: usize,
    pub arc_segments: usize,
    pub lane_change_cost: f64,
    pub exit_length: f64,
    pub exit_angle: f64,
}

impl Default for OvalGeometry {
    fn default() -> Self {
        Self {
            straight_length: 300.0,
            radius: 50.0,
            lane_count: 3,
            lane_width: 3.5,
            straight_segments: 12,
            arc_segments: 6,
            lane_change_cost: 10.0,
            exit_length: 60.0,
            exit_angle: 10f64.to_radians(),
        }
    }
}

impl RoadNetwork {
    /// Counter-clockwise oval: bottom straight heading +x from the origin,
    /// half circles on both ends. Lane 0 is the inner lane.
    pub fn oval(geo: &OvalGeometry) -> Result<Self> {
        if geo.lane_count == 0
            || !(geo.lane_width > 0.0)
            || !(geo.radius > geo.lane_width * geo.lane_count as f64)
        {
            return Err(Error::invalid(
                "oval geometry",
                "lanes must fit inside the turn radius",
            ));
        }
        let mid = (geo.lane_count as f64 - 1.0) / 2.0;
        let l = geo.straight_length;
        let mut lanes = Vec::new();
        let mut next_node = 0usize;
        let per_lane = 2 * geo.straight_segments + 2 * geo.arc_segments;
        for i in 0..geo.lane_count {
            let r = geo.radius - (mid - i as f64) * geo.lane_width;
            let pieces = vec![
                Piece::Line {
                    start: Point::new(0.0, -r),
                    heading: 0.0,
                    length: l,
                },
                Piece::Arc {
                    center: Point::new(l, 0.0),
                    radius: r,
                    start_angle: -PI / 2.0,
                    sweep: PI,
                },
                Piece::Line {
                    start: Point::new(l, r),
                    heading: PI,
                    length: l,
                },
                Piece::Arc {
                    center: Point::new(0.0, 0.0),
                    radius: r,
                    start_angle: PI / 2.0,
                    sweep: PI,
                },
            ];
            let centerline = Centerline::new(pieces, true);
            let arc_len = PI * r;
            let mut nodes = Vec::with_capacity(per_lane);
            let mut s = 0.0;
            for (len, count) in [
                (l, geo.straight_segments),
                (arc_len, geo.arc_segments),
                (l, geo.straight_segments),
                (arc_len, geo.arc_segments),
            ] {
                for k in 0..count {
                    nodes.push((next_node, s + len * k as f64 / count as f64));
                    next_node += 1;
                }
                s += len;
            }
            lanes.push(Lane {
                id: i,
                kind: LaneKind::Main,
                width: geo.lane_width,
                centerline,
                nodes,
            });
        }

        let mut edges = Vec::new();
        for i in 0..geo.lane_count {
            for k in 0..per_lane {
                let k1 = (k + 1) % per_lane;
                let (a, sa) = lanes[i].nodes[k];
                let (b, sb) = lanes[i].nodes[k1];
                let seg = lanes[i].centerline.ahead(sa, sb).unwrap();
                edges.push((a, b, seg));
                for j in [i.wrapping_sub(1), i + 1] {
                    if j < geo.lane_count {
                        let (_, sc0) = lanes[j].nodes[k];
                        let (c1, sc1) = lanes[j].nodes[k1];
                        let seg_j = lanes[j].centerline.ahead(sc0, sc1).unwrap();
                        edges.push((a, c1, seg_j + geo.lane_change_cost));
                    }
                }
            }
        }

        // Exits branch off the outer lane at the middle of both straights.
        let outer = geo.lane_count - 1;
        let r_out = geo.radius + mid * geo.lane_width;
        let mut exits = Vec::new();
        let branch_specs = [
            (
                geo.straight_segments / 2,
                Point::new(l / 2.0, -r_out),
                -geo.exit_angle,
            ),
            (
                geo.straight_segments + geo.arc_segments + geo.straight_segments / 2,
                Point::new(l / 2.0, r_out),
                PI + geo.exit_angle,
            ),
        ];
        for (k, start, heading) in branch_specs {
            let id = lanes.len();
            let n0 = next_node;
            let n1 = next_node + 1;
            next_node += 2;
            lanes.push(Lane {
                id,
                kind: LaneKind::Exit,
                width: geo.lane_width,
                centerline: Centerline::straight(start, heading, geo.exit_length),
                nodes: vec![(n0, 0.0), (n1, geo.exit_length)],
            });
            let branch = lanes[outer].nodes[k].0;
            edges.push((branch, n0, 0.0));
            edges.push((n0, n1, geo.exit_length));
            exits.push((branch, n0));
        }

        let main_lanes = (0..geo.lane_count).collect();
        let mut net = Self::from_parts(lanes, next_node, &edges, main_lanes, geo.lane_count / 2)?;
        net.exits = exits;
        Ok(net)
    }
}
