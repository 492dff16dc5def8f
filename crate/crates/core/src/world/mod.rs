//! Deterministic 2-D driving environment: oval multi-lane course, road graph,
//! checkpoints, stop lines and constant-velocity traffic.

pub mod geometry;
pub mod network;
pub mod scenario;

pub use geometry::{wrap_angle, Centerline, Piece, Point, Projection};
pub use network::{
    Lane, LaneId, LaneKind, LaneMatch, LanePosition, NodeId, OvalGeometry, RoadGraph, RoadNetwork,
    RouteField,
};
pub use scenario::{
    predict_object, Checkpoint, CheckpointSpec, EgoSpec, Footprint, PredictedPose, Scenario,
    ScenarioConfig, StepEvents, StopLine, StopLineSpec, TrafficVehicle, VehicleState, World, KPH,
    STOP_SPEED, STOP_WINDOW,
};
