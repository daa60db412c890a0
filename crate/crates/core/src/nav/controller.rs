use super::NavParams;
use crate::geometry::{wrap_to_pi, Point, Pose};
use crate::sim::Action;

/// Turns toward the sub-goal while its bearing exceeds the threshold
/// (a bearing of exactly ±π turns left), otherwise moves forward. A sub-goal
/// within the arrival radius makes the agent turn in place.
pub fn local_controller(pose: Pose, subgoal: Point, params: &NavParams) -> Action {
    let (dx, dy) = (subgoal.x - pose.x, subgoal.y - pose.y);
    if dx.hypot(dy) < params.arrive_radius_m {
        return Action::TurnLeft;
    }
    let bearing = wrap_to_pi(dy.atan2(dx) - pose.theta);
    if bearing.abs() <= params.bearing_threshold_rad {
        Action::Forward
    } else if bearing > 0.0 {
        Action::TurnLeft
    } else {
        Action::TurnRight
    }
}
