//! Task-space control: the MTJ law, slack prevention, the inner tension loop
//! and the closed loop that strings them together.

pub mod closed_loop;
pub mod inner;
pub mod mtj;
pub mod reachable;
pub mod slack;

pub use closed_loop::{ClosedLoop, ControllerConfig, LoopState, StepRecord};
pub use inner::{actuator_command, inner_loop_step, InnerLoopParams, InnerLoopState};
pub use mtj::{modification_factor, mtj_control, GainSet, MtjOutput, MtjState, MtjThresholds};
pub use reachable::{force_equilibrium, force_equilibrium_from, holding_force, lift_to_surface, ReachableSurface};
pub use slack::{apply_slack_strategy, SlackStrategy};
