pub mod control;
pub mod evaluation;
pub mod kinematics;
pub mod learning;
pub mod numerics;
pub mod plant;
