//! Geometry, small dense algebra, RNG and autodiff used by every other module.

pub mod autodiff;
pub mod gradcheck;
pub mod mat;
pub mod quat;
pub mod rng;
pub mod vec3;

pub use autodiff::{Gradients, Tape, Var};
pub use gradcheck::grad_check;
pub use mat::Mat;
pub use quat::{quat_relative, quat_rotate, Quaternion};
pub use rng::Rng;
pub use vec3::Vec3;

/// Magnitude of gravity in m/s².
pub const GRAVITY: f64 = 9.81;

/// World gravity vector; the world frame is right-handed and z-up.
pub const GRAVITY_VEC: Vec3 = Vec3::new(0.0, 0.0, -GRAVITY);

/// Specific force measured by a stationary accelerometer, in world frame.
pub const GRAVITY_REACTION: Vec3 = Vec3::new(0.0, 0.0, GRAVITY);
