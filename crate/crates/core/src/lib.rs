//! Event-camera perception and hitting-policy learning for a table-tennis
//! robot: event streams, synthetic scenes, ball detection, stereo geometry
//! and trajectory prediction, a one-step rally environment and a
//! curriculum-trained actor-critic.

pub mod cli;
pub mod detect;
pub mod events;
pub mod geometry;
pub mod learner;
pub mod metrics;
pub mod sim;
pub mod synth;
mod trig;
