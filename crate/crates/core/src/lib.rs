//! Gravitational-wave matched filtering posed as a search over compact-binary mass
//! grids, and exact statevector simulation of the variational and Grover-type
//! quantum searches run against that objective.

pub mod matched_filter;
pub mod numopt;
pub mod param_space;
pub mod psd;
pub mod signal;
pub mod statevector;
pub mod strain;
pub mod vqa;
pub mod waveform;
