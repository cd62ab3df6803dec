//! Benchmark problems: quadrotor trajectory tracking and thin-plate
//! temperature control.

mod quadrotor;
mod thinplate;

pub use quadrotor::{quadrotor, quadrotor_perturbed, QuadrotorModel, QuadrotorParams};
pub use thinplate::{thin_plate, ThinPlateModel, ThinPlateParams};
