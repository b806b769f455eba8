//! The LQ and energy-storage applications.

pub mod energy;
pub mod lq;

pub use energy::{energy_build, energy_st_reduction_check, EnergyParams, WindLaw};
pub use lq::{
    lq_grid_tolerance, lq_solve_closed_form, lq_verify_stagewise, Interval, LQParams, LQSolution, LQVerification,
    ParamBox, Theta,
};
