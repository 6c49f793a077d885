//! Polynomial vector fields, sparse coefficient tensors and reference integration.

mod integrate;
mod system;
mod tensor;

pub use integrate::{
    fmt_f64, integrate, integrate_observed, uniform_grid, IntegratorOptions, Trajectory, TrajectoryStatus, VectorField,
};
pub use system::{kron_power, quadratic_r_number, PolySystem, KRON_LIMIT};
pub use tensor::SparseTensor;
