//! Real twistor lines near the canonical ones, found numerically as
//! truncated power series in the sphere parameter `λ`, and the structures
//! they carry on the parameter space `M`: tangent frames, the quaternionic
//! triple and the complex-structure field `J_D`.

mod ansatz;
mod frame;
mod jd;
mod residual;
mod solve;

pub use ansatz::{Layout, LineAnsatz};
pub use frame::{complex_structure_at, quaternion_frame, tangent_frame, QuaternionTriple, TangentFrame, KERNEL_GAP};
pub use jd::{
    circle_differential, integrability_check, intersection_parameter, jd_at, jd_field, s1_invariance_check, JdField, JdSample,
    LocalJdField,
};
pub use residual::{antipodes, collocation_grid, matching_residual, max_matching_residual, residual_jacobian};
pub use solve::{canonical_target, gauss_newton, line_at, plus_point, reality_residual, solve_line, LineSolverConfig, RealTwistorLine};
