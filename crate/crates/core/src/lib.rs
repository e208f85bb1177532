//! Quantum-annealing-inspired Ising solvers.
//!
//! * [`model`]: Ising instances, spin configurations and the energy functional.
//! * [`solvers`]: CAC, CFC, SFC and discrete simulated bifurcation integrators.
//! * [`descent`]: single-flip steepest-descent refinement.
//! * [`sampler`]: single- and multi-shot ensembles with time-to-solution statistics.
//! * [`oracle`]: exhaustive ground states and local minima for small instances.
//! * [`io`]: instance, manifest, report and profile file formats.

pub mod descent;
pub mod io;
pub mod model;
pub mod oracle;
pub mod sampler;
pub mod solvers;

pub use descent::{is_local_minimum, steepest_descent, DescentOutcome};
pub use model::{qubo_to_ising, InstanceMetadata, IsingInstance, ModelError, RawInstance, SpinConfig};
pub use oracle::{brute_force, enumerate_local_minima, ExactSolution};
pub use solvers::{default_params, run_shot, ShotResult, SolverParams, Variant};
pub use sampler::{run_ensemble, single_shot_plus_descent, EnsembleReport, SamplingPlan};
