//! Randomized approximation algorithms for complex multilinear forms and
//! real-valued conjugate forms over roots of unity, the unit circle and the
//! complex sphere, with brute-force and multi-start reference oracles.

pub mod conjugate;
pub mod error;
pub mod experiment;
pub mod forms;
pub mod multilinear;
pub mod oracle;
pub mod polarization;
pub mod sampling;
pub mod tensor;

pub use num_complex::Complex64;

pub use conjugate::{
    build_h_tensor, hessian_sample, round_to_vertices, solve_form, solve_gm_convex, solve_gm_squarefree, solve_gs, Direction,
    FormMode, GMode, GSolveOptions, GSolveReport,
};
pub use error::{Error, Result};
pub use experiment::{
    generate_instance, run_experiment, ExperimentConfig, ExperimentResult, Instance, InstanceKind, Model, RatioRow, Summary,
};
pub use forms::{eval_conjugate_tensor, tensor_to_form, ConjugateForm, FormFlags, FormJson};
pub use multilinear::{
    largest_singular_pair, ratio_lm, ratio_ls, solve_bilinear_circle, solve_bilinear_roots, solve_lm, solve_ls,
    BaseCaseStrategy, Ratio, SolveReport,
};
pub use oracle::{
    brute_force_form_roots, brute_force_multilinear_roots, multistart_reference, ContinuousSet, Objective, OracleResult, Solution,
};
pub use sampling::{ConstraintSet, Domain, RandomSource, RootOrder, TailBoundReport};
pub use tensor::{CTensor, CVector};
