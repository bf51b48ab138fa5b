//! Shannon quantities on finite distributions and differential entropy of
//! one-dimensional densities.

mod differential;
mod discrete;
pub mod quadrature;

pub use differential::{
    differential_entropy, differential_entropy_with_tol, ln_sigmoid_derivative, pushforward_entropy,
    sigmoid, sigmoid_entropy_shift, Activation, DensitySpec, Family, MixtureComponent, MonotoneMap,
    PdfFn, DEFAULT_TRUNCATION_SDS, MAX_TRUNCATION_MASS, NORMALIZATION_TOL,
};
pub use discrete::{
    conditional_entropy, entropy, joint_entropy, marginalize, mutual_information,
    mutual_information_by_entropies, product_joint, shannon_nats, ConditionalFamily, DiscreteDist,
    JointDist, LogBase, MASS_TOL,
};
pub use quadrature::Integral;
