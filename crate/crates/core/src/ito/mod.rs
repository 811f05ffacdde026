//! Free difference quotients and the symbolic side of the free Itô formula.

mod coeff;
mod poly;
mod tensor;

pub use coeff::{ito_coeff_closed, ito_coeff_recursive, table_entry};
pub use poly::{
    derivation_identity_check, for_each_composition, partial_k, partial_k_iterated,
    resolvent_identity_check, Polynomial, TensorPolynomial,
};
pub use tensor::{apply_sharp, otimes2, phi_contract, ElementaryTensor, OperatorTensor};
