//! Dense three-stream network (value, advantage and sigma heads over a shared
//! trunk) with exact backpropagation, the variance and TD-error losses, and
//! Adam.

mod adam;
mod io;
mod loss;
mod net;

pub use adam::{AdamConfig, AdamState};
pub use io::{read_arrays, write_arrays};
pub use loss::{tddqn_loss, vdqn_loss, LossKind, LossTerms};
pub use net::{Activation, ForwardCache, NetConfig, NetOutput, ParamRange, ThreeStreamNet};
