//! Forward-mode dual numbers, a reverse-mode tape, and the scalar trait
//! tying them together.

mod dual;
mod scalar;
mod tape;

pub use dual::Dual;
pub use scalar::Scalar;
pub use tape::{Op, Tape, Var};

use crate::error::Result;

/// Reverse-mode gradient of a scalar function of `point`.
///
/// `f` receives the tape and one leaf per coordinate of `point` and returns
/// the recorded output.
pub fn gradient<F>(point: &[f64], f: F) -> Result<Vec<f64>>
where
    F: for<'t> FnOnce(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::with_capacity(point.len() * 4);
    let leaves: Vec<Var<'_>> = point.iter().map(|&x| tape.var(x)).collect();
    let out = f(&tape, &leaves);
    tape.gradient(out, point.len())
}
