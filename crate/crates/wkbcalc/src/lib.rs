//! Exact symbolic calculus for microdifferential (E) and WKB (W)
//! operators, with descent-datum verification over finite covers:
//! half-form atlases and their sign cocycles, transport operators along
//! the local-model Lagrangian, twisted simple module construction, and
//! contactification of symplectic cover data.
//!
//! All arithmetic is exact over the Gaussian rationals; operators are
//! truncated graded series with explicit order windows, and every
//! comparison is made within the window justified by its inputs.

pub mod contactify;
pub mod descent;
pub mod expr;
pub mod halfforms;
pub mod lagrangian;
pub mod linalg;
pub mod microdiff;
pub mod nerve;
pub mod project;
pub mod report;
pub mod run;
pub mod scalar;
pub mod space;
pub mod symbol;
pub mod wkb;
