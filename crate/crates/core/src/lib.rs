pub mod catalog;
pub mod classify;
pub mod cli;
pub mod constructor;
pub mod covering;
pub mod distortion;
pub mod error;
pub mod ext;
pub mod hp;
pub mod itinerary;
pub mod radial;
pub mod region;
pub mod render;
pub mod scalar;
pub mod sequence;

pub use catalog::{
    make_map, EvalKind, EvalResult, ExtEval, Family, MapDescriptor, MapParams, OrbitRecord, Pole,
    PoleSet, StopReason,
};
pub use error::{Error, ParamError, Refusal, Result};
pub use ext::ExtComplex;
pub use hp::HpComplex;
