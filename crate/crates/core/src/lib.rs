pub mod error;
pub mod fpt;
pub mod heatkernel;
pub mod landscape;
pub mod padic;
pub mod radial;
pub mod series;
pub mod symbol;
pub mod walker;

pub use error::{Error, Result};
pub use fpt::{Classification, FptGrid, GZero, RecurrenceTag};
pub use heatkernel::{CauchySolution, HeatKernelModel, TimeGrid};
pub use landscape::{Certificate, Landscape, LandscapeSpec, LandscapeType, Scope};
pub use padic::{PadicPoint, PadicScalar, Radius, ShellIndex, Space};
pub use radial::{RadialFunction, RadialStepFunction};
pub use symbol::{Route, SymbolTable};
pub use walker::{FptEstimate, IncrementLaw, PathRecord, ReturnEstimate, Start, WalkConfig, WalkMode, Walker};
