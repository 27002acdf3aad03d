pub mod annotate;
pub mod eval;
pub mod model;
pub mod report;
pub mod select;
