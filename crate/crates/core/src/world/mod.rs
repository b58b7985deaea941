pub mod dataset;
mod gen;
mod scene;
mod templates;

pub use gen::*;
pub use scene::*;
pub use templates::{BinaryLabels, Instance, TemplateId};
