//! The surrogate network: a shared 3D CNN backbone and per-(codec, metric)
//! prediction heads, plus the model file format.

mod backbone;
mod config;
mod head;
mod model;

pub use backbone::Backbone;
pub use config::{BackboneConfig, EbEmbedderConfig, HeadConfig, HeadKind, Metric, TargetNorm, TargetTransform};
pub use head::{HeadOutput, HeadRows, PredictionHead};
pub use model::{load_model, save_model, HeadKey, SurrogateModel, FORMAT_VERSION, MAGIC};
