//! File formats: images, score CSV, supervisor models, configuration and
//! result tables.

pub mod config;
pub mod image;
pub mod model;
pub mod report;
pub mod scores;

pub use config::{parse_panel_spec, RunConfig};
pub use image::{decode_image, load_image, save_pgm, write_pgm, write_png};
pub use model::{read_model, write_model};
pub use report::{write_group_results, write_quality_map};
pub use scores::{group_panels, read_scores, write_scores, Panel, ScoreRange, ScoreRecord};
