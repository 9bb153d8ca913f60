//! Occlusal-plane geometry: PCA frame, orthographic rendered and depth
//! images, box ROIs and tooth identification.

mod frame;
mod identify;
mod render;
mod roi;

use thiserror::Error;

pub use frame::{occlusal_frame, OcclusalFrame};
pub use identify::{arch_polyline, order_and_identify, order_and_identify_with, ArchOrdering, HullConfig};
pub use render::{render_images, ImageGeometry, RasterImage, Surface};
pub use roi::{extract_rois, BoundingBox2D, Roi, ToothClass};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("cloud has no normals")]
    MissingNormals,

    #[error("no ray hit the surface")]
    EmptyProjection,

    #[error("box {box_index} contains no points")]
    EmptyRoi { box_index: usize },

    #[error("concave hull failed: {0}")]
    HullFailure(String),

    #[error("inconsistent tooth classes: {0}")]
    InconsistentClasses(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
