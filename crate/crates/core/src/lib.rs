//! Floor-plan tracing, geo-registration and room-scan population.

pub mod geojson;
pub mod geom;
pub mod georef;
pub mod homography;
pub mod mesh;
pub mod par;
pub mod pipeline;
pub mod sim;
pub mod synthetic;
pub mod trace;

use thiserror::Error;

/// Any error raised by this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Trace(#[from] trace::TraceError),
    #[error(transparent)]
    Sim(#[from] sim::SimError),
    #[error(transparent)]
    Geo(#[from] georef::GeoError),
    #[error(transparent)]
    Export(#[from] geojson::ExportError),
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
    #[error(transparent)]
    Homography(#[from] homography::HomographyError),
}

impl Error {
    /// Name of the innermost variant, for structured error bodies.
    pub fn kind(&self) -> String {
        let dbg = match self {
            Error::Trace(e) => format!("{e:?}"),
            Error::Sim(e) => format!("{e:?}"),
            Error::Geo(e) => format!("{e:?}"),
            Error::Export(e) => format!("{e:?}"),
            Error::Mesh(e) => format!("{e:?}"),
            Error::Homography(e) => format!("{e:?}"),
        };
        dbg.split(|c: char| !c.is_alphanumeric() && c != '_').next().unwrap_or_default().to_string()
    }
}
