//! Spectral classification from the boundary behaviour of `M₊`.

pub mod alpha;
pub mod boundary;
pub mod eigen;
pub mod herglotz;
pub mod interlace;
pub mod laurent;
pub mod scan;
pub mod tau;

pub use alpha::{transform_alpha, Transformed};
pub use boundary::{boundary_limit, boundary_limit_l, BoundaryLimit, NuSchedule};
pub use eigen::{eigen_data, eigen_data_with_residue, EigenData, EigenOptions};
pub use herglotz::{herglotz_eval, HerglotzModel, StepSpectralFunction};
pub use interlace::{interlace_check, interlace_from_lists, InterlaceReport};
pub use laurent::{laurent_coeffs, refine_pole, PoleData};
pub use scan::{classify_point, scan_spectrum, ClassificationRecord, ClassifyOptions, ScanOptions, SpectralMap, Verdict};
pub use tau::tau_increment;
