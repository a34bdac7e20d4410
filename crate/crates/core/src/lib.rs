//! Spray coefficients, Douglas tensors and projective-relatedness checks for
//! (α, β)-metrics `F = αφ(β/α)` with polynomial coefficient fields.

pub mod douglas;
pub mod error;
pub mod fields;
pub mod geodesic;
pub mod jet;
pub mod linalg;
pub mod phi;
pub mod poly;
pub mod projective;
pub mod sampling;
pub mod spray;

pub use error::{GeometryError, Result};
pub use fields::{beta_data, christoffel, riemann_spray, BetaData, Christoffel, MetricField, OneFormField, PointGeometry};
pub use jet::{Jet, JetSpace, Scalar};
pub use phi::{GeometryFactors, PhiFamily, PhiJet, PowerTerm, RegularityReport};
pub use poly::PolyField;
pub use spray::{
    finsler_norm, fundamental_tensor, spray_closed, spray_family, spray_oracle, AlphaBetaMetric,
    ClosedSpray, FundamentalTensor, ProjectiveShift, RiemannSpray, SprayField, SprayVector,
};
pub use douglas::{
    douglas_certificate, douglas_tensor, shared_douglas_residual, source_terms, DouglasCertificate,
    DouglasTensor, DouglasTolerances, DouglasVerdict, SourceTerms,
};
pub use sampling::{DomainBox, ProbeSet};
pub use geodesic::{compare_paths, convergence_order, geodesic, truncate_to_length, GeodesicPath, GeodesicSample};
pub use projective::{projective_residual, theorem1_check, theorem2_check, ProjectiveReport, ProjectiveTolerances};
