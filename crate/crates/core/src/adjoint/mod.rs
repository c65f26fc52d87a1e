pub mod cones;
pub mod gphq;
pub mod nc_compare;
pub mod nc_oracle;
pub mod pieces;
pub mod solve;
pub mod stationarity;

pub use cones::{piece_normal_cone, PolyCone};
pub use gphq::{limiting_normal_gphq, NcCertificate, NcDecision};
pub use nc_compare::{compare_oracles, OracleComparison, OracleComparisonOptions};
pub use pieces::{classify_piece, Piece};
pub use solve::{solve_adjoint, AdjointBundle, BranchPolicy, StateGradients};
pub use stationarity::{check_m_stationarity, BoxBounds, StationarityReport};
