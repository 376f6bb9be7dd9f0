//! Shared fixtures for the benchmarks.

use ionmetro::params::{parse_config, ProtocolParams, FIG2_EXAMPLE, FIG4_EXAMPLE};

pub fn lambda_params() -> ProtocolParams {
    parse_config(FIG2_EXAMPLE).expect("bundled config is valid")
}

pub fn fourpod_params() -> ProtocolParams {
    parse_config(FIG4_EXAMPLE).expect("bundled config is valid")
}
