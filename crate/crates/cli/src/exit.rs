//! Process exit codes.

use mscbench_core::net::TransportError;
use thiserror::Error;

pub const OK: u8 = 0;
pub const USAGE: u8 = 1;
pub const DATA: u8 = 2;
pub const TRANSPORT: u8 = 3;

/// Bad flag values that clap cannot catch.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Some items or classes could not be fetched; partial results were kept.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct PartialTransportFailure(pub String);

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return USAGE;
        }
        if cause.is::<TransportError>() || cause.is::<PartialTransportFailure>() {
            return TRANSPORT;
        }
    }
    DATA
}
