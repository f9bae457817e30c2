//! Process exit codes.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | other failure (I/O, model file, corpus) |
//! | 2 | bad arguments or key file |
//! | 3 | key mismatch (vocabulary fingerprint) |
//! | 4 | desync: the cover does not follow the key |
//! | 5 | message too long for the token budget |
//! | 6 | model server protocol or transport error |
//! | 7 | truncated or malformed cover or bit stream |

use lmstego::Error;

pub const FAILURE: u8 = 1;
pub const USAGE: u8 = 2;
pub const KEY_MISMATCH: u8 = 3;
pub const DESYNC: u8 = 4;
pub const MESSAGE_TOO_LONG: u8 = 5;
pub const PROTOCOL: u8 = 6;
pub const MALFORMED: u8 = 7;

pub fn code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParams(_) | Error::Key(_) | Error::UnknownWord(_) => USAGE,
        Error::KeyMismatch(_) => KEY_MISMATCH,
        Error::Desync { .. } | Error::UnsupportedToken { .. } => DESYNC,
        Error::MessageTooLong { .. } => MESSAGE_TOO_LONG,
        Error::Protocol(_) | Error::Transport(_) | Error::ContextTooLong { .. } => PROTOCOL,
        Error::MalformedStream(_) | Error::TruncatedCover { .. } | Error::Format(_) => MALFORMED,
        _ => FAILURE,
    }
}
