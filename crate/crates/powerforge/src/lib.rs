//! Persistence, exports, parallel drivers, the batch CLI and the local HTTP
//! service around `powerforge-core`.

pub mod canonical;
pub mod cli;
pub mod document;
pub mod error;
pub mod export;
pub mod parallel;
pub mod server;
pub mod session;

pub use document::SessionDocument;
pub use error::{AppError, Result};
pub use session::{PowerSelection, Session, Settings, Update, UpdateOutcome, UpdateRequest, XRange};
