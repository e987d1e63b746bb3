//! Review surface for generated fixes: an append-only suggestion store and
//! the HTTP API a browser client uses to stage, copy, reject or commit them.

pub mod server;
pub mod store;

pub use server::{router, serve, UI_MOUNT};
pub use store::{
    suggestion_id, ActResult, Action, ActionRequest, FeedbackEvent, IngestSummary, ReviewError, ReviewStore, Suggestion,
    SuggestionState, SuggestionSummary,
};
