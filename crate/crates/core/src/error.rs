use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },

    #[error("duplicate tweet id {0}")]
    DuplicateTweet(String),

    #[error("duplicate user id {0}")]
    DuplicateUser(String),

    #[error("tweet {0}: multiple phones")]
    MultiplePhones(String),

    #[error("rejected phone token {0:?}")]
    RejectedPhone(String),

    #[error("rejected url token {0:?}")]
    RejectedUrl(String),

    #[error("silhouette undefined: {0}")]
    SilhouetteUndefined(String),

    #[error("campaign {0} has no tweets")]
    EmptyCampaign(usize),

    #[error("token {0} has no tweets")]
    TokenWithoutTweets(String),

    #[error("user {user} is not a node of campaign {campaign}")]
    UnknownUser { user: String, campaign: usize },

    #[error("self-similarity undefined for user {0}")]
    SelfSimilarity(String),

    #[error("campaign {0} has no spammers")]
    NoSpammers(usize),

    #[error("insufficient training samples: got {0}, need at least 2")]
    InsufficientSamples(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no annotated users in corpus")]
    NoAnnotations,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
