//! Detection of spam campaigners in tweet corpora anchored on phone
//! numbers.
//!
//! The crate follows one path through the data:
//!
//! 1. [`corpus`] loads and validates tweets, users and follower edges.
//! 2. [`campaigns`] groups phone numbers into campaigns by the overlap of
//!    their most frequent unigrams.
//! 3. [`hin`] builds a weighted hierarchy per campaign (campaign, then
//!    phone and URL tokens, then users) and [`hmps`] scores every user
//!    against the campaign's known spammers along its meta-paths.
//! 4. [`features`] adds account features from the follower graph and
//!    tweet content.
//! 5. [`occ`] fits one-class models per campaign and [`feedback`] lets
//!    those models hand confident users to each other.
//! 6. [`eval`] runs the evaluation protocols; [`synth`] generates labelled
//!    corpora to run them on.
//!
//! [`pipeline::Pipeline`] wires steps 2 to 5 together.

pub mod campaigns;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod feedback;
pub mod hin;
pub mod hmps;
pub mod ids;
pub mod occ;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
pub use ids::{PhoneToken, TweetId, UrlToken, UserId};
