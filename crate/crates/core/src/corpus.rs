//! Tweet/user corpus loading, token normalization and indexing.
//!
//! Input formats:
//!
//! * `tweets.jsonl`: one object per line with `id`, `user_id`, `text`,
//!   `created_at` (RFC 3339), `phones`, `urls`, `hashtags`. When `phones` or
//!   `urls` is missing, tokens are extracted from `text` (see
//!   [`extract_phones`] and [`extract_urls`]).
//! * `users.jsonl`: `user_id`, `followers_count`, `friends_count`,
//!   `suspended`, optional `annotated_label` (`"spammer"` or `"benign"`).
//! * `edges.csv`: header `follower,followee`, one edge per row.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{PhoneToken, TweetId, UrlToken, UserId};

/// Minimum digit count for a phone token.
pub const MIN_PHONE_DIGITS: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    #[serde(rename = "id")]
    pub tweet_id: TweetId,
    pub user_id: UserId,
    pub text: String,
    pub created_at: String,
    pub phones: Vec<PhoneToken>,
    pub urls: Vec<UrlToken>,
    pub hashtags: Vec<String>,
}

impl TweetRecord {
    pub fn phone(&self) -> Option<&PhoneToken> {
        self.phones.first()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Annotation {
    Spammer,
    Benign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: UserId,
    pub followers_count: u64,
    pub friends_count: u64,
    pub suspended: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotated_label: Option<Annotation>,
}

impl UserRecord {
    fn synthesized(user_id: UserId) -> Self {
        Self {
            user_id,
            followers_count: 0,
            friends_count: 0,
            suspended: false,
            annotated_label: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FollowerEdge {
    pub follower: UserId,
    pub followee: UserId,
}

/// Raw line of `tweets.jsonl` before normalization.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTweet {
    id: String,
    user_id: String,
    text: String,
    created_at: String,
    #[serde(default)]
    phones: Option<Vec<String>>,
    #[serde(default)]
    urls: Option<Vec<String>>,
    #[serde(default)]
    hashtags: Vec<String>,
}

/// Immutable, indexed corpus. Tweet positions (`usize`) are stable handles
/// into [`Corpus::tweets`].
#[derive(Debug, Clone)]
pub struct Corpus {
    tweets: Vec<TweetRecord>,
    tweet_pos: BTreeMap<TweetId, usize>,
    users: BTreeMap<UserId, UserRecord>,
    follower_edges: Vec<FollowerEdge>,
    by_phone: BTreeMap<PhoneToken, Vec<usize>>,
    by_url: BTreeMap<UrlToken, Vec<usize>>,
    by_user: BTreeMap<UserId, Vec<usize>>,
    warnings: Vec<String>,
}

impl Corpus {
    /// Validates and indexes already-normalized records.
    ///
    /// Tweets referencing an unknown user get a zero-count [`UserRecord`]
    /// and a warning. Self-loop edges are dropped with a warning; duplicate
    /// edges are removed.
    pub fn new(
        tweets: Vec<TweetRecord>,
        users: Vec<UserRecord>,
        edges: Vec<FollowerEdge>,
    ) -> Result<Self> {
        let mut warnings = Vec::new();

        let mut user_map = BTreeMap::new();
        for user in users {
            if user_map.contains_key(&user.user_id) {
                return Err(Error::DuplicateUser(user.user_id.0));
            }
            user_map.insert(user.user_id.clone(), user);
        }

        let mut tweet_pos = BTreeMap::new();
        let mut by_phone: BTreeMap<PhoneToken, Vec<usize>> = BTreeMap::new();
        let mut by_url: BTreeMap<UrlToken, Vec<usize>> = BTreeMap::new();
        let mut by_user: BTreeMap<UserId, Vec<usize>> = BTreeMap::new();
        let mut tweets = tweets;
        for (pos, tweet) in tweets.iter_mut().enumerate() {
            dedup_in_place(&mut tweet.phones);
            dedup_in_place(&mut tweet.urls);
            dedup_in_place(&mut tweet.hashtags);
            if tweet.phones.len() > 1 {
                return Err(Error::MultiplePhones(tweet.tweet_id.0.clone()));
            }
            if tweet_pos.insert(tweet.tweet_id.clone(), pos).is_some() {
                return Err(Error::DuplicateTweet(tweet.tweet_id.0.clone()));
            }
            if !user_map.contains_key(&tweet.user_id) {
                warnings.push(format!(
                    "tweet {} references unknown user {}; synthesized",
                    tweet.tweet_id, tweet.user_id
                ));
                user_map.insert(
                    tweet.user_id.clone(),
                    UserRecord::synthesized(tweet.user_id.clone()),
                );
            }
            for phone in &tweet.phones {
                by_phone.entry(phone.clone()).or_default().push(pos);
            }
            for url in &tweet.urls {
                by_url.entry(url.clone()).or_default().push(pos);
            }
            by_user.entry(tweet.user_id.clone()).or_default().push(pos);
        }

        let mut seen = HashSet::new();
        let mut follower_edges = Vec::with_capacity(edges.len());
        for edge in edges {
            if edge.follower == edge.followee {
                warnings.push(format!("self-loop edge on {} dropped", edge.follower));
                continue;
            }
            if seen.insert(edge.clone()) {
                follower_edges.push(edge);
            }
        }

        Ok(Self {
            tweets,
            tweet_pos,
            users: user_map,
            follower_edges,
            by_phone,
            by_url,
            by_user,
            warnings,
        })
    }

    pub fn tweets(&self) -> &[TweetRecord] {
        &self.tweets
    }

    pub fn tweet(&self, pos: usize) -> &TweetRecord {
        &self.tweets[pos]
    }

    pub fn tweet_position(&self, id: &str) -> Option<usize> {
        self.tweet_pos.get(id).copied()
    }

    pub fn users(&self) -> impl Iterator<Item = &UserRecord> {
        self.users.values()
    }

    pub fn user(&self, id: &str) -> Option<&UserRecord> {
        self.users.get(id)
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn follower_edges(&self) -> &[FollowerEdge] {
        &self.follower_edges
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Phone tokens in sorted order.
    pub fn phones(&self) -> impl Iterator<Item = &PhoneToken> {
        self.by_phone.keys()
    }

    pub fn tweets_with_phone(&self, phone: &str) -> &[usize] {
        self.by_phone.get(phone).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn tweets_with_url(&self, url: &str) -> &[usize] {
        self.by_url.get(url).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn tweets_by_user(&self, user: &str) -> &[usize] {
        self.by_user.get(user).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn suspended_users(&self) -> BTreeSet<UserId> {
        self.users
            .values()
            .filter(|u| u.suspended)
            .map(|u| u.user_id.clone())
            .collect()
    }

    pub fn annotated_users(&self) -> BTreeMap<UserId, Annotation> {
        self.users
            .values()
            .filter_map(|u| u.annotated_label.map(|a| (u.user_id.clone(), a)))
            .collect()
    }

    /// Re-checks index cross-consistency: for every phone, the user index
    /// restricted to tweets with that phone reproduces the phone index.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("corpus index inconsistent: {msg}")));
        for tweet in &self.tweets {
            if !self.users.contains_key(&tweet.user_id) {
                return bad(format!("tweet {} has no user record", tweet.tweet_id));
            }
        }
        for (phone, positions) in &self.by_phone {
            let mut from_users: Vec<usize> = self
                .by_user
                .values()
                .flatten()
                .copied()
                .filter(|&p| self.tweets[p].phones.contains(phone))
                .collect();
            from_users.sort_unstable();
            if &from_users != positions {
                return bad(format!("phone {phone}"));
            }
        }
        let indexed: usize = self.by_user.values().map(Vec::len).sum();
        if indexed != self.tweets.len() {
            return bad("user index does not cover all tweets".into());
        }
        Ok(())
    }

    pub fn write_tweets_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for tweet in &self.tweets {
            serde_json::to_writer(&mut out, tweet)?;
            writeln!(out).map_err(|e| Error::io("<tweets>", e))?;
        }
        Ok(())
    }

    pub fn write_users_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for user in self.users.values() {
            serde_json::to_writer(&mut out, user)?;
            writeln!(out).map_err(|e| Error::io("<users>", e))?;
        }
        Ok(())
    }

    pub fn write_edges_csv<W: Write>(&self, out: W) -> Result<()> {
        write_edges_csv(&self.follower_edges, out)
    }
}

pub fn write_edges_csv<W: Write>(edges: &[FollowerEdge], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["follower", "followee"])?;
    for edge in edges {
        writer.write_record([edge.follower.as_str(), edge.followee.as_str()])?;
    }
    writer.flush().map_err(|e| Error::io("<edges>", e))?;
    Ok(())
}

fn dedup_in_place<T: Eq + std::hash::Hash + Clone>(items: &mut Vec<T>) {
    let mut seen = HashSet::new();
    items.retain(|x| seen.insert(x.clone()));
}

/// Loads and validates a corpus from the three input files.
pub fn load_corpus(
    tweets_path: &Path,
    users_path: &Path,
    edges_path: Option<&Path>,
) -> Result<Corpus> {
    let mut warnings = Vec::new();
    let tweets = read_jsonl_lines(tweets_path, |line, lineno| {
        parse_tweet_line(line).map_err(|message| Error::Malformed {
            path: tweets_path.display().to_string(),
            line: lineno,
            message,
        })
    })?
    .into_iter()
    .map(|(tweet, w)| {
        warnings.extend(w);
        tweet
    })
    .collect::<Result<Vec<_>>>()?;

    let users = read_jsonl_lines(users_path, |line, lineno| {
        serde_json::from_str::<UserRecord>(line).map_err(|e| Error::Malformed {
            path: users_path.display().to_string(),
            line: lineno,
            message: e.to_string(),
        })
    })?;

    let edges = match edges_path {
        Some(path) => read_edges_csv(path)?,
        None => Vec::new(),
    };

    let mut corpus = Corpus::new(tweets, users, edges)?;
    warnings.append(&mut corpus.warnings);
    corpus.warnings = warnings;
    for w in &corpus.warnings {
        log::warn!("{w}");
    }
    Ok(corpus)
}

fn read_jsonl_lines<T>(
    path: &Path,
    mut parse: impl FnMut(&str, usize) -> Result<T>,
) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse(&line, i + 1)?);
    }
    Ok(out)
}

/// Parses a tweet line into a record plus normalization warnings. The
/// inner `Result` carries contract violations (multiple phones) which are
/// reported as such rather than as malformed lines.
fn parse_tweet_line(
    line: &str,
) -> std::result::Result<(Result<TweetRecord>, Vec<String>), String> {
    let raw: RawTweet = serde_json::from_str(line).map_err(|e| e.to_string())?;
    chrono::DateTime::parse_from_rfc3339(&raw.created_at)
        .map_err(|e| format!("created_at {:?}: {e}", raw.created_at))?;
    let mut warnings = Vec::new();

    let urls: Vec<UrlToken> = match raw.urls {
        Some(list) => list
            .iter()
            .filter_map(|u| match normalize_url(u) {
                Ok(tok) => Some(tok),
                Err(_) => {
                    warnings.push(format!("tweet {}: rejected url {u:?}", raw.id));
                    None
                }
            })
            .collect(),
        None => extract_urls(&raw.text),
    };
    let phones: Vec<PhoneToken> = match raw.phones {
        Some(list) => list
            .iter()
            .filter_map(|p| match normalize_phone(p) {
                Ok(tok) => Some(tok),
                Err(_) => {
                    warnings.push(format!("tweet {}: rejected phone {p:?}", raw.id));
                    None
                }
            })
            .collect(),
        None => extract_phones(&raw.text),
    };

    let mut phone_set = phones.clone();
    dedup_in_place(&mut phone_set);
    let record = if phone_set.len() > 1 {
        Err(Error::MultiplePhones(raw.id.clone()))
    } else {
        Ok(TweetRecord {
            tweet_id: TweetId(raw.id),
            user_id: UserId(raw.user_id),
            text: raw.text,
            created_at: raw.created_at,
            phones,
            urls,
            hashtags: raw.hashtags,
        })
    };
    Ok((record, warnings))
}

fn read_edges_csv(path: &Path) -> Result<Vec<FollowerEdge>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["follower", "followee"] {
        return Err(Error::Malformed {
            path: path.display().to_string(),
            line: 1,
            message: "expected header \"follower,followee\"".into(),
        });
    }
    let mut edges = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Malformed {
            path: path.display().to_string(),
            line: i + 2,
            message: e.to_string(),
        })?;
        if row.len() != 2 {
            return Err(Error::Malformed {
                path: path.display().to_string(),
                line: i + 2,
                message: format!("expected 2 fields, got {}", row.len()),
            });
        }
        edges.push(FollowerEdge {
            follower: UserId(row[0].to_string()),
            followee: UserId(row[1].to_string()),
        });
    }
    Ok(edges)
}

/// Keeps digits and a leading `+`; rejects tokens with fewer than
/// [`MIN_PHONE_DIGITS`] digits.
pub fn normalize_phone(raw: &str) -> Result<PhoneToken> {
    let trimmed = raw.trim_start();
    let mut out = String::with_capacity(trimmed.len());
    if trimmed.starts_with('+') {
        out.push('+');
    }
    out.extend(trimmed.chars().filter(char::is_ascii_digit));
    let digits = out.len() - usize::from(out.starts_with('+'));
    if digits < MIN_PHONE_DIGITS {
        return Err(Error::RejectedPhone(raw.to_string()));
    }
    Ok(PhoneToken(out))
}

/// Canonical URL form: lowercased scheme and host, path and query kept,
/// trailing slashes removed. URLs without a host are rejected.
pub fn normalize_url(raw: &str) -> Result<UrlToken> {
    let parsed = url::Url::parse(raw.trim()).map_err(|_| Error::RejectedUrl(raw.to_string()))?;
    match parsed.host_str() {
        Some(h) if !h.is_empty() => {}
        _ => return Err(Error::RejectedUrl(raw.to_string())),
    }
    let s = parsed.as_str().trim_end_matches('/');
    Ok(UrlToken(s.to_string()))
}

pub(crate) fn url_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[A-Za-z][A-Za-z0-9+.\-]*://\S+").unwrap())
}

fn phone_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // 7 to 15 digits; a separator run between digits is at most two of
    // space, dot, dash or parentheses.
    RE.get_or_init(|| Regex::new(r"\+?\(?\d(?:[ ().\-]{0,2}\d){6,14}").unwrap())
}

const URL_TRAILING: &[char] = &['.', ',', ';', ':', '!', '?', ')', '"', '\''];

/// `scheme://...` spans in `text`, normalized. Trailing sentence
/// punctuation is not part of the URL.
pub fn extract_urls(text: &str) -> Vec<UrlToken> {
    let mut out: Vec<UrlToken> = url_regex()
        .find_iter(text)
        .filter_map(|m| normalize_url(m.as_str().trim_end_matches(URL_TRAILING)).ok())
        .collect();
    dedup_in_place(&mut out);
    out
}

/// Phone-like digit runs in `text` with URL spans removed first.
///
/// This is a heuristic stand-in for an unspecified extractor: any run of at
/// least seven digits with short separator runs counts.
pub fn extract_phones(text: &str) -> Vec<PhoneToken> {
    let stripped = url_regex().replace_all(text, " ");
    let mut out: Vec<PhoneToken> = phone_regex()
        .find_iter(&stripped)
        .filter_map(|m| normalize_phone(m.as_str()).ok())
        .collect();
    dedup_in_place(&mut out);
    out
}
