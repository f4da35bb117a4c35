//! Per-user feature vectors: the campaign-local meta-path score, optionally
//! followed by the OSN2 account features (HITS hub/authority on the follower
//! graph plus URL and hashtag rates).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::campaigns::Tokenizer;
use crate::corpus::{Corpus, FollowerEdge};
use crate::error::{Error, Result};
use crate::hmps::HmpsScore;
use crate::ids::UserId;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HubAuthority {
    pub hub: f64,
    pub authority: f64,
}

/// HITS by power iteration. Each step sets authority from the hubs of a
/// node's followers and hub from the authorities it follows, then rescales
/// both vectors to unit L2 norm. Stops once no entry moves more than `tol`
/// or after `iters` steps. Only nodes appearing in `edges` are returned.
pub fn hits_scores(edges: &[FollowerEdge], iters: usize, tol: f64) -> BTreeMap<UserId, HubAuthority> {
    let mut ids: Vec<&UserId> = edges.iter().flat_map(|e| [&e.follower, &e.followee]).collect();
    ids.sort();
    ids.dedup();
    let index: BTreeMap<&UserId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let links: Vec<(usize, usize)> = edges
        .iter()
        .map(|e| (index[&e.follower], index[&e.followee]))
        .collect();

    let n = ids.len();
    let mut hub = vec![1.0; n];
    let mut auth = vec![0.0; n];
    for _ in 0..iters {
        let mut next_auth = vec![0.0; n];
        for &(from, to) in &links {
            next_auth[to] += hub[from];
        }
        normalize_l2(&mut next_auth);
        let mut next_hub = vec![0.0; n];
        for &(from, to) in &links {
            next_hub[from] += next_auth[to];
        }
        normalize_l2(&mut next_hub);

        let delta = hub
            .iter()
            .zip(&next_hub)
            .chain(auth.iter().zip(&next_auth))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        hub = next_hub;
        auth = next_auth;
        if delta <= tol {
            break;
        }
    }

    ids.into_iter()
        .enumerate()
        .map(|(i, id)| {
            (
                id.clone(),
                HubAuthority {
                    hub: hub[i],
                    authority: auth[i],
                },
            )
        })
        .collect()
}

fn normalize_l2(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Osn2 {
    pub authority: f64,
    pub hub: f64,
    pub frac_tweets_with_urls: f64,
    pub avg_urls_per_tweet: f64,
    pub avg_urls_per_word: f64,
    pub avg_hashtags_per_word: f64,
    pub avg_hashtags_per_tweet: f64,
}

impl Osn2 {
    pub const NAMES: [&'static str; 7] = [
        "authority",
        "hub",
        "frac_tweets_with_urls",
        "avg_urls_per_tweet",
        "avg_urls_per_word",
        "avg_hashtags_per_word",
        "avg_hashtags_per_tweet",
    ];

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.authority,
            self.hub,
            self.frac_tweets_with_urls,
            self.avg_urls_per_tweet,
            self.avg_urls_per_word,
            self.avg_hashtags_per_word,
            self.avg_hashtags_per_tweet,
        ]
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// OSN2 features of one user over all of its tweets in the corpus. Word
/// counts come from `tokenizer`; zero denominators give 0.
pub fn osn2_features(
    corpus: &Corpus,
    user_id: &str,
    hits: &BTreeMap<UserId, HubAuthority>,
    tokenizer: &Tokenizer,
) -> Osn2 {
    let tweets = corpus.tweets_by_user(user_id);
    let (mut with_urls, mut urls, mut hashtags, mut words) = (0, 0, 0, 0);
    for &pos in tweets {
        let t = corpus.tweet(pos);
        with_urls += usize::from(!t.urls.is_empty());
        urls += t.urls.len();
        hashtags += t.hashtags.len();
        words += tokenizer.tokens(&t.text).len();
    }
    let ha = hits.get(user_id).copied().unwrap_or_default();
    Osn2 {
        authority: ha.authority,
        hub: ha.hub,
        frac_tweets_with_urls: ratio(with_urls, tweets.len()),
        avg_urls_per_tweet: ratio(urls, tweets.len()),
        avg_urls_per_word: ratio(urls, words),
        avg_hashtags_per_word: ratio(hashtags, words),
        avg_hashtags_per_tweet: ratio(hashtags, tweets.len()),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureMode {
    #[serde(rename = "hmps")]
    Hmps,
    #[default]
    #[serde(rename = "hmps+osn2")]
    HmpsOsn2,
}

impl FeatureMode {
    pub fn names(self) -> Vec<&'static str> {
        let mut names = vec!["hmps"];
        if self == FeatureMode::HmpsOsn2 {
            names.extend(Osn2::NAMES);
        }
        names
    }

    pub fn dim(self) -> usize {
        self.names().len()
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hmps" => Ok(FeatureMode::Hmps),
            "hmps+osn2" | "hmps_osn2" => Ok(FeatureMode::HmpsOsn2),
            other => Err(Error::Config(format!("unknown feature mode {other:?}"))),
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::Hmps => "hmps",
            FeatureMode::HmpsOsn2 => "hmps+osn2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub campaign_id: usize,
    pub user_id: UserId,
    pub values: Vec<f64>,
    pub standardized: bool,
}

/// One raw vector per score, in the scores' order.
pub fn assemble(
    scores: &[HmpsScore],
    corpus: &Corpus,
    mode: FeatureMode,
    hits: &BTreeMap<UserId, HubAuthority>,
    tokenizer: &Tokenizer,
) -> Vec<FeatureVector> {
    scores
        .par_iter()
        .map(|s| {
            let mut values = vec![s.value];
            if mode == FeatureMode::HmpsOsn2 {
                values.extend(osn2_features(corpus, s.user_id.as_str(), hits, tokenizer).to_array());
            }
            FeatureVector {
                campaign_id: s.campaign_id,
                user_id: s.user_id.clone(),
                values,
                standardized: false,
            }
        })
        .collect()
}

/// Column-wise z-scoring fitted on a training set. Constant columns keep
/// unit scale so they only shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InsufficientSamples(0));
        };
        let dim = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut sd = vec![0.0; dim];
        for r in rows {
            for ((s, x), m) in sd.iter_mut().zip(r).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        for s in sd.iter_mut() {
            *s = (*s / n).sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Ok(Self { mean, sd })
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.sd)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// `features.csv`: `campaign_id,user_id` followed by the named columns.
pub fn write_features_csv<W: std::io::Write>(vectors: &[FeatureVector], mode: FeatureMode, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["campaign_id", "user_id"];
    header.extend(mode.names());
    w.write_record(&header)?;
    for v in vectors {
        let mut row = vec![v.campaign_id.to_string(), v.user_id.to_string()];
        row.extend(v.values.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<features>", e))?;
    Ok(())
}

/// Reads `features.csv`, inferring the mode from the header.
pub fn read_features_csv<R: std::io::Read>(input: R) -> Result<(FeatureMode, Vec<FeatureVector>)> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mode = [FeatureMode::Hmps, FeatureMode::HmpsOsn2]
        .into_iter()
        .find(|m| {
            let mut expected = vec!["campaign_id", "user_id"];
            expected.extend(m.names());
            header == expected
        })
        .ok_or_else(|| Error::Malformed {
            path: "features.csv".into(),
            line: 1,
            message: format!("unrecognized header {header:?}"),
        })?;
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let bad = || Error::Malformed {
            path: "features.csv".into(),
            line: i + 2,
            message: "unparseable field".into(),
        };
        let values = row
            .iter()
            .skip(2)
            .map(|f| f.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        out.push(FeatureVector {
            campaign_id: row[0].parse().map_err(|_| bad())?,
            user_id: UserId(row[1].to_string()),
            values,
            standardized: false,
        });
    }
    Ok((mode, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TweetRecord;

    fn edge(a: &str, b: &str) -> FollowerEdge {
        FollowerEdge {
            follower: a.into(),
            followee: b.into(),
        }
    }

    #[test]
    fn single_edge_hits() {
        let hits = hits_scores(&[edge("a", "b")], 100, 1e-12);
        assert_eq!(hits["a"], HubAuthority { hub: 1.0, authority: 0.0 });
        assert_eq!(hits["b"], HubAuthority { hub: 0.0, authority: 1.0 });
        assert!(hits_scores(&[], 100, 1e-12).is_empty());
    }

    #[test]
    fn hits_vectors_have_unit_norm() {
        let edges = [edge("a", "b"), edge("a", "c"), edge("b", "c"), edge("d", "c"), edge("c", "a")];
        let hits = hits_scores(&edges, 1000, 1e-14);
        let hub: f64 = hits.values().map(|h| h.hub * h.hub).sum();
        let auth: f64 = hits.values().map(|h| h.authority * h.authority).sum();
        assert!((hub - 1.0).abs() < 1e-12 && (auth - 1.0).abs() < 1e-12);
        assert!(hits.values().all(|h| h.hub >= 0.0 && h.authority >= 0.0));
    }

    fn tweet(id: &str, text: &str, urls: &[&str], hashtags: &[&str]) -> TweetRecord {
        TweetRecord {
            tweet_id: id.into(),
            user_id: "u".into(),
            text: text.into(),
            created_at: "2016-06-01T00:00:00Z".into(),
            phones: vec![],
            urls: urls.iter().map(|&u| u.into()).collect(),
            hashtags: hashtags.iter().map(|h| h.to_string()).collect(),
        }
    }

    #[test]
    fn content_ratios() {
        let u1 = "http://a.example.com";
        let corpus = Corpus::new(
            vec![
                tweet("1", "one", &[u1], &[]),
                tweet("2", "two", &[u1], &[]),
                tweet("3", "three", &[], &[]),
                tweet("4", "four", &[], &[]),
            ],
            vec![],
            vec![],
        )
        .unwrap();
        let f = osn2_features(&corpus, "u", &BTreeMap::new(), &Tokenizer::default());
        assert_eq!(f.frac_tweets_with_urls, 0.5);
        assert_eq!(f.avg_hashtags_per_word, 0.0);
        assert_eq!(f.avg_hashtags_per_tweet, 0.0);

        let corpus = Corpus::new(
            vec![tweet("1", "a b c d e", &[u1], &[]), tweet("2", "f g h i j", &[], &[])],
            vec![],
            vec![],
        )
        .unwrap();
        let f = osn2_features(&corpus, "u", &BTreeMap::new(), &Tokenizer::default());
        assert_eq!(f.avg_urls_per_word, 0.1);

        let none = osn2_features(&corpus, "nobody", &BTreeMap::new(), &Tokenizer::default());
        assert_eq!(none, Osn2::default());
    }

    #[test]
    fn vector_lengths_by_mode() {
        let corpus = Corpus::new(vec![], vec![], vec![]).unwrap();
        let scores = vec![HmpsScore {
            campaign_id: 0,
            user_id: "u".into(),
            value: 0.5,
        }];
        let tk = Tokenizer::default();
        let v = assemble(&scores, &corpus, FeatureMode::Hmps, &BTreeMap::new(), &tk);
        assert_eq!(v[0].values, vec![0.5]);
        let v = assemble(&scores, &corpus, FeatureMode::HmpsOsn2, &BTreeMap::new(), &tk);
        assert_eq!(v[0].values.len(), 8);
        assert!("osn3".parse::<FeatureMode>().is_err());
        assert_eq!("HMPS+OSN2".parse::<FeatureMode>().unwrap(), FeatureMode::HmpsOsn2);
    }

    #[test]
    fn standardized_columns_have_zero_mean_unit_sd() {
        let rows: Vec<Vec<f64>> = (0..17).map(|i| vec![i as f64 * 0.37 + 2.0, (i * i) as f64, 5.0]).collect();
        let st = Standardizer::fit(&rows).unwrap();
        let z: Vec<Vec<f64>> = rows.iter().map(|r| st.transform(r)).collect();
        for col in 0..2 {
            let mean = z.iter().map(|r| r[col]).sum::<f64>() / z.len() as f64;
            let var = z.iter().map(|r| (r[col] - mean).powi(2)).sum::<f64>() / z.len() as f64;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-9);
        }
        assert!(z.iter().all(|r| r[2] == 0.0));
    }

    #[test]
    fn features_csv_round_trip() {
        let v = vec![FeatureVector {
            campaign_id: 3,
            user_id: "u".into(),
            values: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
            standardized: false,
        }];
        let mut buf = Vec::new();
        write_features_csv(&v, FeatureMode::HmpsOsn2, &mut buf).unwrap();
        let (mode, back) = read_features_csv(buf.as_slice()).unwrap();
        assert_eq!(mode, FeatureMode::HmpsOsn2);
        assert_eq!(back, v);
    }
}
