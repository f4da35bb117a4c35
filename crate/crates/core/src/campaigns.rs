//! Campaign identification: phone numbers are grouped into campaigns by the
//! similarity of their frequent-unigram documents.
//!
//! 1. every phone collects the tweets that carry it;
//! 2. tweets become unigram sets ([`Tokenizer`]);
//! 3. the `top_k` most frequent unigrams of a phone form its signature;
//! 4. only tweets sharing at least `min_common` unigrams with the signature
//!    are kept;
//! 5. phones whose signatures have Jaccard similarity strictly above the
//!    threshold are linked, and connected components become campaigns.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{url_regex, Corpus};
use crate::error::{Error, Result};
use crate::ids::{PhoneToken, TweetId, UrlToken, UserId};

/// Unigram extraction rule shared by campaign detection and the word-count
/// features.
///
/// Tokens are whitespace-delimited, stripped of every non-alphanumeric
/// character and lowercased. No stemming; stopwords are kept. URL spans
/// are removed beforehand and purely numeric tokens (phone fragments,
/// prices) dropped, both switchable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tokenizer {
    pub lowercase: bool,
    pub strip_urls: bool,
    pub drop_numeric: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_urls: true,
            drop_numeric: true,
        }
    }
}

impl Tokenizer {
    pub fn tokens(&self, text: &str) -> Vec<String> {
        let text = if self.strip_urls {
            url_regex().replace_all(text, " ")
        } else {
            text.into()
        };
        text.split_whitespace()
            .filter_map(|raw| {
                let mut tok: String = raw.chars().filter(|c| c.is_alphanumeric()).collect();
                if self.lowercase {
                    tok = tok.to_lowercase();
                }
                if tok.is_empty() || (self.drop_numeric && tok.chars().all(|c| c.is_numeric())) {
                    None
                } else {
                    Some(tok)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringParams {
    pub top_k: usize,
    pub min_common: usize,
    pub jaccard_threshold: f64,
    pub tokenizer: Tokenizer,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        Self {
            top_k: 30,
            min_common: 5,
            jaccard_threshold: 0.7,
            tokenizer: Tokenizer::default(),
        }
    }
}

impl ClusteringParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_common < 1 || self.top_k < self.min_common {
            return Err(Error::Config(format!(
                "need top_k >= min_common >= 1 (top_k={}, min_common={})",
                self.top_k, self.min_common
            )));
        }
        if !(self.jaccard_threshold > 0.0 && self.jaccard_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "jaccard_threshold must be in (0, 1], got {}",
                self.jaccard_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhoneDocument {
    pub phone: PhoneToken,
    /// Tweets kept after the common-unigram filter.
    pub tweet_ids: BTreeSet<TweetId>,
    pub signature: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub campaign_id: usize,
    pub phones: BTreeSet<PhoneToken>,
    pub tweet_ids: BTreeSet<TweetId>,
    pub users: BTreeSet<UserId>,
    pub urls: BTreeSet<UrlToken>,
    pub spammers: BTreeSet<UserId>,
}

impl Campaign {
    /// Copy of this campaign whose spammer set is `known ∩ users`.
    pub fn with_known_spammers(&self, known: &BTreeSet<UserId>) -> Campaign {
        Campaign {
            spammers: self.users.intersection(known).cloned().collect(),
            ..self.clone()
        }
    }
}

/// Steps 1 to 4: one document per phone token, in phone order.
pub fn build_phone_documents(corpus: &Corpus, params: &ClusteringParams) -> Vec<PhoneDocument> {
    let phones: Vec<&PhoneToken> = corpus.phones().collect();
    phones
        .par_iter()
        .map(|phone| {
            let tweets: Vec<(usize, Vec<String>)> = corpus
                .tweets_with_phone(phone.as_str())
                .iter()
                .map(|&pos| (pos, params.tokenizer.tokens(&corpus.tweet(pos).text)))
                .collect();

            let mut counts: HashMap<&str, usize> = HashMap::new();
            for (_, toks) in &tweets {
                for t in toks {
                    *counts.entry(t.as_str()).or_default() += 1;
                }
            }
            let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
            ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            let signature: BTreeSet<String> = ranked
                .into_iter()
                .take(params.top_k)
                .map(|(w, _)| w.to_string())
                .collect();

            let tweet_ids: BTreeSet<TweetId> = tweets
                .iter()
                .filter(|(_, toks)| {
                    let distinct: BTreeSet<&str> = toks.iter().map(String::as_str).collect();
                    distinct.iter().filter(|w| signature.contains(**w)).count() >= params.min_common
                })
                .map(|(pos, _)| corpus.tweet(*pos).tweet_id.clone())
                .collect();
            if tweet_ids.is_empty() {
                log::info!("phone {phone}: no tweet passes the common-unigram filter");
            }
            PhoneDocument {
                phone: (*phone).clone(),
                tweet_ids,
                signature,
            }
        })
        .collect()
}

/// `|a ∩ b| / |a ∪ b|`, with two empty sets counted as identical.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index wins so roots do not depend on merge order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Index pairs `(i, j)`, `i < j`, whose signatures are similar enough to merge.
fn similar_pairs(docs: &[PhoneDocument], threshold: f64) -> Vec<(usize, usize)> {
    // Only signatures sharing a word can exceed a positive threshold, so
    // candidates come from an inverted index. Empty signatures are the
    // exception: they are identical to each other by convention.
    let mut postings: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut empties = Vec::new();
    for (i, d) in docs.iter().enumerate() {
        if d.signature.is_empty() {
            empties.push(i);
        }
        for w in &d.signature {
            postings.entry(w.as_str()).or_default().push(i);
        }
    }
    let mut candidates: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); docs.len()];
    for list in postings.values() {
        for (a, &i) in list.iter().enumerate() {
            candidates[i].extend(list[a + 1..].iter().copied());
        }
    }
    let mut pairs: Vec<(usize, usize)> = candidates
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, cands)| {
            cands
                .iter()
                .filter(move |&&j| jaccard(&docs[i].signature, &docs[j].signature) > threshold)
                .map(move |&j| (i, j))
        })
        .collect();
    if 1.0 > threshold {
        for (a, &i) in empties.iter().enumerate() {
            pairs.extend(empties[a + 1..].iter().map(|&j| (i, j)));
        }
    }
    pairs
}

/// Step 5: single-link merge of documents into campaigns.
///
/// Campaign ids follow the order (most users first, then smallest phone).
/// The spammer set of each campaign is its suspended users.
pub fn merge_into_campaigns(
    docs: &[PhoneDocument],
    params: &ClusteringParams,
    corpus: &Corpus,
) -> Vec<Campaign> {
    let mut dsu = DisjointSet::new(docs.len());
    for (i, j) in similar_pairs(docs, params.jaccard_threshold) {
        dsu.union(i, j);
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..docs.len() {
        let root = dsu.find(i);
        groups.entry(root).or_default().push(i);
    }

    let suspended = corpus.suspended_users();
    let mut campaigns: Vec<Campaign> = groups
        .into_values()
        .map(|members| {
            let mut campaign = Campaign {
                campaign_id: 0,
                phones: BTreeSet::new(),
                tweet_ids: BTreeSet::new(),
                users: BTreeSet::new(),
                urls: BTreeSet::new(),
                spammers: BTreeSet::new(),
            };
            for &m in &members {
                campaign.phones.insert(docs[m].phone.clone());
                campaign.tweet_ids.extend(docs[m].tweet_ids.iter().cloned());
            }
            populate_from_tweets(&mut campaign, corpus, &suspended);
            campaign
        })
        .collect();

    campaigns.sort_by(|a, b| {
        b.users
            .len()
            .cmp(&a.users.len())
            .then_with(|| a.phones.first().cmp(&b.phones.first()))
    });
    for (id, c) in campaigns.iter_mut().enumerate() {
        c.campaign_id = id;
    }
    campaigns
}

fn populate_from_tweets(campaign: &mut Campaign, corpus: &Corpus, suspended: &BTreeSet<UserId>) {
    for id in &campaign.tweet_ids {
        let Some(pos) = corpus.tweet_position(id.as_str()) else {
            continue;
        };
        let tweet = corpus.tweet(pos);
        campaign.users.insert(tweet.user_id.clone());
        campaign.urls.extend(tweet.urls.iter().cloned());
    }
    campaign.spammers = campaign.users.intersection(suspended).cloned().collect();
}

/// Keeps campaigns with at least one known spammer.
pub fn filter_campaigns_with_spammers(campaigns: Vec<Campaign>) -> Vec<Campaign> {
    campaigns.into_iter().filter(|c| !c.spammers.is_empty()).collect()
}

/// Steps 1 to 5 in one call.
pub fn detect_campaigns(corpus: &Corpus, params: &ClusteringParams) -> Result<Vec<Campaign>> {
    params.validate()?;
    let docs = build_phone_documents(corpus, params);
    Ok(merge_into_campaigns(&docs, params, corpus))
}

/// Mean silhouette of the phone documents under distance
/// `1 - jaccard(signatures)`, clustered by campaign membership.
///
/// Documents whose phone is in none of `campaigns` are ignored. A document
/// alone in its campaign contributes 0.
pub fn silhouette_check(docs: &[PhoneDocument], campaigns: &[Campaign]) -> Result<f64> {
    let owner: HashMap<&PhoneToken, usize> = campaigns
        .iter()
        .flat_map(|c| c.phones.iter().map(move |p| (p, c.campaign_id)))
        .collect();
    let labeled: Vec<(&PhoneDocument, usize)> = docs
        .iter()
        .filter_map(|d| owner.get(&d.phone).map(|&c| (d, c)))
        .collect();
    let distinct: BTreeSet<usize> = labeled.iter().map(|&(_, c)| c).collect();
    if distinct.len() < 2 {
        return Err(Error::SilhouetteUndefined(format!(
            "{} campaign(s), need at least 2",
            distinct.len()
        )));
    }

    let values: Vec<f64> = labeled
        .par_iter()
        .map(|&(doc, own)| {
            let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
            for &(other, c) in &labeled {
                if std::ptr::eq(other, doc) {
                    continue;
                }
                let e = sums.entry(c).or_insert((0.0, 0));
                e.0 += 1.0 - jaccard(&doc.signature, &other.signature);
                e.1 += 1;
            }
            let Some(&(own_sum, own_n)) = sums.get(&own) else {
                return 0.0;
            };
            let a = own_sum / own_n as f64;
            let b = sums
                .iter()
                .filter(|(&c, _)| c != own)
                .map(|(_, &(s, n))| s / n as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect();
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// One line of `campaigns.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRecord {
    pub campaign_id: usize,
    pub phones: Vec<PhoneToken>,
    pub users: Vec<UserId>,
    pub urls: Vec<UrlToken>,
    pub tweet_count: usize,
    pub spammer_count: usize,
    /// Retained tweets; lets later stages rebuild campaign trees from this
    /// file alone.
    pub tweet_ids: Vec<TweetId>,
}

impl From<&Campaign> for CampaignRecord {
    fn from(c: &Campaign) -> Self {
        Self {
            campaign_id: c.campaign_id,
            phones: c.phones.iter().cloned().collect(),
            users: c.users.iter().cloned().collect(),
            urls: c.urls.iter().cloned().collect(),
            tweet_count: c.tweet_ids.len(),
            spammer_count: c.spammers.len(),
            tweet_ids: c.tweet_ids.iter().cloned().collect(),
        }
    }
}

pub fn write_campaigns_jsonl<W: Write>(campaigns: &[Campaign], mut out: W) -> Result<()> {
    for c in campaigns {
        serde_json::to_writer(&mut out, &CampaignRecord::from(c))?;
        writeln!(out).map_err(|e| Error::io("<campaigns>", e))?;
    }
    Ok(())
}

/// Reads `campaigns.jsonl`; spammer sets are re-derived from the corpus'
/// suspended users.
pub fn read_campaigns_jsonl<R: BufRead>(input: R, corpus: &Corpus) -> Result<Vec<Campaign>> {
    let suspended = corpus.suspended_users();
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<campaigns>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CampaignRecord = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: "campaigns.jsonl".into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        let mut campaign = Campaign {
            campaign_id: rec.campaign_id,
            phones: rec.phones.into_iter().collect(),
            tweet_ids: rec.tweet_ids.into_iter().collect(),
            users: BTreeSet::new(),
            urls: BTreeSet::new(),
            spammers: BTreeSet::new(),
        };
        populate_from_tweets(&mut campaign, corpus, &suspended);
        out.push(campaign);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{TweetRecord, UserRecord};

    fn set(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn tweet(id: &str, user: &str, phone: &str, text: &str) -> TweetRecord {
        TweetRecord {
            tweet_id: id.into(),
            user_id: user.into(),
            text: text.into(),
            created_at: "2016-06-01T00:00:00Z".into(),
            phones: vec![phone.into()],
            urls: vec![],
            hashtags: vec![],
        }
    }

    fn doc(phone: &str, sig: &[&str]) -> PhoneDocument {
        PhoneDocument {
            phone: phone.into(),
            tweet_ids: BTreeSet::new(),
            signature: set(sig),
        }
    }

    #[test]
    fn tokenizer_rule() {
        let t = Tokenizer::default();
        assert_eq!(
            t.tokens("CALL now!!  555-1234 http://x.com/a #Deal"),
            vec!["call", "now", "deal"]
        );
    }

    #[test]
    fn jaccard_values() {
        assert_eq!(jaccard(&set(&["a", "b", "c"]), &set(&["b", "c", "d"])), 0.5);
        assert_eq!(jaccard(&set(&["a", "b"]), &set(&["a", "b"])), 1.0);
        assert_eq!(jaccard(&set(&["a"]), &set(&["b"])), 0.0);
        assert_eq!(jaccard::<String>(&BTreeSet::new(), &BTreeSet::new()), 1.0);
    }

    #[test]
    fn identical_tweets_keep_all_words() {
        let text = "cheap tickets party club tonight vip";
        let corpus = Corpus::new(
            (0..3).map(|i| tweet(&format!("t{i}"), "u", "5550000001", text)).collect(),
            vec![],
            vec![],
        )
        .unwrap();
        let docs = build_phone_documents(&corpus, &ClusteringParams::default());
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].signature, set(&["cheap", "tickets", "party", "club", "tonight", "vip"]));
        assert_eq!(docs[0].tweet_ids.len(), 3);
    }

    #[test]
    fn min_common_boundary() {
        let corpus = Corpus::new(
            vec![tweet("t0", "u", "5550000001", "one two three four")],
            vec![],
            vec![],
        )
        .unwrap();
        let docs = build_phone_documents(&corpus, &ClusteringParams::default());
        assert!(docs[0].tweet_ids.is_empty());
    }

    #[test]
    fn toy_three_tweet_phone() {
        // alpha and omega are the two most frequent words; T2 shares neither.
        let corpus = Corpus::new(
            vec![
                tweet("T1", "u", "5550000001", "alpha beta gamma"),
                tweet("T2", "u", "5550000001", "delta epsilon zeta"),
                tweet("T3", "u", "5550000001", "alpha omega omega"),
            ],
            vec![],
            vec![],
        )
        .unwrap();
        let params = ClusteringParams {
            top_k: 2,
            min_common: 1,
            ..Default::default()
        };
        let docs = build_phone_documents(&corpus, &params);
        assert_eq!(docs[0].signature, set(&["alpha", "omega"]));
        let kept: Vec<&str> = docs[0].tweet_ids.iter().map(|t| t.as_str()).collect();
        assert_eq!(kept, ["T1", "T3"]);
    }

    fn empty_corpus() -> Corpus {
        Corpus::new(vec![], vec![], vec![]).unwrap()
    }

    #[test]
    fn strict_threshold() {
        let params = ClusteringParams::default();
        // 7 of 10 words shared: exactly 0.7, not merged
        let base: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
        let a: Vec<&str> = base.iter().map(String::as_str).collect();
        let s1 = set(&a[..7]);
        let s2 = set(&a);
        assert_eq!(jaccard(&s1, &s2), 0.7);
        let docs = vec![
            PhoneDocument { phone: "1111111".into(), tweet_ids: BTreeSet::new(), signature: s1 },
            PhoneDocument { phone: "2222222".into(), tweet_ids: BTreeSet::new(), signature: s2 },
        ];
        assert_eq!(merge_into_campaigns(&docs, &params, &empty_corpus()).len(), 2);

        // 0.71 merges
        let big: Vec<String> = (0..100).map(|i| format!("v{i}")).collect();
        let s3: BTreeSet<String> = big.iter().cloned().collect();
        let s4: BTreeSet<String> = big[..71].iter().cloned().collect();
        assert!((jaccard(&s3, &s4) - 0.71).abs() < 1e-15);
        let docs = vec![
            PhoneDocument { phone: "1111111".into(), tweet_ids: BTreeSet::new(), signature: s3 },
            PhoneDocument { phone: "2222222".into(), tweet_ids: BTreeSet::new(), signature: s4 },
        ];
        let merged = merge_into_campaigns(&docs, &params, &empty_corpus());
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].phones.len(), 2);
    }

    #[test]
    fn transitive_chain_merges() {
        // A~B and B~C above 0.7, A~C below.
        let words: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
        let w = |r: std::ops::Range<usize>| -> Vec<&str> { words[r].iter().map(String::as_str).collect() };
        let a = doc("1000000", &w(0..10));
        let b = doc("2000000", &w(1..11));
        let c = doc("3000000", &w(2..12));
        assert!(jaccard(&a.signature, &b.signature) > 0.7);
        assert!(jaccard(&b.signature, &c.signature) > 0.7);
        assert!(jaccard(&a.signature, &c.signature) <= 0.7);

        // connected components of the 3-node similarity graph, by hand: one
        let merged = merge_into_campaigns(&[a, b, c], &ClusteringParams::default(), &empty_corpus());
        assert_eq!(merged.len(), 1);
    }

    #[test]
    fn spammer_filter() {
        let mk = |id: usize, spammers: &[&str]| Campaign {
            campaign_id: id,
            phones: BTreeSet::new(),
            tweet_ids: BTreeSet::new(),
            users: BTreeSet::new(),
            urls: BTreeSet::new(),
            spammers: spammers.iter().map(|&s| s.into()).collect(),
        };
        let kept = filter_campaigns_with_spammers(vec![mk(0, &[]), mk(1, &["s"])]);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].campaign_id, 1);
        assert!(filter_campaigns_with_spammers(vec![]).is_empty());
    }

    #[test]
    fn silhouette_of_separated_clusters() {
        let docs = vec![
            doc("1000001", &["a", "b"]),
            doc("1000002", &["a", "b"]),
            doc("2000001", &["x", "y"]),
            doc("2000002", &["x", "y"]),
        ];
        let campaigns = merge_into_campaigns(&docs, &ClusteringParams::default(), &empty_corpus());
        assert_eq!(campaigns.len(), 2);
        assert_eq!(silhouette_check(&docs, &campaigns).unwrap(), 1.0);
        assert!(matches!(
            silhouette_check(&docs, &campaigns[..1]),
            Err(Error::SilhouetteUndefined(_))
        ));
    }

    #[test]
    fn campaigns_collect_users_and_spammers() {
        let text = "cheap tickets party club tonight vip";
        let mut t2 = tweet("t2", "v", "5550000002", text);
        t2.urls = vec!["http://club.example.com".into()];
        let corpus = Corpus::new(
            vec![tweet("t1", "u", "5550000001", text), t2],
            vec![
                UserRecord {
                    user_id: "v".into(),
                    followers_count: 1,
                    friends_count: 1,
                    suspended: true,
                    annotated_label: None,
                },
            ],
            vec![],
        )
        .unwrap();
        let campaigns = detect_campaigns(&corpus, &ClusteringParams::default()).unwrap();
        assert_eq!(campaigns.len(), 1);
        let c = &campaigns[0];
        assert_eq!(c.users.len(), 2);
        assert_eq!(c.urls.len(), 1);
        assert_eq!(c.spammers.iter().map(|s| s.as_str()).collect::<Vec<_>>(), ["v"]);

        let mut buf = Vec::new();
        write_campaigns_jsonl(&campaigns, &mut buf).unwrap();
        let back = read_campaigns_jsonl(buf.as_slice(), &corpus).unwrap();
        assert_eq!(back, campaigns);
    }
}
