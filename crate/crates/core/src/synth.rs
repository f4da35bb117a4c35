//! Seeded generator of labelled corpora with planted campaigns.
//!
//! Each campaign owns a disjoint signature of unigrams, a few phone numbers
//! and URLs. Campaign tweets draw `words_per_tweet` signature words plus
//! noise words and carry exactly one of the campaign's phones. Users belong
//! to one campaign, or two for the overlapping share. Spammers tweet more,
//! concentrate on the campaign's first phone and URL, attach more URLs and
//! hashtags, and follow each other in a ring; benign users also post chatter without
//! phones. A fraction of spammers is marked suspended, and a fraction of
//! the remaining users carries a ground-truth annotation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use chrono::{DateTime, Duration};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_phone, normalize_url, Annotation, Corpus, FollowerEdge, TweetRecord, UserRecord};
use crate::error::{Error, Result};
use crate::ids::{PhoneToken, UrlToken, UserId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_campaigns: usize,
    pub users_per_campaign: usize,
    pub phones_per_campaign: usize,
    pub urls_per_campaign: usize,
    /// Campaign tweets per benign user and membership.
    pub tweets_per_user: usize,
    /// Share of distinct users posting in two campaigns.
    pub overlap_fraction: f64,
    pub spammer_fraction: f64,
    /// Probability that a spammer is preferred when picking users that post
    /// in a second campaign.
    pub spammer_overlap_bias: f64,
    /// Share of spammers suspended (known positives) in well-moderated
    /// campaigns, keyed by the spammer's first campaign.
    pub suspended_fraction: f64,
    /// Share of campaigns that are poorly moderated.
    pub sparse_campaign_fraction: f64,
    /// Share of spammers suspended in poorly moderated campaigns.
    pub sparse_suspended_fraction: f64,
    /// Share of non-suspended users with an annotated label.
    pub annotated_fraction: f64,
    pub vocab_size: usize,
    pub signature_size: usize,
    pub words_per_tweet: usize,
    /// Expected noise words per tweet.
    pub noise_word_rate: f64,
    /// Spammer tweet volume relative to benign users.
    pub spammer_activity: f64,
    /// Probability that a spammer tweet uses the campaign's core phone and
    /// URL instead of a uniformly chosen one.
    pub spammer_affinity: f64,
    /// Probability that a campaign tweet carries a URL.
    pub spammer_url_rate: f64,
    pub benign_url_rate: f64,
    /// Expected hashtags per campaign tweet.
    pub spammer_hashtags: f64,
    pub benign_hashtags: f64,
    pub spammer_follows: usize,
    pub benign_follows: usize,
    /// Phone-free tweets per benign user; spammers post a third as many.
    pub chatter_tweets: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_campaigns: 20,
            users_per_campaign: 50,
            phones_per_campaign: 3,
            urls_per_campaign: 4,
            tweets_per_user: 3,
            overlap_fraction: 0.21,
            spammer_fraction: 0.3,
            spammer_overlap_bias: 0.5,
            suspended_fraction: 0.8,
            sparse_campaign_fraction: 0.5,
            sparse_suspended_fraction: 0.1,
            annotated_fraction: 0.2,
            vocab_size: 3000,
            signature_size: 30,
            words_per_tweet: 8,
            noise_word_rate: 2.0,
            spammer_activity: 3.0,
            spammer_affinity: 0.95,
            spammer_url_rate: 1.0,
            benign_url_rate: 0.3,
            spammer_hashtags: 2.0,
            benign_hashtags: 0.4,
            spammer_follows: 6,
            benign_follows: 3,
            chatter_tweets: 3,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_campaigns", self.n_campaigns),
            ("users_per_campaign", self.users_per_campaign),
            ("phones_per_campaign", self.phones_per_campaign),
            ("urls_per_campaign", self.urls_per_campaign),
            ("tweets_per_user", self.tweets_per_user),
            ("vocab_size", self.vocab_size),
            ("signature_size", self.signature_size),
            ("words_per_tweet", self.words_per_tweet),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        let fractions = [
            ("overlap_fraction", self.overlap_fraction),
            ("spammer_fraction", self.spammer_fraction),
            ("spammer_overlap_bias", self.spammer_overlap_bias),
            ("suspended_fraction", self.suspended_fraction),
            ("sparse_campaign_fraction", self.sparse_campaign_fraction),
            ("sparse_suspended_fraction", self.sparse_suspended_fraction),
            ("annotated_fraction", self.annotated_fraction),
            ("spammer_affinity", self.spammer_affinity),
            ("spammer_url_rate", self.spammer_url_rate),
            ("benign_url_rate", self.benign_url_rate),
        ];
        if let Some((name, v)) = fractions.iter().find(|(_, v)| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
        }
        if self.words_per_tweet > self.signature_size {
            return Err(Error::Config("words_per_tweet exceeds signature_size".into()));
        }
        if self.n_campaigns < 2 && self.overlap_fraction > 0.0 {
            return Err(Error::Config("overlap needs at least two campaigns".into()));
        }
        let planted = self.n_campaigns * self.signature_size;
        if planted >= self.vocab_size || planted >= WORD_SPACE {
            return Err(Error::Config(format!(
                "vocab_size {} too small for {} disjoint signatures of {} plus noise",
                self.vocab_size, self.n_campaigns, self.signature_size
            )));
        }
        Ok(())
    }
}

/// Planted structure, written as `truth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub phone_campaign: BTreeMap<PhoneToken, usize>,
    pub url_campaign: BTreeMap<UrlToken, usize>,
    pub user_campaigns: BTreeMap<UserId, Vec<usize>>,
    pub spammers: BTreeSet<UserId>,
    pub suspended: BTreeSet<UserId>,
}

impl Truth {
    /// Share of users planted in two or more campaigns.
    pub fn overlap_fraction(&self) -> f64 {
        let multi = self.user_campaigns.values().filter(|c| c.len() >= 2).count();
        multi as f64 / self.user_campaigns.len().max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub tweets: Vec<TweetRecord>,
    pub users: Vec<UserRecord>,
    pub edges: Vec<FollowerEdge>,
    pub truth: Truth,
}

impl SynthCorpus {
    pub fn corpus(&self) -> Result<Corpus> {
        Corpus::new(self.tweets.clone(), self.users.clone(), self.edges.clone())
    }

    /// Writes `tweets.jsonl`, `users.jsonl`, `edges.csv` and `truth.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let corpus = self.corpus()?;
        let create = |name: &str| -> Result<BufWriter<File>> {
            let p = dir.join(name);
            Ok(BufWriter::new(File::create(&p).map_err(|e| Error::io(&p, e))?))
        };
        corpus.write_tweets_jsonl(create("tweets.jsonl")?)?;
        corpus.write_users_jsonl(create("users.jsonl")?)?;
        corpus.write_edges_csv(create("edges.csv")?)?;
        let mut truth = create("truth.json")?;
        serde_json::to_writer_pretty(&mut truth, &self.truth)?;
        std::io::Write::write_all(&mut truth, b"\n").map_err(|e| Error::io(dir.join("truth.json"), e))?;
        Ok(())
    }
}

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "ze", "pu", "da", "fe", "gi", "ho", "ju", "by",
];
const WORD_SPACE: usize = 16 * 16 * 16 * 16;

/// Distinct pronounceable word for each index below 16⁴.
fn word(i: usize) -> String {
    (0..4).map(|d| SYLLABLES[(i >> (4 * (3 - d))) & 15]).collect()
}

/// Integer part plus a Bernoulli draw for the fraction.
fn draw_count(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    let base = mean.floor();
    base as usize + usize::from(rng.gen_bool((mean - base).clamp(0.0, 1.0)))
}

struct Planted {
    signature: Vec<String>,
    phones: Vec<(String, PhoneToken)>,
    urls: Vec<UrlToken>,
    hashtags: Vec<String>,
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c_count = cfg.n_campaigns;

    // vocabulary: a shuffled word list; signatures first, noise after
    let words_needed = cfg.vocab_size.min(WORD_SPACE);
    let mut vocab: Vec<usize> = (0..WORD_SPACE).collect();
    vocab.shuffle(&mut rng);
    vocab.truncate(words_needed);
    let noise: Vec<String> = vocab[c_count * cfg.signature_size..].iter().map(|&i| word(i)).collect();

    let mut planted = Vec::with_capacity(c_count);
    for c in 0..c_count {
        let signature = vocab[c * cfg.signature_size..(c + 1) * cfg.signature_size]
            .iter()
            .map(|&i| word(i))
            .collect();
        let phones = (0..cfg.phones_per_campaign)
            .map(|p| {
                let shown = format!("+1 (555) {:03}-{:04}", c, p * 37 + 1000);
                let token = normalize_phone(&shown)?;
                Ok((shown, token))
            })
            .collect::<Result<Vec<_>>>()?;
        let urls = (0..cfg.urls_per_campaign)
            .map(|u| normalize_url(&format!("https://offer{c}.example.com/p/{u}")))
            .collect::<Result<Vec<_>>>()?;
        let hashtags = (0..4).map(|h| format!("{}{h}", word(vocab[c * cfg.signature_size]))).collect();
        planted.push(Planted {
            signature,
            phones,
            urls,
            hashtags,
        });
    }

    // memberships: distinct users spread round-robin, overlap users get a
    // second campaign where membership is currently smallest
    let slots = c_count * cfg.users_per_campaign;
    let distinct = ((slots as f64) / (1.0 + cfg.overlap_fraction)).round().max(1.0) as usize;
    let overlap = ((distinct as f64) * cfg.overlap_fraction).round() as usize;
    let user_ids: Vec<UserId> = (0..distinct).map(|i| UserId::from(format!("u{i:05}"))).collect();
    let mut memberships: Vec<Vec<usize>> = (0..distinct).map(|i| vec![i % c_count]).collect();
    let mut sizes = vec![0usize; c_count];
    for m in &memberships {
        sizes[m[0]] += 1;
    }
    // labels
    let mut order: Vec<usize> = (0..distinct).collect();
    order.shuffle(&mut rng);
    let n_spam = ((distinct as f64) * cfg.spammer_fraction).round() as usize;
    let is_spammer: BTreeSet<usize> = order[..n_spam].iter().copied().collect();

    // spammers are drawn into a second campaign first with probability
    // `spammer_overlap_bias`
    let mut order: Vec<usize> = (0..distinct).collect();
    order.shuffle(&mut rng);
    let eager: Vec<bool> = order
        .iter()
        .map(|u| is_spammer.contains(u) && rng.gen_bool(cfg.spammer_overlap_bias))
        .collect();
    let mut keyed: Vec<(bool, usize)> = eager.into_iter().zip(order).collect();
    keyed.sort_by_key(|&(e, _)| !e);
    for &(_, u) in keyed.iter().take(overlap) {
        let primary = memberships[u][0];
        let smallest = (0..c_count)
            .filter(|&c| c != primary)
            .map(|c| sizes[c])
            .min()
            .expect("two campaigns");
        let candidates: Vec<usize> = (0..c_count).filter(|&c| c != primary && sizes[c] == smallest).collect();
        let second = *candidates.choose(&mut rng).expect("nonempty");
        sizes[second] += 1;
        memberships[u].push(second);
    }

    let mut campaign_order: Vec<usize> = (0..c_count).collect();
    campaign_order.shuffle(&mut rng);
    let n_sparse = ((c_count as f64) * cfg.sparse_campaign_fraction).round() as usize;
    let sparse: BTreeSet<usize> = campaign_order[..n_sparse].iter().copied().collect();
    let suspended: BTreeSet<usize> = is_spammer
        .iter()
        .copied()
        .filter(|&u| {
            let rate = if sparse.contains(&memberships[u][0]) {
                cfg.sparse_suspended_fraction
            } else {
                cfg.suspended_fraction
            };
            rng.gen_bool(rate)
        })
        .collect();
    let mut rest: Vec<usize> = (0..distinct).filter(|u| !suspended.contains(u)).collect();
    rest.shuffle(&mut rng);
    let n_ann = ((rest.len() as f64) * cfg.annotated_fraction).round() as usize;
    let annotated: BTreeSet<usize> = rest[..n_ann].iter().copied().collect();

    // tweets
    let epoch = DateTime::parse_from_rfc3339("2017-03-01T00:00:00Z").expect("valid timestamp");
    let mut tweets = Vec::new();
    let mut next_id = 0usize;
    let mut push = |rng: &mut ChaCha8Rng, user: &UserId, text: String, phone: Option<PhoneToken>, url: Option<UrlToken>, hashtags: Vec<String>| {
        let when = epoch + Duration::seconds(next_id as i64 * 37 + rng.gen_range(0..30));
        tweets.push(TweetRecord {
            tweet_id: format!("t{next_id:07}").into(),
            user_id: user.clone(),
            text,
            created_at: when.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            phones: phone.into_iter().collect(),
            urls: url.into_iter().collect(),
            hashtags,
        });
        next_id += 1;
    };
    let noise_words = |rng: &mut ChaCha8Rng, n: usize| -> Vec<String> {
        (0..n).map(|_| noise.choose(rng).cloned().unwrap_or_default()).filter(|w| !w.is_empty()).collect()
    };

    for (u, uid) in user_ids.iter().enumerate() {
        let spam = is_spammer.contains(&u);
        let volume = if spam {
            cfg.tweets_per_user as f64 * cfg.spammer_activity
        } else {
            cfg.tweets_per_user as f64
        };
        for &c in &memberships[u] {
            let p = &planted[c];
            let n = draw_count(&mut rng, volume).max(1);
            for _ in 0..n {
                let core = spam && rng.gen_bool(cfg.spammer_affinity);
                let (shown, phone) = if core {
                    p.phones[0].clone()
                } else {
                    p.phones.choose(&mut rng).expect("phones").clone()
                };
                let with_url = rng.gen_bool(if spam { cfg.spammer_url_rate } else { cfg.benign_url_rate });
                let url = with_url.then(|| {
                    if core {
                        p.urls[0].clone()
                    } else {
                        p.urls.choose(&mut rng).expect("urls").clone()
                    }
                });
                let mut text: Vec<String> = p
                    .signature
                    .choose_multiple(&mut rng, cfg.words_per_tweet)
                    .cloned()
                    .collect();
                let k = draw_count(&mut rng, cfg.noise_word_rate);
                text.extend(noise_words(&mut rng, k));
                text.shuffle(&mut rng);
                text.push(format!("call {shown}"));
                if let Some(url) = &url {
                    text.push(url.to_string());
                }
                let tags = draw_count(&mut rng, if spam { cfg.spammer_hashtags } else { cfg.benign_hashtags }).min(p.hashtags.len());
                let hashtags = p.hashtags.choose_multiple(&mut rng, tags).cloned().collect();
                push(&mut rng, uid, text.join(" "), Some(phone), url, hashtags);
            }
        }
        let chatter = if spam {
            cfg.chatter_tweets / 3
        } else {
            cfg.chatter_tweets
        };
        for _ in 0..chatter {
            let len = rng.gen_range(6..=12);
            let text = noise_words(&mut rng, len).join(" ");
            push(&mut rng, uid, text, None, None, Vec::new());
        }
    }

    // follower graph: spammers form one follow ring (each follows the next
    // `spammer_follows` members), benign users follow random accounts
    let mut edges = BTreeSet::new();
    let mut ring: Vec<usize> = is_spammer.iter().copied().collect();
    ring.shuffle(&mut rng);
    for (i, &u) in ring.iter().enumerate() {
        for step in 1..=cfg.spammer_follows.min(ring.len().saturating_sub(1)) {
            edges.insert((u, ring[(i + step) % ring.len()]));
        }
    }
    for u in (0..distinct).filter(|u| !is_spammer.contains(u)) {
        for _ in 0..cfg.benign_follows {
            let v = rng.gen_range(0..distinct);
            if v != u {
                edges.insert((u, v));
            }
        }
    }
    let mut followers = vec![0u64; distinct];
    let mut friends = vec![0u64; distinct];
    for &(a, b) in &edges {
        friends[a] += 1;
        followers[b] += 1;
    }
    let edges: Vec<FollowerEdge> = edges
        .into_iter()
        .map(|(a, b)| FollowerEdge {
            follower: user_ids[a].clone(),
            followee: user_ids[b].clone(),
        })
        .collect();

    let users = user_ids
        .iter()
        .enumerate()
        .map(|(u, id)| UserRecord {
            user_id: id.clone(),
            followers_count: followers[u],
            friends_count: friends[u],
            suspended: suspended.contains(&u),
            annotated_label: annotated.contains(&u).then(|| {
                if is_spammer.contains(&u) {
                    Annotation::Spammer
                } else {
                    Annotation::Benign
                }
            }),
        })
        .collect();

    let truth = Truth {
        phone_campaign: planted
            .iter()
            .enumerate()
            .flat_map(|(c, p)| p.phones.iter().map(move |(_, t)| (t.clone(), c)))
            .collect(),
        url_campaign: planted
            .iter()
            .enumerate()
            .flat_map(|(c, p)| p.urls.iter().map(move |t| (t.clone(), c)))
            .collect(),
        user_campaigns: user_ids.iter().cloned().zip(memberships).collect(),
        spammers: is_spammer.iter().map(|&u| user_ids[u].clone()).collect(),
        suspended: suspended.iter().map(|&u| user_ids[u].clone()).collect(),
    };
    Ok(SynthCorpus {
        tweets,
        users,
        edges,
        truth,
    })
}
