//! Per-campaign hierarchical structure of the heterogeneous network.
//!
//! Each campaign becomes a three-layer tree: the campaign root, its phone
//! and URL tokens, and the users who tweeted them. Users only ever connect
//! through a shared token (their least common ancestor) or through the
//! campaign root.
//!
//! Edge weights, all counted over the campaign's retained tweets:
//!
//! * `W(user, token)`: tweets by the user containing the token, over all
//!   tweets containing the token;
//! * `W(campaign, token)`: tweets containing the token, over the sum of
//!   that count across every token of the campaign.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::campaigns::Campaign;
use crate::corpus::{Corpus, TweetRecord};
use crate::error::{Error, Result};
use crate::ids::{PhoneToken, UrlToken, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    User,
    Phone,
    Url,
    CampaignNode,
}

/// An action token: the resource a spam tweet promotes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Token {
    Phone(PhoneToken),
    Url(UrlToken),
}

impl Token {
    pub fn kind(&self) -> NodeKind {
        match self {
            Token::Phone(_) => NodeKind::Phone,
            Token::Url(_) => NodeKind::Url,
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Token::Phone(p) => p.as_str(),
            Token::Url(u) => u.as_str(),
        }
    }

    fn in_tweet(&self, tweet: &TweetRecord) -> bool {
        match self {
            Token::Phone(p) => tweet.phones.contains(p),
            Token::Url(u) => tweet.urls.contains(u),
        }
    }
}

/// Node identity inside one campaign tree. URL nodes are scoped to their
/// campaign: the same URL in two campaigns is two different nodes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum NodeRef {
    User(UserId),
    Token(Token),
    Campaign(usize),
}

impl NodeRef {
    pub fn kind(&self) -> NodeKind {
        match self {
            NodeRef::User(_) => NodeKind::User,
            NodeRef::Token(t) => t.kind(),
            NodeRef::Campaign(_) => NodeKind::CampaignNode,
        }
    }
}

/// User-to-user path through tokens and the campaign root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaPath {
    pub nodes: Vec<NodeRef>,
}

impl MetaPath {
    /// Number of relations on the path.
    pub fn len(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() < 2
    }

    /// Length 2 or 4, user endpoints, non-user intermediates.
    pub fn is_admissible(&self) -> bool {
        let n = self.nodes.len();
        matches!(self.len(), 2 | 4)
            && self.nodes[0].kind() == NodeKind::User
            && self.nodes[n - 1].kind() == NodeKind::User
            && self.nodes[1..n - 1].iter().all(|v| v.kind() != NodeKind::User)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenNode {
    pub token: Token,
    /// Campaign tweets containing the token.
    pub tweet_count: usize,
    /// `W(campaign, token)`.
    pub root_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserNode {
    pub user_id: UserId,
    /// `(token index, W(user, token))`, ascending by token index.
    pub parents: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignTree {
    pub campaign_id: usize,
    tokens: Vec<TokenNode>,
    users: Vec<UserNode>,
    user_index: BTreeMap<UserId, usize>,
    spammers: BTreeSet<UserId>,
}

fn campaign_tweets<'a>(corpus: &'a Corpus, campaign: &'a Campaign) -> impl Iterator<Item = &'a TweetRecord> {
    campaign
        .tweet_ids
        .iter()
        .filter_map(|id| corpus.tweet_position(id.as_str()))
        .map(|pos| corpus.tweet(pos))
}

/// `W(user, token)` for one edge, by direct count over the campaign's
/// tweets. Returns 0 when the user never tweeted the token.
pub fn weight_user_token(corpus: &Corpus, campaign: &Campaign, user: &str, token: &Token) -> Result<f64> {
    let mut with_token = 0usize;
    let mut by_user = 0usize;
    for tweet in campaign_tweets(corpus, campaign).filter(|t| token.in_tweet(t)) {
        with_token += 1;
        if tweet.user_id.as_str() == user {
            by_user += 1;
        }
    }
    if with_token == 0 {
        return Err(Error::TokenWithoutTweets(token.as_str().to_string()));
    }
    Ok(by_user as f64 / with_token as f64)
}

/// `W(campaign, token)` by direct count; 0 for a token outside the campaign.
pub fn weight_campaign_token(corpus: &Corpus, campaign: &Campaign, token: &Token) -> f64 {
    let mut own = 0usize;
    let mut total = 0usize;
    for tweet in campaign_tweets(corpus, campaign) {
        total += tweet.phones.len() + tweet.urls.len();
        if token.in_tweet(tweet) {
            own += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        own as f64 / total as f64
    }
}

/// Builds the weighted tree of `campaign`. Spammers are `campaign.spammers`.
pub fn build_tree(corpus: &Corpus, campaign: &Campaign) -> Result<CampaignTree> {
    let mut token_counts: BTreeMap<Token, usize> = BTreeMap::new();
    let mut user_token_counts: BTreeMap<UserId, BTreeMap<Token, usize>> = BTreeMap::new();
    let mut n_tweets = 0usize;
    for tweet in campaign_tweets(corpus, campaign) {
        n_tweets += 1;
        let tokens = tweet
            .phones
            .iter()
            .map(|p| Token::Phone(p.clone()))
            .chain(tweet.urls.iter().map(|u| Token::Url(u.clone())));
        for token in tokens {
            *token_counts.entry(token.clone()).or_default() += 1;
            *user_token_counts
                .entry(tweet.user_id.clone())
                .or_default()
                .entry(token)
                .or_default() += 1;
        }
    }
    if n_tweets == 0 {
        return Err(Error::EmptyCampaign(campaign.campaign_id));
    }

    let incidence: usize = token_counts.values().sum();
    let token_pos: BTreeMap<&Token, usize> = token_counts.keys().enumerate().map(|(i, t)| (t, i)).collect();
    let tokens: Vec<TokenNode> = token_counts
        .iter()
        .map(|(token, &count)| TokenNode {
            token: token.clone(),
            tweet_count: count,
            root_weight: count as f64 / incidence as f64,
        })
        .collect();

    let users: Vec<UserNode> = user_token_counts
        .iter()
        .map(|(user, counts)| UserNode {
            user_id: user.clone(),
            parents: counts
                .iter()
                .map(|(token, &c)| {
                    let idx = token_pos[token];
                    (idx, c as f64 / tokens[idx].tweet_count as f64)
                })
                .collect(),
        })
        .collect();
    let user_index = users.iter().enumerate().map(|(i, u)| (u.user_id.clone(), i)).collect();
    let spammers = campaign
        .spammers
        .iter()
        .filter(|s| user_token_counts.contains_key(*s))
        .cloned()
        .collect();

    Ok(CampaignTree {
        campaign_id: campaign.campaign_id,
        tokens,
        users,
        user_index,
        spammers,
    })
}

impl CampaignTree {
    pub fn tokens(&self) -> &[TokenNode] {
        &self.tokens
    }

    /// User nodes sorted by id.
    pub fn users(&self) -> &[UserNode] {
        &self.users
    }

    pub fn user(&self, id: &str) -> Option<&UserNode> {
        self.user_index.get(id).map(|&i| &self.users[i])
    }

    pub fn spammers(&self) -> &BTreeSet<UserId> {
        &self.spammers
    }

    pub fn is_spammer(&self, id: &str) -> bool {
        self.spammers.contains(id)
    }

    /// Same tree with a different known-spammer set (restricted to users
    /// present in the tree).
    pub fn with_spammers(&self, spammers: &BTreeSet<UserId>) -> CampaignTree {
        CampaignTree {
            spammers: spammers
                .iter()
                .filter(|s| self.user_index.contains_key(*s))
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    pub fn root(&self) -> NodeRef {
        NodeRef::Campaign(self.campaign_id)
    }

    /// Every node with its kind: root, tokens, users.
    pub fn nodes(&self) -> Vec<NodeRef> {
        std::iter::once(self.root())
            .chain(self.tokens.iter().map(|t| NodeRef::Token(t.token.clone())))
            .chain(self.users.iter().map(|u| NodeRef::User(u.user_id.clone())))
            .collect()
    }

    /// Undirected weighted edges: token–root first, then user–token.
    pub fn edges(&self) -> Vec<(NodeRef, NodeRef, f64)> {
        let root = self.root();
        let mut out: Vec<(NodeRef, NodeRef, f64)> = self
            .tokens
            .iter()
            .map(|t| (NodeRef::Token(t.token.clone()), root.clone(), t.root_weight))
            .collect();
        for u in &self.users {
            for &(ti, w) in &u.parents {
                out.push((
                    NodeRef::User(u.user_id.clone()),
                    NodeRef::Token(self.tokens[ti].token.clone()),
                    w,
                ));
            }
        }
        out
    }

    /// Largest deviation from 1 of the per-token user-weight sums and of the
    /// root's token-weight sum.
    pub fn normalization_error(&self) -> f64 {
        let mut per_token = vec![0.0f64; self.tokens.len()];
        for u in &self.users {
            for &(ti, w) in &u.parents {
                per_token[ti] += w;
            }
        }
        let root: f64 = self.tokens.iter().map(|t| t.root_weight).sum();
        per_token
            .iter()
            .chain(std::iter::once(&root))
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let nodes: Vec<serde_json::Value> = self
            .nodes()
            .into_iter()
            .map(|n| serde_json::json!({ "node": n, "kind": n.kind() }))
            .collect();
        let edges: Vec<serde_json::Value> = self
            .edges()
            .into_iter()
            .map(|(a, b, w)| serde_json::json!({ "from": a, "to": b, "weight": w }))
            .collect();
        serde_json::json!({
            "campaign_id": self.campaign_id,
            "spammers": self.spammers,
            "nodes": nodes,
            "edges": edges,
        })
    }
}
