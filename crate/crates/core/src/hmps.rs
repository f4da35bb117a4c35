//! Hierarchical meta-path scores.
//!
//! The similarity of two users in a campaign tree is the best weight product
//! over the admissible user-to-user paths: `user–token–user` when they share
//! a token, `user–token–campaign–token–user` otherwise. A user's score is
//! the sum of its similarity to every known spammer of the campaign.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::{CampaignTree, MetaPath, NodeKind, NodeRef, UserNode};
use crate::ids::UserId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub user_a: UserId,
    pub user_b: UserId,
    pub value: f64,
    /// Path achieving `value`; `None` only when no path exists.
    pub witness_path: Option<MetaPath>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmpsScore {
    pub campaign_id: usize,
    pub user_id: UserId,
    pub value: f64,
}

fn user_node<'a>(tree: &'a CampaignTree, id: &str) -> Result<&'a UserNode> {
    tree.user(id).ok_or_else(|| Error::UnknownUser {
        user: id.to_string(),
        campaign: tree.campaign_id,
    })
}

/// Best candidate over the parent pairs as `(value, i, j)`; `i == j` means
/// the two users meet at a shared token.
fn best_pair(tree: &CampaignTree, u: &UserNode, s: &UserNode) -> Option<(f64, usize, usize)> {
    let tokens = tree.tokens();
    let mut best: Option<(f64, usize, usize)> = None;
    for &(i, w_ui) in &u.parents {
        for &(j, w_sj) in &s.parents {
            let candidate = if i == j {
                w_ui * w_sj
            } else {
                w_ui * w_sj * tokens[i].root_weight * tokens[j].root_weight
            };
            let better = match best {
                None => true,
                Some((v, bi, bj)) => candidate > v || (candidate == v && i == j && bi != bj),
            };
            if better {
                best = Some((candidate, i, j));
            }
        }
    }
    best
}

/// Similarity of `u` and `s` with the path that achieves it. On a tie
/// between a shared-token path and a path through the root, the shorter
/// one is kept as witness.
pub fn pair_score(tree: &CampaignTree, u: &str, s: &str) -> Result<PairScore> {
    if u == s {
        return Err(Error::SelfSimilarity(u.to_string()));
    }
    let un = user_node(tree, u)?;
    let sn = user_node(tree, s)?;
    let best = best_pair(tree, un, sn);
    let witness_path = best.map(|(_, i, j)| {
        let tok = |k: usize| NodeRef::Token(tree.tokens()[k].token.clone());
        let mut nodes = vec![NodeRef::User(un.user_id.clone()), tok(i)];
        if i != j {
            nodes.push(tree.root());
            nodes.push(tok(j));
        }
        nodes.push(NodeRef::User(sn.user_id.clone()));
        MetaPath { nodes }
    });
    Ok(PairScore {
        user_a: un.user_id.clone(),
        user_b: sn.user_id.clone(),
        value: best.map_or(0.0, |b| b.0),
        witness_path,
    })
}

fn hmps_value(tree: &CampaignTree, un: &UserNode) -> f64 {
    tree.spammers()
        .iter()
        .filter(|s| **s != un.user_id)
        .filter_map(|s| tree.user(s.as_str()))
        .map(|sn| best_pair(tree, un, sn).map_or(0.0, |b| b.0))
        .sum()
}

/// Sum of [`pair_score`] between `u` and every other spammer of the tree.
pub fn hmps(tree: &CampaignTree, u: &str) -> Result<HmpsScore> {
    if tree.spammers().is_empty() {
        return Err(Error::NoSpammers(tree.campaign_id));
    }
    let un = user_node(tree, u)?;
    Ok(HmpsScore {
        campaign_id: tree.campaign_id,
        user_id: un.user_id.clone(),
        value: hmps_value(tree, un),
    })
}

/// Scores for every user of the tree in user-id order. A tree without
/// spammers scores everyone 0.
pub fn score_all(tree: &CampaignTree) -> Vec<HmpsScore> {
    tree.users()
        .par_iter()
        .map(|un| HmpsScore {
            campaign_id: tree.campaign_id,
            user_id: un.user_id.clone(),
            value: hmps_value(tree, un),
        })
        .collect()
}

/// Every admissible path from `u` to `s` of at most `max_len` relations
/// with its weight product, found by exhaustive depth-first search over
/// the tree's edges. Used to cross-check [`pair_score`].
pub fn enumerate_meta_paths(
    tree: &CampaignTree,
    u: &str,
    s: &str,
    max_len: usize,
) -> Result<Vec<(MetaPath, f64)>> {
    if u == s {
        return Err(Error::SelfSimilarity(u.to_string()));
    }

    // node indices follow `tree.nodes()`: root, tokens, users
    let nodes = tree.nodes();
    let t_count = tree.tokens().len();
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes.len()];
    for (t, tok) in tree.tokens().iter().enumerate() {
        adjacency[0].push((1 + t, tok.root_weight));
        adjacency[1 + t].push((0, tok.root_weight));
    }
    for (k, user) in tree.users().iter().enumerate() {
        for &(t, w) in &user.parents {
            adjacency[1 + t_count + k].push((1 + t, w));
            adjacency[1 + t].push((1 + t_count + k, w));
        }
    }
    let position = |id: &str| -> Result<usize> {
        tree.users()
            .iter()
            .position(|n| n.user_id.as_str() == id)
            .map(|k| 1 + t_count + k)
            .ok_or_else(|| Error::UnknownUser {
                user: id.to_string(),
                campaign: tree.campaign_id,
            })
    };
    let start = position(u)?;
    let target = position(s)?;

    struct Search<'a> {
        nodes: &'a [NodeRef],
        adjacency: &'a [Vec<(usize, f64)>],
        target: usize,
        max_len: usize,
        found: Vec<(MetaPath, f64)>,
    }

    impl Search<'_> {
        fn walk(&mut self, path: &mut Vec<usize>, product: f64) {
            let last = *path.last().expect("path starts at the source");
            for &(node, w) in &self.adjacency[last] {
                if path.contains(&node) {
                    continue;
                }
                if node == self.target {
                    let nodes = path.iter().chain([&node]).map(|&i| self.nodes[i].clone()).collect();
                    let candidate = MetaPath { nodes };
                    if candidate.is_admissible() {
                        self.found.push((candidate, product * w));
                    }
                    continue;
                }
                if self.nodes[node].kind() == NodeKind::User || path.len() >= self.max_len {
                    continue;
                }
                path.push(node);
                self.walk(path, product * w);
                path.pop();
            }
        }
    }

    let mut search = Search {
        nodes: &nodes,
        adjacency: &adjacency,
        target,
        max_len,
        found: Vec::new(),
    };
    search.walk(&mut vec![start], 1.0);
    Ok(search.found)
}

/// `scores.csv` with columns `campaign_id,user_id,hmps`.
pub fn write_scores_csv<W: std::io::Write>(scores: &[HmpsScore], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["campaign_id", "user_id", "hmps"])?;
    for s in scores {
        w.write_record([s.campaign_id.to_string(), s.user_id.to_string(), s.value.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<scores>", e))?;
    Ok(())
}

pub fn read_scores_csv<R: std::io::Read>(input: R) -> Result<Vec<HmpsScore>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let bad = |m: &str| Error::Malformed {
            path: "scores.csv".into(),
            line: i + 2,
            message: m.to_string(),
        };
        if row.len() != 3 {
            return Err(bad("expected 3 fields"));
        }
        out.push(HmpsScore {
            campaign_id: row[0].parse().map_err(|_| bad("campaign_id"))?,
            user_id: UserId(row[1].to_string()),
            value: row[2].parse().map_err(|_| bad("hmps"))?,
        });
    }
    Ok(out)
}
