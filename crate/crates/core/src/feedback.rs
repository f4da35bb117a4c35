//! Feedback between campaign classifiers.
//!
//! Every campaign with at least two known spammers trains a one-class
//! model. Unknown users that score at least as high as the best-scoring
//! training sample of their campaign are considered confidently spammy and
//! are added as training positives to the *other* campaigns that contain
//! them. Levels are synchronous: all selections are made against the state
//! at the start of the level, then merged in `(campaign_id, user_id)` order.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::campaigns::Campaign;
use crate::corpus::Annotation;
use crate::error::Result;
use crate::eval::smote;
use crate::features::FeatureVector;
use crate::ids::UserId;
use crate::features::Standardizer;
use crate::occ::{self, Context, OneClassModel, TrainConfig};

/// Synthetic oversampling of each campaign's training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub ratio: f64,
    pub k: usize,
    /// Oversample once before model selection, so held-out folds see
    /// synthetic neighbours of their own points. Leaks; kept for comparison.
    pub before_split: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignSlot {
    pub campaign_id: usize,
    pub training: BTreeSet<UserId>,
    pub unknown: BTreeSet<UserId>,
    /// Training members at level 0.
    pub seed_training: BTreeSet<UserId>,
    pub vectors: BTreeMap<UserId, Vec<f64>>,
    /// Feature scaling from every member of the campaign, labelled or not.
    pub scaler: Option<Standardizer>,
    pub model: Option<OneClassModel>,
    pub config: Option<TrainConfig>,
    /// Highest training-sample score under the current model.
    pub threshold: Option<f64>,
    #[serde(skip)]
    fitted_size: usize,
}

impl CampaignSlot {
    pub fn is_deferred(&self) -> bool {
        self.training.len() < 2
    }

    fn rows(&self, users: &BTreeSet<UserId>) -> Vec<Vec<f64>> {
        users.iter().map(|u| self.vectors[u].clone()).collect()
    }

    fn seed(&self, base: u64) -> u64 {
        base ^ (self.campaign_id as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }

    fn fit(&mut self, base: &TrainConfig, augment: Option<SmoteConfig>) -> Result<()> {
        if self.is_deferred() || (self.model.is_some() && self.fitted_size == self.training.len()) {
            return Ok(());
        }
        let rows = self.rows(&self.training);
        let seed = self.seed(base.seed);
        let cfg = TrainConfig { seed, ..base.clone() };
        let oversample = |x: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
            match augment {
                Some(s) if x.len() >= 2 => {
                    let k = s.k.min(x.len() - 1);
                    Ok(smote(x, s.ratio, k, seed)?.augmented())
                }
                _ => Ok(x.to_vec()),
            }
        };
        let leaky = augment.is_some_and(|s| s.before_split);
        let base_rows = if leaky { oversample(&rows)? } else { rows.clone() };
        let ctx = Context {
            scaler: self.scaler.as_ref(),
            augment: (!leaky && augment.is_some()).then_some(&oversample as _),
        };
        let chosen = if cfg.grid_search {
            occ::grid_search_in(&base_rows, &cfg, cfg.folds, ctx)?
        } else {
            cfg.at(cfg.nu_grid[0], cfg.gamma_grid[0])
        };
        let final_rows = if leaky { base_rows } else { oversample(&rows)? };
        let model = occ::fit_in(&final_rows, &chosen, ctx)?;
        let mut t_max = f64::NEG_INFINITY;
        for r in &rows {
            t_max = t_max.max(model.score(r)?);
        }
        self.threshold = Some(t_max);
        self.model = Some(model);
        self.config = Some(chosen);
        self.fitted_size = self.training.len();
        Ok(())
    }

    /// Unknown users scoring at least the campaign threshold.
    fn selections(&self) -> Result<Vec<(UserId, f64)>> {
        let (Some(model), Some(t)) = (&self.model, self.threshold) else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        for u in &self.unknown {
            let s = model.score(&self.vectors[u])?;
            if s >= t {
                out.push((u.clone(), s));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transfer {
    pub user_id: UserId,
    pub from_campaign: usize,
    pub to_campaign: usize,
    pub level: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleState {
    pub level: usize,
    pub slots: Vec<CampaignSlot>,
    pub log: Vec<Transfer>,
    pub train: TrainConfig,
    pub smote: Option<SmoteConfig>,
}

/// Level-0 state. Training sets are the campaigns' known spammers; every
/// other member is unknown. Campaigns without spammers are dropped.
pub fn init(
    campaigns: &[Campaign],
    vectors: &[FeatureVector],
    train: &TrainConfig,
    smote: Option<SmoteConfig>,
) -> Result<EnsembleState> {
    train.validate()?;
    let mut by_campaign: BTreeMap<usize, BTreeMap<UserId, Vec<f64>>> = BTreeMap::new();
    for v in vectors {
        by_campaign
            .entry(v.campaign_id)
            .or_default()
            .insert(v.user_id.clone(), v.values.clone());
    }
    let mut slots = Vec::new();
    for c in campaigns {
        if c.spammers.is_empty() {
            log::warn!("campaign {} has no known spammers; skipped", c.campaign_id);
            continue;
        }
        let vecs = by_campaign.remove(&c.campaign_id).unwrap_or_default();
        for u in &c.users {
            if !vecs.contains_key(u) {
                return Err(crate::Error::UnknownUser {
                    user: u.to_string(),
                    campaign: c.campaign_id,
                });
            }
        }
        let scaler = if train.standardize {
            let all: Vec<Vec<f64>> = vecs.values().cloned().collect();
            Some(Standardizer::fit(&all)?)
        } else {
            None
        };
        slots.push(CampaignSlot {
            campaign_id: c.campaign_id,
            training: c.spammers.clone(),
            unknown: c.users.difference(&c.spammers).cloned().collect(),
            seed_training: c.spammers.clone(),
            vectors: vecs,
            scaler,
            model: None,
            config: None,
            threshold: None,
            fitted_size: 0,
        });
    }
    Ok(EnsembleState {
        level: 0,
        slots,
        log: Vec::new(),
        train: train.clone(),
        smote,
    })
}

impl EnsembleState {
    /// Fits every trainable slot whose training set changed since its last
    /// fit.
    pub fn refit(&mut self) -> Result<()> {
        let (train, smote) = (&self.train, self.smote);
        self.slots.par_iter_mut().try_for_each(|s| s.fit(train, smote))
    }

    pub fn slot(&self, campaign_id: usize) -> Option<&CampaignSlot> {
        self.slots.iter().find(|s| s.campaign_id == campaign_id)
    }

    /// Users who entered a training set through feedback.
    pub fn transferees(&self) -> BTreeSet<(usize, UserId)> {
        self.log.iter().map(|t| (t.to_campaign, t.user_id.clone())).collect()
    }
}

/// One synchronous level. Returns the number of distinct
/// `(campaign, user)` training additions.
pub fn run_level(state: &mut EnsembleState) -> Result<usize> {
    state.refit()?;
    let selected: Vec<(usize, Vec<(UserId, f64)>)> = state
        .slots
        .par_iter()
        .map(|s| Ok((s.campaign_id, s.selections()?)))
        .collect::<Result<_>>()?;

    let mut membership: BTreeMap<&UserId, Vec<usize>> = BTreeMap::new();
    for (i, s) in state.slots.iter().enumerate() {
        for u in s.training.iter().chain(&s.unknown) {
            membership.entry(u).or_default().push(i);
        }
    }

    let mut additions: BTreeSet<(usize, UserId)> = BTreeSet::new();
    let mut entries = Vec::new();
    for (from, picks) in &selected {
        for (user, score) in picks {
            for &to in membership.get(user).map(Vec::as_slice).unwrap_or(&[]) {
                let target = &state.slots[to];
                if target.campaign_id == *from || !target.unknown.contains(user) {
                    continue;
                }
                additions.insert((to, user.clone()));
                entries.push(Transfer {
                    user_id: user.clone(),
                    from_campaign: *from,
                    to_campaign: target.campaign_id,
                    level: state.level,
                    score: *score,
                });
            }
        }
    }
    for (to, user) in &additions {
        let slot = &mut state.slots[*to];
        slot.unknown.remove(user);
        slot.training.insert(user.clone());
    }
    state.log.extend(entries);
    state.level += 1;
    Ok(additions.len())
}

/// Runs levels until one transfers nothing or `max_levels` levels have
/// run, then refits any slot that changed in the last level.
pub fn run_until_convergence(state: &mut EnsembleState, max_levels: usize) -> Result<usize> {
    let mut last = 0;
    for _ in 0..max_levels.max(1) {
        last = run_level(state)?;
        if last == 0 {
            break;
        }
    }
    state.refit()?;
    Ok(last)
}

/// Single pass without transfers.
pub fn run_without_feedback(state: &mut EnsembleState) -> Result<()> {
    state.refit()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Training,
    Feedback,
    Predicted,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Training => "training",
            Source::Feedback => "feedback",
            Source::Predicted => "predicted",
        }
    }
}

/// One prediction row; `campaign_id` is `None` for the per-user aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub campaign_id: Option<usize>,
    pub user_id: UserId,
    pub score: Option<f64>,
    pub label: Annotation,
    pub source: Source,
}

impl Prediction {
    pub fn is_spammer(&self) -> bool {
        self.label == Annotation::Spammer
    }
}

/// Per-campaign rows in `(campaign_id, user_id)` order followed by one
/// aggregate row per user. Training members are spammers; other users are
/// spammers when their score is nonnegative. Users of campaigns without a
/// model get no score and stay benign. The aggregate label is spammer if
/// any campaign says so and its score is the maximum campaign score.
pub fn predict_all(state: &EnsembleState) -> Result<Vec<Prediction>> {
    let mut rows = Vec::new();
    for slot in &state.slots {
        for (u, x) in &slot.vectors {
            let score = match &slot.model {
                Some(m) => Some(m.score(x)?),
                None => None,
            };
            let (label, source) = if slot.training.contains(u) {
                let src = if slot.seed_training.contains(u) {
                    Source::Training
                } else {
                    Source::Feedback
                };
                (Annotation::Spammer, src)
            } else if score.is_some_and(|s| s >= 0.0) {
                (Annotation::Spammer, Source::Predicted)
            } else {
                (Annotation::Benign, Source::Predicted)
            };
            rows.push(Prediction {
                campaign_id: Some(slot.campaign_id),
                user_id: u.clone(),
                score,
                label,
                source,
            });
        }
    }
    let mut agg: BTreeMap<UserId, Prediction> = BTreeMap::new();
    for r in &rows {
        let e = agg.entry(r.user_id.clone()).or_insert_with(|| Prediction {
            campaign_id: None,
            user_id: r.user_id.clone(),
            score: None,
            label: Annotation::Benign,
            source: Source::Predicted,
        });
        if r.is_spammer() {
            e.label = Annotation::Spammer;
        }
        if let Some(s) = r.score {
            e.score = Some(e.score.map_or(s, |p: f64| p.max(s)));
        }
        e.source = e.source.min(r.source);
    }
    rows.extend(agg.into_values());
    Ok(rows)
}

/// Aggregate rows only, keyed by user.
pub fn aggregate(predictions: &[Prediction]) -> BTreeMap<UserId, &Prediction> {
    predictions
        .iter()
        .filter(|p| p.campaign_id.is_none())
        .map(|p| (p.user_id.clone(), p))
        .collect()
}

pub fn write_predictions_csv<W: Write>(predictions: &[Prediction], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["campaign_id", "user_id", "score", "label", "source"])?;
    for p in predictions {
        let campaign = p.campaign_id.map_or_else(|| "all".to_string(), |c| c.to_string());
        let score = p.score.map_or_else(String::new, |s| s.to_string());
        let label = match p.label {
            Annotation::Spammer => "spammer",
            Annotation::Benign => "benign",
        };
        w.write_record([campaign.as_str(), p.user_id.as_str(), &score, label, p.source.as_str()])?;
    }
    w.flush().map_err(|e| crate::Error::io("predictions.csv", e))?;
    Ok(())
}

pub fn write_feedback_log<W: Write>(log: &[Transfer], mut out: W) -> Result<()> {
    for t in log {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n").map_err(|e| crate::Error::io("feedback_log.jsonl", e))?;
    }
    Ok(())
}
