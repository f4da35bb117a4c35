//! End-to-end classification of a corpus for a given set of known
//! spammers.
//!
//! Campaign detection and the hierarchical trees do not depend on labels,
//! so a [`Pipeline`] computes them once and can then be re-run cheaply for
//! different positive sets (as the evaluation protocols do).

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::campaigns::{detect_campaigns, Campaign, ClusteringParams};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::feedback::{self, EnsembleState, Prediction, SmoteConfig};
use crate::features::{assemble, hits_scores, FeatureMode, FeatureVector, HubAuthority};
use crate::hin::{build_tree, CampaignTree};
use crate::hmps::{score_all, HmpsScore};
use crate::ids::UserId;
use crate::occ::TrainConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Learning {
    #[default]
    Feedback,
    NoFeedback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub holdout_frac: f64,
    pub repeats: usize,
    pub smote_ratios: Vec<f64>,
    pub smote_k: usize,
    pub smote_before_split: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            holdout_frac: 0.2,
            repeats: 10,
            smote_ratios: vec![0.20, 0.30, 0.50, 0.75, 1.0],
            smote_k: 5,
            smote_before_split: false,
        }
    }
}

/// Every knob of a run. Serialized next to each run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Master seed; overrides `train.seed`.
    pub seed: u64,
    pub mode: FeatureMode,
    pub learning: Learning,
    /// Feedback level cap; unset means the number of users.
    pub max_levels: Option<usize>,
    pub hits_iterations: usize,
    pub hits_tolerance: f64,
    pub smote: Option<SmoteConfig>,
    pub clustering: ClusteringParams,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            mode: FeatureMode::HmpsOsn2,
            learning: Learning::Feedback,
            max_levels: None,
            hits_iterations: 1000,
            hits_tolerance: 1e-12,
            smote: None,
            clustering: ClusteringParams::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.clustering.validate()?;
        self.train.validate()?;
        if self.max_levels == Some(0) {
            return Err(Error::Config("max_levels must be at least 1".into()));
        }
        if !(self.eval.holdout_frac > 0.0 && self.eval.holdout_frac < 1.0) {
            return Err(Error::Config("holdout_frac must be in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }
}

/// Everything produced by one classification run.
#[derive(Debug, Clone)]
pub struct Classification {
    /// Campaigns with at least one known spammer.
    pub campaigns: Vec<Campaign>,
    pub scores: Vec<HmpsScore>,
    pub features: Vec<FeatureVector>,
    pub state: EnsembleState,
    pub predictions: Vec<Prediction>,
}

impl Classification {
    /// Aggregate spammer label per user; users outside every campaign are
    /// absent.
    pub fn labels(&self) -> BTreeMap<UserId, (bool, f64)> {
        feedback::aggregate(&self.predictions)
            .into_iter()
            .map(|(u, p)| (u, (p.is_spammer(), p.score.unwrap_or(f64::MIN))))
            .collect()
    }
}

pub struct Pipeline<'a> {
    pub corpus: &'a Corpus,
    pub config: RunConfig,
    /// All detected campaigns, labelled with the corpus' suspended users.
    pub campaigns: Vec<Campaign>,
    trees: Vec<CampaignTree>,
    hits: BTreeMap<UserId, HubAuthority>,
}

impl<'a> Pipeline<'a> {
    pub fn new(corpus: &'a Corpus, config: RunConfig) -> Result<Self> {
        config.validate()?;
        let campaigns = detect_campaigns(corpus, &config.clustering)?;
        Self::from_campaigns(corpus, config, campaigns)
    }

    pub fn from_campaigns(corpus: &'a Corpus, config: RunConfig, campaigns: Vec<Campaign>) -> Result<Self> {
        config.validate()?;
        let trees = campaigns
            .par_iter()
            .map(|c| build_tree(corpus, c))
            .collect::<Result<Vec<_>>>()?;
        let hits = hits_scores(corpus.follower_edges(), config.hits_iterations, config.hits_tolerance);
        Ok(Self {
            corpus,
            config,
            campaigns,
            trees,
            hits,
        })
    }

    pub fn trees(&self) -> &[CampaignTree] {
        &self.trees
    }

    pub fn hits(&self) -> &BTreeMap<UserId, HubAuthority> {
        &self.hits
    }

    /// Campaigns relabelled with `positives`, dropping those left without
    /// spammers, with their HMPS scores and feature vectors.
    pub fn features(&self, positives: &BTreeSet<UserId>) -> (Vec<Campaign>, Vec<HmpsScore>, Vec<FeatureVector>) {
        let labelled: Vec<(Campaign, &CampaignTree)> = self
            .campaigns
            .iter()
            .zip(&self.trees)
            .map(|(c, t)| (c.with_known_spammers(positives), t))
            .filter(|(c, _)| !c.spammers.is_empty())
            .collect();
        let scores: Vec<HmpsScore> = labelled
            .par_iter()
            .flat_map_iter(|(c, t)| score_all(&t.with_spammers(&c.spammers)))
            .collect();
        let features = assemble(
            &scores,
            self.corpus,
            self.config.mode,
            &self.hits,
            &self.config.clustering.tokenizer,
        );
        (labelled.into_iter().map(|(c, _)| c).collect(), scores, features)
    }

    pub fn classify(&self, positives: &BTreeSet<UserId>) -> Result<Classification> {
        self.classify_with(positives, self.config.learning, self.config.smote)
    }

    pub fn classify_with(
        &self,
        positives: &BTreeSet<UserId>,
        learning: Learning,
        smote: Option<SmoteConfig>,
    ) -> Result<Classification> {
        let (campaigns, scores, features) = self.features(positives);
        let mut state = feedback::init(&campaigns, &features, &self.config.train_config(), smote)?;
        match learning {
            Learning::Feedback => {
                let cap = self.config.max_levels.unwrap_or(self.corpus.user_count().max(1));
                feedback::run_until_convergence(&mut state, cap)?;
            }
            Learning::NoFeedback => feedback::run_without_feedback(&mut state)?,
        }
        let predictions = feedback::predict_all(&state)?;
        Ok(Classification {
            campaigns,
            scores,
            features,
            state,
            predictions,
        })
    }
}
