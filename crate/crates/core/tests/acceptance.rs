//! Acceptance checks. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{Duration, Instant};

use campaigner::campaigns::{detect_campaigns, Campaign, ClusteringParams};
use campaigner::corpus::{Corpus, FollowerEdge, TweetRecord};
use campaigner::eval::{ablation_suite, auc, setting1_loo, setting2_holdout, smote, ConfusionCounts};
use campaigner::features::hits_scores;
use campaigner::feedback;
use campaigner::hin::{build_tree, CampaignTree, NodeKind, NodeRef};
use campaigner::hmps::{enumerate_meta_paths, hmps, pair_score};
use campaigner::occ::{fit, KernelChoice, TrainConfig};
use campaigner::pipeline::{Learning, Pipeline, RunConfig};
use campaigner::synth::{generate, SynthConfig, SynthCorpus};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Setting-1 accuracy of the default benchmark on the first green build
/// (78 of 99 suspended users recovered).
const LOO_BASELINE: f64 = 78.0 / 99.0;
const LOO_SLACK: f64 = 0.02;

type Outcome = std::result::Result<String, String>;

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

type Criterion = Box<dyn Fn(&Bench) -> Outcome>;

fn main() {
    let bench = Bench::new();
    let criteria: Vec<(&str, Criterion)> = vec![
        ("HMPS matches meta-path enumeration", Box::new(|_| c1_hmps_oracle())),
        ("campaign recovery", Box::new(c2_campaign_recovery)),
        ("tree weight normalization", Box::new(c3_weight_normalization)),
        ("nu-property", Box::new(|_| c4_nu_property())),
        ("feedback behaviour", Box::new(c5_feedback)),
        ("SMOTE correctness", Box::new(c6_smote)),
        ("metrics golden values", Box::new(|_| c7_metrics())),
        ("HITS against power iteration", Box::new(|_| c8_hits())),
        ("determinism across thread counts", Box::new(|_| c9_determinism())),
        ("setting-1 regression", Box::new(c10_loo_regression)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(&bench)))
            .unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:2} PASS  {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:2} FAIL  {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

/// The default synthetic benchmark, generated once.
struct Bench {
    synth: SynthCorpus,
    corpus: Corpus,
}

impl Bench {
    fn new() -> Self {
        let synth = generate(&SynthConfig::default()).expect("default synth config is valid");
        let corpus = synth.corpus().expect("synthetic corpus loads");
        Self { synth, corpus }
    }
}

// ---------------------------------------------------------------- 1

fn tweet(id: usize, user: usize, phone: Option<usize>, url: Option<usize>) -> TweetRecord {
    TweetRecord {
        tweet_id: format!("t{id}").into(),
        user_id: format!("u{user}").into(),
        text: String::new(),
        created_at: "2016-05-01T00:00:00Z".into(),
        phones: phone.map(|p| format!("+1555000{p:04}").into()).into_iter().collect(),
        urls: url.map(|u| format!("http://u{u}.example.com/").into()).into_iter().collect(),
        hashtags: vec![],
    }
}

/// A random single-campaign corpus and its tree; at most 60 nodes.
fn random_tree(seed: u64) -> CampaignTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phones = rng.gen_range(1..=4);
    let urls = rng.gen_range(0..=4);
    let users = rng.gen_range(2..=40);
    let mut tweets = Vec::new();
    for u in 0..users {
        for _ in 0..rng.gen_range(1..=4) {
            let url = (urls > 0 && rng.gen_bool(0.5)).then(|| rng.gen_range(0..urls));
            let phone = if url.is_some() && rng.gen_bool(0.2) {
                None
            } else {
                Some(rng.gen_range(0..phones))
            };
            tweets.push(tweet(tweets.len(), u, phone, url));
        }
    }
    let corpus = Corpus::new(tweets, vec![], vec![]).expect("valid corpus");
    let all_users: Vec<_> = corpus.users().map(|u| u.user_id.clone()).collect();
    let n_spam = rng.gen_range(1..=all_users.len());
    let spammers = all_users.choose_multiple(&mut rng, n_spam).cloned().collect();
    let campaign = Campaign {
        campaign_id: seed as usize,
        phones: corpus.tweets().iter().flat_map(|t| t.phones.clone()).collect(),
        tweet_ids: corpus.tweets().iter().map(|t| t.tweet_id.clone()).collect(),
        users: all_users.into_iter().collect(),
        urls: corpus.tweets().iter().flat_map(|t| t.urls.clone()).collect(),
        spammers,
    };
    build_tree(&corpus, &campaign).expect("tree builds")
}

type Adjacency = BTreeMap<NodeRef, Vec<(NodeRef, f64)>>;

fn adjacency(tree: &CampaignTree) -> Adjacency {
    let mut adj = Adjacency::new();
    for (a, b, w) in tree.edges() {
        adj.entry(a.clone()).or_default().push((b.clone(), w));
        adj.entry(b).or_default().push((a, w));
    }
    adj
}

/// Best weight product over simple user-to-user paths of 2 or 4 edges
/// whose inner nodes are not users, by depth-first search over the tree's
/// edge list.
fn dfs_best(adj: &Adjacency, u: &str, s: &str) -> f64 {
    let start = NodeRef::User(u.into());
    let goal = NodeRef::User(s.into());
    let mut best = 0.0f64;
    let mut stack = vec![(start.clone(), vec![start], 1.0f64)];
    while let Some((node, path, prod)) = stack.pop() {
        let len = path.len() - 1;
        if node == goal {
            if len == 2 || len == 4 {
                best = best.max(prod);
            }
            continue;
        }
        if len >= 4 || (len > 0 && node.kind() == NodeKind::User) {
            continue;
        }
        for (next, w) in adj.get(&node).into_iter().flatten() {
            if !path.contains(next) {
                let mut p = path.clone();
                p.push(next.clone());
                stack.push((next.clone(), p, prod * w));
            }
        }
    }
    best
}

fn c1_hmps_oracle() -> Outcome {
    let start = Instant::now();
    let (mut pairs, mut worst, mut biggest) = (0usize, 0.0f64, 0usize);
    for seed in 0..100 {
        let tree = random_tree(seed);
        biggest = biggest.max(tree.nodes().len());
        if tree.nodes().len() > 60 {
            return Err(format!("tree {seed} has {} nodes", tree.nodes().len()));
        }
        let adj = adjacency(&tree);
        let users: Vec<String> = tree.users().iter().map(|u| u.user_id.to_string()).collect();
        for u in &users {
            let mut oracle_sum = 0.0;
            for s in &users {
                if s == u {
                    continue;
                }
                let lib = pair_score(&tree, u, s).map_err(|e| e.to_string())?.value;
                let dfs = dfs_best(&adj, u, s);
                let listed = enumerate_meta_paths(&tree, u, s, 4)
                    .map_err(|e| e.to_string())?
                    .iter()
                    .map(|p| p.1)
                    .fold(0.0, f64::max);
                worst = worst.max((lib - dfs).abs()).max((lib - listed).abs());
                pairs += 1;
                if tree.is_spammer(s) {
                    oracle_sum += dfs;
                }
            }
            let h = hmps(&tree, u).map_err(|e| e.to_string())?.value;
            worst = worst.max((h - oracle_sum).abs());
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-9 && elapsed < Duration::from_secs(5),
        format!("{pairs} pairs on 100 trees (max {biggest} nodes), max deviation {worst:.1e}, {elapsed:.2?}"),
        format!("max deviation {worst:.3e} (limit 1e-9), runtime {elapsed:.2?} (limit 5s)"),
    )
}

// ---------------------------------------------------------------- 2

/// Adjusted Rand index from the contingency table.
fn adjusted_rand(a: &[usize], b: &[usize]) -> f64 {
    let c2 = |n: f64| n * (n - 1.0) / 2.0;
    let mut table: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, f64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    let index: f64 = table.values().map(|&n| c2(n)).sum();
    let sa: f64 = rows.values().map(|&n| c2(n)).sum();
    let sb: f64 = cols.values().map(|&n| c2(n)).sum();
    let expected = sa * sb / c2(a.len() as f64);
    let max = (sa + sb) / 2.0;
    if max == expected {
        1.0
    } else {
        (index - expected) / (max - expected)
    }
}

fn c2_campaign_recovery(b: &Bench) -> Outcome {
    let cfg = SynthConfig::default();
    let start = Instant::now();
    let campaigns = detect_campaigns(&b.corpus, &ClusteringParams::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let owner: BTreeMap<_, _> = campaigns
        .iter()
        .flat_map(|c| c.phones.iter().map(move |p| (p.clone(), c.campaign_id)))
        .collect();
    let mut truth = Vec::new();
    let mut found = Vec::new();
    for (i, (phone, &c)) in b.synth.truth.phone_campaign.iter().enumerate() {
        truth.push(c);
        // phones left out of every campaign are singletons
        found.push(owner.get(phone).copied().unwrap_or(usize::MAX - i));
    }
    let ari = adjusted_rand(&truth, &found);
    check(
        ari >= 0.95 && elapsed < Duration::from_secs(10),
        format!(
            "ARI {ari:.4} over {} phones ({} campaigns x {} users, overlap {:.3}), {elapsed:.2?}",
            truth.len(),
            cfg.n_campaigns,
            cfg.users_per_campaign,
            b.synth.truth.overlap_fraction()
        ),
        format!("ARI {ari:.4} (need >= 0.95), runtime {elapsed:.2?} (limit 10s)"),
    )
}

// ---------------------------------------------------------------- 3

fn weight_sums_error(tree: &CampaignTree) -> f64 {
    let mut per_token = vec![0.0f64; tree.tokens().len()];
    for u in tree.users() {
        for &(t, w) in &u.parents {
            per_token[t] += w;
        }
    }
    let root: f64 = tree.tokens().iter().map(|t| t.root_weight).sum();
    per_token.iter().chain([&root]).map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
}

fn c3_weight_normalization(b: &Bench) -> Outcome {
    let campaigns = detect_campaigns(&b.corpus, &ClusteringParams::default()).map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for c in &campaigns {
        trees.push(build_tree(&b.corpus, c).map_err(|e| e.to_string())?);
    }
    trees.extend((0..100).map(random_tree));
    let worst = trees.iter().map(weight_sums_error).fold(0.0, f64::max);
    check(
        worst <= 1e-12,
        format!("{} trees, max |sum - 1| = {worst:.1e}", trees.len()),
        format!("max |sum - 1| = {worst:.3e} (limit 1e-12)"),
    )
}

// ---------------------------------------------------------------- 4

fn blob(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = || (0..4).map(|_| rng.gen_range(-1.0..1.0f64)).sum::<f64>() * 0.5;
    (0..n).map(|_| vec![6.0 + g(), 4.0 + g(), 5.0 + 0.5 * g()]).collect()
}

fn kernel(gamma: Option<f64>, a: &[f64], b: &[f64]) -> f64 {
    match gamma {
        Some(g) => (-g * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).exp(),
        None => a.iter().zip(b).map(|(x, y)| x * y).sum(),
    }
}

/// Euclidean projection onto `{0 <= a <= 1, sum a = total}` by bisection
/// on the shift.
fn project_capped_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mass = |tau: f64| v.iter().map(|x| (x - tau).clamp(0.0, 1.0)).sum::<f64>();
    let (mut lo, mut hi) = (v.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0, v.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|x| (x - tau).clamp(0.0, 1.0)).collect()
}

/// Minimum of `0.5 aᵀKa` over the capped simplex by accelerated projected
/// gradient.
fn dual_oracle(k: &[Vec<f64>], total: f64) -> f64 {
    let n = k.len();
    let lip = k.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let obj = |a: &[f64]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += a[i] * a[j] * k[i][j];
            }
        }
        0.5 * s
    };
    let mut x = vec![total / n as f64; n];
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..3000 {
        let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[i][j] * y[j]).sum()).collect();
        let step: Vec<f64> = y.iter().zip(&grad).map(|(a, g)| a - g / lip).collect();
        let next = project_capped_simplex(&step, total);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = next.iter().zip(&x).map(|(a, b)| a + (t - 1.0) / t_next * (a - b)).collect();
        x = next;
        t = t_next;
    }
    obj(&x)
}

fn c4_nu_property() -> Outcome {
    let data = blob(200, 11);
    let base = TrainConfig::default();
    let mut worst_margin = f64::NEG_INFINITY;
    let mut fits = 0;
    for kernel_choice in [KernelChoice::Rbf, KernelChoice::Linear] {
        let gammas: Vec<f64> = match kernel_choice {
            KernelChoice::Rbf => base.gamma_grid.clone(),
            KernelChoice::Linear => vec![base.gamma_grid[0]],
        };
        for &nu in &base.nu_grid {
            for &g in &gammas {
                let cfg = TrainConfig {
                    kernel: kernel_choice,
                    standardize: kernel_choice == KernelChoice::Rbf,
                    ..base.at(nu, g)
                };
                let model = fit(&data, &cfg).map_err(|e| e.to_string())?;
                let outside = data.iter().filter(|x| model.score(x).map_or(true, |s| s < 0.0)).count();
                let frac = outside as f64 / data.len() as f64;
                worst_margin = worst_margin.max(frac - nu);
                fits += 1;
                if frac > nu + 0.05 {
                    return Err(format!("{kernel_choice:?} nu {nu} gamma {g}: {frac:.3} outside"));
                }
            }
        }
    }

    // the solver's dual objective against an independent projected-gradient
    // solution, on a subsample without scaling
    let sub: Vec<Vec<f64>> = data.iter().take(60).cloned().collect();
    let mut worst_gap = 0.0f64;
    for (gamma, kind) in [(Some(0.5), KernelChoice::Rbf), (None, KernelChoice::Linear)] {
        for &nu in &base.nu_grid {
            let cfg = TrainConfig {
                kernel: kind,
                standardize: false,
                ..base.at(nu, gamma.unwrap_or(1.0))
            };
            let model = fit(&sub, &cfg).map_err(|e| e.to_string())?;
            let scale = nu * sub.len() as f64;
            let mut lib = 0.0;
            for (si, ci) in model.support.iter().zip(&model.coef) {
                for (sj, cj) in model.support.iter().zip(&model.coef) {
                    lib += 0.5 * ci * cj * scale * scale * kernel(gamma, si, sj);
                }
            }
            let gram: Vec<Vec<f64>> = sub.iter().map(|a| sub.iter().map(|b| kernel(gamma, a, b)).collect()).collect();
            let oracle = dual_oracle(&gram, scale);
            worst_gap = worst_gap.max((lib - oracle) / oracle.abs().max(1e-12));
        }
    }
    check(
        worst_gap <= 1e-6,
        format!("{fits} fits, worst (outside share - nu) = {worst_margin:+.3}; dual objective within {worst_gap:+.1e} of projected-gradient oracle"),
        format!("dual objective exceeds oracle by {worst_gap:.3e} relative"),
    )
}

// ---------------------------------------------------------------- 5

fn c5_feedback(b: &Bench) -> Outcome {
    let config = RunConfig::default();
    let pipeline = Pipeline::new(&b.corpus, config.clone()).map_err(|e| e.to_string())?;
    let (campaigns, _, vectors) = pipeline.features(&b.corpus.suspended_users());

    // (a) monotone growth, (b) convergence with zero transfers
    let mut state = feedback::init(&campaigns, &vectors, &config.train_config(), None).map_err(|e| e.to_string())?;
    let cap = b.corpus.user_count();
    let mut last = usize::MAX;
    let mut levels = 0;
    while levels < cap {
        let before: Vec<BTreeSet<_>> = state.slots.iter().map(|s| s.training.clone()).collect();
        last = feedback::run_level(&mut state).map_err(|e| e.to_string())?;
        levels += 1;
        for (old, slot) in before.iter().zip(&state.slots) {
            if !old.is_subset(&slot.training) {
                return Err(format!("campaign {} lost training users at level {levels}", slot.campaign_id));
            }
        }
        if last == 0 {
            break;
        }
    }
    if last != 0 {
        return Err(format!("no convergence within {cap} levels"));
    }
    let mut again = feedback::init(&campaigns, &vectors, &config.train_config(), None).map_err(|e| e.to_string())?;
    let final_transfers = feedback::run_until_convergence(&mut again, cap).map_err(|e| e.to_string())?;
    if final_transfers != 0 {
        return Err(format!("run_until_convergence stopped with {final_transfers} transfers"));
    }

    // (c) feedback beats no feedback on the benchmark
    let repeats = config.eval.repeats;
    let fb = setting2_holdout(&pipeline, Learning::Feedback, None, repeats).map_err(|e| e.to_string())?;
    let nofb = setting2_holdout(&pipeline, Learning::NoFeedback, None, repeats).map_err(|e| e.to_string())?;
    let (f_fb, f_no) = (fb.f1.unwrap_or(0.0), nofb.f1.unwrap_or(0.0));

    // (d) without overlap, feedback changes nothing
    let disjoint = generate(&SynthConfig {
        overlap_fraction: 0.0,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let dcorpus = disjoint.corpus().map_err(|e| e.to_string())?;
    let dpipe = Pipeline::new(&dcorpus, config.clone()).map_err(|e| e.to_string())?;
    let positives = dcorpus.suspended_users();
    let with = dpipe.classify_with(&positives, Learning::Feedback, None).map_err(|e| e.to_string())?;
    let without = dpipe.classify_with(&positives, Learning::NoFeedback, None).map_err(|e| e.to_string())?;
    let identical = with.predictions == without.predictions && with.state.log.is_empty();

    check(
        f_fb > f_no && identical,
        format!(
            "monotone over {levels} levels ({} transfers), converged at 0; setting-2 F1 {f_fb:.4} with feedback vs {f_no:.4} without; no-overlap predictions identical",
            state.log.len()
        ),
        format!("feedback F1 {f_fb:.4} vs {f_no:.4} without; no-overlap identical: {identical}"),
    )
}

// ---------------------------------------------------------------- 6

fn c6_smote(b: &Bench) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut samples = 0;
    let mut worst = 0.0f64;
    for trial in 0..20u64 {
        let n = rng.gen_range(3..30);
        let dim = rng.gen_range(1..6);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let k = rng.gen_range(1..n);
        let ratio = [0.2, 0.3, 0.5, 0.75, 1.0, 2.5][trial as usize % 6];
        let out = smote(&x, ratio, k, trial).map_err(|e| e.to_string())?;
        for s in &out.synthetic {
            let (a, c) = (&x[s.parent], &x[s.neighbor]);
            let d: Vec<f64> = a.iter().zip(c).map(|(p, q)| q - p).collect();
            let dd: f64 = d.iter().map(|v| v * v).sum();
            let t = if dd > 0.0 {
                s.point.iter().zip(a).zip(&d).map(|((p, q), r)| (p - q) * r).sum::<f64>() / dd
            } else {
                s.gap
            };
            let residual = s
                .point
                .iter()
                .zip(a)
                .zip(&d)
                .map(|((p, q), r)| (p - q - t * r).abs())
                .fold(0.0, f64::max);
            worst = worst.max(residual);
            if !(s.gap > 0.0 && s.gap < 1.0) || residual >= 1e-12 || (dd > 0.0 && (t - s.gap).abs() > 1e-9) {
                return Err(format!("sample off segment: gap {}, t {t}, residual {residual:.2e}", s.gap));
            }
            // the neighbour is among the parent's k nearest
            let dist = |i: usize| x[i].iter().zip(a).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
            let mut others: Vec<f64> = (0..n).filter(|&i| i != s.parent).map(dist).collect();
            others.sort_by(f64::total_cmp);
            if dist(s.neighbor) > others[k - 1] {
                return Err(format!("neighbor {} is not among the {k} nearest", s.neighbor));
            }
            samples += 1;
        }
    }
    let pipeline = Pipeline::new(&b.corpus, RunConfig::default()).map_err(|e| e.to_string())?;
    let rows = ablation_suite(&pipeline).map_err(|e| e.to_string())?;
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    check(
        ratios == [0.20, 0.30, 0.50, 0.75, 1.0],
        format!("{samples} samples on their segments (max residual {worst:.1e}); ablation ratios {ratios:?}"),
        format!("ablation ratios {ratios:?}"),
    )
}

// ---------------------------------------------------------------- 7

fn c7_metrics() -> Outcome {
    // (tp, fp, tn, fn) with hand-computed precision, recall, F1
    type Golden = ((usize, usize, usize, usize), f64, f64, f64);
    let golden: [Golden; 5] = [
        ((3, 1, 4, 2), 3.0 / 4.0, 3.0 / 5.0, 2.0 / 3.0),
        ((5, 0, 5, 0), 1.0, 1.0, 1.0),
        ((1, 3, 2, 1), 1.0 / 4.0, 1.0 / 2.0, 1.0 / 3.0),
        ((0, 2, 5, 3), 0.0, 0.0, 0.0),
        ((7, 2, 0, 5), 7.0 / 9.0, 7.0 / 12.0, 2.0 / 3.0),
    ];
    for ((tp, fp, tn, fn_), p, r, f) in golden {
        let c = ConfusionCounts { tp, fp, tn, fn_ };
        if c.precision() != Some(p) || c.recall() != Some(r) || c.f1() != Some(f) {
            return Err(format!(
                "({tp},{fp},{tn},{fn_}): got {:?} {:?} {:?}, want {p} {r} {f}",
                c.precision(),
                c.recall(),
                c.f1()
            ));
        }
    }
    let ranked = [(0.9, true), (0.8, true), (0.3, false), (0.1, false)];
    let reversed: Vec<(f64, bool)> = ranked.iter().map(|&(s, l)| (-s, l)).collect();
    let tied = [(0.5, true), (0.5, false), (0.5, true), (0.5, false)];
    let got = (auc(&ranked), auc(&reversed), auc(&tied));
    check(
        got == (Some(1.0), Some(0.0), Some(0.5)),
        "5 confusion matrices exact; AUC 1.0 / 0.0 / 0.5".into(),
        format!("AUC ranked/reversed/tied = {got:?}"),
    )
}

// ---------------------------------------------------------------- 8

/// Kleinberg's iteration on a dense adjacency matrix.
fn hits_oracle(n: usize, adj: &[Vec<bool>]) -> (Vec<f64>, Vec<f64>) {
    let norm = |v: &mut Vec<f64>| {
        let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if s > 0.0 {
            v.iter_mut().for_each(|x| *x /= s);
        }
    };
    let mut h = vec![1.0; n];
    let mut a = vec![0.0; n];
    for _ in 0..100_000 {
        let mut a2: Vec<f64> = (0..n).map(|j| (0..n).filter(|&i| adj[i][j]).map(|i| h[i]).sum()).collect();
        norm(&mut a2);
        let mut h2: Vec<f64> = (0..n).map(|i| (0..n).filter(|&j| adj[i][j]).map(|j| a2[j]).sum()).collect();
        norm(&mut h2);
        let delta = h.iter().zip(&h2).chain(a.iter().zip(&a2)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        h = h2;
        a = a2;
        if delta < 1e-15 {
            break;
        }
    }
    (h, a)
}

fn c8_hits() -> Outcome {
    let cfg = RunConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let n = 10;
        let mut adj = vec![vec![false; n]; n];
        let mut edges = Vec::new();
        for (i, row) in adj.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                if i != j && rng.gen_bool(0.3) {
                    *cell = true;
                    edges.push(FollowerEdge {
                        follower: format!("n{i}").into(),
                        followee: format!("n{j}").into(),
                    });
                }
            }
        }
        let lib = hits_scores(&edges, cfg.hits_iterations, cfg.hits_tolerance);
        let (h, a) = hits_oracle(n, &adj);
        for i in 0..n {
            let Some(s) = lib.get(format!("n{i}").as_str()) else {
                continue;
            };
            worst = worst.max((s.hub - h[i]).abs()).max((s.authority - a[i]).abs());
        }
    }
    let single = hits_scores(
        &[FollowerEdge {
            follower: "a".into(),
            followee: "b".into(),
        }],
        cfg.hits_iterations,
        cfg.hits_tolerance,
    );
    let exact = single["a"].hub == 1.0 && single["b"].authority == 1.0;
    check(
        worst <= 1e-8 && exact,
        format!("10 random digraphs, max deviation {worst:.1e}; single edge hub = authority = 1"),
        format!("max deviation {worst:.3e} (limit 1e-8), single edge exact: {exact}"),
    )
}

// ---------------------------------------------------------------- 9

fn cli(args: &[&str]) -> std::result::Result<(), String> {
    let argv = std::iter::once("campaigner").chain(args.iter().copied());
    match campaigner::cli::main_with(argv) {
        0 => Ok(()),
        code => Err(format!("campaigner {} exited with {code}", args.join(" "))),
    }
}

fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    cli(&["synth", "--out", &path("data")])?;
    for (out, threads) in [("one", "1"), ("eight", "8")] {
        cli(&["pipeline", "--input", &path("data"), "--out", &path(out), "--seed", "7", "--threads", threads, "--no-eval"])?;
    }
    let read = |p: &Path| std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()));
    let a = read(&dir.path().join("one/predictions.csv"))?;
    let b = read(&dir.path().join("eight/predictions.csv"))?;
    check(
        a == b && !a.is_empty(),
        format!("predictions.csv identical ({} bytes) with 1 and 8 threads", a.len()),
        "predictions.csv differs between 1 and 8 threads".into(),
    )
}

// ---------------------------------------------------------------- 10

fn c10_loo_regression(b: &Bench) -> Outcome {
    let pipeline = Pipeline::new(&b.corpus, RunConfig::default()).map_err(|e| e.to_string())?;
    let report = setting1_loo(&pipeline).map_err(|e| e.to_string())?;
    let acc = report.accuracy.unwrap_or(0.0);
    check(
        acc >= LOO_BASELINE - LOO_SLACK,
        format!("LOO accuracy {acc:.4} ({}), baseline {LOO_BASELINE:.4}", report.description),
        format!("LOO accuracy {acc:.4} below baseline {LOO_BASELINE:.4} - {LOO_SLACK}"),
    )
}
