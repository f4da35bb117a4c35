//! Build one campaign's tree and score its users by proximity to the
//! known spammers.

use campaigner::campaigns::{detect_campaigns, ClusteringParams};
use campaigner::hin::build_tree;
use campaigner::hmps::{pair_score, score_all};
use campaigner::synth::{generate, SynthConfig};

fn main() -> campaigner::Result<()> {
    let synth = generate(&SynthConfig::default())?;
    let corpus = synth.corpus()?;
    let campaigns = detect_campaigns(&corpus, &ClusteringParams::default())?;
    let campaign = campaigns
        .iter()
        .max_by_key(|c| c.spammers.len())
        .expect("at least one campaign");
    let tree = build_tree(&corpus, campaign)?;
    println!(
        "campaign {}: {} tokens, {} users, {} known spammers, weight error {:.1e}",
        tree.campaign_id,
        tree.tokens().len(),
        tree.users().len(),
        tree.spammers().len(),
        tree.normalization_error()
    );

    let spammer = tree.spammers().iter().next().expect("a spammer");
    let other = tree
        .users()
        .iter()
        .map(|u| &u.user_id)
        .find(|u| *u != spammer)
        .expect("a second user");
    let ps = pair_score(&tree, other.as_str(), spammer.as_str())?;
    println!("\nbest path {other} -> {spammer}, score {:.5}", ps.value);
    if let Some(path) = &ps.witness_path {
        for node in &path.nodes {
            println!("  {node:?}");
        }
    }

    let mut scores = score_all(&tree);
    scores.sort_by(|a, b| b.value.total_cmp(&a.value));
    println!("\nhighest scores among unlabelled users:");
    for s in scores.iter().filter(|s| !tree.is_spammer(s.user_id.as_str())).take(8) {
        let truth = if synth.truth.spammers.contains(&s.user_id) { "spammer" } else { "benign" };
        println!("  {:8} {:.5}  ({truth})", s.user_id, s.value);
    }
    Ok(())
}
