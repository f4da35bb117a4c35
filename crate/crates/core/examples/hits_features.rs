//! Hub and authority scores on a follower graph, then the full feature
//! vectors for one campaign.

use campaigner::campaigns::{detect_campaigns, ClusteringParams};
use campaigner::corpus::FollowerEdge;
use campaigner::features::{assemble, hits_scores, FeatureMode};
use campaigner::hin::build_tree;
use campaigner::hmps::score_all;
use campaigner::synth::{generate, SynthConfig};

fn edge(a: &str, b: &str) -> FollowerEdge {
    FollowerEdge {
        follower: a.into(),
        followee: b.into(),
    }
}

fn main() -> campaigner::Result<()> {
    // a, b and c all follow d; d follows e
    let edges = [edge("a", "d"), edge("b", "d"), edge("c", "d"), edge("d", "e"), edge("a", "e")];
    println!("{:>4} {:>8} {:>8}", "node", "hub", "auth");
    for (u, s) in hits_scores(&edges, 1000, 1e-12) {
        println!("{u:>4} {:8.4} {:8.4}", s.hub, s.authority);
    }

    let synth = generate(&SynthConfig::default())?;
    let corpus = synth.corpus()?;
    let campaigns = detect_campaigns(&corpus, &ClusteringParams::default())?;
    let tree = build_tree(&corpus, &campaigns[0])?;
    let scores = score_all(&tree);
    let hits = hits_scores(corpus.follower_edges(), 1000, 1e-12);
    let mode = FeatureMode::HmpsOsn2;
    let vectors = assemble(&scores, &corpus, mode, &hits, &ClusteringParams::default().tokenizer);

    println!("\ncampaign {} features: {}", tree.campaign_id, mode.names().join(", "));
    for v in vectors.iter().take(6) {
        let tag = if synth.truth.spammers.contains(&v.user_id) { "S" } else { " " };
        let vals: Vec<String> = v.values.iter().map(|x| format!("{x:.3}")).collect();
        println!("{tag} {:8} {}", v.user_id, vals.join(" "));
    }
    Ok(())
}
