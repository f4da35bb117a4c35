//! Cluster phone numbers into campaigns and compare with the generator's
//! ground truth.

use std::collections::BTreeMap;

use campaigner::campaigns::{build_phone_documents, detect_campaigns, jaccard, silhouette_check, ClusteringParams};
use campaigner::synth::{generate, SynthConfig};

fn main() -> campaigner::Result<()> {
    let synth = generate(&SynthConfig::default())?;
    let corpus = synth.corpus()?;
    let params = ClusteringParams::default();

    let docs = build_phone_documents(&corpus, &params);
    println!("{} phone documents", docs.len());
    if let [a, b, ..] = docs.as_slice() {
        println!("jaccard({}, {}) = {:.3}", a.phone, b.phone, jaccard(&a.signature, &b.signature));
    }

    let campaigns = detect_campaigns(&corpus, &params)?;
    println!("{} campaigns, silhouette {:.3}", campaigns.len(), silhouette_check(&docs, &campaigns)?);

    // each detected campaign should map onto exactly one true campaign
    for c in &campaigns {
        let mut truth: BTreeMap<usize, usize> = BTreeMap::new();
        for p in &c.phones {
            *truth.entry(synth.truth.phone_campaign[p]).or_default() += 1;
        }
        println!(
            "campaign {:2}: {} phones, {:3} users, {:3} tweets, {:2} suspended, true ids {:?}",
            c.campaign_id,
            c.phones.len(),
            c.users.len(),
            c.tweet_ids.len(),
            c.spammers.len(),
            truth.keys().collect::<Vec<_>>()
        );
    }
    Ok(())
}
