//! Generate the synthetic benchmark and write it to disk.
//!
//!     cargo run --example synthetic_corpus -- /tmp/corpus

use std::path::PathBuf;

use campaigner::synth::{generate, SynthConfig};

fn main() -> campaigner::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("campaigner-corpus"));
    let cfg = SynthConfig::default();
    let synth = generate(&cfg)?;
    synth.write(&dir)?;

    let truth = &synth.truth;
    println!("wrote {} tweets, {} users, {} follow edges to {}", synth.tweets.len(), synth.users.len(), synth.edges.len(), dir.display());
    println!("campaigns:            {}", cfg.n_campaigns);
    println!("phones in truth:      {}", truth.phone_campaign.len());
    println!("multi-campaign users: {:.3}", truth.overlap_fraction());
    println!("spammers:             {} ({} suspended)", truth.spammers.len(), truth.suspended.len());

    let corpus = synth.corpus()?;
    println!("annotated users:      {}", corpus.annotated_users().len());
    if let Some(t) = synth.tweets.iter().find(|t| !t.phones.is_empty()) {
        println!("sample tweet by {}: {}", t.user_id, t.text);
    }
    Ok(())
}
