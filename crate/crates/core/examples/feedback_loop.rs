//! Campaign classifiers sharing confident spammers level by level.

use campaigner::feedback::{self, predict_all, Source};
use campaigner::pipeline::{Pipeline, RunConfig};
use campaigner::synth::{generate, SynthConfig};

fn main() -> campaigner::Result<()> {
    let synth = generate(&SynthConfig::default())?;
    let corpus = synth.corpus()?;
    let config = RunConfig::default();
    let pipeline = Pipeline::new(&corpus, config.clone())?;
    let (campaigns, _, vectors) = pipeline.features(&corpus.suspended_users());

    let mut state = feedback::init(&campaigns, &vectors, &config.train_config(), None)?;
    let deferred = state.slots.iter().filter(|s| s.is_deferred()).count();
    println!("{} campaign classifiers, {deferred} waiting for a second spammer", state.slots.len());
    loop {
        let level = state.level;
        let added = feedback::run_level(&mut state)?;
        println!("level {level}: {added} users added to other campaigns");
        if added == 0 {
            break;
        }
    }
    for t in &state.log {
        println!(
            "  level {} user {} from campaign {} to {} (score {:.4})",
            t.level, t.user_id, t.from_campaign, t.to_campaign, t.score
        );
    }
    state.refit()?;

    let predictions = predict_all(&state)?;
    let suspended = corpus.suspended_users();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (user, p) in feedback::aggregate(&predictions) {
        if suspended.contains(&user) {
            continue;
        }
        match (p.is_spammer(), synth.truth.spammers.contains(&user)) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    let by_feedback = predictions.iter().filter(|p| p.source == Source::Feedback).count();
    println!("{by_feedback} campaign memberships labelled through feedback");
    println!("unlabelled users: {tp} spammers found, {fp} false alarms, {fn_} missed");
    Ok(())
}
