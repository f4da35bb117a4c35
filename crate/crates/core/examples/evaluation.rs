//! Both evaluation protocols and the oversampling comparison on the
//! synthetic benchmark.

use campaigner::eval::{ablation_suite, setting1_loo, setting2_holdout, smote};
use campaigner::pipeline::{Learning, Pipeline, RunConfig};
use campaigner::synth::{generate, SynthConfig};

fn show(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.3}"))
}

fn main() -> campaigner::Result<()> {
    let synth = generate(&SynthConfig::default())?;
    let corpus = synth.corpus()?;
    let pipeline = Pipeline::new(&corpus, RunConfig::default())?;

    let loo = setting1_loo(&pipeline)?;
    println!("setting 1 ({}): accuracy {}", loo.description, show(loo.accuracy));

    for learning in [Learning::Feedback, Learning::NoFeedback] {
        let r = setting2_holdout(&pipeline, learning, None, pipeline.config.eval.repeats)?;
        println!(
            "setting 2 ({}): P {} R {} F1 {} AUC {}",
            r.description,
            show(r.precision),
            show(r.recall),
            show(r.f1),
            show(r.auc)
        );
    }

    let toy = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
    let out = smote(&toy, 0.5, 2, 1)?;
    for s in &out.synthetic {
        println!("smote: {:?} between {} and {} at {:.3}", s.point, s.parent, s.neighbor, s.gap);
    }

    println!("\n{:12} {:>5} {:>6} {:>6} {:>6}", "method", "ratio", "P", "R", "F1");
    for row in ablation_suite(&pipeline)? {
        let ratio = row.ratio.map_or("-".into(), |r| format!("{r:.2}"));
        println!(
            "{:12} {:>5} {:>6} {:>6} {:>6}",
            row.method,
            ratio,
            show(row.report.precision),
            show(row.report.recall),
            show(row.report.f1)
        );
    }
    Ok(())
}
