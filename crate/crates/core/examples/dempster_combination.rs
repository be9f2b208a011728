//! Mass assignment from precision/recall and Dempster's rule.
//!
//! ```text
//! cargo run --example dempster_combination
//! ```

use dbf::fusion::{combine_all, dempster_combine, mass_from_pr, MassFunction, AMBIGUITY_FLOOR};

fn show(label: &str, m: &MassFunction) {
    println!("{label:<22} t={:.4} nt={:.4} amb={:.4} score={:+.4}", m.t, m.nt, m.amb, m.score());
}

fn main() -> dbf::Result<()> {
    let detector = mass_from_pr(0.6, 0.5, 2);
    let confident_cls = mass_from_pr(0.8, 0.3, 2);
    let doubtful_cls = mass_from_pr(0.2, 0.9, 2);
    show("detector", &detector);
    show("classifier (high)", &confident_cls);
    show("classifier (low)", &doubtful_cls);

    println!();
    show("detector + high", &dempster_combine(&detector, &confident_cls)?);
    show("detector + low", &dempster_combine(&detector, &doubtful_cls)?);
    show("detector + vacuous", &dempster_combine(&detector, &MassFunction::VACUOUS)?);

    // the precision term is clamped when prec + rec^n would exceed one
    show("clamped (0.9, 0.8, 1)", &mass_from_pr(0.9, 0.8, 1));

    let certain = MassFunction::new(1.0, 0.0, 0.0)?;
    let impossible = MassFunction::new(0.0, 1.0, 0.0)?;
    match dempster_combine(&certain, &impossible) {
        Err(e) => println!("\nraw certain vs impossible: {e}"),
        Ok(m) => show("unexpected", &m),
    }
    // the pipeline floors ambiguity first, so the same pair combines
    let floored = combine_all([certain, impossible])?;
    show(&format!("floored at {AMBIGUITY_FLOOR:e}"), &floored);
    Ok(())
}
