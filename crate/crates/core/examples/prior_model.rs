//! Fits a prior model on a synthetic validation split and saves it as JSON.
//!
//! ```text
//! cargo run --example prior_model -- [OUT_DIR]
//! ```

use dbf::fusion::assign_masses;
use dbf::io;
use dbf::prior::{label_detections, Exponent, PriorModel, DEFAULT_IOU_THRESHOLD, DEFAULT_N_MAX};
use dbf::synth::{generate, SyntheticConfig};

fn main() -> dbf::Result<()> {
    let out_dir = std::env::args().nth(1).unwrap_or_else(|| "target/example-priors".into());
    let data = generate(&SyntheticConfig::fusion_benchmark(11))?;
    let val = data.partition("val").expect("val split");

    let class = "car";
    let dets: Vec<_> = val.detections.iter().filter(|d| d.class_id == class).cloned().collect();
    let gts: Vec<_> = val.ground_truth.iter().filter(|g| g.class_id == class).cloned().collect();
    let n_pos = gts.iter().filter(|g| !g.difficult).count();
    let labeled = label_detections(&dets, &gts, DEFAULT_IOU_THRESHOLD)?;
    let model = PriorModel::fit(
        class,
        "detector",
        &labeled,
        n_pos,
        Exponent::Auto { n_max: DEFAULT_N_MAX },
        DEFAULT_IOU_THRESHOLD,
    )?;
    println!(
        "{class}/detector: {} positives, {} detections, {} curve samples, n = {}",
        model.n_pos(),
        model.n_det(),
        model.samples().len(),
        model.n()
    );

    println!("\nscore  precision  recall   m_t     m_nt    m_amb");
    for s in [0.95, 0.8, 0.6, 0.4, 0.2, 0.05] {
        let (p, r) = model.lookup(s);
        let m = assign_masses(&model, Some(s));
        println!("{s:>5.2}  {p:>9.4}  {r:>6.4}  {:.4}  {:.4}  {:.4}", m.t, m.nt, m.amb);
    }

    let path = std::path::Path::new(&out_dir).join(io::prior_file_name(class, "detector"));
    io::write_prior_model(&model, &path)?;
    assert_eq!(io::read_prior_model(&path)?, model);
    println!("\nwrote {}", path.display());
    Ok(())
}
