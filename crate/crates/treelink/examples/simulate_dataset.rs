//! Simulates two surveys of a stand and writes them in the on-disk layout
//! read by the command line tool.

use treelink::eval::{read_dataset, write_dataset};
use treelink::sim::{generate_dataset, SimConfig};

fn main() -> treelink::Result<()> {
    let config = SimConfig {
        window_side: 60.0,
        domain_side: 90.0,
        seed: 7,
        ..SimConfig::default()
    };
    let d = generate_dataset(&config)?;

    println!("window {:?}", d.domain);
    println!("latents {}  recruits {}", d.truth.latents.len(), d.truth.recruits.len());
    println!("survey {}: {} records", d.first.year, d.first.len());
    println!("survey {}: {} records", d.second.year, d.second.len());
    println!("second survey offset t = ({:.2}, {:.2}), theta = {}", d.truth.t.x, d.truth.t.y, d.truth.theta);

    let vols: Vec<f64> = d.first.records.iter().map(|r| r.volume).collect();
    let mean = vols.iter().sum::<f64>() / vols.len() as f64;
    let max = vols.iter().copied().fold(0.0, f64::max);
    println!("first-survey volume: mean {mean:.1} m3, max {max:.1} m3");

    let dir = std::env::temp_dir().join("treelink-simulated");
    write_dataset(&d, &dir)?;
    let back = read_dataset(&dir)?;
    assert_eq!(back.first, d.first);
    assert_eq!(back.truth, d.truth.links);
    println!("wrote {}", dir.display());
    Ok(())
}
