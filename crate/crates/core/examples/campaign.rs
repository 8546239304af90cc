//! Loads a campaign file and runs one command through the library, the way
//! the CLI does.

use molcomm_noma::experiments::{run, CampaignConfig, Command};

fn main() -> molcomm_noma::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/campaign.toml");
    let mut cfg = CampaignConfig::load(path.as_ref())?;
    cfg.out = std::env::temp_dir().join("molcomm-campaign-example");
    let outcome = run(Command::Analytic, &cfg)?;
    for note in &outcome.notes {
        println!("{note}");
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
