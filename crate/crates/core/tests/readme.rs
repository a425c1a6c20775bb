//! The README's library example, kept compiling and true.

use vetocore::distortion::distortion_utilitarian;
use vetocore::veto_core::compute_core_set;
use vetocore::{CandidateId, DistortionConfig, Election};

#[test]
fn library_example() -> Result<(), Box<dyn std::error::Error>> {
    let e = Election::parse("12 3\n7: 1 2 3\n5: 2 1 3\n")?;
    let core = compute_core_set(&e, 2)?;
    assert!(core.contains(&CandidateId(0)));

    let d = distortion_utilitarian(&e, CandidateId(0), &DistortionConfig::default())?;
    if let Some(v) = d.value.finite() {
        println!("distortion {v}");
    }
    assert!(d.value.is_finite());
    Ok(())
}
