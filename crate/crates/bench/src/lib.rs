//! Shared fixtures for the benchmark targets.

use vetocore::generators::gen_random;
use vetocore::Election;

/// Two-bloc election: seven voters rank 1 > 2 > 3, five rank 2 > 1 > 3.
pub fn bloc_election() -> Election {
    Election::parse("12 3\n7: 1 2 3\n5: 2 1 3\n").expect("fixture parses")
}

pub fn random_election(n: usize, m: usize, seed: u64) -> Election {
    gen_random(n, m, seed).expect("fixture params valid")
}
