#![no_main]

use libfuzzer_sys::fuzz_target;
use scbf::noise::SeedManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = SeedManifest::parse(text) {
        // keep regeneration cheap; longer windows are rejected or merely slow
        let steps = ((m.t_end - m.t_start) / m.dt).abs().max((m.t_start / m.dt).abs()).max((m.t_end / m.dt).abs());
        if steps < 1e5 && m.modes.len() <= 8 {
            if let Ok(p) = m.regenerate() {
                assert_eq!(p.n_modes(), m.modes.len());
            }
        }
    }
});
