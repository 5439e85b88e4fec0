#![no_main]

use libfuzzer_sys::fuzz_target;
use scbf::grid::snapshot;

fuzz_target!(|data: &[u8]| {
    if let Ok(v) = snapshot::decode(data) {
        // accepted snapshots re-encode to the same bytes
        assert_eq!(snapshot::encode(&v), data);
    }
});
