#![no_main]

use gazekit::manifest::parse_manifest_line;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok((rec, label)) = parse_manifest_line(line) {
        assert!(label.yaw().abs() <= std::f64::consts::PI);
        assert!(!rec.image.is_empty());
    }
});
