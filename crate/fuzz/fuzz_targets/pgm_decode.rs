#![no_main]

use gazekit::image::Image;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = Image::from_pgm_bytes(data) {
        assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let again = Image::from_pgm_bytes(&img.to_pgm_bytes()).unwrap();
        assert_eq!(again.side(), img.side());
    }
});
