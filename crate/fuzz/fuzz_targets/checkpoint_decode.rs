#![no_main]

use gazekit::model::{decode_tensors, encode_tensors, GazeModel};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(named) = decode_tensors(data) {
        // Compare bytes: NaN payloads are legal but never equal themselves.
        let bytes = encode_tensors(&named);
        assert_eq!(encode_tensors(&decode_tensors(&bytes).unwrap()), bytes);
    }
    let _ = GazeModel::from_checkpoint_bytes(data);
});
