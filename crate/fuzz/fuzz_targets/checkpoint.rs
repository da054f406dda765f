#![no_main]

use libfuzzer_sys::fuzz_target;

use d2s_core::trainer::{infer, Checkpoint};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ckpt) = Checkpoint::from_json(text) {
        // A checkpoint that validates must be usable for inference.
        let g = ckpt.config.model.grid;
        if g > 256 {
            return;
        }
        let image = vec![0.5; g * g];
        infer(&ckpt, &[image.as_slice()]).unwrap();
    }
});
