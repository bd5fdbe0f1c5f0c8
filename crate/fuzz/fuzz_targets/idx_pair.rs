#![no_main]

use creff::data::decode_idx;
use libfuzzer_sys::fuzz_target;

// First byte picks the split point between the image and label files.
fuzz_target!(|data: &[u8]| {
    let Some((&split, rest)) = data.split_first() else {
        return;
    };
    let at = (split as usize * rest.len()) / 255;
    let (images, labels) = rest.split_at(at.min(rest.len()));
    if let Ok(ds) = decode_idx(images, labels) {
        assert_eq!(ds.len(), ds.labels().len());
        assert!(ds.inputs().as_slice().iter().all(|x| (0.0..=1.0).contains(x)));
    }
});
