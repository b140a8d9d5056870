//! Configuration documents: parsing must either succeed with a validated
//! scenario or return an error, never panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(spec) = srdsa::cli::parse_config(text, None) {
            spec.base.validate().expect("parsed configs are valid");
        }
    }
});
