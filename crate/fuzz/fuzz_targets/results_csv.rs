//! Result tables: anything that parses must re-emit and re-parse to the
//! same rows.

#![no_main]

use libfuzzer_sys::fuzz_target;
use srdsa::cli::{parse_csv, rows_to_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(rows) = parse_csv(text) else { return };
    let again = rows_to_csv(&rows).expect("rows serialize");
    let reparsed = parse_csv(&again).expect("emitted csv parses");
    // NaN never compares equal; compare the emitted text instead.
    assert_eq!(rows_to_csv(&reparsed).unwrap(), again);
});
