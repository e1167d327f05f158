//! Fuzzes the records CSV reader: arbitrary input must produce Ok or a CSV
//! error, never a panic.

#![no_main]

use bench_cli::records::read_records_from_str;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = read_records_from_str(text);
    }
});
