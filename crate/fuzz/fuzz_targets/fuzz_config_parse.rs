//! Fuzzes the `key = value` benchmark config parser: arbitrary input must
//! produce Ok or a structured error, never a panic.

#![no_main]

use bench_cli::config::BenchConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = BenchConfig::parse_str(text, BenchConfig::preset_desk());
    }
});
