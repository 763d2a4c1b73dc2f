#![no_main]

use attitude_manifolds::bundle::parse_jsonl_records;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_jsonl_records(data);
});
