#![no_main]

use attitude_manifolds::bundle::parse_csv_records;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_csv_records(data);
});
