#![no_main]

use attitude_manifolds::config::parse_state;
use attitude_manifolds::ModelKind;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for kind in [ModelKind::S2, ModelKind::SO3] {
        let _ = parse_state(kind, text);
    }
});
