#![no_main]

use attitude_manifolds::bundle::BundleMeta;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(meta) = BundleMeta::parse(text) else { return };
    let _ = meta.build_model();
    let _ = meta.equilibrium_id();
    let _ = meta.grid();
});
