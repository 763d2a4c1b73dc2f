#![no_main]

use attitude_manifolds::config::{model_to_config, Config};
use attitude_manifolds::ModelKind;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = Config::parse(text) else { return };
    for kind in [None, Some(ModelKind::S2), Some(ModelKind::SO3)] {
        if let Ok(model) = config.build_model(kind) {
            // a built model must survive its own serialization
            let again = Config::parse(&model_to_config(&model).to_string()).unwrap();
            assert_eq!(again.build_model(None).unwrap(), model);
        }
    }
});
