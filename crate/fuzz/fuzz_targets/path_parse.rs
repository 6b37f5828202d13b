#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| structmem::fuzz_checks::path_parse(data));
