//! Replays the checked-in fuzz corpus through the same checks the fuzz
//! targets run, so regressions show up under plain `cargo test`.

use std::path::PathBuf;

use structmem::fuzz_checks;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

macro_rules! seed_test {
    ($name:ident) => {
        #[test]
        fn $name() {
            for (file, data) in seeds(stringify!($name)) {
                let r = std::panic::catch_unwind(|| fuzz_checks::$name(&data));
                assert!(r.is_ok(), "seed {file} failed");
            }
        }
    };
}

seed_test!(path_parse);
seed_test!(schema_descriptor);
seed_test!(dataclass_schema);
seed_test!(revisions);
seed_test!(amendment_log);
seed_test!(tokenize);

#[test]
fn every_target_has_seeds() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/fuzz_targets");
    for entry in std::fs::read_dir(dir).unwrap() {
        let name = entry
            .unwrap()
            .path()
            .file_stem()
            .unwrap()
            .to_string_lossy()
            .into_owned();
        seeds(&name);
    }
}
