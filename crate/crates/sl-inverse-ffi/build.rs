use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").expect("manifest dir"));
    let header = crate_dir.join("include").join("sl_inverse.h");
    // Regenerate the C header; if generation fails (e.g. parsing hiccups on
    // a newer toolchain), keep the committed copy instead of breaking the
    // build.
    match cbindgen::generate(&crate_dir) {
        Ok(bindings) => {
            bindings.write_to_file(header);
        }
        Err(e) => {
            println!("cargo:warning=keeping committed sl_inverse.h (cbindgen failed: {e})");
        }
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
