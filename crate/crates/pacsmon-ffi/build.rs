use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(std::env::var("CARGO_MANIFEST_DIR").expect("manifest dir"));
    let header = crate_dir.join("include").join("pacsmon.h");
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let config = match cbindgen::Config::from_file(crate_dir.join("cbindgen.toml")) {
        Ok(config) => config,
        Err(err) => {
            println!("cargo:warning=cbindgen.toml unreadable, keeping committed header: {err}");
            return;
        }
    };
    let bindings = match cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
    {
        Ok(bindings) => bindings,
        Err(err) => {
            println!("cargo:warning=cbindgen skipped, keeping committed header: {err}");
            return;
        }
    };
    let mut generated = Vec::new();
    bindings.write(&mut generated);

    // Refresh the committed header only when it actually changed; a
    // read-only source tree keeps working off the committed copy.
    if std::fs::read(&header).map(|current| current == generated).unwrap_or(false) {
        return;
    }
    let write = || -> std::io::Result<()> {
        std::fs::create_dir_all(header.parent().expect("include dir"))?;
        std::fs::write(&header, &generated)
    };
    if let Err(err) = write() {
        println!("cargo:warning=could not refresh {}: {err}", header.display());
    }
}
