fn main() {
    // lapack-sys only declares the symbols; the system OpenBLAS provides them.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
