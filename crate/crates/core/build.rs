fn main() {
    // The eigensolver and the Gram-product kernels call into the system
    // OpenBLAS (which bundles LAPACK on Debian/Ubuntu images).
    println!("cargo:rustc-link-lib=dylib=openblas");
    println!("cargo:rerun-if-changed=build.rs");
}
