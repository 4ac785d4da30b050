fn main() {
    // System OpenBLAS provides LAPACK's dsyevd used for all symmetric
    // eigendecompositions.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
