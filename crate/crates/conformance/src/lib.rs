//! Holds the `acceptance` test target. Run it with
//! `cargo test -p polypos-conformance --test acceptance`.
