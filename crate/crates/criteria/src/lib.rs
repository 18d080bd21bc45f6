//! The acceptance criteria run as `cargo test -p sample-transfer-criteria --test acceptance`.
