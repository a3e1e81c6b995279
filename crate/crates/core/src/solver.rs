//! Time integration (placeholder).
