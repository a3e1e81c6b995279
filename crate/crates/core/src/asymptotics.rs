//! Asymptotic analysis (placeholder).
