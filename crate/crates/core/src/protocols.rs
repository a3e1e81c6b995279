//! Experiment drivers (placeholder).
