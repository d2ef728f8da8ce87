//! Builders (placeholder).
