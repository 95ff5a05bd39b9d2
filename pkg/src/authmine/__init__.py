"""Authorization-check mining and inconsistency detection over a small textual IR."""
