"""Named experiments on the catalog models and counter-examples, plus config-driven custom runs."""
