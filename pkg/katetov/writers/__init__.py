"""Output writers for katetov artifacts."""
