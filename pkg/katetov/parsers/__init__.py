"""Input parsers for katetov artifacts."""
