"""Configuration, logging, seeding and artifact helpers shared by the CLI and the library."""
