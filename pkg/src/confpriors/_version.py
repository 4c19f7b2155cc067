"""Single source of the package version (mirrored in pyproject.toml)."""

VERSION = "0.1.0"
