"""Process-level configuration, logging setup and the error hierarchy."""
