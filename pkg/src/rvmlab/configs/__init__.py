"""Default YAML configurations shipped with the command line."""
