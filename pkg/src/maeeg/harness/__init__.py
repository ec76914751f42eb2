"""Experiment harness: config files, experiment commands, SVG reports and the CLI."""
