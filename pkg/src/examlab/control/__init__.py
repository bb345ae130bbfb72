"""Operator surfaces: on-disk home, command line, HTTP API."""
