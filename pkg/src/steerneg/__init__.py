"""Negativity bounds from EPR-steering data via moment-matrix relaxations."""
