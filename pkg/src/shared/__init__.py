"""Shared models, errors and configuration for the resource-state simulator."""
