"""Capability charts of four-wire reconfigurable power converters."""
