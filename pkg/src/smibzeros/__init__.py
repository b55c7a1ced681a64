"""Small-signal zeros, POD tuning and time-domain checks for a
single-machine infinite-bus system."""

__version__ = "0.1.0"
