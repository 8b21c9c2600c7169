"""meshwalk: perpetual walkthrough-video synthesis on a progressively built mesh."""

__version__ = "0.1.0"
