"""Cross-layer PHY+MAC simulator and analytics for 802.11n/ac/ah studies."""

__version__ = "0.1.0"
