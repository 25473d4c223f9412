"""Joint beamforming and power control for full-duplex small cells."""

__version__ = "0.1.0"
