"""Link-pool queuing analysis and invisible screen-to-camera signalling for smart signage."""

__version__ = "0.1.0"
