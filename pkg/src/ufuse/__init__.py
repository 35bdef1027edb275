"""Multi-view ultrasonic DAS imaging and learned segmentation fusion."""

__version__ = "0.1.0"
