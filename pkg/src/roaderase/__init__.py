"""Road obstacle detection by erasing: sliding-window inpainting of the
drivable area, weighted patch fusion, a two-stream discrepancy network, and
ROI-restricted pixel-anomaly evaluation."""

__version__ = "0.1.0"
