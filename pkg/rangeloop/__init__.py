"""
RangeLoop
Yaw-invariant place recognition and loop-closure detection for rotating 3D LiDAR scans
"""

__version__ = "1.0.0"
