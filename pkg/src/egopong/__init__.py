"""Event-camera table-tennis ball detection and trajectory forecasting.

Modules:

* ``core``: domain types, errors, camera geometry
* ``synth``: synthetic flights and event streams with exact ground truth
* ``detect``: foveated, motion-compensated ball detection per window
* ``measure``: circle fitting and depth from apparent size
* ``predict``: monotone regression, physics propagation, EKF bootstrapping
* ``evalharness``: detection, impact and latency evaluation protocols
* ``segment``: audio peak detection for rally segmentation
* ``cli``: the ``egopong`` command
"""

from __future__ import annotations

__version__ = "0.1.0"
