"""Default values for every tunable, in one place.

Values marked "stated" come from the method description; the rest are
calibration choices for the synthetic desk-scale setup and can be
overridden through a ``key = value`` config file (see ``cli``).
"""

from __future__ import annotations

# detection (stated: window, ROI size, theta1)
WINDOW_DT = 0.005
ROI_W = 80
THETA0 = 0.15
THETA1 = 0.8
MEDIAN_KERNEL = 3
DBSCAN_EPS = 0.02
DBSCAN_MIN_PTS = 4
GATE_DEPTH_NEAR = 1.5
GATE_DEPTH_FAR = 4.0

# evaluation (stated: tolerance, horizon)
DETECTION_EPS_PX = 5.0
HORIZON = 0.2

# measurement (stated: ball radius)
BALL_RADIUS = 0.02
BATCHES = 1

# prediction
POLY_DEGREE = 2
COLLOCATION_GRID = 10
INTEGRATION_DT = 0.001
EKF_JERK_PSD = 50.0
EKF_POS_SIGMA = 0.02
EKF_VEL_SIGMA = 0.5

# physics (stated: ball mass, radius, drag coefficient, air density)
MASS = 0.0027
DRAG_COEFF = 0.4
AIR_DENSITY = 1.225
GRAVITY = (0.0, 0.0, -9.81)
RESTITUTION = 0.85
TABLE_HEIGHT = -0.5

# camera
FX = FY = 667.0
CX, CY = 320.0, 240.0
WIDTH, HEIGHT = 640, 480
MOUNT_PITCH = 0.3

# audio segmentation
AUDIO_CUTOFF_HZ = 1000.0
AUDIO_ORDER = 4
AUDIO_MIN_SEPARATION = 0.06
AUDIO_PEAK_FRACTION = 0.25
AUDIO_HIT_RATIO = 0.85
