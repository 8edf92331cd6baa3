"""Goal-reaching and obstacle-avoidance dueling DQNs on a 2D lidar robot,
fused into one navigation policy by danger-aware adaptive composition."""

__version__ = "0.1.0"
