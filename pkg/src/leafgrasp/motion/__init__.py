"""Gantry kinematics, path planning and trajectory generation."""
