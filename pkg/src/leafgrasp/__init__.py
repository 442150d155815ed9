"""Leaf selection, grasp-point scoring and gantry motion planning for
microneedle leaf sampling, plus the cartridge reload state machine and a
synthetic scene oracle for testing the whole chain."""

__version__ = "0.1.0"
