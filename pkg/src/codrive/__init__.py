"""Cooperative multi-agent DDPG driving on a 2D track with VANET parameter sharing."""

__version__ = "0.1.0"
