"""Cracking Aegis: a scenario-scripted adversarial dialogue game engine.

A human player tries to talk secrets out of Aegis, an LLM-driven guardian.
The engine owns everything the model cannot be trusted with: the turn
protocol, scene progression, session persistence and replay, and the
strategy coding of transcripts.
"""

__version__ = "0.1.0"
