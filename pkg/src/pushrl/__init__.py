"""Decentralized push-based actor/buffer/learner RL training with a throughput planner."""

__version__ = "0.1.0"
