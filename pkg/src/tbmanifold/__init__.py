"""Manifold estimation from a tangent bundle learner."""
