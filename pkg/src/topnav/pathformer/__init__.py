"""Transformer that maps an instruction and a fused top-down map to path/goal probabilities."""
