"""Language-conditioned path prediction on top-down multimodal maps."""
