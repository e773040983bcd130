"""Self-play generalization analysis via polymatrix decomposition."""
