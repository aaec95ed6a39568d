# Tests for robust_consensus
