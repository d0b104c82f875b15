"""Multi-level graph coarsening, embedding and link-prediction evaluation."""
