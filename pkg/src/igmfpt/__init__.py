"""First-passage and exit times of integrated Gauss-Markov processes."""
