"""ReLU network constructions, line-restriction analysis and piecewise-linear approximation bounds."""
