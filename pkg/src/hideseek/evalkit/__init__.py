"""Run directories, transfer runs, sweeps, traces and learning curves."""
