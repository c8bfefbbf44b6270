"""Poisson-equation solvers and checks for stochastically monotone Markov chains."""
