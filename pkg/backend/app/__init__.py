"""Graph-observation routing lab.

Subpackages are organised by concern: graph generation, the routing
environment, the numpy differentiable core, recurrent message passing,
the supervised shortest-paths task, DQN agents and experiment services.
"""
