"""Digital-twin decision support for a thermal-hydrolysis biosolids plant.

Forecast upstream inflows, compute an exact minimum-deviation reactor
schedule, then pick the cheapest quality-feasible operating point by
enumerating candidate scenarios against a trained regressor.
"""

__version__ = "0.1.0"
