"""
bisimagg: bisimulation metrics and state aggregation for finite MDPs.
"""
__version__ = "1.0.0"
