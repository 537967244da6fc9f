"""Leaderless synchronous BFT consensus over multi-hop relay channels.

Subpackages: ``topology`` (link matrix and k-hop reachability),
``signing`` (pluggable digests/signatures), ``protocol`` (the two-phase
state machine), ``simnet`` (seeded discrete-event simulator),
``tolerance`` (exhaustive fault-permutation boundary engine) and
``analytics`` (regression table, extrapolation patterns, closed-form
tolerance bounds).
"""

ARTIFACT_VERSION = "0.1.0"
