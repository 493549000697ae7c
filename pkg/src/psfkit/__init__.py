"""psfkit: a process-algebra toolkit — parse modular algebraic
specifications, explore their labelled transition systems, check behavioural
equivalences and refinements, and drive interactive simulations over a
message bus."""

__version__ = "0.1.0"
