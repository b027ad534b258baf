"""dcnsim: hybrid packet/flow-granularity network simulator for data-center
LLM-training traffic."""

__version__ = "0.1.0"
