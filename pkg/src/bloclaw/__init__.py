"""BloClaw: an agent workspace runtime for computational science.

Routes model output through a fault-tolerant tag-plus-charset directive
protocol, executes model-written code in an artifact-capturing sandbox,
ingests scientific files for context-augmented prompting, and streams
session events to an interactive viewport.
"""

__version__ = "0.1.0"
