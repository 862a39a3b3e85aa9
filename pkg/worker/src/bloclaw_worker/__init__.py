"""Worker-side runtime for the BloClaw sandbox.

Executes instrumented scripts, intercepts display calls, sweeps leftover
figure objects, and serves the builtin science probes. All captured output
is framed onto stdout as sentinel-prefixed artifact records.
"""

__version__ = "0.1.0"
