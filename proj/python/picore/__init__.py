"""Physics-informed coreset selection for neural operator training."""

try:
    from ._picore import *  # noqa: F401,F403  (installed wheel layout)
    from ._picore import __version__  # noqa: F401
except ImportError:
    from _picore import *  # noqa: F401,F403  (in-tree build on PYTHONPATH)
    from _picore import __version__  # noqa: F401
