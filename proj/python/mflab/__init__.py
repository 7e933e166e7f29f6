"""Low-rank matrix sensing via deep factorization: Guess & Check vs gradient descent."""

try:
    from ._mflab import *  # noqa: F401,F403  (installed wheel layout)
    from ._mflab import __version__  # noqa: F401
except ImportError:  # in-tree builds put the extension next to the package on sys.path
    from _mflab import *  # noqa: F401,F403
    from _mflab import __version__  # noqa: F401
