import os
import sys

# prefer an installed package; fall back to the source tree
try:
    import anchorsum  # noqa: F401
except ImportError:
    sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
