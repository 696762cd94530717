"""Optional imports for plot emission."""

import logging

logger = logging.getLogger(__name__)

# matplotlib imports
try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    MATPLOTLIB_AVAILABLE = True
except ImportError:
    plt = None
    MATPLOTLIB_AVAILABLE = False
    logger.warning("matplotlib not installed. SVG plots will not be generated.")
