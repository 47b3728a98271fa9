import logging

from .config import LOG_LEVEL

ROOT_NAME = "morita-lab"


def get_logger(name=ROOT_NAME):
    """Return a logger under the morita-lab root; the root owns the only handler."""
    root = logging.getLogger(ROOT_NAME)
    if not root.handlers:
        h = logging.StreamHandler()
        fmt = logging.Formatter("%(asctime)s %(levelname)s %(name)s - %(message)s")
        h.setFormatter(fmt)
        root.addHandler(h)
        root.setLevel(LOG_LEVEL)
        root.propagate = False
    if name == ROOT_NAME:
        return root
    return root.getChild(name)


def set_level(level):
    """Change the level of the whole morita-lab tree (used by the CLI --verbose flag)."""
    get_logger().setLevel(level)


logger = get_logger()
