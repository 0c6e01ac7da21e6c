from ._sharpecast import *  # noqa: F401,F403
from ._sharpecast import __version__  # noqa: F401
