from . import types
from . import util
from . import numerics
from . import inclusion
from . import sampling
from . import channel
from . import generator
from . import symmetry
from . import gradientflow
from . import instances
from . import hash
from . import scanners
from . import cli
