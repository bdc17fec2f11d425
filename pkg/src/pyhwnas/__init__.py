from .pyhwnas import pyhwnas
