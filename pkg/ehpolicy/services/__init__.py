from .utility import *
from .arrivals import *
from .policy import *
from .sim import *
from .bounds import *
from .dp import *
from .experiments import *
from .runs import *
