import sys
from math import floor

import module_ as module_
import _dafny as _dafny
import System_ as System_

# Module: module_

class default__:
    def  __init__(self):
        pass

    @staticmethod
    def ScaleAdd(a, b, x):
        return ((a) * (x)) + (b)
