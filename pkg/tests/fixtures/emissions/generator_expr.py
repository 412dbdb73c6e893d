import sys

import module_ as module_
import _dafny as _dafny

# Module: module_

class default__:
    def  __init__(self):
        pass

    @staticmethod
    def SumSquares(n):
        return sum(i * i for i in range(n))
