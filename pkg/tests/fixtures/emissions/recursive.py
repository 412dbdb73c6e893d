import sys

import module_ as module_
import _dafny as _dafny

# Module: module_

class default__:
    def  __init__(self):
        pass

    @staticmethod
    def Factorial(n):
        if (n) <= (1):
            return 1
        return (n) * (default__.Factorial((n) - (1)))
