import sys

import module_ as module_
import _dafny as _dafny

# Module: module_

class default__:
    def  __init__(self):
        pass

    @staticmethod
    def BuildSeq(n):
        xs = [0] * (n)
        xs[0] = n
        return xs[0]
