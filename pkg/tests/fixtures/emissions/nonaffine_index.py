import sys

import module_ as module_
import _dafny as _dafny

# Module: module_

class default__:
    def  __init__(self):
        pass

    @staticmethod
    def Gather(a: "int32[8]", n):
        t = 0
        for d_0_i_ in range(8):
            for d_1_j_ in range(8):
                t = (t) + (a[(d_0_i_) * (d_1_j_)])
        return t
