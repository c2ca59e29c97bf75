"""Word-level primitives for the numba kernels.

All arithmetic is on ``np.uint64``; mixing in Python ints silently promotes to
float64 inside numba, so every constant used by a kernel lives here as a
``np.uint64``.
"""

import numpy as np
from llvmlite import ir
from numba import njit, types
from numba.core import cgutils
from numba.extending import intrinsic

U0 = np.uint64(0)
U1 = np.uint64(1)
U8 = np.uint64(8)
U32 = np.uint64(32)
U63 = np.uint64(63)
U64 = np.uint64(64)
MASK32 = np.uint64(0xFFFFFFFF)
MASK8 = np.uint64(0xFF)
ALL_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)


@intrinsic
def _mulhi128(typingctx, a, b):
    if a != types.uint64 or b != types.uint64:
        return None

    def codegen(context, builder, signature, args):
        i128 = ir.IntType(128)
        prod = builder.mul(builder.zext(args[0], i128), builder.zext(args[1], i128))
        return builder.trunc(builder.lshr(prod, ir.Constant(i128, 64)), ir.IntType(64))

    return types.uint64(types.uint64, types.uint64), codegen


@intrinsic
def _ctpop(typingctx, x):
    if x != types.uint64:
        return None

    def codegen(context, builder, signature, args):
        fn = cgutils.get_or_insert_function(
            builder.module, ir.FunctionType(ir.IntType(64), [ir.IntType(64)]), "llvm.ctpop.i64"
        )
        return builder.call(fn, [args[0]])

    return types.uint64(types.uint64), codegen


@intrinsic
def _cttz(typingctx, x):
    if x != types.uint64:
        return None

    def codegen(context, builder, signature, args):
        fn = cgutils.get_or_insert_function(
            builder.module,
            ir.FunctionType(ir.IntType(64), [ir.IntType(64), ir.IntType(1)]),
            "llvm.cttz.i64",
        )
        return builder.call(fn, [args[0], ir.Constant(ir.IntType(1), 0)])

    return types.uint64(types.uint64), codegen


@intrinsic
def _pdep(typingctx, src, mask):
    if src != types.uint64 or mask != types.uint64:
        return None

    def codegen(context, builder, signature, args):
        i64 = ir.IntType(64)
        fn = cgutils.get_or_insert_function(
            builder.module, ir.FunctionType(i64, [i64, i64]), "llvm.x86.bmi.pdep.64"
        )
        return builder.call(fn, [args[0], args[1]])

    return types.uint64(types.uint64, types.uint64), codegen


@intrinsic
def _prefetch(typingctx, arr, idx):
    if not isinstance(arr, types.Array) or not isinstance(idx, types.Integer):
        return None

    def codegen(context, builder, signature, args):
        aryty, _ = signature.args
        ary = context.make_array(aryty)(context, builder, args[0])
        ptr = cgutils.get_item_pointer(context, builder, aryty, ary, [args[1]])
        i32 = ir.IntType(32)
        ptrty = ptr.type
        fn = cgutils.get_or_insert_function(
            builder.module,
            ir.FunctionType(ir.VoidType(), [ptrty, i32, i32, i32]),
            "llvm.prefetch.p0",
        )
        # read, locality 3 (all cache levels), data cache
        builder.call(fn, [ptr, ir.Constant(i32, 0), ir.Constant(i32, 3), ir.Constant(i32, 1)])
        return context.get_dummy_value()

    return types.void(arr, idx), codegen


def _host_has_bmi2() -> bool:
    try:
        from llvmlite import binding as llvm

        feats = llvm.get_host_cpu_features()
        return bool(feats.get("bmi2", False))
    except Exception:
        return False


HAS_BMI2 = _host_has_bmi2()


@njit(inline="always", cache=True)
def mulhi_portable(a, b):
    a_lo = a & MASK32
    a_hi = a >> U32
    b_lo = b & MASK32
    b_hi = b >> U32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> U32) + (lh & MASK32) + (hl & MASK32)
    return hh + (lh >> U32) + (hl >> U32) + (mid >> U32)


@njit(inline="always", cache=True)
def mulhi(a, b):
    """Upper 64 bits of the 128-bit product ``a * b``."""
    return _mulhi128(a, b)


@njit(inline="always", cache=True)
def popcount(x):
    return _ctpop(x)


@njit(inline="always", cache=True)
def trailing_zeros(x):
    return _cttz(x)


@njit(inline="always", cache=True)
def prefetch(arr, i):
    _prefetch(arr, i)


@njit(inline="always", cache=True)
def select64_loop(w, i):
    """Position of the ``i``-th (0-based) set bit of ``w``; portable path."""
    for _ in range(i):
        w &= w - U1
    return _cttz(w)


if HAS_BMI2:

    @njit(inline="always", cache=True)
    def select64(w, i):
        return _cttz(_pdep(U1 << np.uint64(i), w))

else:
    select64 = select64_loop


@njit(inline="always", cache=True)
def select128(lo, hi, i):
    c = _ctpop(lo)
    if np.uint64(i) < c:
        return select64(lo, i)
    return U64 + select64(hi, np.uint64(i) - c)


@njit(inline="always", cache=True)
def select128_loop(lo, hi, i):
    c = _ctpop(lo)
    if np.uint64(i) < c:
        return select64_loop(lo, i)
    return U64 + select64_loop(hi, np.uint64(i) - c)
