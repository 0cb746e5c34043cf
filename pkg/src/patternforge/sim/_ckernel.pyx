# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled cycle loop; mirrors ``_pykernel.run`` exactly."""

from libc.stdint cimport int64_t, uint64_t
from libc.stdlib cimport malloc, free

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9
cdef uint64_t MIX2 = 0x94D049BB133111EB


cdef inline uint64_t _draw(uint64_t* state) noexcept nogil:
    state[0] += GOLDEN
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


def run(uint64_t[::1] v, const int64_t[:, ::1] code, const uint64_t[::1] imm,
        const int64_t[:, ::1] regs, const int64_t[:, ::1] memw, uint64_t[::1] mem,
        const int64_t[:, ::1] src, const uint64_t[::1] sbuf, const int64_t[::1] soff,
        const int64_t[::1] slen, const uint64_t[::1] sthr, uint64_t[::1] sseed,
        const int64_t[:, ::1] snk, const uint64_t[::1] kthr, uint64_t[::1] kseed,
        const int64_t[:, ::1] drv, const uint64_t[::1] dbuf, const int64_t[::1] wslots,
        int64_t max_cycles, int64_t idle_limit, int64_t min_cycles,
        int64_t[::1] src_cycles, uint64_t[:, ::1] snk_vals, int64_t[:, ::1] snk_cycles,
        int64_t[::1] snk_count, int64_t[::1] src_count, uint64_t[:, ::1] wave_out):
    cdef Py_ssize_t ncode = code.shape[0], nreg = regs.shape[0], nmw = memw.shape[0]
    cdef Py_ssize_t ns = src.shape[0], nk = snk.shape[0], nd = drv.shape[0], nw = wslots.shape[0]
    cdef Py_ssize_t i, j
    cdef int64_t t, cycles = 0, idle = 0, op, dst, k
    cdef uint64_t a, addr, val
    cdef bint active, drained, full
    cdef uint64_t* tmp = <uint64_t*> malloc((nreg + 1) * sizeof(uint64_t))
    cdef char* present = <char*> malloc(ns + 1)
    cdef char* kfull = <char*> malloc(nk + 1)
    cdef int64_t* sidx = <int64_t*> malloc((ns + 1) * sizeof(int64_t))
    if tmp == NULL or present == NULL or kfull == NULL or sidx == NULL:
        free(tmp); free(present); free(kfull); free(sidx)
        raise MemoryError()
    for i in range(ns):
        present[i] = 0
        sidx[i] = 0
    try:
        with nogil:
            for t in range(max_cycles):
                for i in range(nd):
                    k = t if t < drv[i, 2] else drv[i, 2] - 1
                    v[drv[i, 0]] = dbuf[drv[i, 1] + k]
                for i in range(ns):
                    val = _draw(&sseed[i]) >> 32
                    if not present[i] and sidx[i] < slen[i] and val >= sthr[i]:
                        present[i] = 1
                    if src[i, 0] >= 0:
                        v[src[i, 0]] = 0 if present[i] else 1
                    if src[i, 1] >= 0:
                        v[src[i, 1]] = sbuf[soff[i] + sidx[i]] if sidx[i] < slen[i] else 0
                for i in range(nk):
                    val = _draw(&kseed[i]) >> 32
                    kfull[i] = val < kthr[i]
                    if snk[i, 0] >= 0:
                        v[snk[i, 0]] = kfull[i]

                for j in range(ncode):
                    op = code[j, 0]
                    dst = code[j, 1]
                    if op == 0:
                        v[dst] = imm[j]
                    elif op == 1:
                        v[dst] = v[code[j, 2]]
                    elif op == 2:
                        v[dst] = v[code[j, 2]] & v[code[j, 3]]
                    elif op == 3:
                        v[dst] = v[code[j, 2]] | v[code[j, 3]]
                    elif op == 4:
                        v[dst] = v[code[j, 2]] ^ v[code[j, 3]]
                    elif op == 5:
                        v[dst] = (~v[code[j, 2]]) & imm[j]
                    elif op == 6:
                        v[dst] = v[code[j, 2]] == v[code[j, 3]]
                    elif op == 7:
                        v[dst] = (v[code[j, 2]] + v[code[j, 3]]) & imm[j]
                    elif op == 8:
                        v[dst] = (v[code[j, 2]] - v[code[j, 3]]) & imm[j]
                    elif op == 9:
                        v[dst] = v[code[j, 3]] if v[code[j, 2]] else v[code[j, 4]]
                    elif op == 10:
                        v[dst] = (v[code[j, 2]] >> code[j, 3]) & imm[j]
                    elif op == 11:
                        v[dst] = (v[code[j, 2]] << code[j, 4]) | v[code[j, 3]]
                    else:
                        addr = v[code[j, 2]]
                        v[dst] = mem[code[j, 3] + addr] if addr < <uint64_t> code[j, 4] else 0

                for i in range(nw):
                    wave_out[t, i] = v[wslots[i]]

                # backpressure may be hiding pending work, so it is never idle
                active = False
                for i in range(nk):
                    if kfull[i]:
                        active = True
                    if snk[i, 1] >= 0 and v[snk[i, 1]]:
                        active = True
                        if not kfull[i]:
                            snk_vals[i, snk_count[i]] = v[snk[i, 2]] if snk[i, 2] >= 0 else 0
                            snk_cycles[i, snk_count[i]] = t
                            snk_count[i] += 1
                for i in range(ns):
                    if present[i] and src[i, 2] >= 0 and v[src[i, 2]]:
                        present[i] = 0
                        src_cycles[soff[i] + sidx[i]] = t
                        sidx[i] += 1
                        src_count[i] += 1
                        active = True

                for i in range(nmw):
                    if v[memw[i, 0]]:
                        addr = v[memw[i, 1]]
                        if addr < <uint64_t> memw[i, 4]:
                            val = v[memw[i, 2]]
                            if mem[memw[i, 3] + addr] != val:
                                mem[memw[i, 3] + addr] = val
                                active = True
                for i in range(nreg):
                    tmp[i] = v[regs[i, 1]]
                for i in range(nreg):
                    if v[regs[i, 0]] != tmp[i]:
                        v[regs[i, 0]] = tmp[i]
                        active = True

                cycles = t + 1
                if idle_limit > 0:
                    idle = 0 if active else idle + 1
                    if idle >= idle_limit and cycles >= min_cycles:
                        drained = True
                        for i in range(ns):
                            if present[i] or sidx[i] < slen[i]:
                                drained = False
                        if drained:
                            break
    finally:
        free(tmp); free(present); free(kfull); free(sidx)
    return cycles
