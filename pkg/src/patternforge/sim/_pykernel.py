"""Pure-Python cycle loop, used when the compiled kernel is unavailable.

The combinational program is turned into Python source once per program
and executed over a plain list of ints.
"""

from __future__ import annotations

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_M64 = (1 << 64) - 1


def draw(state: int) -> tuple:
    """One splitmix64 step: ``(new_state, output)``."""
    state = (state + _GOLDEN) & _M64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _M64
    z = ((z ^ (z >> 27)) * _MIX2) & _M64
    return state, z ^ (z >> 31)


def _source(code, imm) -> str:
    lines = ["def comb(v, mem):"]
    for (op, dst, a, b, c), k in zip(code.tolist(), imm.tolist()):
        if op == 0:
            e = f"{k}"
        elif op == 1:
            e = f"v[{a}]"
        elif op in (2, 3, 4):
            e = f"v[{a}] {'&|^'[op - 2]} v[{b}]"
        elif op == 5:
            e = f"~v[{a}] & {k}"
        elif op == 6:
            e = f"int(v[{a}] == v[{b}])"
        elif op == 7:
            e = f"(v[{a}] + v[{b}]) & {k}"
        elif op == 8:
            e = f"(v[{a}] - v[{b}]) & {k}"
        elif op == 9:
            e = f"v[{b}] if v[{a}] else v[{c}]"
        elif op == 10:
            e = f"(v[{a}] >> {b}) & {k}"
        elif op == 11:
            e = f"(v[{a}] << {c}) | v[{b}]"
        else:
            e = f"mem[{b} + v[{a}]] if v[{a}] < {c} else 0"
        lines.append(f"    v[{dst}] = {e}")
    lines.append("    return None")
    return "\n".join(lines)


_cache: dict = {}


def _comb_fn(code, imm):
    key = (code.tobytes(), imm.tobytes())
    fn = _cache.get(key)
    if fn is None:
        scope: dict = {}
        exec(compile(_source(code, imm), "<comb>", "exec"), scope)
        fn = scope["comb"]
        if len(_cache) > 64:
            _cache.clear()
        _cache[key] = fn
    return fn


def run(v, code, imm, regs, memw, mem, src, sbuf, soff, slen, sthr, sseed, snk, kthr, kseed,
        drv, dbuf, wslots, max_cycles, idle_limit, min_cycles,
        src_cycles, snk_vals, snk_cycles, snk_count, src_count, wave_out):
    comb = _comb_fn(code, imm)
    vals = [int(x) for x in v]
    memory = [int(x) for x in mem]
    regs_l = [tuple(r) for r in regs.tolist()]
    memw_l = [tuple(r) for r in memw.tolist()]
    src_l = [tuple(r) for r in src.tolist()]
    snk_l = [tuple(r) for r in snk.tolist()]
    drv_l = [tuple(r) for r in drv.tolist()]
    sbuf_l, dbuf_l = sbuf.tolist(), dbuf.tolist()
    soff_l, slen_l, sthr_l, kthr_l = soff.tolist(), slen.tolist(), sthr.tolist(), kthr.tolist()
    sst, kst = [int(x) for x in sseed], [int(x) for x in kseed]
    wl = wslots.tolist()
    present = [False] * len(src_l)
    sidx = [0] * len(src_l)
    kfull = [False] * len(snk_l)
    counts = [0] * len(snk_l)
    scounts = [0] * len(src_l)
    s_stamps: dict = {}
    k_vals = [[] for _ in snk_l]
    k_cyc = [[] for _ in snk_l]
    waves = []
    cycles = idle = 0
    for t in range(max_cycles):
        for slot, off, n in drv_l:
            vals[slot] = dbuf_l[off + (t if t < n else n - 1)]
        for i, (e_s, d_s, _) in enumerate(src_l):
            sst[i], z = draw(sst[i])
            if not present[i] and sidx[i] < slen_l[i] and (z >> 32) >= sthr_l[i]:
                present[i] = True
            if e_s >= 0:
                vals[e_s] = 0 if present[i] else 1
            if d_s >= 0:
                vals[d_s] = sbuf_l[soff_l[i] + sidx[i]] if sidx[i] < slen_l[i] else 0
        for i, (f_s, _, _) in enumerate(snk_l):
            kst[i], z = draw(kst[i])
            kfull[i] = (z >> 32) < kthr_l[i]
            if f_s >= 0:
                vals[f_s] = int(kfull[i])
        comb(vals, memory)
        if wl:
            waves.append([vals[s] for s in wl])
        active = any(kfull)
        for i, (_, w_s, d_s) in enumerate(snk_l):
            if w_s >= 0 and vals[w_s]:
                active = True
                if not kfull[i]:
                    k_vals[i].append(vals[d_s] if d_s >= 0 else 0)
                    k_cyc[i].append(t)
                    counts[i] += 1
        for i, (_, _, r_s) in enumerate(src_l):
            if present[i] and r_s >= 0 and vals[r_s]:
                present[i] = False
                s_stamps[soff_l[i] + sidx[i]] = t
                sidx[i] += 1
                scounts[i] += 1
                active = True
        for en, a_s, d_s, base, depth in memw_l:
            if vals[en]:
                addr = vals[a_s]
                if addr < depth and memory[base + addr] != vals[d_s]:
                    memory[base + addr] = vals[d_s]
                    active = True
        nxt = [vals[n] for _, n in regs_l]
        for (s, _), x in zip(regs_l, nxt):
            if vals[s] != x:
                vals[s] = x
                active = True
        cycles = t + 1
        if idle_limit > 0:
            idle = 0 if active else idle + 1
            if (idle >= idle_limit and cycles >= min_cycles
                    and not any(present) and all(sidx[i] >= slen_l[i] for i in range(len(src_l)))):
                break

    v[:] = vals
    mem[:] = memory
    for pos, t in s_stamps.items():
        src_cycles[pos] = t
    for i in range(len(snk_l)):
        n = counts[i]
        snk_vals[i, :n] = k_vals[i]
        snk_cycles[i, :n] = k_cyc[i]
        snk_count[i] = n
    for i in range(len(src_l)):
        src_count[i] = scounts[i]
    if wl:
        wave_out[:len(waves)] = waves
    return cycles
