"""Slot-loop kernels for the relay simulation.

Two interchangeable backends advance the world state in place:

* ``numba``: a plain loop compiled with ``@njit``;
* ``numpy``: the same semantics, vectorised per slot.

Set ``HEXRELAY_DISABLE_NUMBA=1`` to force the numpy path.  Both paths give
bit-identical results; the test suite checks this.

Session relay codes (``s_relay``):
    >= 0  serving relay id
    -1    waiting for a relay (new, or blocked last attempt)
    -2    same-cell session, served by the base station directly
    -3    orphaned by a relay death in the current slot
"""
from __future__ import annotations

import os

import numpy as np

PENDING = -1
DIRECT = -2
ORPHAN = -3

# counters layout
N_ACTIVE, NEXT_SESSION, DELIVERED = 0, 1, 2

_FLAG = os.environ.get("HEXRELAY_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"

if USE_NUMBA:
    _jit = njit(cache=True)
else:
    def _jit(fn):
        return fn


# --------------------------------------------------------------------------
# loop kernel (compiled by numba unless disabled)

@_jit
def _assign_waiting(code, strategy, active, n, s_cand, s_relay, s_blocked, energy, a_hat,
                    death, load, capacity, dt):
    """Select relays, in session order, for every active session marked ``code``."""
    for k in range(n):
        i = active[k]
        if s_relay[i] != code:
            continue
        best = -1
        if strategy == 0:
            c = s_cand[i, 0]
            if death[c] < 0:
                best = c
        else:
            best_val = 0.0
            for j in range(3):
                c = s_cand[i, j]
                if death[c] >= 0:
                    continue
                if strategy == 1:
                    val = energy[c]
                else:
                    val = energy[c] + a_hat[c] * dt
                    if val < 0.0:
                        val = 0.0
                if best < 0 or val > best_val or (val == best_val and c < best):
                    best = c
                    best_val = val
            if best >= 0 and best_val <= 0.0:
                best = -1
        if best >= 0 and load[best] < capacity:
            s_relay[i] = best
            load[best] += 1
        else:
            s_relay[i] = -1
            s_blocked[i] = 1


@_jit
def _run_slots_loop(t0, t1, strategy, dt, p_idle, p_session, capacity, eps, dead_level,
                    energy, a_hat, var, last_e, death, load, drained,
                    s_start, s_end, s_cand, s_relay, s_blocked, active, counters):
    n_sess = s_start.shape[0]
    n_relay = energy.shape[0]
    n = counters[0]
    nxt = counters[1]
    delivered = counters[2]
    for t in range(t0, t1):
        # (1) sessions starting now
        while nxt < n_sess and s_start[nxt] <= t:
            active[n] = nxt
            n += 1
            nxt += 1
        # (2) relay selection for waiting sessions
        _assign_waiting(-1, strategy, active, n, s_cand, s_relay, s_blocked, energy, a_hat,
                        death, load, capacity, dt)
        # (3) delivery
        for k in range(n):
            r = s_relay[active[k]]
            if r >= 0 or r == -2:
                delivered += 1
        # (4) drain
        any_death = False
        for r in range(n_relay):
            if death[r] >= 0:
                continue
            e = energy[r] - (p_idle + p_session * load[r]) * dt
            if e <= dead_level:
                e = 0.0
            drained[r] += energy[r] - e
            energy[r] = e
            if e == 0.0:
                death[r] = t + 1
                load[r] = 0
                any_death = True
        if any_death:
            for k in range(n):
                i = active[k]
                r = s_relay[i]
                if r >= 0 and death[r] >= 0:
                    s_relay[i] = -3
        # (5) predictor step on post-drain energy
        for r in range(n_relay):
            if death[r] >= 0:
                continue
            a = (energy[r] - last_e[r]) / dt
            a_minus = a_hat[r]
            v_minus = var[r] + eps
            gain = v_minus / (v_minus + eps)
            a_hat[r] = a_minus + gain * (a - a_minus)
            var[r] = (1.0 - gain) * v_minus
            last_e[r] = energy[r]
        # (6) expiry
        m = 0
        for k in range(n):
            i = active[k]
            if s_end[i] == t + 1:
                r = s_relay[i]
                if r >= 0:
                    load[r] -= 1
            else:
                active[m] = i
                m += 1
        n = m
        # (7) orphans re-select
        if any_death:
            _assign_waiting(-3, strategy, active, n, s_cand, s_relay, s_blocked, energy,
                            a_hat, death, load, capacity, dt)
    counters[0] = n
    counters[1] = nxt
    counters[2] = delivered


# --------------------------------------------------------------------------
# vectorised numpy path

def _assign_numpy(strategy, idx, s_cand, s_relay, s_blocked, energy, a_hat, death, load,
                  capacity, dt):
    cand = s_cand[idx]
    if strategy == 0:
        first = cand[:, 0]
        choice = np.where(death[first] < 0, first, -1)
    else:
        if strategy == 1:
            val = energy[cand]
        else:
            val = np.maximum(energy[cand] + a_hat[cand] * dt, 0.0)
        val = np.where(death[cand] >= 0, -np.inf, val)
        best = val.max(axis=1)
        ids = np.where(val == best[:, None], cand, np.iinfo(np.int64).max).min(axis=1)
        choice = np.where(best > 0.0, ids, -1)

    s_relay[idx] = -1
    ok = choice >= 0
    sess, rel = idx[ok], choice[ok]
    admitted = np.zeros(len(idx), dtype=bool)
    if len(rel):
        # earlier sessions claim capacity first
        order = np.argsort(rel, kind="stable")
        rs = rel[order]
        new_group = np.r_[True, rs[1:] != rs[:-1]]
        group_start = np.maximum.accumulate(np.where(new_group, np.arange(len(rs)), 0))
        rank = np.arange(len(rs)) - group_start
        take = rank < (capacity - load[rs])
        s_relay[sess[order][take]] = rs[take]
        load += np.bincount(rs[take], minlength=len(load))
        admitted_ok = np.zeros(len(rel), dtype=bool)
        admitted_ok[order[take]] = True
        admitted[np.flatnonzero(ok)[admitted_ok]] = True
    s_blocked[idx[~admitted]] = 1


def _run_slots_numpy(t0, t1, strategy, dt, p_idle, p_session, capacity, eps, dead_level,
                     energy, a_hat, var, last_e, death, load, drained,
                     s_start, s_end, s_cand, s_relay, s_blocked, active, counters):
    nxt = int(counters[NEXT_SESSION])
    delivered = int(counters[DELIVERED])
    act = active[:counters[N_ACTIVE]].copy()
    n_relay = len(energy)
    for t in range(t0, t1):
        hi = int(np.searchsorted(s_start, t, side="right"))
        if hi > nxt:
            act = np.concatenate([act, np.arange(nxt, hi, dtype=act.dtype)])
            nxt = hi

        rel = s_relay[act]
        waiting = act[rel == PENDING]
        if len(waiting):
            _assign_numpy(strategy, waiting, s_cand, s_relay, s_blocked, energy, a_hat,
                          death, load, capacity, dt)
            rel = s_relay[act]
        delivered += int(np.count_nonzero((rel >= 0) | (rel == DIRECT)))

        alive = death < 0
        e = energy - (p_idle + p_session * load) * dt
        e = np.where(e <= dead_level, 0.0, e)
        e = np.where(alive, e, energy)
        drained += energy - e
        energy[:] = e
        died = alive & (e == 0.0)
        any_death = bool(died.any())
        if any_death:
            death[died] = t + 1
            load[died] = 0
            rel = s_relay[act]
            hit = (rel >= 0) & (death[np.maximum(rel, 0)] >= 0)
            s_relay[act[hit]] = ORPHAN

        live = death < 0
        a = (energy[live] - last_e[live]) / dt
        a_minus = a_hat[live]
        v_minus = var[live] + eps
        gain = v_minus / (v_minus + eps)
        a_hat[live] = a_minus + gain * (a - a_minus)
        var[live] = (1.0 - gain) * v_minus
        last_e[live] = energy[live]

        done = s_end[act] == t + 1
        if done.any():
            rel_done = s_relay[act[done]]
            load -= np.bincount(rel_done[rel_done >= 0], minlength=n_relay)
            act = act[~done]

        if any_death:
            orphans = act[s_relay[act] == ORPHAN]
            if len(orphans):
                _assign_numpy(strategy, orphans, s_cand, s_relay, s_blocked, energy, a_hat,
                              death, load, capacity, dt)

    active[:len(act)] = act
    counters[N_ACTIVE] = len(act)
    counters[NEXT_SESSION] = nxt
    counters[DELIVERED] = delivered


KERNELS = {"numpy": _run_slots_numpy}
if USE_NUMBA:
    KERNELS["numba"] = _run_slots_loop


def run_slots(*args, backend: str | None = None):
    """Advance the world arrays from slot ``t0`` up to (not including) ``t1``."""
    return KERNELS[backend or BACKEND](*args)
