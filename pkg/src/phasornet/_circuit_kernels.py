"""Forward-Euler integration loop for the circuit backend.

The numba path runs one fused loop over neurons and their synapses per time
step; the numpy path performs the same arithmetic with vectorized array ops
and a heapq-based event queue. Both must produce bit-identical rasters.

Delayed spike deliveries live in a binary min-heap of (time, synapse,
repeats-left) entries. Generator (input/reference) volleys are periodic: one
entry per synapse is kept in flight and re-pushed with time + T while repeats
remain. Deliveries reset the synapse oscillator on the grid point at or
after the arrival time; spike timestamps are linearly interpolated between
grid points.
"""

import heapq

import numpy as np

from ._kernels import njit

GRID_EPS = 1e-9


@njit(cache=True)
def _heap_push(ht, hs, hr, size, t, s, r):
    i = size
    ht[i] = t
    hs[i] = s
    hr[i] = r
    while i > 0:
        p = (i - 1) // 2
        if ht[p] <= ht[i]:
            break
        ht[p], ht[i] = ht[i], ht[p]
        hs[p], hs[i] = hs[i], hs[p]
        hr[p], hr[i] = hr[i], hr[p]
        i = p
    return size + 1


@njit(cache=True)
def _heap_pop(ht, hs, hr, size):
    last = size - 1
    ht[0] = ht[last]
    hs[0] = hs[last]
    hr[0] = hr[last]
    i = 0
    while True:
        left = 2 * i + 1
        right = left + 1
        smallest = i
        if left < last and ht[left] < ht[smallest]:
            smallest = left
        if right < last and ht[right] < ht[smallest]:
            smallest = right
        if smallest == i:
            break
        ht[smallest], ht[i] = ht[i], ht[smallest]
        hs[smallest], hs[i] = hs[i], hs[smallest]
        hr[smallest], hr[i] = hr[i], hr[smallest]
        i = smallest
    return last


@njit(cache=True)
def program_generators_numba(seg_start, gen_offsets, n_cycles, out_ptr, out_syn,
                             syn_delay, heap_t, heap_s, heap_r, heap_size):
    hsize = heap_size[0]
    for g in range(gen_offsets.shape[0]):
        t_first = seg_start + gen_offsets[g]
        for oi in range(out_ptr[g], out_ptr[g + 1]):
            s = out_syn[oi]
            hsize = _heap_push(heap_t, heap_s, heap_r, hsize,
                               t_first + syn_delay[s], s, n_cycles - 1)
    heap_size[0] = hsize


@njit(cache=True)
def run_segment_numba(t0, n_steps, dt, period,
                      g_l, g_c, v_l, c_m, tau_d, l_res, w_spike, inv_tau_s, v_th,
                      syn_ptr, syn_w, syn_delay, out_ptr, out_syn, n_gen,
                      vm, vdbar, refr, vs, ws, vm_max,
                      heap_t, heap_s, heap_r, heap_size,
                      ev_time, ev_neuron, ev_count,
                      rec_ids, rec_vm):
    n = vm.shape[0]
    hsize = heap_size[0]
    ecount = ev_count[0]
    for k in range(n_steps):
        now = t0 + k * dt
        while hsize > 0 and heap_t[0] <= now + GRID_EPS:
            t = heap_t[0]
            s = heap_s[0]
            r = heap_r[0]
            hsize = _heap_pop(heap_t, heap_s, heap_r, hsize)
            vs[s] = 0.0
            ws[s] = w_spike
            if r > 0:
                hsize = _heap_push(heap_t, heap_s, heap_r, hsize, t + period, s, r - 1)
        for ni in range(n):
            vd = 0.0
            for s in range(syn_ptr[ni], syn_ptr[ni + 1]):
                vd += syn_w[s] * vs[s]
            for s in range(syn_ptr[ni], syn_ptr[ni + 1]):
                v_old = vs[s]
                w_old = ws[s]
                vs[s] = v_old - dt * (w_old / c_m)
                ws[s] = w_old + dt * (v_old / l_res - w_old * inv_tau_s)
            vm_old = vm[ni]
            vm_new = vm_old + dt * (g_l * (v_l - vm_old)
                                    + g_c * (vd - vm_old - vdbar[ni])) / c_m
            vdbar[ni] = vdbar[ni] + dt * (vd - vdbar[ni]) / tau_d
            if not np.isfinite(vm_new):
                heap_size[0] = hsize
                ev_count[0] = ecount
                return ni, k
            if refr[ni] == 0 and vm_old < v_th and vm_new >= v_th:
                frac = (v_th - vm_old) / (vm_new - vm_old)
                tstar = now + dt * frac
                ev_time[ecount] = tstar
                ev_neuron[ecount] = ni
                ecount += 1
                refr[ni] = 1
                src = n_gen + ni
                for oi in range(out_ptr[src], out_ptr[src + 1]):
                    s2 = out_syn[oi]
                    hsize = _heap_push(heap_t, heap_s, heap_r, hsize,
                                       tstar + syn_delay[s2], s2, 0)
            elif refr[ni] == 1 and vm_new < 0.0:
                refr[ni] = 0
            vm[ni] = vm_new
            if vm_new > vm_max[ni]:
                vm_max[ni] = vm_new
        for ri in range(rec_ids.shape[0]):
            rec_vm[k, ri] = vm[rec_ids[ri]]
    heap_size[0] = hsize
    ev_count[0] = ecount
    return -1, n_steps


# ---------------------------------------------------------------------------
# Pure-numpy fallback. The heap is a Python heapq of (time, synapse, repeats).
# ---------------------------------------------------------------------------


def program_generators_numpy(seg_start, gen_offsets, n_cycles, out_ptr, out_syn,
                             syn_delay, heap):
    for g in range(gen_offsets.shape[0]):
        t_first = seg_start + gen_offsets[g]
        for oi in range(out_ptr[g], out_ptr[g + 1]):
            s = int(out_syn[oi])
            heapq.heappush(heap, (t_first + syn_delay[s], s, n_cycles - 1))


def run_segment_numpy(t0, n_steps, dt, period,
                      g_l, g_c, v_l, c_m, tau_d, l_res, w_spike, inv_tau_s, v_th,
                      syn_ptr, syn_w, syn_delay, out_ptr, out_syn, n_gen,
                      vm, vdbar, refr, vs, ws, vm_max,
                      heap, syn_owner,
                      events, rec_ids, rec_vm):
    n = vm.shape[0]
    for k in range(n_steps):
        now = t0 + k * dt
        while heap and heap[0][0] <= now + GRID_EPS:
            t, s, r = heapq.heappop(heap)
            vs[s] = 0.0
            ws[s] = w_spike
            if r > 0:
                heapq.heappush(heap, (t + period, s, r - 1))
        vd = np.bincount(syn_owner, weights=syn_w * vs, minlength=n)
        vs_old = vs.copy()
        vs -= dt * (ws / c_m)
        ws += dt * (vs_old / l_res - ws * inv_tau_s)
        vm_old = vm.copy()
        vm += dt * (g_l * (v_l - vm_old) + g_c * (vd - vm_old - vdbar)) / c_m
        vdbar += dt * (vd - vdbar) / tau_d
        if not np.all(np.isfinite(vm)):
            return int(np.flatnonzero(~np.isfinite(vm))[0]), k
        crossing = (refr == 0) & (vm_old < v_th) & (vm >= v_th)
        for ni in np.flatnonzero(crossing):
            frac = (v_th - vm_old[ni]) / (vm[ni] - vm_old[ni])
            tstar = now + dt * frac
            events.append((float(tstar), int(ni)))
            refr[ni] = 1
            src = n_gen + ni
            for oi in range(out_ptr[src], out_ptr[src + 1]):
                s2 = int(out_syn[oi])
                heapq.heappush(heap, (tstar + syn_delay[s2], s2, 0))
        clearing = (refr == 1) & (vm < 0.0) & ~crossing
        refr[clearing] = 0
        np.maximum(vm_max, vm, out=vm_max)
        if rec_ids.shape[0]:
            rec_vm[k, :] = vm[rec_ids]
    return -1, n_steps
