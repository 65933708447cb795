"""Independent reference computations shared by the unit and acceptance tests."""

import math

import numpy as np
import torch

from hideseek.nn import layers as L
from hideseek.nn.gradcheck import check_gradients

F64 = torch.float64


def _t(rng, *shape, scale=1.0):
    return torch.tensor(rng.normal(0, scale, shape), dtype=F64, requires_grad=True)


def _proj(rng, shape):
    """Random fixed projection so the scalar loss touches every output."""
    return torch.tensor(rng.normal(0, 1, shape), dtype=F64)


def fd_dense(rng):
    n, d_in, d_out = int(rng.integers(1, 9)), int(rng.integers(1, 17)), int(rng.integers(1, 17))
    x, W, b = _t(rng, n, d_in), _t(rng, d_in, d_out), _t(rng, d_out)
    P = _proj(rng, (n, d_out))
    return max(check_gradients(lambda: (L.dense(x, W, b) * P).sum(), {"x": x, "W": W, "b": b}).values())


def fd_layernorm(rng):
    n, d = int(rng.integers(1, 6)), int(rng.integers(2, 17))
    x, g, b = _t(rng, n, d), _t(rng, d), _t(rng, d)
    P = _proj(rng, (n, d))
    return max(check_gradients(lambda: (L.layernorm(x, g, b) * P).sum(), {"x": x, "g": g, "b": b}).values())


def fd_conv(rng):
    c_in, c_out, k = int(rng.integers(1, 4)), int(rng.integers(1, 5)), int(rng.choice([1, 3, 5]))
    length = int(rng.integers(k, 31))
    x, W, b = _t(rng, 2, c_in, length), _t(rng, c_out, c_in, k), _t(rng, c_out)
    P = _proj(rng, (2, c_out, length))
    return max(check_gradients(lambda: (L.circular_conv1d(x, W, b) * P).sum(),
                               {"x": x, "W": W, "b": b}).values())


def fd_lstm(rng, steps=10):
    d, hdim, B = int(rng.integers(1, 5)), int(rng.integers(1, 5)), 2
    xs = _t(rng, steps, B, d)
    h0, c0 = _t(rng, B, hdim, scale=0.5), _t(rng, B, hdim, scale=0.5)
    Wx, Wh, b = _t(rng, d, 4 * hdim, scale=0.5), _t(rng, hdim, 4 * hdim, scale=0.5), _t(rng, 4 * hdim)
    P = _proj(rng, (steps, B, hdim))

    def loss():
        out, h, c = L.lstm_unroll(xs, h0, c0, Wx, Wh, b)
        return (out * P).sum() + c.sum()

    return max(check_gradients(loss, {"xs": xs, "h0": h0, "c0": c0, "Wx": Wx, "Wh": Wh, "b": b}).values())


def fd_attention(rng):
    B, N, d = 2, int(rng.integers(1, 7)), int(rng.integers(2, 9))
    heads, hd = int(rng.integers(1, 3)), int(rng.integers(1, 4))
    x = _t(rng, B, N, d)
    mask = torch.tensor(rng.random((B, N)) < 0.7)
    mask[:, 0] = True
    p = {"q": _t(rng, d, heads * hd), "k": _t(rng, d, heads * hd), "v": _t(rng, d, heads * hd),
         "out_w": _t(rng, heads * hd, d), "out_b": _t(rng, d)}
    P = _proj(rng, (B, N, d))
    inputs = dict(p, x=x)
    return max(check_gradients(lambda: (L.masked_self_attention(x, mask, p, heads) * P).sum(),
                               inputs).values())


def fd_pool(rng):
    B, N, d = 2, int(rng.integers(1, 8)), int(rng.integers(1, 6))
    x = _t(rng, B, N, d)
    mask = torch.tensor(rng.random((B, N)) < 0.6)
    P = _proj(rng, (B, d))
    return max(check_gradients(lambda: (L.masked_mean_pool(x, mask) * P).sum(), {"x": x}).values())


LAYER_TRIALS = {
    "dense": fd_dense,
    "layernorm": fd_layernorm,
    "circular_conv1d": fd_conv,
    "lstm": fd_lstm,
    "masked_self_attention": fd_attention,
    "masked_mean_pool": fd_pool,
}


# --- GAE --------------------------------------------------------------------------

def gae_bruteforce(rewards, values, dones, bootstrap, gamma, lam):
    """Direct double loop: for each t sum (gamma*lam)^l * delta_{t+l} until the
    episode ends or the window runs out."""
    T = len(rewards)
    v_next = list(values[1:]) + [bootstrap]
    adv = np.zeros(T)
    for t in range(T):
        total = 0.0
        for l in range(T - t):
            k = t + l
            nxt = 0.0 if dones[k] else v_next[k]
            delta = rewards[k] + gamma * nxt - values[k]
            total += (gamma * lam) ** l * delta
            if dones[k]:
                break
        adv[t] = total
    return adv, adv + np.asarray(values, dtype=np.float64)


# --- PPO micro-instance -----------------------------------------------------------

def ppo_micro_instance(rng, steps=10):
    """Two agents, three entities (one agent, one box, one ramp), tiny float64 nets."""
    from hideseek.envs.observation import ENTITY_DIMS, Observation, SELF_DIM
    from hideseek.policy import ActionDist, PolicyConfig, PolicyNet, ValueNet
    from hideseek.ppo import Chunk, stack_chunks

    cfg = PolicyConfig(embed=4, mlp=4, lstm=3, heads=1, head_dim=2, conv_channels=1,
                       entity_types=("agent", "box", "ramp"), seed=int(rng.integers(1 << 30)))
    pol, val = PolicyNet(cfg), ValueNet(cfg)
    pol.store.astype(F64)
    val.store.astype(F64)

    def obs():
        ents = {t: rng.normal(size=(1, ENTITY_DIMS[t])) for t in cfg.entity_types}
        vis = {t: np.array([rng.random() < 0.7]) for t in cfg.entity_types}
        return Observation(rng.normal(size=SELF_DIM), rng.random(30), ents, vis)

    chunks = []
    for _ in range(2):
        mask = np.ones(steps, bool)
        mask[steps - int(rng.integers(0, 3)):] = False
        resets = rng.random(steps) < 0.15
        chunks.append(Chunk(
            obs=[obs() for _ in range(steps)],
            actions=np.concatenate([rng.integers(0, 5, (steps, 3)), rng.integers(0, 2, (steps, 2))], 1),
            logp=np.zeros(steps), rewards=rng.normal(size=steps), values=rng.normal(size=steps),
            adv=rng.normal(size=steps), ret=rng.normal(size=steps), mask=mask, resets=resets,
            pol_state=(rng.normal(size=3) * 0.5, rng.normal(size=3) * 0.5),
            val_state=(rng.normal(size=3) * 0.5, rng.normal(size=3) * 0.5)))
    x = stack_chunks(chunks, cfg.entity_types, dtype=F64)
    # old log-probs put every ratio at 1 or clearly inside a clipped region,
    # so no ratio sits on a clip corner
    with torch.no_grad():
        cat, binl, _, _ = pol.forward(x.batch, x.pol_state, T=steps, resets=x.resets)
        cur = ActionDist(cat, binl).log_prob(x.actions)
    offs = torch.tensor(rng.choice([0.0, 0.6, -0.6], size=cur.shape), dtype=F64)
    x.logp_old = cur + offs
    return pol, val, x


def kink_safe_derivative(f, t, i, steps=(1e-5, 1e-6, 1e-7), tol=0.1):
    """Central difference with the largest step whose stencil is smooth.

    ReLU and clip corners make f piecewise smooth. A stencil that straddles a
    corner is rejected when its left and right one-sided slopes disagree; the
    step then shrinks. The test never looks at the analytic gradient.
    """
    flat = t.data.view(-1)
    old = flat[i].item()

    def at(v):
        flat[i] = v
        with torch.no_grad():
            return float(f())

    f0 = at(old)
    for h in steps:
        fp, fm = at(old + h), at(old - h)
        fp2, fm2 = at(old + h / 2), at(old - h / 2)
        flat[i] = old
        c1, c2 = (fp - fm) / (2 * h), (fp2 - fm2) / h
        rich = (4 * c2 - c1) / 3
        # one-sided slopes differ by h*f'' on a smooth stencil, so the gap halves
        # with the step; across a corner it stays put
        gap, gap2 = (fp + fm - 2 * f0) / h, (fp2 + fm2 - 2 * f0) / (h / 2)
        noise = 1e-14 * max(abs(f0), 1.0) / h
        if abs(gap - 2 * gap2) <= tol * abs(gap) + 10 * noise:
            return rich, h
    return rich, h


def fd_ppo_loss(rng, n_coords=16, detail=False):
    """Central differences of the full PPO loss at random (tensor, coordinate) pairs."""
    from hideseek.nn.gradcheck import max_relative_error
    from hideseek.ppo import ppo_loss

    pol, val, x = ppo_micro_instance(rng)
    names = [f"policy.{n}" for n in pol.store] + [f"value.{n}" for n in val.store]
    tensors = [t for _, t in pol.store.items()] + [t for _, t in val.store.items()]

    def f():
        return ppo_loss(pol, val, x)[0]

    grads = torch.autograd.grad(f(), tensors, allow_unused=True)
    worst, where = 0.0, None
    for k in rng.choice(len(tensors), size=n_coords):
        t, g = tensors[k], grads[k]
        g = torch.zeros_like(t) if g is None else g
        i = int(rng.integers(t.numel()))
        num, h = kink_safe_derivative(f, t, i)
        a = g.reshape(-1)[i:i + 1]
        err = max_relative_error(a, torch.tensor([num], dtype=F64))
        if err >= worst:
            worst, where = err, (names[k], i, float(a), num, h)
    return (worst, where) if detail else worst
