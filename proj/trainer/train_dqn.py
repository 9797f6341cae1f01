"""Offline DQN trainer for the fixture networks.

Writes a weight file in the library's JSON format (17 significant digits).
The environments mirror include/certirl/envs/*.hpp; exact bitwise agreement
with the C++ simulators is not needed, only the same dynamics.

The committed fixtures came from:

    python3 trainer/train_dqn.py --env cartpole --out tests/fixtures/cartpole_dqn.json \
        --seed 0 --steps 160000 --updates 8 --eval-every 250 --lr 5e-4
    python3 trainer/train_dqn.py --env collision_avoidance --out tests/fixtures/collision_avoidance_dqn.json \
        --seed 0 --steps 480000 --updates 4 --eval-every 500 --lr 5e-4 --width 64 --gamma 0.99 --target-every 500
"""

import argparse
import copy
import json
import math

import numpy as np
import torch
import torch.nn as nn

CA_LAYOUT = "ego_frame_v1:goal_dx,goal_dy,r_ego,r_obs,obs_px,obs_py,obs_vx,obs_vy"


class VecCartpole:
    obs_dim, n_actions = 4, 2
    labels = ["left", "right"]

    def __init__(self, n, rng):
        self.n, self.rng = n, rng
        self.s = np.zeros((n, 4))
        self.t = np.zeros(n, dtype=int)
        self.reset(np.ones(n, dtype=bool))

    def reset(self, mask):
        self.s[mask] = self.rng.uniform(-0.05, 0.05, size=(mask.sum(), 4))
        self.t[mask] = 0

    def obs(self):
        return self.s.copy()

    def step(self, a):
        g, mc, mp, l, fmag, tau = 9.8, 1.0, 0.1, 0.5, 10.0, 0.02
        x, v, th, thd = self.s.T
        f = np.where(a == 1, fmag, -fmag)
        ct, st = np.cos(th), np.sin(th)
        tm, pm = mc + mp, mp * l
        temp = (f + pm * thd * thd * st) / tm
        tha = (g * st - ct * temp) / (l * (4.0 / 3.0 - mp * ct * ct / tm))
        xa = temp - pm * tha * ct / tm
        self.s = np.stack([x + tau * v, v + tau * xa, th + tau * thd, thd + tau * tha], axis=1)
        self.t += 1
        failed = (np.abs(self.s[:, 2]) > 12 * 2 * math.pi / 360) | (np.abs(self.s[:, 0]) > 2.4)
        timeout = self.t >= 200
        reward = np.ones(self.n)
        return reward, failed, failed | timeout


class VecCollisionAvoidance:
    obs_dim, n_actions = 8, 11
    labels = ["turn%+d" % (i - 5) for i in range(11)]
    dt, ego_speed, max_steps = 0.1, 1.0, 200

    def __init__(self, n, rng, lambdas=(0.0,), progress_bonus=0.0):
        self.n, self.rng = n, rng
        self.lambdas = np.asarray(lambdas, dtype=float)
        self.progress_bonus = progress_bonus
        z = lambda: np.zeros(n)
        self.ex, self.ey, self.eh, self.er = z(), z(), z(), z()
        self.gx, self.gy = z(), z()
        self.ox, self.oy, self.ovx, self.ovy, self.orad = z(), z(), z(), z(), z()
        self.ogx, self.ogy, self.ospeed, self.lam = z(), z(), z(), z()
        self.aiming = np.zeros(n, dtype=bool)
        self.t = np.zeros(n, dtype=int)
        self.reset(np.ones(n, dtype=bool))

    def reset(self, mask):
        r = self.rng
        k = int(mask.sum())
        if k == 0:
            return
        er = r.uniform(0.2, 0.5, k)
        orad = r.uniform(0.2, 0.5, k)
        gd = r.uniform(4.0, 8.0, k)
        bearing = r.uniform(-math.pi, math.pi, k)
        gx, gy = gd * np.cos(bearing), gd * np.sin(bearing)
        eh = bearing + r.uniform(-0.5, 0.5, k)
        ospeed = r.uniform(0.5, 1.0, k)
        frac = r.uniform(0.3, 0.7, k)
        px, py = frac * gx, frac * gy
        t_cross = frac * gd / self.ego_speed
        side = np.where(r.uniform(size=k) < 0.5, 1.0, -1.0)
        ang = bearing + side * r.uniform(math.pi / 6, math.pi, k)
        ux, uy = np.cos(ang), np.sin(ang)
        lead = np.maximum(ospeed * t_cross, 1.0)
        for _ in range(100):
            ox, oy = px - ux * lead, py - uy * lead
            close = np.hypot(ox, oy) < er + orad + 1.0
            if not close.any():
                break
            lead = lead + 0.5 * close
        ox, oy = px - ux * lead, py - uy * lead
        ogx, ogy = px + ux * lead, py + uy * lead
        self.ex[mask], self.ey[mask], self.eh[mask], self.er[mask] = 0.0, 0.0, eh, er
        self.gx[mask], self.gy[mask] = gx, gy
        self.ox[mask], self.oy[mask], self.orad[mask] = ox, oy, orad
        self.ogx[mask], self.ogy[mask], self.ospeed[mask] = ogx, ogy, ospeed
        vx, vy = self._toward(ox, oy, ogx, ogy, ospeed)
        self.ovx[mask], self.ovy[mask] = vx, vy
        self.lam[mask] = r.choice(self.lambdas, k)
        self.aiming[mask] = False
        self.t[mask] = 0

    def _toward(self, fx, fy, tx, ty, speed):
        dx, dy = tx - fx, ty - fy
        d = np.hypot(dx, dy)
        v = np.minimum(speed, d / self.dt)
        safe = np.where(d < 1e-9, 1.0, d)
        return np.where(d < 1e-9, 0.0, v * dx / safe), np.where(d < 1e-9, 0.0, v * dy / safe)

    def obs(self):
        c, s = np.cos(self.eh), np.sin(self.eh)
        rot = lambda x, y: (c * x + s * y, -s * x + c * y)
        gx, gy = rot(self.gx - self.ex, self.gy - self.ey)
        px, py = rot(self.ox - self.ex, self.oy - self.ey)
        vx, vy = rot(self.ovx, self.ovy)
        return np.stack([gx, gy, self.er, self.orad, px, py, vx, vy], axis=1)

    def _obstacle(self):
        tgx, tgy = self._toward(self.ox, self.oy, self.ogx, self.ogy, self.ospeed)
        evx, evy = self.ego_speed * np.cos(self.eh), self.ego_speed * np.sin(self.eh)
        vx, vy = tgx.copy(), tgy.copy()
        aiming = self.aiming.copy()
        # adversarial
        adv = self.lam < 0
        redraw = adv & (self.t % 10 == 0)
        aiming[redraw] = self.rng.uniform(size=int(redraw.sum())) < -self.lam[redraw]
        aiming &= adv
        ax, ay = self._toward(self.ox, self.oy, self.ex + evx, self.ey + evy, self.ospeed)
        vx = np.where(aiming, ax, vx)
        vy = np.where(aiming, ay, vy)
        # cooperative
        coop = self.lam > 0
        if coop.any():
            rx, ry = self.ox - self.ex, self.oy - self.ey
            wx, wy = tgx - evx, tgy - evy
            w2 = wx * wx + wy * wy
            ok = coop & (w2 >= 1e-12)
            w2s = np.where(w2 < 1e-12, 1.0, w2)
            ts = np.clip(-(rx * wx + ry * wy) / w2s, 0.0, 3.0)
            ok &= ts > 0
            mx, my = rx + wx * ts, ry + wy * ts
            miss = np.hypot(mx, my)
            need = self.er + self.orad + 0.2
            ok &= miss < need
            wn = np.sqrt(w2s)
            nx, ny = -wy / wn, wx / wn
            flip = nx * mx + ny * my < 0
            nx, ny = np.where(flip, -nx, nx), np.where(flip, -ny, ny)
            push = self.lam * (need - miss) / np.maximum(ts, self.dt)
            cvx, cvy = tgx + push * nx, tgy + push * ny
            sp = np.hypot(cvx, cvy)
            scale = np.where(sp > self.ospeed, self.ospeed / np.maximum(sp, 1e-12), 1.0)
            vx = np.where(ok, cvx * scale, vx)
            vy = np.where(ok, cvy * scale, vy)
        self.aiming = aiming
        return vx, vy

    def step(self, a):
        turn = -math.pi / 6 + a * (math.pi / 3 / 10)
        vx, vy = self._obstacle()
        self.ovx, self.ovy = vx, vy
        d_before = np.hypot(self.gx - self.ex, self.gy - self.ey)
        self.eh = np.remainder(self.eh + turn + math.pi, 2 * math.pi) - math.pi
        self.ex = self.ex + self.ego_speed * np.cos(self.eh) * self.dt
        self.ey = self.ey + self.ego_speed * np.sin(self.eh) * self.dt
        self.ox = self.ox + vx * self.dt
        self.oy = self.oy + vy * self.dt
        self.t += 1
        d_after = np.hypot(self.gx - self.ex, self.gy - self.ey)
        coll = np.hypot(self.ex - self.ox, self.ey - self.oy) < self.er + self.orad
        goal = ~coll & (d_after < self.er)
        timeout = ~coll & ~goal & (self.t >= self.max_steps)
        reward = np.where(coll, -0.25, np.where(goal, 1.0, 0.0))
        shaped = reward + self.progress_bonus * (d_before - d_after)
        self.last_outcome = np.where(coll, 2, np.where(goal, 1, np.where(timeout, 3, 0)))
        return shaped, coll | goal, coll | goal | timeout


def make_net(obs_dim, hidden, n_actions):
    layers, d = [], obs_dim
    for h in hidden:
        layers += [nn.Linear(d, h), nn.ReLU()]
        d = h
    layers.append(nn.Linear(d, n_actions))
    return nn.Sequential(*layers).double()


def export(net, env_cls, path, meta):
    linears = [m for m in net if isinstance(m, nn.Linear)]
    doc = {
        "input_dim": env_cls.obs_dim,
        "action_labels": env_cls.labels,
        "layers": [{"weights": l.weight.detach().numpy().tolist(), "bias": l.bias.detach().numpy().tolist()}
                   for l in linears],
        "meta": meta,
    }
    fmt = lambda x: format(x, ".17g")
    lines = ["{", '  "input_dim": %d,' % doc["input_dim"],
             '  "action_labels": [%s],' % ", ".join(json.dumps(s) for s in doc["action_labels"]), '  "layers": [']
    for k, l in enumerate(doc["layers"]):
        rows = ", ".join("[" + ", ".join(fmt(v) for v in r) + "]" for r in l["weights"])
        bias = ", ".join(fmt(v) for v in l["bias"])
        lines.append('    {"weights": [%s],\n     "bias": [%s]}%s' % (rows, bias, "," if k + 1 < len(doc["layers"]) else ""))
    lines.append("  ],")
    lines.append('  "meta": ' + json.dumps(meta))
    lines.append("}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def greedy_eval(net, env_cls, episodes, seed, **env_kw):
    env = env_cls(episodes, np.random.default_rng(seed), **env_kw)
    total = np.zeros(episodes)
    done = np.zeros(episodes, dtype=bool)
    outcome = np.zeros(episodes, dtype=int)
    while not done.all():
        with torch.no_grad():
            a = net(torch.from_numpy(env.obs())).argmax(1).numpy()
        r, _, d = env.step(a)
        if hasattr(env, "last_outcome"):
            outcome = np.where(~done & d, env.last_outcome, outcome)
            r = np.where(env.last_outcome == 2, -0.25, np.where(env.last_outcome == 1, 1.0, 0.0))
        total += np.where(done, 0.0, r)
        done |= d
    return total.mean(), outcome


def train(args):
    rng = np.random.default_rng(args.seed)
    torch.manual_seed(args.seed)
    if args.env == "cartpole":
        env_cls, hidden, env_kw = VecCartpole, [4, 4], {}
    else:
        env_cls, hidden = VecCollisionAvoidance, [args.width] * args.depth
        env_kw = {"lambdas": tuple(args.train_lambdas), "progress_bonus": args.progress_bonus}
    if args.hidden:
        hidden = args.hidden
    env = env_cls(args.envs, rng, **env_kw)
    q = make_net(env_cls.obs_dim, hidden, env_cls.n_actions)
    target = copy.deepcopy(q)
    opt = torch.optim.Adam(q.parameters(), lr=args.lr)

    cap = args.buffer
    B_s = np.zeros((cap, env_cls.obs_dim))
    B_a = np.zeros(cap, dtype=np.int64)
    B_r = np.zeros(cap)
    B_s2 = np.zeros((cap, env_cls.obs_dim))
    B_d = np.zeros(cap)
    ptr = size = 0

    best, best_score = copy.deepcopy(q), -1e9
    obs = env.obs()
    steps = 0
    while steps < args.steps:
        frac = min(1.0, steps / (args.explore_frac * args.steps))
        eps = 1.0 + frac * (args.eps_final - 1.0)
        with torch.no_grad():
            greedy = q(torch.from_numpy(obs)).argmax(1).numpy()
        rand = rng.integers(0, env_cls.n_actions, env.n)
        a = np.where(rng.uniform(size=env.n) < eps, rand, greedy)
        r, terminal, done = env.step(a)
        nxt = env.obs()
        idx = (ptr + np.arange(env.n)) % cap
        B_s[idx], B_a[idx], B_r[idx], B_s2[idx], B_d[idx] = obs, a, r, nxt, terminal
        ptr = (ptr + env.n) % cap
        size = min(size + env.n, cap)
        env.reset(done)
        obs = env.obs()
        steps += env.n

        if size >= args.batch:
            for _ in range(args.updates):
                j = rng.integers(0, size, args.batch)
                s = torch.from_numpy(B_s[j])
                s2 = torch.from_numpy(B_s2[j])
                with torch.no_grad():
                    a2 = q(s2).argmax(1, keepdim=True)
                    y = torch.from_numpy(B_r[j]) + args.gamma * (1 - torch.from_numpy(B_d[j])) * \
                        target(s2).gather(1, a2).squeeze(1)
                pred = q(s).gather(1, torch.from_numpy(B_a[j]).unsqueeze(1)).squeeze(1)
                loss = nn.functional.smooth_l1_loss(pred, y)
                opt.zero_grad()
                loss.backward()
                nn.utils.clip_grad_norm_(q.parameters(), 10.0)
                opt.step()
        if (steps // env.n) % args.target_every == 0:
            target.load_state_dict(q.state_dict())
        if (steps // env.n) % args.eval_every == 0:
            score, _ = greedy_eval(q, env_cls, args.eval_episodes, 12345, **{k: v for k, v in env_kw.items()
                                                                           if k == "lambdas"})
            print("step %d eps %.3f eval %.3f" % (steps, eps, score), flush=True)
            if score >= best_score:
                best_score, best = score, copy.deepcopy(q)

    score, outcome = greedy_eval(best, env_cls, 100, 777, **{k: v for k, v in env_kw.items() if k == "lambdas"})
    zero = best(torch.zeros(1, env_cls.obs_dim, dtype=torch.float64)).detach().numpy()[0].tolist()
    meta = {"env": args.env, "training_seed": args.seed, "greedy_eval_reward": score,
            "eval_episodes": 100, "forward_at_zero": zero, "hidden": hidden}
    if args.env == "collision_avoidance":
        meta["observation_layout"] = CA_LAYOUT
        meta["greedy_eval_goal_rate"] = float((outcome == 1).mean())
        meta["greedy_eval_collision_rate"] = float((outcome == 2).mean())
    export(best, env_cls, args.out, meta)
    print("exported %s eval %.3f" % (args.out, score))


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--env", choices=["cartpole", "collision_avoidance"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=200000)
    p.add_argument("--envs", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--gamma", type=float, default=0.99)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--updates", type=int, default=1)
    p.add_argument("--buffer", type=int, default=100000)
    p.add_argument("--explore-frac", type=float, default=0.3)
    p.add_argument("--eps-final", type=float, default=0.02)
    p.add_argument("--target-every", type=int, default=250)
    p.add_argument("--eval-every", type=int, default=500)
    p.add_argument("--eval-episodes", type=int, default=50)
    p.add_argument("--hidden", type=int, nargs="*")
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--train-lambdas", type=float, nargs="*", default=[0.0])
    p.add_argument("--progress-bonus", type=float, default=0.1)
    train(p.parse_args())


if __name__ == "__main__":
    main()
