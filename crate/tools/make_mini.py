"""Generate the bundled mini dataset (data/mini/traffic.csv).

Five traffic classes with overlapping feature distributions and an
NSL-like imbalance. Deterministic for a fixed seed.
"""
import csv
import sys

import numpy as np

ROWS = {"normal": 1100, "dos": 600, "probe": 180, "r2l": 90, "u2r": 30}
RAW_LABELS = {
    "normal": ["normal"],
    "dos": ["neptune", "smurf", "back"],
    "probe": ["satan", "ipsweep", "portsweep"],
    "r2l": ["guess_passwd", "warezclient"],
    "u2r": ["buffer_overflow", "rootkit"],
}
# protocol weights (tcp, udp, icmp), flag weights (SF, S0, REJ)
PROFILE = {
    "normal": dict(proto=[0.8, 0.15, 0.05], flag=[0.9, 0.05, 0.05], dur=1.0, src=6.0, dst=7.0, count=(8, 4), serr=0.05, same=0.9),
    "dos": dict(proto=[0.7, 0.05, 0.25], flag=[0.2, 0.7, 0.1], dur=0.1, src=2.0, dst=0.5, count=(150, 60), serr=0.8, same=0.2),
    "probe": dict(proto=[0.5, 0.2, 0.3], flag=[0.3, 0.2, 0.5], dur=0.3, src=3.0, dst=2.0, count=(60, 30), serr=0.3, same=0.3),
    "r2l": dict(proto=[0.95, 0.05, 0.0], flag=[0.85, 0.05, 0.1], dur=3.0, src=5.0, dst=6.0, count=(5, 3), serr=0.1, same=0.8),
    "u2r": dict(proto=[1.0, 0.0, 0.0], flag=[0.9, 0.05, 0.05], dur=4.0, src=5.5, dst=7.5, count=(3, 2), serr=0.05, same=0.85),
}


def main(path, seed=7):
    rng = np.random.default_rng(seed)
    rows = []
    for cls, n in ROWS.items():
        p = PROFILE[cls]
        for _ in range(n):
            proto = rng.choice(["tcp", "udp", "icmp"], p=p["proto"])
            flag = rng.choice(["SF", "S0", "REJ"], p=p["flag"])
            dur = round(float(rng.exponential(p["dur"])), 3)
            src = int(rng.lognormal(p["src"], 1.0))
            dst = int(rng.lognormal(p["dst"], 1.2))
            count = max(0, int(rng.normal(*p["count"])))
            srv = max(0, int(count * rng.uniform(0.2, 1.0)))
            serr = round(float(np.clip(rng.normal(p["serr"], 0.15), 0, 1)), 2)
            same = round(float(np.clip(rng.normal(p["same"], 0.15), 0, 1)), 2)
            label = rng.choice(RAW_LABELS[cls])
            rows.append([dur, proto, flag, src, dst, count, srv, serr, same, label])
    order = rng.permutation(len(rows))
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["duration", "protocol", "flag", "src_bytes", "dst_bytes", "count", "srv_count", "serror_rate", "same_srv_rate", "label"])
        for i in order:
            w.writerow(rows[i])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/mini/traffic.csv")
