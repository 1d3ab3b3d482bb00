"""Quick end-to-end check of the wrs_stream extension module."""

import wrs_stream as wrs

WEIGHTS = [1.0, 1.0, 1.0, 2.0]


def inclusion(make, trials=20000):
    counts = [0] * len(WEIGHTS)
    for t in range(trials):
        s = make(t)
        for i, w in enumerate(WEIGHTS):
            s.feed(f"item{i + 1}", w)
        for ident, _, _ in s.sample():
            counts[int(ident[4:]) - 1] += 1
    return [c / trials for c in counts]


def close(a, b, tol):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def main():
    exact_p = wrs.exact_wrs_n_p(WEIGHTS, 2)
    exact_w = wrs.exact_wrs_n_w(WEIGHTS, 2)
    assert close(exact_p, [0.4, 0.4, 0.4, 0.8], 1e-12), exact_p
    assert close(exact_w, [13 / 30] * 3 + [0.7], 1e-9), exact_w

    for jumps in (False, True):
        got = inclusion(lambda t: wrs.ChaoSampler(2, seed=t, jumps=jumps))
        assert close(got, exact_p, 0.03), got
        got = inclusion(lambda t: wrs.EsSampler(2, seed=t, jumps=jumps))
        assert close(got, exact_w, 0.03), got

    es = wrs.EsSampler(3, seed=1)
    for i in range(10):
        es.feed(f"x{i}", i + 1.0, b"payload")
    assert len(es.sample(ordered=True)) == 3
    assert es.rng_draws == 10 and es.threshold is not None

    r = wrs.ReplacementSampler(4, seed=2, backend="es")
    p = wrs.PipelineSampler(4, k=2, seed=2)
    for i, w in enumerate(WEIGHTS):
        r.feed(f"item{i + 1}", w)
        p.feed(f"item{i + 1}", w)
    assert sum(m for _, _, m in r.sample()) == 4
    assert all(m <= 2 for _, _, m in p.sample())

    assert abs(wrs.remark1_estimate(1.0, 2.0, 200000) - 2 / 3) < 0.005
    assert wrs.law_gap(WEIGHTS + [1.0] * 4, 2) < wrs.law_gap(WEIGHTS, 2)

    try:
        wrs.ChaoSampler(2).feed("bad", -1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative weight accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
