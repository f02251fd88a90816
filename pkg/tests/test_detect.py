import numpy as np
import pytest

from shapescene.detect import (
    Detection,
    extract_peaks,
    focal_loss,
    focal_loss_grad,
    gaussian_sigma,
    make_targets,
)

PRED_CLAMP = 1e-7


def _focal_loop_oracle(pred, target, n, alpha=2.0, beta=4.0):
    total = 0.0
    h, w, c = pred.shape
    for y in range(h):
        for x in range(w):
            for k in range(c):
                p = min(max(pred[y, x, k], PRED_CLAMP), 1.0 - PRED_CLAMP)
                t = target[y, x, k]
                if t == 1.0:
                    total += (1.0 - p) ** alpha * np.log(p)
                else:
                    total += (1.0 - t) ** beta * p ** alpha * np.log(1.0 - p)
    return -total / n


def test_gaussian_sigma_rule():
    assert gaussian_sigma(100.0, 80.0) == max(1.0, 80.0 / 24.0)
    assert gaussian_sigma(10.0, 10.0) == 1.0  # clamp
    with pytest.raises(ValueError):
        gaussian_sigma(0.0, 5.0)


def test_make_targets_peak_and_falloff():
    hm = make_targets([((5.0, 7.0), 0, 2.0)], (16, 16, 1))
    assert hm[7, 5, 0] == 1.0
    r2 = 3.0 ** 2
    assert abs(hm[7, 8, 0] - np.exp(-r2 / (2.0 * 4.0))) < 1e-12


def test_make_targets_max_merge():
    single_a = make_targets([((4.0, 4.0), 0, 1.5)], (12, 12, 1))
    single_b = make_targets([((6.0, 4.0), 0, 1.5)], (12, 12, 1))
    both = make_targets([((4.0, 4.0), 0, 1.5), ((6.0, 4.0), 0, 1.5)], (12, 12, 1))
    assert np.array_equal(both, np.maximum(single_a, single_b))


def test_make_targets_out_of_bounds():
    with pytest.raises(ValueError):
        make_targets([((20.0, 2.0), 0, 1.0)], (8, 8, 1))


def test_focal_loss_worked_example():
    pred = np.full((1, 1, 1), 0.5)
    target = np.ones((1, 1, 1))
    loss = focal_loss(pred, target, n_objects=1)
    assert abs(loss - (-(0.5 ** 2) * np.log(0.5))) < 1e-12
    assert abs(loss - 0.17329) < 1e-5


def test_focal_loss_perfect_limit():
    target = np.zeros((4, 4, 1))
    target[2, 2, 0] = 1.0
    loss = focal_loss(target.copy(), target, n_objects=1)
    assert 0.0 <= loss < 1e-5


def test_focal_loss_loop_oracle(rng):
    pred = rng.uniform(0.05, 0.95, size=(6, 5, 2))
    target = rng.uniform(0.0, 0.9, size=(6, 5, 2))
    target[1, 2, 0] = 1.0
    target[4, 3, 1] = 1.0
    loss = focal_loss(pred, target, n_objects=2)
    assert abs(loss - _focal_loop_oracle(pred, target, 2)) < 1e-10


def test_focal_loss_nonnegative_and_monotone(rng):
    target = make_targets([((3.0, 3.0), 0, 1.0)], (8, 8, 1))
    uniform = np.full_like(target, 0.5)
    prev = np.inf
    for lam in np.linspace(0.0, 1.0, 10):
        pred = (1.0 - lam) * uniform + lam * target
        loss = focal_loss(pred, target, n_objects=1)
        assert 0.0 <= loss <= prev + 1e-12
        prev = loss


def test_focal_loss_grad_fd(rng):
    pred = rng.uniform(0.1, 0.9, size=(5, 5, 1))
    target = rng.uniform(0.0, 0.9, size=(5, 5, 1))
    target[2, 2, 0] = 1.0
    grad = focal_loss_grad(pred, target, n_objects=1)
    eps = 1e-6
    for idx in [(0, 0, 0), (2, 2, 0), (4, 3, 0), (1, 4, 0)]:
        up = pred.copy()
        up[idx] += eps
        dn = pred.copy()
        dn[idx] -= eps
        fd = (focal_loss(up, target, 1) - focal_loss(dn, target, 1)) / (2 * eps)
        assert abs(grad[idx] - fd) / max(abs(fd), 1e-8) < 1e-4


def test_extract_peaks_single_gaussian():
    hm = make_targets([((6.0, 9.0), 0, 1.5)], (16, 16, 1)) * 0.9
    dets = extract_peaks(hm, tau=0.1)
    assert dets == [Detection(6, 9, 0, pytest.approx(0.9))]


def test_extract_peaks_threshold():
    hm = np.zeros((8, 8, 1))
    hm[3, 3, 0] = 0.05
    assert extract_peaks(hm, tau=0.1) == []
    assert len(extract_peaks(hm, tau=0.01)) == 1


def test_extract_peaks_five_planted():
    centers = [((2.0, 2.0), 0, 1.0), ((10.0, 2.0), 0, 1.0), ((2.0, 10.0), 1, 1.0),
               ((10.0, 10.0), 1, 1.0), ((6.0, 6.0), 0, 1.0)]
    hm = make_targets(centers, (16, 16, 2))
    dets = extract_peaks(hm, tau=1e-2)
    got = {(d.x, d.y, d.class_id) for d in dets}
    want = {(int(px), int(py), c) for (px, py), c, _ in centers}
    assert got == want


def test_extract_peaks_tie_keeps_lexicographic():
    hm = np.zeros((6, 6, 1))
    hm[2, 2, 0] = 0.5
    hm[2, 3, 0] = 0.5  # adjacent equal plateau
    dets = extract_peaks(hm, tau=0.1)
    assert len(dets) == 1
    assert (dets[0].y, dets[0].x) == (2, 2)


def test_extract_peaks_border():
    hm = np.zeros((6, 6, 1))
    hm[0, 0, 0] = 0.7
    dets = extract_peaks(hm, tau=0.1)
    assert dets == [Detection(0, 0, 0, 0.7)]
