import numpy as np
import pytest

import qsnn


def test_quantizer_scalars():
    assert qsnn.quant_state(1.4, 3) == 1.0
    assert qsnn.quant_state(7.0, 3) == 3.0
    assert qsnn.quant_grad_v(-0.1, 2) == 0.0
    assert qsnn.quant_grad_s(5.0, 2) == 2.0


def test_noise_adaptor_mean():
    q = qsnn.QuantAct(2, noise_adaptor=True, scale=0.5)
    v = np.full(100000, 0.3)
    out = q.na_forward(v, seed=1)
    assert set(np.unique(out)) <= {0.0, 0.5}
    assert abs(out.mean() - 0.3) < 4 * 0.25 / np.sqrt(v.size)
    assert np.array_equal(q.expected(np.array([-1.0, 0.3, 9.0])), [0.0, 0.3, 1.0])


def test_train_convert_simulate():
    x, y = qsnn.blobs(300, classes=3, dims=6, spread=0.03, seed=2)
    assert x.shape == (300, 6) and y.shape == (300,)
    net = qsnn.QuantNet.mlp([6, 16, 3], p=1, seed=1)
    hist = net.train(x, y, epochs=5, batch_size=32, lr_max=0.1)
    assert len(hist) == 5
    ann = net.forward(x)
    snn = qsnn.convert(net)
    res = qsnn.simulate(snn, x, y, T=1)
    assert np.array_equal(res["logits"][0], ann)
    assert max(res["residuals"]) <= 1e-9
    assert res["accuracy"][0] == pytest.approx(net.evaluate(x, y))


def test_unevenness_and_selftest():
    r = qsnn.unevenness_demo()
    assert (r["ann_state"], r["plain"], r["negative_spikes"], r["two_stage_offset"]) == (0, 1, 0, 0)
    assert all(ok for _, ok, _ in qsnn.selftest())


def test_errors_map_to_python():
    net = qsnn.QuantNet.mlp([4, 5, 2], p=2)
    with pytest.raises(qsnn.QsnnError, match="scale"):
        qsnn.convert(net)  # scales are set by the first training batch
    x, y = qsnn.blobs(40, classes=2, dims=4, seed=3)
    net.train(x, y, epochs=1)
    snn = qsnn.convert(net)
    with pytest.raises(ValueError):
        qsnn.simulate(snn, np.zeros((2, 3)), T=2)
    with pytest.raises(ValueError):
        qsnn.simulate(snn, np.zeros((2, 4)), T=2, correction="sometimes")
