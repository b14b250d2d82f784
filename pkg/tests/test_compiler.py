import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binareye.isa import (
    CNNInstr,
    CompileError,
    FCInstr,
    IOInstr,
    LayerSpec,
    NetworkDescription,
    benchmark9,
    check_constraints,
    compile_network,
    format_net,
    parse_net,
)
from binareye.isa.compiler import (
    MemoryImage,
    pack_thresholds12,
    program_layer_weights,
    read_layer_region,
    unpack_thresholds12,
)
from binareye.isa.container import ContainerError, dumps, loads, read_container, write_container
from binareye.isa.netdesc import FC_SRAM_BYTES, WEIGHT_SRAM_BYTES, NetFormatError, layer_weight_bytes
from binareye.oracle.generate import max_depth, random_dense, random_network, random_params


def test_benchmark_capacity(bench_builds):
    image = bench_builds[1]["image"]
    assert len(image.weight_sram) == 8 * (32768 + 384) == 265216 == WEIGHT_SRAM_BYTES
    assert 265216 == 259 * 1024
    assert len(image.fc_sram) == 10 * 4096 // 8 == 5120 == FC_SRAM_BYTES


def test_extra_layer_overflows():
    net = benchmark9(1)
    bigger = NetworkDescription(net.layers[:1] + net.layers, 1, 32, 32)
    assert 9 * layer_weight_bytes(1) > WEIGHT_SRAM_BYTES
    assert any("weight SRAM overflow" in p for p in check_constraints(bigger))
    with pytest.raises(CompileError, match="weight SRAM overflow"):
        compile_network(bigger, random_params(bigger, np.random.default_rng(0)))


def test_minimal_depth_s4():
    net = NetworkDescription((LayerSpec("cnn"), LayerSpec("fc", classes=3)), 4, 4, 5)
    program, image = compile_network(net, random_params(net, np.random.default_rng(1)))
    assert len(program) == 4
    assert [type(i) for i in program] == [IOInstr, CNNInstr, FCInstr, IOInstr]
    assert program[2].feature_bits == 256 * 3 * 4


def test_check_constraints_examples():
    bad_f = NetworkDescription((LayerSpec("cnn", filters=100), LayerSpec("fc", classes=10)), 1)
    assert any("F must be 256/S" in p for p in check_constraints(bad_f))
    big = NetworkDescription(benchmark9(1).layers, 1, 33, 33)
    assert any("W x H up to 32x32" in p for p in check_constraints(big))
    assert check_constraints(benchmark9(1)) == []
    mixed = NetworkDescription((LayerSpec("cnn", s_mode=2), LayerSpec("fc", classes=2)), 1, 3, 3)
    assert any("one S per program" in p for p in check_constraints(mixed))
    shrink = NetworkDescription((LayerSpec("cnn"),) * 3, 1, 3, 3)
    assert any("spatial dims" in p for p in check_constraints(shrink))
    wide = NetworkDescription((LayerSpec("cnn"), LayerSpec("fc", classes=2)), 1, 6, 6)
    assert any("exceeds 4096" in p for p in check_constraints(wide))


def test_bank_alternation(bench_builds):
    program = bench_builds[2]["program"]
    cnns = [i for i in program if isinstance(i, CNNInstr)]
    assert cnns[0].in_bank.name == "WEST" and cnns[0].first_layer
    for a, b in zip(cnns, cnns[1:]):
        assert a.out_bank == b.in_bank and a.in_bank != a.out_bank
        assert not b.first_layer


def test_fourteen_layers_drop_io_out():
    inst = random_network(3, 14, 2)
    assert len(inst.program) == 16
    assert isinstance(inst.program[-1], FCInstr)


@pytest.mark.parametrize("s", [1, 2, 4])
def test_max_depth(s):
    assert max_depth(s) == (8 if s == 1 else 14)
    with pytest.raises(ValueError, match="infeasible"):
        random_dense(0, max_depth(s) + 1, s)


def test_threshold_packing_round_trip():
    rng = np.random.default_rng(2)
    v = rng.integers(-2048, 2048, size=256)
    data = pack_thresholds12(v)
    assert len(data) == 384
    np.testing.assert_array_equal(unpack_thresholds12(data, 256), v)
    with pytest.raises(CompileError, match="12-bit"):
        pack_thresholds12([2048, 0])


def test_first_layer_padding_is_zero(bench_builds):
    image = bench_builds[4]["image"]
    words, _ = read_layer_region(image.weight_sram, 0, 4)
    # channels 0..2 of sub-neuron 0 (words 0..3) only
    assert not words[..., 4:].any()
    assert not (words[..., :4] >> np.uint64(3)).any()


def test_packed_weights_decode_to_dense(bench_builds):
    b = bench_builds[2]
    from binareye.neuron_array import first_layer_weights

    layers = list(program_layer_weights(b["program"], b["image"]))
    assert len(layers) == 9
    dense_first = b["dense"].layers[0].weights
    got = first_layer_weights(layers[0][2].words).reshape(128, 3, 2, 2)
    np.testing.assert_array_equal(got, dense_first)


def test_memory_image_invariants():
    with pytest.raises(CompileError, match="overflow"):
        MemoryImage(bytes(WEIGHT_SRAM_BYTES + 1))
    from binareye.isa.compiler import LayerEntry

    with pytest.raises(CompileError, match="overlapping"):
        MemoryImage(bytes(1000), layers=(LayerEntry("cnn", 1, 0, 600), LayerEntry("cnn", 1, 512, 400)))


def test_shape_mismatch_rejected():
    net = benchmark9(4)
    dense = random_params(benchmark9(2), np.random.default_rng(0))
    with pytest.raises(CompileError):
        compile_network(net, dense)


def test_net_file_round_trip():
    net = benchmark9(2)
    assert parse_net(format_net(net)) == net
    with pytest.raises(NetFormatError, match="line 2"):
        parse_net("smode 1\nlayer cnn bogus=1\n")


def test_container_round_trip(bench_builds, tmp_path):
    image = bench_builds[1]["image"]
    blob = dumps(image)
    assert dumps(loads(blob)) == blob
    assert loads(blob) == image
    write_container(tmp_path / "w.bnry", image)
    assert (tmp_path / "w.bnry").read_bytes() == blob
    assert read_container(tmp_path / "w.bnry") == image


def test_container_truncated(bench_builds):
    blob = dumps(bench_builds[4]["image"])
    with pytest.raises(ContainerError, match=f"container truncated at byte {len(blob) - 7}"):
        loads(blob[:-7])
    with pytest.raises(ContainerError, match="truncated at byte 3"):
        loads(blob[:3])
    with pytest.raises(ContainerError, match="magic"):
        loads(b"XXXX" + blob[4:])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 2, 4]), st.data())
def test_compiled_programs_valid(seed, s, data):
    depth = data.draw(st.integers(1, max_depth(s)))
    inst = random_network(seed, depth, s)
    assert check_constraints(inst.net) == []
    assert len(inst.image.weight_sram) == depth * layer_weight_bytes(s)
    assert loads(dumps(inst.image)) == inst.image
