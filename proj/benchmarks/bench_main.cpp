// Microbenchmarks for the hot paths: convolution forward/backward, the
// Householder orthonormalization, and a full variance-normalization pass
// over the small desk preset.

#include <benchmark/benchmark.h>

#include <cstddef>
#include <vector>

#include "initlab/dataset.hpp"
#include "initlab/init.hpp"
#include "initlab/layers.hpp"
#include "initlab/linalg.hpp"
#include "initlab/network.hpp"
#include "initlab/presets.hpp"
#include "initlab/rng.hpp"
#include "initlab/tensor.hpp"

using namespace initlab;

namespace {

Tensor random_tensor(const Shape& shape, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t(shape);
    for (double& v : t) {
        v = rng.normal();
    }
    return t;
}

void BM_ConvForward(benchmark::State& state) {
    const std::size_t channels = static_cast<std::size_t>(state.range(0));
    ConvSpec conv;
    conv.kernel_h = conv.kernel_w = 3;
    conv.in_channels = channels;
    conv.out_channels = channels;
    conv.pad = 1;
    Network net = Network::build({conv}, {channels, 16, 16});
    Rng rng(1);
    init_msra(net, rng);
    const Tensor input = random_tensor({32, channels, 16, 16}, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(net.forward(input, true).data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 32 * channels *
                            channels * 9 * 16 * 16);
}

void BM_ConvBackward(benchmark::State& state) {
    const std::size_t channels = static_cast<std::size_t>(state.range(0));
    ConvSpec conv;
    conv.kernel_h = conv.kernel_w = 3;
    conv.in_channels = channels;
    conv.out_channels = channels;
    conv.pad = 1;
    Network net = Network::build({conv}, {channels, 16, 16});
    Rng rng(1);
    init_msra(net, rng);
    const Tensor input = random_tensor({32, channels, 16, 16}, 2);
    net.forward(input, true);
    const Tensor grad = random_tensor(net.blob(0).shape(), 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(net.backward(grad).input_grad.data());
    }
}

void BM_Orthonormalize(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const Tensor base = random_tensor({n, 4 * n}, 4);
    for (auto _ : state) {
        Tensor w = base;
        orthonormalize(w);
        benchmark::DoNotOptimize(w.data());
    }
}

void BM_LsuvDeskPreset(benchmark::State& state) {
    PresetOptions opt;
    opt.activation = ActivationKind::kRelu;
    opt.n_classes = 10;
    const std::vector<LayerSpec> specs = make_preset("fitnet4-desk", {3, 8, 8}, opt);
    Rng data_rng(7);
    const Dataset data = synthetic_blobs(10, {3, 8, 8}, 26, 4.0, data_rng);
    const Tensor batch = take_batch(data, 0, 256).images;
    for (auto _ : state) {
        Network net = Network::build(specs, {3, 8, 8});
        Rng rng(1);
        const LsuvReport report = lsuv(net, batch, LsuvOptions{}, rng);
        benchmark::DoNotOptimize(report.layers.data());
    }
}

}  // namespace

BENCHMARK(BM_ConvForward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Orthonormalize)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LsuvDeskPreset)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
