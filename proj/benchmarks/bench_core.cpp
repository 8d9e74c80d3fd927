#include <benchmark/benchmark.h>

#include <random>

#include "discloc/geometry.hpp"
#include "discloc/rpn.hpp"
#include "discloc/saliency.hpp"

using namespace discloc;

namespace {

std::vector<geometry::ScoredBox> random_boxes(std::size_t n, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> c(0.0, 500.0), s(8.0, 200.0), score(0.0, 1.0);
    std::vector<geometry::ScoredBox> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = c(rng), y = c(rng);
        out.push_back({{x, y, x + s(rng), y + s(rng)}, score(rng)});
    }
    return out;
}

Tensor3 random_features(std::size_t c, std::size_t h, std::size_t w) {
    std::mt19937 rng(1);
    std::uniform_real_distribution<float> d(0.0f, 1.0f);
    std::vector<float> v(c * h * w);
    for (auto& x : v) x = d(rng);
    return Tensor3(c, h, w, std::move(v));
}

saliency::SaliencyMap blob_map(std::size_t side) {
    saliency::SaliencyMap m;
    m.height = m.width = side;
    m.values.resize(side * side);
    const double mid = side / 2.0;
    for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x)
            m.values[y * side + x] = static_cast<float>(std::exp(-((y - mid) * (y - mid) + (x - mid) * (x - mid)) / (side * 2.0)));
    return m;
}

}  // namespace

static void BM_Iou(benchmark::State& state) {
    const auto boxes = random_boxes(1024, 3);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(geometry::iou(boxes[i & 1023].box, boxes[(i + 1) & 1023].box));
        ++i;
    }
}
BENCHMARK(BM_Iou);

static void BM_Nms(benchmark::State& state) {
    const auto boxes = random_boxes(static_cast<std::size_t>(state.range(0)), 5);
    for (auto _ : state) benchmark::DoNotOptimize(geometry::nms_indices(boxes, 0.7, 300));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Nms)->RangeMultiplier(4)->Range(256, 16384)->Complexity();

static void BM_Anchors(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(geometry::generate_anchors(38, 50));
}
BENCHMARK(BM_Anchors);

static void BM_Cam(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    const auto f = random_features(c, 14, 14);
    const Matrix2 w(200, c, std::vector<float>(200 * c, 0.01f));
    for (auto _ : state) benchmark::DoNotOptimize(saliency::compute_cam(f, w, 3));
}
BENCHMARK(BM_Cam)->Arg(512)->Arg(1024);

static void BM_PredictClass(benchmark::State& state) {
    const auto f = random_features(1024, 14, 14);
    const Matrix2 w(200, 1024, std::vector<float>(200 * 1024, 0.01f));
    for (auto _ : state) benchmark::DoNotOptimize(saliency::predict_class(f, w));
}
BENCHMARK(BM_PredictClass);

static void BM_Otsu(benchmark::State& state) {
    const auto m = blob_map(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(saliency::otsu_threshold(m));
}
BENCHMARK(BM_Otsu)->Arg(224)->Arg(448);

static void BM_LargestComponent(benchmark::State& state) {
    const auto m = blob_map(448);
    const auto mask = saliency::binarize(m, saliency::otsu_threshold(m));
    for (auto _ : state) benchmark::DoNotOptimize(saliency::largest_component(mask));
}
BENCHMARK(BM_LargestComponent);

static void BM_PseudoBox(benchmark::State& state) {
    saliency::SaliencyMap small = blob_map(14);
    for (auto _ : state) benchmark::DoNotOptimize(saliency::extract_pseudo_box(small, 448, 448));
}
BENCHMARK(BM_PseudoBox);

static void BM_LabelAnchors(benchmark::State& state) {
    const auto grid = geometry::generate_anchors(38, 50);
    for (auto _ : state)
        benchmark::DoNotOptimize(rpn::label_anchors(grid, {100, 120, 400, 380}, geometry::ImageSize{600, 800}));
}
BENCHMARK(BM_LabelAnchors);

static void BM_RoiPool(benchmark::State& state) {
    const auto f = random_features(512, 38, 50);
    for (auto _ : state) benchmark::DoNotOptimize(geometry::roi_pool(f, {64, 48, 500, 400}, 16.0, 7, 7));
}
BENCHMARK(BM_RoiPool);
BENCHMARK_MAIN();
