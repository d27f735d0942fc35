#include <benchmark/benchmark.h>

#include "scenebench/attention.hpp"
#include "scenebench/judge.hpp"
#include "scenebench/metrics.hpp"
#include "scenebench/questions.hpp"
#include "scenebench/scene_graph.hpp"

using namespace scenebench;

namespace {

SceneGraph grid_graph(int objects) {
  SceneGraph::ObjectMap nodes;
  std::vector<Edge> edges;
  for (int i = 1; i <= objects; ++i) nodes.emplace(ObjectId::make("person", i), std::nullopt);
  for (int i = 1; i < objects; ++i) {
    edges.push_back({ObjectId::make("person", i), ObjectId::make("person", i + 1), "next to"});
  }
  return SceneGraph(std::move(nodes), std::move(edges));
}

void BM_MergedAttention(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 64;
  attn::MergeInputs in{attn::random_matrix(n, d, 1),
                       {attn::random_matrix(77, d, 2), attn::random_matrix(77, d, 3)},
                       {attn::random_matrix(n, d, 4), attn::random_matrix(n, d, 5)},
                       {attn::random_matrix(n, d, 6), attn::random_matrix(n, d, 7)},
                       0.5,
                       0.5};
  for (auto _ : state) benchmark::DoNotOptimize(attn::merged_attention(in));
}
BENCHMARK(BM_MergedAttention)->Arg(16)->Arg(64)->Arg(256);

void BM_ParseSceneGraph(benchmark::State& state) {
  const std::string text = to_annotation_json(grid_graph(static_cast<int>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(parse_scene_graph(text));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ParseSceneGraph)->Arg(4)->Arg(32)->Arg(256);

void BM_EvaluateSample(benchmark::State& state) {
  const auto g = grid_graph(static_cast<int>(state.range(0)));
  Judge judge(scripted_oracle(g));
  EvalParams params;
  auto v = default_relation_vocabulary();
  params.vocab = {v.begin(), v.end()};
  const auto image = ImageBlob::from_string("bench");
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_sample("bench", g, image, judge, params));
}
BENCHMARK(BM_EvaluateSample)->Arg(4)->Arg(12);

}  // namespace

BENCHMARK_MAIN();
