#pragma once

// Instance generators, dataset files and checkpoint serialization.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "refinecsp/csp.hpp"
#include "refinecsp/graph.hpp"
#include "refinecsp/model.hpp"
#include "refinecsp/rng.hpp"
#include "refinecsp/train.hpp"

namespace refinecsp {

WeightedGraph gen_erdos_renyi(std::size_t n, double p, Rng& rng);
/// Preferential attachment grown from a clique on `m_attach` vertices.
WeightedGraph gen_barabasi_albert(std::size_t n, std::size_t m_attach, Rng& rng);
/// Uniform points in the unit square, edge iff distance <= r.
WeightedGraph gen_geometric(std::size_t n, double r, Rng& rng);

enum class ProblemKind { sudoku, coloring, nurse, maxcut };
enum class GraphFamily { erdos_renyi, barabasi_albert, geometric };

std::string to_string(ProblemKind k);
ProblemKind parse_problem(const std::string& s);
std::string to_string(GraphFamily f);
GraphFamily parse_family(const std::string& s);

/// k = max(3, min(10, k' - 1)).
int colors_from_greedy(int greedy_colors);

struct InstanceRecord {
  CspInstance instance;
  std::optional<WeightedGraph> graph;  // coloring and maxcut
  std::optional<GraphFamily> family;
  int colors = 0;         // coloring: k the instance is posed with
  int greedy_colors = 0;  // coloring: k' found by greedy coloring
  std::array<int, 4> nurse{};  // days, shifts, per_shift, nurses
  std::optional<Assignment> initial;
};

struct DatasetManifest {
  ProblemKind problem = ProblemKind::coloring;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  /// Generation parameters in emission order.
  std::vector<std::pair<std::string, std::string>> params;
  std::vector<int> colors;
  std::vector<int> greedy_colors;
};

struct Dataset {
  ProblemKind problem = ProblemKind::coloring;
  std::vector<InstanceRecord> records;
  DatasetManifest manifest;

  std::vector<CspInstance> instances() const;
  std::size_t size() const { return records.size(); }
};

struct ColoringGenParams {
  std::size_t vertices = 50;
  std::vector<GraphFamily> families = {GraphFamily::erdos_renyi, GraphFamily::barabasi_albert,
                                       GraphFamily::geometric};
  double er_p_min = 0.1, er_p_max = 0.3;
  int ba_m_min = 2, ba_m_max = 10;
  double geo_r_min = 0.15, geo_r_max = 0.3;
  /// Pose instances at k = k' (always satisfiable) instead of the clamped rule.
  bool colors_equal_greedy = false;
  /// Keep generating until `count` instances with this k are collected.
  std::optional<int> target_colors;
  /// Give up after this many rejected graphs when target_colors is set.
  std::size_t max_attempts = 1000000;
};

Dataset gen_coloring_dataset(std::size_t count, const ColoringGenParams& params,
                             std::uint64_t seed);
Dataset gen_nurse_dataset(std::size_t count, int days, int shifts, int per_shift, int nurses,
                          std::uint64_t seed);
/// Erdős–Rényi MAXCUT graphs with unit weights.
Dataset gen_maxcut_dataset(std::size_t count, std::size_t vertices, double edge_p,
                           std::uint64_t seed);

/// Random valid completed grid (relabelled and permuted base pattern), 0..8.
std::array<int, 81> gen_sudoku_solution(Rng& rng);
/// Blanks `missing` distinct random cells of a completed grid.
std::vector<std::optional<int>> make_sudoku_puzzle(const std::array<int, 81>& solution,
                                                   int missing, Rng& rng);
Dataset gen_sudoku_dataset(std::size_t count, int missing, std::uint64_t seed);

/// Nurse start state where every nurse works at least one slot.
Assignment nurse_initial_assignment(const CspInstance& inst, Rng& rng);

/// One puzzle per line: 81 characters, '1'-'9' givens, '0' or '.' blanks.
std::vector<std::vector<std::optional<int>>> parse_sudoku_text(const std::string& text);
Dataset load_sudoku(const std::filesystem::path& path);
std::string sudoku_line(std::span<const std::optional<int>> givens);

/// Header "n m", then m lines "u v w" with 1-based ids.
WeightedGraph parse_gset(const std::string& text);
std::string format_gset(const WeightedGraph& graph);
WeightedGraph load_gset(const std::filesystem::path& path);
void save_gset(const WeightedGraph& graph, const std::filesystem::path& path);

std::string format_manifest(const DatasetManifest& m);
DatasetManifest parse_manifest(const std::string& text);

/// Writes `<dir>/instances.txt` and `<dir>/manifest.txt`.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

struct Checkpoint {
  ModelWeights weights;
  std::optional<OptimizerState> optimizer;
  std::int64_t epochs_done = 0;
};

inline constexpr char kWeightsMagic[8] = {'R', 'C', 'S', 'P', 'W', 'G', 'T', '\0'};
inline constexpr std::uint32_t kWeightsVersion = 1;

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes,
                                  const std::optional<ModelConfig>& expected = std::nullopt);
void save_weights(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_weights(const std::filesystem::path& path,
                        const std::optional<ModelConfig>& expected = std::nullopt);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace refinecsp
