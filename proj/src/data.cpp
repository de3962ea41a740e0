#include "refinecsp/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "refinecsp/error.hpp"
#include "refinecsp/solve.hpp"

namespace refinecsp {

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> tokens_of(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

[[noreturn]] void bad_line(std::size_t line_no, const std::string& what) {
  fail(ErrorKind::format, "line " + std::to_string(line_no) + ": " + what);
}

long long parse_int(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) bad_line(line_no, "expected an integer, got '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    bad_line(line_no, "expected an integer, got '" + s + "'");
  }
}

double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) bad_line(line_no, "expected a number, got '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    bad_line(line_no, "expected a number, got '" + s + "'");
  }
}

std::string format_weight(double w) {
  if (std::isfinite(w) && w == std::trunc(w) && std::fabs(w) < 1e15) {
    return std::to_string(static_cast<long long>(w));
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, w);
  return std::string(buf, res.ptr);
}

// Reads a GSET block starting at lines[pos]; advances pos past it.
WeightedGraph read_gset_block(const std::vector<std::string>& lines, std::size_t& pos) {
  while (pos < lines.size() && is_blank(lines[pos])) ++pos;
  if (pos >= lines.size()) fail(ErrorKind::format, "missing GSET header");
  const auto header = tokens_of(lines[pos]);
  if (header.size() != 2) bad_line(pos + 1, "GSET header must be 'n m'");
  const long long n = parse_int(header[0], pos + 1);
  const long long m = parse_int(header[1], pos + 1);
  if (n < 0 || m < 0) bad_line(pos + 1, "negative GSET sizes");
  ++pos;
  WeightedGraph g(static_cast<std::size_t>(n));
  long long seen = 0;
  while (seen < m) {
    if (pos >= lines.size())
      fail(ErrorKind::format, "GSET header declares " + std::to_string(m) + " edges, found " +
                                  std::to_string(seen));
    const auto t = tokens_of(lines[pos]);
    if (t.empty()) {
      ++pos;
      continue;
    }
    if (t.size() != 3) bad_line(pos + 1, "GSET edge must be 'u v w'");
    const long long u = parse_int(t[0], pos + 1);
    const long long v = parse_int(t[1], pos + 1);
    const double w = parse_double(t[2], pos + 1);
    if (u < 1 || v < 1 || u > n || v > n) bad_line(pos + 1, "GSET vertex id out of range");
    try {
      g.add_edge(static_cast<std::size_t>(u - 1), static_cast<std::size_t>(v - 1), w);
    } catch (const Error& e) {
      bad_line(pos + 1, e.what());
    }
    ++seen;
    ++pos;
  }
  return g;
}

// Little-endian primitive encoding for checkpoints.
class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& in) : in_(in) {}
  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) fail(ErrorKind::format, "weights file is truncated");
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

void write_config(ByteWriter& w, const ModelConfig& c) {
  w.i32(c.layers);
  w.i32(c.heads);
  w.i32(c.d_model);
  w.i32(c.ffn_hidden);
  w.i32(c.domain_size);
  w.f64(c.selection_p);
  w.u8(static_cast<std::uint8_t>(c.rpe));
  w.u8(static_cast<std::uint8_t>(c.ape));
  w.u8(static_cast<std::uint8_t>(c.sampler));
  w.f64(c.temperature);
  w.f64(c.dropout);
}

ModelConfig read_config(ByteReader& r) {
  ModelConfig c;
  c.layers = r.i32();
  c.heads = r.i32();
  c.d_model = r.i32();
  c.ffn_hidden = r.i32();
  c.domain_size = r.i32();
  c.selection_p = r.f64();
  const auto rpe = r.u8(), ape_mode = r.u8(), sampler = r.u8();
  if (rpe > 2 || ape_mode > 2 || sampler > 1)
    fail(ErrorKind::format, "weights file carries an unknown mode code");
  c.rpe = static_cast<RpeMode>(rpe);
  c.ape = static_cast<ApeMode>(ape_mode);
  c.sampler = static_cast<Sampler>(sampler);
  c.temperature = r.f64();
  c.dropout = r.f64();
  return c;
}

void append_list(std::ostringstream& os, const char* key, const std::vector<int>& v) {
  os << key << '=';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << '\n';
}

std::vector<int> parse_list(const std::string& s) {
  std::vector<int> out;
  if (s.empty()) return out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(static_cast<int>(parse_int(item, 0)));
  return out;
}

template <typename T>
std::string num(T v) {
  // Shortest text that reads back to the same value.
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

WeightedGraph gen_erdos_renyi(std::size_t n, double p, Rng& rng) {
  if (n < 1) fail(ErrorKind::invalid_argument, "Erdős–Rényi needs n >= 1");
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::invalid_argument, "edge probability outside [0, 1]");
  WeightedGraph g(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (uniform01(rng) < p) g.add_edge(i, j);
  return g;
}

WeightedGraph gen_barabasi_albert(std::size_t n, std::size_t m_attach, Rng& rng) {
  if (m_attach < 1 || m_attach >= n)
    fail(ErrorKind::invalid_argument, "Barabási–Albert needs 1 <= m_attach < n");
  WeightedGraph g(n);
  // Each vertex appears once per incident edge end: sampling uniformly from
  // this list is sampling proportionally to degree.
  std::vector<std::size_t> ends;
  for (std::size_t i = 0; i < m_attach; ++i)
    for (std::size_t j = i + 1; j < m_attach; ++j) {
      g.add_edge(i, j);
      ends.push_back(i);
      ends.push_back(j);
    }
  for (std::size_t v = m_attach; v < n; ++v) {
    std::vector<std::size_t> targets;
    while (targets.size() < m_attach) {
      std::size_t t = 0;
      if (ends.empty()) {
        t = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(v) - 1));
      } else {
        t = ends[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(ends.size()) - 1))];
      }
      if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    }
    std::sort(targets.begin(), targets.end());
    for (auto t : targets) {
      g.add_edge(t, v);
      ends.push_back(t);
      ends.push_back(v);
    }
  }
  return g;
}

WeightedGraph gen_geometric(std::size_t n, double r, Rng& rng) {
  if (n < 1) fail(ErrorKind::invalid_argument, "geometric graph needs n >= 1");
  if (!(r >= 0.0)) fail(ErrorKind::invalid_argument, "radius must be non-negative");
  std::vector<std::pair<double, double>> pts(n);
  for (auto& [x, y] : pts) {
    x = uniform01(rng);
    y = uniform01(rng);
  }
  WeightedGraph g(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = pts[i].first - pts[j].first;
      const double dy = pts[i].second - pts[j].second;
      if (std::sqrt(dx * dx + dy * dy) <= r) g.add_edge(i, j);
    }
  return g;
}

std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::sudoku: return "sudoku";
    case ProblemKind::coloring: return "coloring";
    case ProblemKind::nurse: return "nurse";
    case ProblemKind::maxcut: return "maxcut";
  }
  return "?";
}

ProblemKind parse_problem(const std::string& s) {
  if (s == "sudoku") return ProblemKind::sudoku;
  if (s == "coloring") return ProblemKind::coloring;
  if (s == "nurse") return ProblemKind::nurse;
  if (s == "maxcut") return ProblemKind::maxcut;
  fail(ErrorKind::invalid_argument, "unknown problem kind '" + s + "'");
}

std::string to_string(GraphFamily f) {
  switch (f) {
    case GraphFamily::erdos_renyi: return "er";
    case GraphFamily::barabasi_albert: return "ba";
    case GraphFamily::geometric: return "geo";
  }
  return "?";
}

GraphFamily parse_family(const std::string& s) {
  if (s == "er") return GraphFamily::erdos_renyi;
  if (s == "ba") return GraphFamily::barabasi_albert;
  if (s == "geo") return GraphFamily::geometric;
  fail(ErrorKind::invalid_argument, "unknown graph family '" + s + "'");
}

int colors_from_greedy(int greedy_colors) { return std::max(3, std::min(10, greedy_colors - 1)); }

std::vector<CspInstance> Dataset::instances() const {
  std::vector<CspInstance> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.instance);
  return out;
}

Dataset gen_coloring_dataset(std::size_t count, const ColoringGenParams& params,
                             std::uint64_t seed) {
  if (params.vertices < 1) fail(ErrorKind::invalid_argument, "coloring graphs need vertices");
  if (params.families.empty()) fail(ErrorKind::invalid_argument, "no graph family selected");
  if (!(params.er_p_min >= 0.0 && params.er_p_min <= params.er_p_max && params.er_p_max <= 1.0))
    fail(ErrorKind::invalid_argument, "invalid Erdős–Rényi probability range");
  if (params.ba_m_min < 1 || params.ba_m_min > params.ba_m_max)
    fail(ErrorKind::invalid_argument, "invalid Barabási–Albert attachment range");
  if (!(params.geo_r_min >= 0.0 && params.geo_r_min <= params.geo_r_max))
    fail(ErrorKind::invalid_argument, "invalid geometric radius range");
  if (params.target_colors) {
    const int t = *params.target_colors;
    const bool reachable = params.colors_equal_greedy
                               ? t >= 1 && static_cast<std::size_t>(t) <= params.vertices
                               : t >= 3 && t <= 10;
    if (!reachable)
      fail(ErrorKind::invalid_argument,
           "target color count " + std::to_string(t) + " cannot be produced by the k rule");
  }
  Rng rng(seed);
  Dataset ds;
  ds.problem = ProblemKind::coloring;
  std::size_t attempts = 0;
  while (ds.records.size() < count) {
    if (++attempts > params.max_attempts && params.target_colors)
      fail(ErrorKind::invalid_argument, "could not reach the requested color count");
    const auto fam = params.families[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<int>(params.families.size()) - 1))];
    WeightedGraph g;
    switch (fam) {
      case GraphFamily::erdos_renyi: {
        const double p = std::uniform_real_distribution<double>(params.er_p_min, params.er_p_max)(rng);
        g = gen_erdos_renyi(params.vertices, p, rng);
        break;
      }
      case GraphFamily::barabasi_albert: {
        const int hi = std::min<int>(params.ba_m_max, static_cast<int>(params.vertices) - 1);
        const int lo = std::min(params.ba_m_min, hi);
        if (hi < 1) fail(ErrorKind::invalid_argument, "graph too small for Barabási–Albert");
        g = gen_barabasi_albert(params.vertices, static_cast<std::size_t>(uniform_int(rng, lo, hi)),
                                rng);
        break;
      }
      case GraphFamily::geometric: {
        const double r =
            std::uniform_real_distribution<double>(params.geo_r_min, params.geo_r_max)(rng);
        g = gen_geometric(params.vertices, r, rng);
        break;
      }
    }
    const int greedy = greedy_coloring(g).colors_used;
    const int k = params.colors_equal_greedy ? greedy : colors_from_greedy(greedy);
    if (params.target_colors && k != *params.target_colors) continue;
    InstanceRecord rec{build_graph_coloring(g, k), g, fam, k, greedy, {}, std::nullopt};
    ds.records.push_back(std::move(rec));
  }
  DatasetManifest& m = ds.manifest;
  m.problem = ProblemKind::coloring;
  m.count = ds.records.size();
  m.seed = seed;
  std::string fams;
  for (auto f : params.families) fams += (fams.empty() ? "" : ",") + to_string(f);
  m.params = {{"vertices", num(params.vertices)},
              {"families", fams},
              {"er_p", num(params.er_p_min) + ":" + num(params.er_p_max)},
              {"ba_m", num(params.ba_m_min) + ":" + num(params.ba_m_max)},
              {"geo_r", num(params.geo_r_min) + ":" + num(params.geo_r_max)},
              {"k_rule", params.colors_equal_greedy ? "greedy" : "clamped"},
              {"target_k", params.target_colors ? num(*params.target_colors) : "any"}};
  for (const auto& r : ds.records) {
    m.colors.push_back(r.colors);
    m.greedy_colors.push_back(r.greedy_colors);
  }
  return ds;
}

Assignment nurse_initial_assignment(const CspInstance& inst, Rng& rng) {
  const std::size_t slots = inst.variable_count();
  const int nurses = inst.domain_size();
  Assignment a(slots);
  std::uniform_int_distribution<int> any(0, nurses - 1);
  for (auto& v : a) v = any(rng);
  std::vector<std::size_t> order(slots);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  for (int nurse = 0; nurse < nurses && static_cast<std::size_t>(nurse) < slots; ++nurse)
    a[order[static_cast<std::size_t>(nurse)]] = nurse;
  return a;
}

Dataset gen_nurse_dataset(std::size_t count, int days, int shifts, int per_shift, int nurses,
                          std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.problem = ProblemKind::nurse;
  const CspInstance proto = build_nurse_rostering(days, shifts, per_shift, nurses);
  for (std::size_t i = 0; i < count; ++i) {
    InstanceRecord rec{proto, std::nullopt, std::nullopt, 0, 0, {days, shifts, per_shift, nurses},
                       nurse_initial_assignment(proto, rng)};
    ds.records.push_back(std::move(rec));
  }
  ds.manifest.problem = ProblemKind::nurse;
  ds.manifest.count = count;
  ds.manifest.seed = seed;
  ds.manifest.params = {{"days", num(days)},
                        {"shifts", num(shifts)},
                        {"per_shift", num(per_shift)},
                        {"nurses", num(nurses)},
                        {"initial", "one_slot_per_nurse"}};
  return ds;
}

Dataset gen_maxcut_dataset(std::size_t count, std::size_t vertices, double edge_p,
                           std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.problem = ProblemKind::maxcut;
  for (std::size_t i = 0; i < count; ++i) {
    WeightedGraph g = gen_erdos_renyi(vertices, edge_p, rng);
    InstanceRecord rec{build_maxcut(g), g, GraphFamily::erdos_renyi, 0, 0, {}, std::nullopt};
    ds.records.push_back(std::move(rec));
  }
  ds.manifest.problem = ProblemKind::maxcut;
  ds.manifest.count = count;
  ds.manifest.seed = seed;
  ds.manifest.params = {{"vertices", num(vertices)}, {"edge_p", num(edge_p)}};
  return ds;
}

std::array<int, 81> gen_sudoku_solution(Rng& rng) {
  std::array<int, 9> digits{};
  std::iota(digits.begin(), digits.end(), 0);
  std::shuffle(digits.begin(), digits.end(), rng);
  const auto shuffled_lines = [&]() {
    std::array<int, 3> bands{0, 1, 2};
    std::shuffle(bands.begin(), bands.end(), rng);
    std::array<int, 9> lines{};
    for (int b = 0; b < 3; ++b) {
      std::array<int, 3> inner{0, 1, 2};
      std::shuffle(inner.begin(), inner.end(), rng);
      for (int i = 0; i < 3; ++i) lines[static_cast<std::size_t>(b * 3 + i)] = bands[static_cast<std::size_t>(b)] * 3 + inner[static_cast<std::size_t>(i)];
    }
    return lines;
  };
  const auto rows = shuffled_lines();
  const auto cols = shuffled_lines();
  std::array<int, 81> grid{};
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 9; ++c) {
      const int br = rows[static_cast<std::size_t>(r)], bc = cols[static_cast<std::size_t>(c)];
      const int base = (br * 3 + br / 3 + bc) % 9;
      grid[static_cast<std::size_t>(r * 9 + c)] = digits[static_cast<std::size_t>(base)];
    }
  return grid;
}

std::vector<std::optional<int>> make_sudoku_puzzle(const std::array<int, 81>& solution,
                                                   int missing, Rng& rng) {
  if (missing < 0 || missing > 81) fail(ErrorKind::invalid_argument, "missing cells outside [0, 81]");
  std::vector<std::optional<int>> givens(solution.begin(), solution.end());
  std::vector<std::size_t> cells(81);
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  std::shuffle(cells.begin(), cells.end(), rng);
  for (int i = 0; i < missing; ++i) givens[cells[static_cast<std::size_t>(i)]] = std::nullopt;
  return givens;
}

Dataset gen_sudoku_dataset(std::size_t count, int missing, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.problem = ProblemKind::sudoku;
  for (std::size_t i = 0; i < count; ++i) {
    const auto solution = gen_sudoku_solution(rng);
    const auto givens = make_sudoku_puzzle(solution, missing, rng);
    ds.records.push_back({build_sudoku(givens), std::nullopt, std::nullopt, 0, 0, {}, std::nullopt});
  }
  ds.manifest.problem = ProblemKind::sudoku;
  ds.manifest.count = count;
  ds.manifest.seed = seed;
  ds.manifest.params = {{"missing", num(missing)}};
  return ds;
}

std::vector<std::vector<std::optional<int>>> parse_sudoku_text(const std::string& text) {
  std::vector<std::vector<std::optional<int>>> out;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const std::string& line = lines[i];
    if (line.size() != 81)
      bad_line(i + 1, "sudoku line must hold 81 cells, got " + std::to_string(line.size()));
    std::vector<std::optional<int>> cells(81);
    for (std::size_t c = 0; c < 81; ++c) {
      const char ch = line[c];
      if (ch == '0' || ch == '.') continue;
      if (ch < '1' || ch > '9') bad_line(i + 1, std::string("invalid sudoku cell '") + ch + "'");
      cells[c] = ch - '1';
    }
    out.push_back(std::move(cells));
  }
  return out;
}

std::string sudoku_line(std::span<const std::optional<int>> givens) {
  std::string line;
  for (const auto& g : givens) line.push_back(g ? static_cast<char>('1' + *g) : '0');
  return line;
}

Dataset load_sudoku(const std::filesystem::path& path) {
  Dataset ds;
  ds.problem = ProblemKind::sudoku;
  for (const auto& givens : parse_sudoku_text(read_file(path)))
    ds.records.push_back({build_sudoku(givens), std::nullopt, std::nullopt, 0, 0, {}, std::nullopt});
  ds.manifest.problem = ProblemKind::sudoku;
  ds.manifest.count = ds.records.size();
  ds.manifest.params = {{"source", path.filename().string()}};
  return ds;
}

WeightedGraph parse_gset(const std::string& text) {
  const auto lines = split_lines(text);
  std::size_t pos = 0;
  WeightedGraph g = read_gset_block(lines, pos);
  for (; pos < lines.size(); ++pos)
    if (!is_blank(lines[pos]))
      fail(ErrorKind::format, "GSET header declares " + std::to_string(g.edge_count()) +
                                  " edges but line " + std::to_string(pos + 1) +
                                  " holds another");
  return g;
}

std::string format_gset(const WeightedGraph& graph) {
  std::ostringstream os;
  os << graph.vertex_count() << ' ' << graph.edge_count() << '\n';
  for (const auto& e : graph.edges())
    os << e.u + 1 << ' ' << e.v + 1 << ' ' << format_weight(e.weight) << '\n';
  return os.str();
}

WeightedGraph load_gset(const std::filesystem::path& path) { return parse_gset(read_file(path)); }

void save_gset(const WeightedGraph& graph, const std::filesystem::path& path) {
  write_file(path, format_gset(graph));
}

std::string format_manifest(const DatasetManifest& m) {
  std::ostringstream os;
  os << "problem=" << to_string(m.problem) << '\n';
  os << "count=" << m.count << '\n';
  os << "seed=" << m.seed << '\n';
  for (const auto& [k, v] : m.params) os << "param." << k << '=' << v << '\n';
  append_list(os, "colors", m.colors);
  append_list(os, "greedy_colors", m.greedy_colors);
  return os.str();
}

DatasetManifest parse_manifest(const std::string& text) {
  DatasetManifest m;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const auto eq = lines[i].find('=');
    if (eq == std::string::npos) bad_line(i + 1, "manifest entries are key=value");
    const std::string key = lines[i].substr(0, eq);
    const std::string value = lines[i].substr(eq + 1);
    if (key == "problem") m.problem = parse_problem(value);
    else if (key == "count") m.count = static_cast<std::size_t>(parse_int(value, i + 1));
    else if (key == "seed") m.seed = std::stoull(value);
    else if (key.rfind("param.", 0) == 0) m.params.emplace_back(key.substr(6), value);
    else if (key == "colors") m.colors = parse_list(value);
    else if (key == "greedy_colors") m.greedy_colors = parse_list(value);
    else bad_line(i + 1, "unknown manifest key '" + key + "'");
  }
  return m;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream os;
  os << "refinecsp-dataset 1\n";
  os << "problem " << to_string(ds.problem) << '\n';
  for (const auto& r : ds.records) {
    switch (ds.problem) {
      case ProblemKind::sudoku: {
        std::vector<std::optional<int>> givens;
        for (std::size_t i = 0; i < r.instance.variable_count(); ++i)
          givens.push_back(r.instance.fixed(i));
        os << "sudoku " << sudoku_line(givens) << '\n';
        break;
      }
      case ProblemKind::coloring:
        os << "coloring " << r.colors << ' ' << r.greedy_colors << ' '
           << (r.family ? to_string(*r.family) : "-") << '\n'
           << format_gset(*r.graph);
        break;
      case ProblemKind::maxcut:
        os << "maxcut\n" << format_gset(*r.graph);
        break;
      case ProblemKind::nurse: {
        os << "nurse " << r.nurse[0] << ' ' << r.nurse[1] << ' ' << r.nurse[2] << ' '
           << r.nurse[3] << '\n';
        os << "initial";
        if (r.initial) {
          os << ' ' << r.initial->size();
          for (int v : *r.initial) os << ' ' << v;
        } else {
          os << " -";
        }
        os << '\n';
        break;
      }
    }
  }
  write_file(dir / "instances.txt", os.str());
  DatasetManifest m = ds.manifest;
  m.problem = ds.problem;
  m.count = ds.records.size();
  write_file(dir / "manifest.txt", format_manifest(m));
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto lines = split_lines(read_file(dir / "instances.txt"));
  Dataset ds;
  std::size_t pos = 0;
  const auto next_line = [&]() -> std::vector<std::string> {
    while (pos < lines.size() && is_blank(lines[pos])) ++pos;
    if (pos >= lines.size()) return {};
    return tokens_of(lines[pos++]);
  };
  const auto head = next_line();
  if (head.size() != 2 || head[0] != "refinecsp-dataset")
    fail(ErrorKind::format, "line 1: not a dataset file");
  if (head[1] != "1") fail(ErrorKind::incompatible, "unsupported dataset version " + head[1]);
  const auto prob = next_line();
  if (prob.size() != 2 || prob[0] != "problem") bad_line(pos, "expected 'problem <kind>'");
  ds.problem = parse_problem(prob[1]);
  while (true) {
    const auto t = next_line();
    if (t.empty()) break;
    const std::size_t line_no = pos;
    if (t[0] != to_string(ds.problem)) bad_line(line_no, "record kind differs from dataset kind");
    switch (ds.problem) {
      case ProblemKind::sudoku: {
        if (t.size() != 2) bad_line(line_no, "expected 'sudoku <81 cells>'");
        const auto cells = parse_sudoku_text(t[1]);
        ds.records.push_back(
            {build_sudoku(cells.at(0)), std::nullopt, std::nullopt, 0, 0, {}, std::nullopt});
        break;
      }
      case ProblemKind::coloring: {
        if (t.size() != 4) bad_line(line_no, "expected 'coloring <k> <k'> <family>'");
        const int k = static_cast<int>(parse_int(t[1], line_no));
        const int kp = static_cast<int>(parse_int(t[2], line_no));
        std::optional<GraphFamily> fam;
        if (t[3] != "-") fam = parse_family(t[3]);
        WeightedGraph g = read_gset_block(lines, pos);
        ds.records.push_back({build_graph_coloring(g, k), g, fam, k, kp, {}, std::nullopt});
        break;
      }
      case ProblemKind::maxcut: {
        WeightedGraph g = read_gset_block(lines, pos);
        ds.records.push_back({build_maxcut(g), g, std::nullopt, 0, 0, {}, std::nullopt});
        break;
      }
      case ProblemKind::nurse: {
        if (t.size() != 5) bad_line(line_no, "expected 'nurse <days> <shifts> <per_shift> <nurses>'");
        std::array<int, 4> p{};
        for (std::size_t i = 0; i < 4; ++i) p[i] = static_cast<int>(parse_int(t[i + 1], line_no));
        const CspInstance inst = build_nurse_rostering(p[0], p[1], p[2], p[3]);
        const auto init = next_line();
        if (init.size() < 2 || init[0] != "initial") bad_line(pos, "expected 'initial ...'");
        std::optional<Assignment> a;
        if (init[1] != "-") {
          const auto len = static_cast<std::size_t>(parse_int(init[1], pos));
          if (init.size() != len + 2 || len != inst.variable_count())
            bad_line(pos, "initial assignment length mismatch");
          a = Assignment(len);
          for (std::size_t i = 0; i < len; ++i)
            (*a)[i] = static_cast<int>(parse_int(init[i + 2], pos));
          validate_assignment(inst, *a);
        }
        ds.records.push_back({inst, std::nullopt, std::nullopt, 0, 0, p, a});
        break;
      }
    }
  }
  const auto manifest_path = dir / "manifest.txt";
  if (std::filesystem::exists(manifest_path)) {
    ds.manifest = parse_manifest(read_file(manifest_path));
    if (ds.manifest.count != ds.records.size())
      fail(ErrorKind::format, "manifest count " + std::to_string(ds.manifest.count) +
                                  " differs from " + std::to_string(ds.records.size()) +
                                  " stored instances");
  } else {
    ds.manifest.problem = ds.problem;
    ds.manifest.count = ds.records.size();
  }
  return ds;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.bytes(kWeightsMagic, sizeof kWeightsMagic);
  w.u32(kWeightsVersion);
  write_config(w, ckpt.weights.config);
  const auto params = ckpt.weights.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.u32(static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto d : p.tensor.shape()) w.u64(d);
    for (double v : p.tensor.values()) w.f64(v);
  }
  w.u8(ckpt.optimizer ? 1 : 0);
  if (ckpt.optimizer) {
    const OptimizerState& s = *ckpt.optimizer;
    if (s.first_moment.size() != params.size())
      fail(ErrorKind::incompatible, "optimizer state does not match the parameters");
    w.i64(s.step);
    w.i64(ckpt.epochs_done);
    for (std::size_t k = 0; k < params.size(); ++k) {
      for (double v : s.first_moment[k]) w.f64(v);
      for (double v : s.second_moment[k]) w.f64(v);
    }
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes,
                                  const std::optional<ModelConfig>& expected) {
  ByteReader r(bytes);
  char magic[8];
  if (bytes.size() < sizeof magic) fail(ErrorKind::format, "weights file is truncated");
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kWeightsMagic, sizeof magic) != 0)
    fail(ErrorKind::format, "not a weights file (bad magic bytes)");
  const std::uint32_t version = r.u32();
  if (version != kWeightsVersion)
    fail(ErrorKind::incompatible, "unsupported weights format version " + std::to_string(version));
  const ModelConfig cfg = read_config(r);
  cfg.validate();
  if (expected && !(*expected == cfg))
    fail(ErrorKind::incompatible, "weights were trained with [" + describe(cfg) +
                                      "], expected [" + describe(*expected) + "]");
  Checkpoint ckpt;
  Rng unused(0);
  ckpt.weights = init_weights(cfg, unused);
  auto params = ckpt.weights.parameters();
  const std::uint32_t count = r.u32();
  if (count != params.size())
    fail(ErrorKind::incompatible, "weights file holds " + std::to_string(count) +
                                      " tensors, architecture needs " +
                                      std::to_string(params.size()));
  for (auto& p : params) {
    const std::uint32_t len = r.u32();
    if (len > 4096) fail(ErrorKind::format, "implausible tensor name length");
    std::string name(len, '\0');
    r.bytes(name.data(), len);
    if (name != p.name)
      fail(ErrorKind::incompatible, "expected tensor '" + p.name + "', found '" + name + "'");
    const std::uint32_t rank = r.u32();
    nd::Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    if (shape != p.tensor.shape())
      fail(ErrorKind::incompatible, "tensor '" + name + "' has shape " + nd::shape_string(shape) +
                                        ", expected " + nd::shape_string(p.tensor.shape()));
    for (double& v : p.tensor.mutable_values()) v = r.f64();
  }
  if (r.u8() == 1) {
    OptimizerState s;
    s.step = r.i64();
    ckpt.epochs_done = r.i64();
    for (const auto& p : params) {
      std::vector<double> m(p.tensor.size()), v(p.tensor.size());
      for (double& x : m) x = r.f64();
      for (double& x : v) x = r.f64();
      s.first_moment.push_back(std::move(m));
      s.second_moment.push_back(std::move(v));
    }
    ckpt.optimizer = std::move(s);
  }
  if (!r.done()) fail(ErrorKind::format, "trailing bytes after weights");
  return ckpt;
}

void save_weights(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_weights(const std::filesystem::path& path,
                        const std::optional<ModelConfig>& expected) {
  return deserialize_checkpoint(read_file(path), expected);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

}  // namespace refinecsp
