#include "lgc/datagen.hpp"

#include "lgc/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace lgc {

namespace fs = std::filesystem;

std::vector<Matrix> GroundTruthParams::default_psi_layers() {
  Matrix psi1(1, 4);
  psi1 << 0.3, -0.2, 0.1, -0.2;
  Matrix psi2(1, 4);
  psi2 << -0.3, 0.1, 0.2, -0.1;
  return {psi1, psi2};
}

std::vector<Edge> canonical_template_edges(std::size_t n_communities, std::size_t community_size) {
  if (community_size != 4) throw InvalidShape("the canonical template needs community_size == 4");
  if (n_communities == 0) throw InvalidShape("at least one community is required");
  static constexpr Edge kLocal[] = {{0, 1}, {1, 0}, {0, 2}, {2, 3}, {3, 1}};
  std::vector<Edge> edges;
  for (std::size_t c = 0; c < n_communities; ++c) {
    const std::size_t base = c * community_size;
    for (auto [from, to] : kLocal) edges.emplace_back(base + from, base + to);
    if (n_communities > 1) {
      const std::size_t next = ((c + 1) % n_communities) * community_size;
      edges.emplace_back(base + 3, next);
    }
  }
  return edges;
}

GroundTruth build_ground_truth(const GroundTruthParams& params) {
  if (!(params.theta_on > 0.0 && params.theta_on <= 1.0))
    throw InvalidShape("theta_on must lie in (0, 1]");
  if (!(params.sigma_x > 0.0)) throw InvalidShape("sigma_x must be positive");
  const auto edges = canonical_template_edges(params.n_communities, params.community_size);
  const std::size_t n = params.n_communities * params.community_size;
  const auto ni = static_cast<Eigen::Index>(n);
  Matrix theta = Matrix::Zero(ni, ni);
  for (auto [i, j] : edges)
    theta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = params.theta_on;
  // The ground truth is a fixed distribution: nothing in it is trainable.
  EdgeDistribution dist(std::move(theta), BoolMatrix::Constant(ni, ni, false));
  return GroundTruth{params, std::move(dist), PolyGnn(params.psi_layers)};
}

std::vector<const DataPair*> Dataset::split_view(const std::vector<std::size_t>& indices) const {
  std::vector<const DataPair*> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(&pairs.at(i));
  return out;
}

namespace {

void assign_splits(Dataset& data) {
  const std::size_t n = data.pairs.size();
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_val = n / 10;
  data.train.clear();
  data.validation.clear();
  data.test.clear();
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) data.train.push_back(i);
    else if (i < n_train + n_val) data.validation.push_back(i);
    else data.test.push_back(i);
  }
  data.manifest.n_train = data.train.size();
  data.manifest.n_validation = data.validation.size();
  data.manifest.n_test = data.test.size();
}

}  // namespace

Dataset generate(const GroundTruth& gt, std::size_t n_pairs, std::uint64_t seed) {
  if (n_pairs == 0) throw ConfigError("dataset needs at least one pair");
  Dataset data;
  data.ground_truth = gt;
  data.manifest.seed = seed;
  data.manifest.n_pairs = n_pairs;
  data.manifest.ground_truth = gt.params;

  const auto n = static_cast<Eigen::Index>(gt.node_count());
  const auto d_in = static_cast<Eigen::Index>(gt.model_star.d_in());
  Rng rng = make_rng(seed, 0);
  std::normal_distribution<double> normal(0.0, gt.params.sigma_x);
  EdgeSampler sampler(gt.dist_star);
  std::vector<BinaryMatrix> hops(gt.model_star.hops());
  AdjacencySample a(gt.node_count());
  data.pairs.reserve(n_pairs);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    DataPair pair;
    pair.x.resize(n, d_in);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < d_in; ++c) pair.x(i, c) = normal(rng);
    sampler.sample(rng, a);
    hop_matrices_into(a, hops);
    forward_projected(project_inputs(gt.model_star, pair.x), hops, pair.y);
    data.pairs.push_back(std::move(pair));
  }
  assign_splits(data);
  return data;
}

Dataset regenerate(const DatasetManifest& manifest) {
  return generate(build_ground_truth(manifest.ground_truth), manifest.n_pairs, manifest.seed);
}

double optimal_error_oracle(const GroundTruth& gt, PointMetric metric, const OracleOptions& opts) {
  if (opts.n_inputs == 0 || opts.n_adj < 2) throw InsufficientSamples("oracle needs n_adj >= 2");
  const auto n = static_cast<Eigen::Index>(gt.node_count());
  const auto d_in = static_cast<Eigen::Index>(gt.model_star.d_in());
  const auto d_out = static_cast<Eigen::Index>(gt.model_star.d_out());
  const std::size_t len = static_cast<std::size_t>(n * d_out);
  const std::size_t m = opts.n_adj;

  Rng rng = make_rng(opts.seed, 1);
  std::normal_distribution<double> normal(0.0, gt.params.sigma_x);
  EdgeSampler sampler(gt.dist_star);
  std::vector<BinaryMatrix> hops(gt.model_star.hops());
  AdjacencySample a(gt.node_count());
  Matrix x(n, d_in);
  Matrix y;
  // mae: the median comes from the first m draws and is scored against m
  // further independent draws, as a test metric would score a perfect model
  const std::size_t draws = metric == PointMetric::mae ? 2 * m : m;
  std::vector<double> samples(len * draws);  // entry-major: samples[e * draws + k]
  std::vector<double> column(m);

  double total = 0.0;
  for (std::size_t t = 0; t < opts.n_inputs; ++t) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index c = 0; c < d_in; ++c) x(i, c) = normal(rng);
    const ProjectedInputs proj = project_inputs(gt.model_star, x);
    for (std::size_t k = 0; k < draws; ++k) {
      sampler.sample(rng, a);
      hop_matrices_into(a, hops);
      forward_projected(proj, hops, y);
      for (std::size_t e = 0; e < len; ++e) samples[e * draws + k] = y.data()[e];
    }
    double err = 0.0;
    for (std::size_t e = 0; e < len; ++e) {
      const double* s = samples.data() + e * draws;
      if (metric == PointMetric::mse) {
        double mean = 0.0;
        for (std::size_t k = 0; k < m; ++k) mean += s[k];
        mean /= static_cast<double>(m);
        double ss = 0.0;
        for (std::size_t k = 0; k < m; ++k) ss += (s[k] - mean) * (s[k] - mean);
        err += ss / static_cast<double>(m - 1);
      } else {
        std::copy(s, s + m, column.begin());
        const double median = median_of(column);
        double abs_dev = 0.0;
        for (std::size_t k = m; k < draws; ++k) abs_dev += std::abs(s[k] - median);
        err += abs_dev / static_cast<double>(m);
      }
    }
    total += err / static_cast<double>(len);
  }
  return total / static_cast<double>(opts.n_inputs);
}

// ---------------------------------------------------------------------------
// On-disk format: manifest.json plus train.csv / validation.csv / test.csv
// with columns pair_id,node,x0..x{d_in-1},y0..y{d_out-1}.

void to_json(nlohmann::json& j, const GroundTruthParams& p) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& psi : p.psi_layers) {
    std::vector<double> flat;
    for (Eigen::Index r = 0; r < psi.rows(); ++r)
      for (Eigen::Index c = 0; c < psi.cols(); ++c) flat.push_back(psi(r, c));
    layers.push_back({{"rows", psi.rows()}, {"cols", psi.cols()}, {"values", flat}});
  }
  j = nlohmann::json{{"n_communities", p.n_communities}, {"community_size", p.community_size},
                     {"theta_on", p.theta_on},           {"sigma_x", p.sigma_x},
                     {"psi_layers", layers}};
}

void from_json(const nlohmann::json& j, GroundTruthParams& p) {
  p.n_communities = j.value("n_communities", p.n_communities);
  p.community_size = j.value("community_size", p.community_size);
  p.theta_on = j.value("theta_on", p.theta_on);
  p.sigma_x = j.value("sigma_x", p.sigma_x);
  if (j.contains("psi_layers")) {
    p.psi_layers.clear();
    for (const auto& l : j.at("psi_layers")) {
      const auto rows = l.at("rows").get<Eigen::Index>();
      const auto cols = l.at("cols").get<Eigen::Index>();
      const auto v = l.at("values").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(v.size()) != rows * cols)
        throw ShapeMismatch("psi layer JSON has wrong number of values");
      Matrix psi(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) psi(r, c) = v[static_cast<std::size_t>(r * cols + c)];
      p.psi_layers.push_back(std::move(psi));
    }
  }
}

void to_json(nlohmann::json& j, const DatasetManifest& m) {
  j = nlohmann::json{{"seed", m.seed},         {"n_pairs", m.n_pairs},
                     {"n_train", m.n_train},   {"n_validation", m.n_validation},
                     {"n_test", m.n_test},     {"ground_truth", m.ground_truth}};
}

void from_json(const nlohmann::json& j, DatasetManifest& m) {
  m.seed = j.at("seed").get<std::uint64_t>();
  m.n_pairs = j.at("n_pairs").get<std::size_t>();
  m.n_train = j.value("n_train", std::size_t{0});
  m.n_validation = j.value("n_validation", std::size_t{0});
  m.n_test = j.value("n_test", std::size_t{0});
  m.ground_truth = j.at("ground_truth").get<GroundTruthParams>();
}

namespace {

void write_split(const Dataset& data, const std::vector<std::size_t>& indices, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  const auto& first = data.pairs.front();
  out << "pair_id,node";
  for (Eigen::Index c = 0; c < first.x.cols(); ++c) out << ",x" << c;
  for (Eigen::Index c = 0; c < first.y.cols(); ++c) out << ",y" << c;
  out << '\n';
  char buf[32];
  auto put = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out << ',';
    out.write(buf, res.ptr - buf);
  };
  for (auto id : indices) {
    const DataPair& p = data.pairs[id];
    for (Eigen::Index i = 0; i < p.x.rows(); ++i) {
      out << id << ',' << i;
      for (Eigen::Index c = 0; c < p.x.cols(); ++c) put(p.x(i, c));
      for (Eigen::Index c = 0; c < p.y.cols(); ++c) put(p.y(i, c));
      out << '\n';
    }
  }
  if (!out) throw IoError("failed while writing " + file.string());
}

void read_split(const fs::path& file, std::size_t n, std::size_t d_in, std::size_t d_out,
                Dataset& data, std::vector<std::size_t>& indices) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read " + file.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> fields;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    fields.clear();
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      double v = 0.0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) throw IoError("malformed number in " + file.string());
      fields.push_back(v);
      p = res.ptr;
      if (p < end && *p == ',') ++p;
    }
    if (fields.size() != 2 + d_in + d_out) throw IoError("wrong column count in " + file.string());
    const auto id = static_cast<std::size_t>(fields[0]);
    const auto node = static_cast<Eigen::Index>(fields[1]);
    if (id >= data.pairs.size() || node < 0 || static_cast<std::size_t>(node) >= n)
      throw IoError("pair or node id out of range in " + file.string());
    DataPair& pair = data.pairs[id];
    if (pair.x.size() == 0) {
      pair.x.setZero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d_in));
      pair.y.setZero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d_out));
      indices.push_back(id);
    }
    for (std::size_t c = 0; c < d_in; ++c) pair.x(node, static_cast<Eigen::Index>(c)) = fields[2 + c];
    for (std::size_t c = 0; c < d_out; ++c)
      pair.y(node, static_cast<Eigen::Index>(c)) = fields[2 + d_in + c];
  }
}

}  // namespace

void save_dataset(const Dataset& data, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + dir.string());
    nlohmann::json j = data.manifest;
    j["theta_star"] = data.ground_truth.dist_star;
    j["model_star"] = data.ground_truth.model_star;
    out << j.dump(2) << '\n';
  }
  write_split(data, data.train, dir / "train.csv");
  write_split(data, data.validation, dir / "validation.csv");
  write_split(data, data.test, dir / "test.csv");
}

Dataset load_dataset(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot read manifest in " + dir.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  Dataset data;
  data.manifest = j.get<DatasetManifest>();
  data.ground_truth = build_ground_truth(data.manifest.ground_truth);
  data.pairs.resize(data.manifest.n_pairs);
  const std::size_t n = data.ground_truth.node_count();
  const std::size_t d_in = data.ground_truth.model_star.d_in();
  const std::size_t d_out = data.ground_truth.model_star.d_out();
  read_split(dir / "train.csv", n, d_in, d_out, data, data.train);
  read_split(dir / "validation.csv", n, d_in, d_out, data, data.validation);
  read_split(dir / "test.csv", n, d_in, d_out, data, data.test);
  for (const auto& p : data.pairs)
    if (p.x.size() == 0) throw IoError("dataset in " + dir.string() + " is missing pairs");
  return data;
}

}  // namespace lgc
