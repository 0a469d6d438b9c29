#include "udil/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>

#include "udil/errors.hpp"

namespace udil {

void LabeledSet::validate() const {
  if (static_cast<std::size_t>(inputs.rows()) != labels.size()) {
    throw IngestionError("LabeledSet: " + std::to_string(inputs.rows()) + " input rows but " +
                         std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw IngestionError("LabeledSet: label " + std::to_string(y) + " outside [0, " +
                           std::to_string(num_classes) + ")");
    }
  }
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> rows) const {
  LabeledSet out;
  out.domain_id = domain_id;
  out.num_classes = num_classes;
  out.inputs.resize(static_cast<Index>(rows.size()), inputs.cols());
  out.labels.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.inputs.row(static_cast<Index>(k)) = inputs.row(static_cast<Index>(rows[k]));
    out.labels.push_back(labels[rows[k]]);
  }
  return out;
}

void DomainStream::validate() const {
  for (std::size_t t = 0; t < domains.size(); ++t) {
    for (const LabeledSet* s : {&domains[t].train, &domains[t].test}) {
      if (s->domain_id != static_cast<int>(t) + 1) {
        throw ContractError("DomainStream: domain ids must be 1..T consecutive");
      }
      if (s->num_classes != num_classes || s->input_dim() != input_dim) {
        throw ContractError("DomainStream: domains disagree on class count or input dimension");
      }
      s->validate();
    }
  }
}

std::uint64_t DomainStream::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& d : domains) {
    for (const LabeledSet* s : {&d.train, &d.test}) {
      mix(s->inputs.data(), static_cast<std::size_t>(s->inputs.size()) * sizeof(double));
      mix(s->labels.data(), s->labels.size() * sizeof(int));
    }
  }
  return h;
}

// ---------------------------------------------------------------- HD-Balls

int hd_balls_label(const RowVector& x, const RowVector& mu) { return x.dot(mu) > 1.0 ? 1 : 0; }

DomainStream gen_hd_balls(std::uint64_t seed, int n_domains, int n_per_domain, int dim, double sigma) {
  if (dim < 2) throw ConfigError("hd-balls: dim must be >= 2");
  if (!(sigma > 0.0)) throw ConfigError("hd-balls: sigma must be > 0");
  if (n_domains < 1) throw ConfigError("hd-balls: n_domains must be >= 1");
  if (n_per_domain < 5) throw ConfigError("hd-balls: n_per_domain must be >= 5 for an 80/20 split");

  DomainStream stream;
  stream.num_classes = 2;
  stream.input_dim = dim;
  const int n_train = (n_per_domain * 4) / 5;
  for (int t = 1; t <= n_domains; ++t) {
    Rng rng(substream_seed(seed, "hd-balls/domain/" + std::to_string(t)));
    std::normal_distribution<double> normal(0.0, 1.0);
    RowVector mu(dim);
    for (int j = 0; j < dim; ++j) mu(j) = normal(rng);
    mu /= mu.norm();

    Matrix x(n_per_domain, dim);
    std::vector<int> y(static_cast<std::size_t>(n_per_domain));
    for (int i = 0; i < n_per_domain; ++i) {
      for (int j = 0; j < dim; ++j) x(i, j) = mu(j) + sigma * normal(rng);
      y[static_cast<std::size_t>(i)] = hd_balls_label(x.row(i), mu);
    }

    DomainSplit split;
    split.train.inputs = x.topRows(n_train);
    split.train.labels.assign(y.begin(), y.begin() + n_train);
    split.test.inputs = x.bottomRows(n_per_domain - n_train);
    split.test.labels.assign(y.begin() + n_train, y.end());
    for (LabeledSet* s : {&split.train, &split.test}) {
      s->domain_id = t;
      s->num_classes = 2;
    }
    stream.domains.push_back(std::move(split));
  }
  return stream;
}

// ---------------------------------------------------------------- transforms

namespace {

LabeledSet pick(const LabeledSet& base, std::size_t count, Rng& rng) {
  if (count == 0 || count >= base.size()) return base;
  auto rows = sample_without_replacement(base.size(), count, rng);
  return base.subset(rows);
}

void check_bases(const LabeledSet& train, const LabeledSet& test, int n_domains) {
  if (train.empty()) throw ContractError("domain transform: base training set is empty");
  if (!test.empty() && test.input_dim() != train.input_dim()) {
    throw ContractError("domain transform: train/test input dimensions differ");
  }
  if (n_domains < 1) throw ConfigError("domain transform: n_domains must be >= 1");
}

}  // namespace

Matrix permute_columns(const Matrix& in, std::span<const std::size_t> perm) {
  if (static_cast<Index>(perm.size()) != in.cols()) throw DimensionError("permute_columns: size mismatch");
  Matrix out(in.rows(), in.cols());
  for (Index j = 0; j < in.cols(); ++j) out.col(j) = in.col(static_cast<Index>(perm[static_cast<std::size_t>(j)]));
  return out;
}

std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

DomainStream permuted_stream(const LabeledSet& base_train, const LabeledSet& base_test, int n_domains,
                             std::uint64_t seed, std::size_t train_per_domain, std::size_t test_per_domain) {
  check_bases(base_train, base_test, n_domains);
  DomainStream stream;
  stream.num_classes = base_train.num_classes;
  stream.input_dim = base_train.input_dim();
  for (int t = 1; t <= n_domains; ++t) {
    Rng rng(substream_seed(seed, "permuted/domain/" + std::to_string(t)));
    const auto perm = random_permutation(static_cast<std::size_t>(base_train.input_dim()), rng);
    DomainSplit split;
    split.train = pick(base_train, train_per_domain, rng);
    split.test = pick(base_test, test_per_domain, rng);
    for (LabeledSet* s : {&split.train, &split.test}) {
      if (s->inputs.rows() > 0) s->inputs = permute_columns(s->inputs, perm);
      s->domain_id = t;
      s->num_classes = stream.num_classes;
      if (s->inputs.cols() != stream.input_dim) s->inputs.resize(0, stream.input_dim);
    }
    stream.domains.push_back(std::move(split));
  }
  return stream;
}

std::pair<double, double> rotation_range(int t) { return {9.0 * (t - 1), 9.0 * t}; }

std::vector<double> rotate_image(std::span<const double> pixels, double degrees) {
  const auto side = static_cast<long>(std::llround(std::sqrt(static_cast<double>(pixels.size()))));
  if (side * side != static_cast<long>(pixels.size())) {
    throw ConfigError("rotate_image: image is not square (" + std::to_string(pixels.size()) + " pixels)");
  }
  const double rad = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  const double center = 0.5 * static_cast<double>(side - 1);
  auto at = [&](long r, long col) -> double {
    if (r < 0 || r >= side || col < 0 || col >= side) return 0.0;
    return pixels[static_cast<std::size_t>(r * side + col)];
  };

  std::vector<double> out(pixels.size(), 0.0);
  for (long r = 0; r < side; ++r) {
    for (long col = 0; col < side; ++col) {
      // Inverse map: source = R(-angle) * (dest - center) + center, with
      // x = column, y = row (row axis points down).
      const double dx = static_cast<double>(col) - center;
      const double dy = static_cast<double>(r) - center;
      const double sx = c * dx - s * dy + center;
      const double sy = s * dx + c * dy + center;
      const double fx = std::floor(sx);
      const double fy = std::floor(sy);
      const double ax = sx - fx;
      const double ay = sy - fy;
      const long x0 = static_cast<long>(fx);
      const long y0 = static_cast<long>(fy);
      double v = (1.0 - ay) * ((1.0 - ax) * at(y0, x0));
      if (ax != 0.0) v += (1.0 - ay) * (ax * at(y0, x0 + 1));
      if (ay != 0.0) {
        v += ay * ((1.0 - ax) * at(y0 + 1, x0));
        if (ax != 0.0) v += ay * (ax * at(y0 + 1, x0 + 1));
      }
      out[static_cast<std::size_t>(r * side + col)] = v;
    }
  }
  return out;
}

DomainStream rotated_stream(const LabeledSet& base_train, const LabeledSet& base_test, int n_domains,
                            std::uint64_t seed, std::size_t train_per_domain, std::size_t test_per_domain) {
  check_bases(base_train, base_test, n_domains);
  const auto n = static_cast<long>(base_train.input_dim());
  const auto side = static_cast<long>(std::llround(std::sqrt(static_cast<double>(n))));
  if (side * side != n) throw ConfigError("rotated_stream: base images are not square");

  DomainStream stream;
  stream.num_classes = base_train.num_classes;
  stream.input_dim = base_train.input_dim();
  for (int t = 1; t <= n_domains; ++t) {
    Rng rng(substream_seed(seed, "rotated/domain/" + std::to_string(t)));
    const auto [lo, hi] = rotation_range(t);
    std::uniform_real_distribution<double> angle(lo, hi);
    DomainSplit split;
    split.train = pick(base_train, train_per_domain, rng);
    split.test = pick(base_test, test_per_domain, rng);
    for (LabeledSet* s : {&split.train, &split.test}) {
      std::vector<double> img(static_cast<std::size_t>(n));
      for (Index i = 0; i < s->inputs.rows(); ++i) {
        for (long j = 0; j < n; ++j) img[static_cast<std::size_t>(j)] = s->inputs(i, j);
        const auto rotated = rotate_image(img, angle(rng));
        for (long j = 0; j < n; ++j) s->inputs(i, j) = rotated[static_cast<std::size_t>(j)];
      }
      s->domain_id = t;
      s->num_classes = stream.num_classes;
      if (s->inputs.cols() != stream.input_dim) s->inputs.resize(0, stream.input_dim);
    }
    stream.domains.push_back(std::move(split));
  }
  return stream;
}

// ---------------------------------------------------------------- binary I/O

namespace {

constexpr char kStreamMagic[8] = {'U', 'D', 'I', 'L', 'D', 'S', '0', '1'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw FormatError("read_stream: truncated file " + path.string());
  }
  return v;
}

}  // namespace

void write_stream(const DomainStream& s, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_stream: cannot open " + path.string());
  out.write(kStreamMagic, sizeof(kStreamMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.domains.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.num_classes));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.input_dim));
  for (const auto& d : s.domains) {
    for (const LabeledSet* set : {&d.train, &d.test}) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(set->size()));
      put<std::int32_t>(out, set->domain_id);
      out.write(reinterpret_cast<const char*>(set->inputs.data()),
                static_cast<std::streamsize>(set->inputs.size() * sizeof(double)));
      out.write(reinterpret_cast<const char*>(set->labels.data()),
                static_cast<std::streamsize>(set->labels.size() * sizeof(std::int32_t)));
    }
  }
  if (!out) throw std::runtime_error("write_stream: write failed for " + path.string());
}

DomainStream read_stream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_stream: cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kStreamMagic, sizeof(magic)) != 0) {
    throw FormatError("read_stream: bad magic in " + path.string());
  }
  DomainStream s;
  const auto T = get<std::uint32_t>(in, path);
  s.num_classes = static_cast<int>(get<std::uint32_t>(in, path));
  s.input_dim = static_cast<Index>(get<std::uint32_t>(in, path));
  for (std::uint32_t t = 0; t < T; ++t) {
    DomainSplit d;
    for (LabeledSet* set : {&d.train, &d.test}) {
      const auto rows = get<std::uint32_t>(in, path);
      set->domain_id = get<std::int32_t>(in, path);
      set->num_classes = s.num_classes;
      set->inputs.resize(rows, s.input_dim);
      set->labels.resize(rows);
      const auto in_bytes = static_cast<std::streamsize>(set->inputs.size() * sizeof(double));
      const auto lab_bytes = static_cast<std::streamsize>(rows * sizeof(std::int32_t));
      if (!in.read(reinterpret_cast<char*>(set->inputs.data()), in_bytes) ||
          !in.read(reinterpret_cast<char*>(set->labels.data()), lab_bytes)) {
        throw FormatError("read_stream: truncated file " + path.string());
      }
    }
    s.domains.push_back(std::move(d));
  }
  s.validate();
  return s;
}

}  // namespace udil
